import numpy as np
import pytest

from perpetual_put.boundary import MarketParams
from perpetual_put.errors import DomainError, NoBracketError
from perpetual_put.merton import MertonSolution, check_bounds, envelopes, gamma_minus, gamma_plus, merton_value
from perpetual_put.pricer import PriceCurve, price_curve
from perpetual_put.volatility import RAPM, AmsterLinear, Constant, Frey

MARKET = MarketParams()
SOL = MertonSolution.from_volatility(0.3, 100.0, 0.1)


class TestMertonValue:
    def test_at_strike(self):
        assert round(merton_value(SOL, 100.0), 4) == 13.5909

    def test_at_boundary(self):
        assert merton_value(SOL, SOL.rho_gamma) == pytest.approx(100 - SOL.rho_gamma, rel=1e-15)

    def test_decay(self):
        assert merton_value(SOL, 1e9) < 1e-13
        assert merton_value(SOL, 1e10) < merton_value(SOL, 1e9)

    def test_intrinsic_below(self):
        assert merton_value(SOL, 10.0) == 90.0

    def test_smooth_pasting_and_convexity(self):
        h = 1e-6
        right = (merton_value(SOL, SOL.rho_gamma + h) - merton_value(SOL, SOL.rho_gamma)) / h
        assert right == pytest.approx(-1.0, abs=1e-5)
        S = np.linspace(SOL.rho_gamma, 400, 200)
        V = merton_value(SOL, S)
        assert np.all(np.diff(V) < 0)
        assert np.all(np.diff(V, 2) > -1e-12)

    def test_sigma0_round_trip(self):
        assert SOL.sigma0(0.1) == pytest.approx(0.3)

    def test_invalid(self):
        with pytest.raises(DomainError):
            MertonSolution(-1.0, 100.0)
        with pytest.raises(DomainError):
            merton_value(SOL, 0.0)


class TestGamma:
    def test_gamma_minus(self):
        assert gamma_minus(Frey(0.3, 0.15), 0.1) == pytest.approx(2.2222, abs=1e-4)
        assert gamma_minus(Constant(0.3), 0.1) == pytest.approx(0.2 / 0.09)
        assert gamma_minus(AmsterLinear(0.3, 0.19, 0.1), 0.1) == pytest.approx(0.2 / (0.09 * 0.81))
        assert round(gamma_minus(AmsterLinear(0.3, 0.19, 0.1), 0.1), 4) == 2.7435

    def test_gamma_plus_constant(self):
        assert gamma_plus(Constant(0.3), 0.1) == pytest.approx(0.2 / 0.09)

    def test_gamma_plus_residual(self):
        m = Frey(0.3, 0.05)
        g = gamma_plus(m, 0.1)
        assert abs(g * float(m.sigma_squared(1 + g)) - 0.2) <= 1e-10

    def test_gamma_plus_sigma_06(self):
        # with sigma(1 + gamma) = 0.6 the root is 2r / 0.36
        g = gamma_plus(Constant(0.6), 0.1)
        assert g == pytest.approx(0.2 / 0.36)
        assert round(g, 3) == 0.556

    def test_ordering(self):
        for m in (Frey(0.3, 0.1), RAPM(0.3, 1.0), AmsterLinear(0.3, 0.2, 0.1)):
            assert gamma_plus(m, 0.1) <= gamma_minus(m, 0.1)

    def test_frey_no_room(self):
        with pytest.raises(NoBracketError):
            gamma_plus(Frey(0.3, 1.5), 0.1)
        lower, upper = envelopes(Frey(0.3, 1.5), 100.0, 0.1)
        assert upper is None and lower.gamma == pytest.approx(0.2 / 0.09)


class TestCheckBounds:
    def test_constant_coincide(self):
        curve = price_curve(Constant(0.3), MARKET, np.linspace(SOL.rho_gamma, 300, 50))
        rep = check_bounds(Constant(0.3), MARKET, curve)
        assert rep.passed
        assert rep.rho_lower == pytest.approx(rep.rho_upper) == pytest.approx(curve.rho, rel=1e-9)

    @pytest.mark.parametrize("m,rho", [(Frey(0.3, 0.1), 62.8036), (RAPM(0.3, 1.0), 53.3234)])
    def test_nonlinear(self, m, rho):
        curve = price_curve(m, MARKET, np.linspace(40, 300, 100))
        rep = check_bounds(m, MARKET, curve, tol=1e-6 * 100)
        assert rep.passed, rep.messages
        assert curve.rho == pytest.approx(rho, abs=1e-4)
        assert rep.rho_lower <= curve.rho <= rep.rho_upper == pytest.approx(68.9655, abs=1e-4)
        assert rep.worst_lower_margin >= 0 and rep.worst_upper_margin >= 0

    def test_detects_violation(self):
        m = Frey(0.3, 0.1)
        good = price_curve(m, MARKET, np.linspace(70, 300, 20))
        bad = PriceCurve(good.S, good.V * 1.5, good.U, good.H, good.rho, m, MARKET)
        rep = check_bounds(m, MARKET, bad)
        assert not rep.passed and rep.messages
        assert "passed" in rep.as_dict()
