import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perpetual_put.errors import DomainError, ModelInvalidError
from perpetual_put.numerics import DEFAULT_TOL
from perpetual_put.volatility import (
    MODELS,
    RAPM,
    AmsterLinear,
    BaksteinHowison,
    Constant,
    Frey,
    ModifiedFrey,
    PowerLaw,
    beta,
    beta_upper_bound,
    degenerate_constant,
    ensure_admissible,
    forward,
    forward_derivative,
    model_from_config,
    sigma_squared,
    validate,
)

VARIANTS = [
    Constant(0.3),
    Frey(0.3, 0.1),
    ModifiedFrey(0.3, 2.0, 10),
    RAPM(0.3, 1.0),
    AmsterLinear(0.3, 0.2, 0.1),
    BaksteinHowison(0.3, 0.05, 0.1, 0.5),
    PowerLaw(0.3, 0.5, 2.0),
]
U_GRID = np.logspace(-6, 3, 50)


def _id(m):
    return m.name


class TestFormulas:
    def test_sigma_squared_examples(self):
        assert sigma_squared(Constant(0.3), 7.0) == pytest.approx(0.09)
        assert sigma_squared(Frey(0.3, 0.1), 0.0) == pytest.approx(0.09)
        assert sigma_squared(RAPM(0.3, 1.0), 8.0) == pytest.approx(0.27)

    def test_forward_examples(self):
        assert forward(Constant(0.3), 2.0) == pytest.approx(0.09)
        assert forward(Frey(0.3, 0.1), 5.0) == pytest.approx(0.9)
        for m in VARIANTS:
            assert forward(m, 0.0) == 0.0

    def test_forward_derivative_examples(self):
        assert forward_derivative(Constant(0.3), 3.3) == pytest.approx(0.045)
        assert forward_derivative(RAPM(0.3, 1.0), 1.0) == pytest.approx(0.105)
        assert forward_derivative(Frey(0.3, 0.1), 0.0) == pytest.approx(0.045)

    def test_frey_domain(self):
        m = Frey(0.3, 0.1)
        assert m.h_max == pytest.approx(10.0)
        with pytest.raises(DomainError):
            sigma_squared(m, 10.0)
        with pytest.raises(DomainError):
            forward(m, -1.0)

    def test_modified_frey_is_square_of_truncated_series(self):
        m = ModifiedFrey(0.3, 0.5, 3)
        H = 1.2
        z = 0.5 * H
        assert sigma_squared(m, H) == pytest.approx(0.09 * (1 + z + z**2 + z**3) ** 2, rel=1e-14)

    def test_amster_sigma0(self):
        m = AmsterLinear(0.3, 0.2, 0.1)
        assert m.variance_at_zero == pytest.approx(0.072)

    def test_bakstein_howison_leland(self):
        m = BaksteinHowison(0.3, 0.05, 0.0, 0.0)
        assert m.leland_number == pytest.approx(2 * 0.05 * math.sqrt(2 / math.pi))

    def test_power_law_one_third_is_rapm(self):
        H = np.linspace(0.0, 5.0, 11)
        np.testing.assert_allclose(
            forward(PowerLaw(0.3, 1.0, 1 / 3), H), forward(RAPM(0.3, 1.0), H), rtol=1e-14
        )

    def test_array_shapes(self):
        H = np.array([0.0, 1.0, 2.0])
        assert forward(Frey(0.3, 0.1), H).shape == (3,)
        assert isinstance(forward(Frey(0.3, 0.1), 1.0), float)


class TestConstruction:
    @pytest.mark.parametrize("bad", [0.0, -0.3, math.nan])
    def test_sigma0(self, bad):
        with pytest.raises(ModelInvalidError):
            Constant(bad)

    def test_negative_mu(self):
        with pytest.raises(ModelInvalidError):
            Frey(0.3, -0.1)

    def test_modified_frey_N(self):
        with pytest.raises(ModelInvalidError):
            ModifiedFrey(0.3, 1.0, 0)

    def test_bakstein_alpha(self):
        with pytest.raises(ModelInvalidError):
            BaksteinHowison(0.3, 0.1, 0.1, 1.5)

    def test_from_config(self):
        m = model_from_config({"model": "bakstein-howison", "sigma0": "0.3", "gamma": "0.05", "lambda": 0.1, "alpha": 0.5})
        assert m == BaksteinHowison(0.3, 0.05, 0.1, 0.5)
        assert model_from_config(m.to_config()) == m
        assert model_from_config({"model": "frey", "mu": 0.1}) == Frey(0.3, 0.1)

    def test_from_config_unknown(self):
        with pytest.raises(ModelInvalidError):
            model_from_config({"model": "heston"})

    def test_registry(self):
        assert set(MODELS) == {"constant", "frey", "modified-frey", "rapm", "power-law", "amster", "bakstein-howison"}


class TestValidate:
    def test_constant(self):
        assert validate(Constant(0.3)) == []

    def test_amster_admissible(self):
        assert validate(AmsterLinear(0.3, 0.2, 0.1)) == []

    def test_amster_zero_variance(self):
        problems = validate(AmsterLinear(0.3, 1.0, 0.1))
        assert len(problems) == 1 and "sigma(0)^2 = 0" in problems[0]
        with pytest.raises(ModelInvalidError):
            ensure_admissible(AmsterLinear(0.3, 1.0, 0.1))

    @pytest.mark.parametrize("m", VARIANTS, ids=_id)
    def test_all_variants_admissible(self, m):
        assert validate(m) == []


@pytest.mark.parametrize("m", VARIANTS, ids=_id)
class TestBeta:
    def test_round_trip(self, m):
        H = beta(m, U_GRID)
        err = np.abs(forward(m, H) - U_GRID)
        assert np.all(err <= 10 * DEFAULT_TOL.abs_tol * np.maximum(1.0, U_GRID))

    def test_monotone(self, m):
        assert np.all(np.diff(beta(m, U_GRID)) > 0)

    def test_upper_bound(self, m):
        H = beta(m, U_GRID)
        assert np.all(H >= 0)
        assert np.all(H <= beta_upper_bound(m, U_GRID) * (1 + 1e-12))

    def test_zero(self, m):
        assert beta(m, 0.0) == 0.0

    def test_scalar_matches_array(self, m):
        for u in (1e-4, 0.145, 3.0):
            assert beta(m, u) == pytest.approx(float(beta(m, np.array([u]))[0]), rel=1e-13)

    def test_derivative_consistency(self, m):
        for H in np.linspace(0.1, 5.0, 9):
            if H >= 0.99 * m.h_max:
                continue
            h = 1e-5 * max(1.0, H)
            fd = (forward(m, H + h) - forward(m, H - h)) / (2 * h)
            assert abs(forward_derivative(m, H) - fd) <= 1e-6 * forward_derivative(m, H)


class TestBetaExamples:
    def test_constant_closed_form(self):
        assert beta(Constant(0.3), 0.145) == pytest.approx(2 * 0.145 / 0.09, rel=1e-15)
        assert round(beta(Constant(0.3), 0.145), 4) == 3.2222

    def test_frey_inverse(self):
        assert beta(Frey(0.3, 0.1), 0.9) == pytest.approx(5.0, rel=1e-12)

    def test_frey_large_u_stays_below_pole(self):
        m = Frey(0.3, 0.1)
        H = beta(m, 1e8)
        assert H < m.h_max
        assert forward(m, H) == pytest.approx(1e8, rel=1e-9)

    def test_negative_u(self):
        with pytest.raises(DomainError):
            beta(Frey(0.3, 0.1), -1.0)


DEGENERATE = [Frey(0.3, 0.0), ModifiedFrey(0.3, 0.0, 10), RAPM(0.3, 0.0), AmsterLinear(0.3, 0.0, 0.0),
              BaksteinHowison(0.3, 0.0, 0.0, 0.4), PowerLaw(0.3, 0.0, 2.0)]


@pytest.mark.parametrize("m", DEGENERATE, ids=_id)
def test_degenerate_equals_constant(m):
    c = degenerate_constant(m)
    H = np.concatenate([[0.0], np.logspace(-6, 3, 50)])
    np.testing.assert_allclose(sigma_squared(m, H), sigma_squared(c, H), rtol=1e-12, atol=0)
    np.testing.assert_allclose(forward(m, H), forward(c, H), rtol=1e-12, atol=0)
    np.testing.assert_allclose(beta(m, U_GRID), beta(c, U_GRID), rtol=1e-12, atol=0)


models = st.one_of(
    st.builds(Frey, st.floats(0.05, 1.0), st.floats(0.0, 2.0)),
    st.builds(ModifiedFrey, st.floats(0.05, 1.0), st.floats(0.0, 8.0), st.integers(1, 12)),
    st.builds(RAPM, st.floats(0.05, 1.0), st.floats(0.0, 10.0)),
    st.builds(AmsterLinear, st.floats(0.05, 1.0), st.floats(0.0, 0.9), st.floats(0.0, 5.0)),
    st.builds(BaksteinHowison, st.floats(0.05, 1.0), st.floats(0.0, 0.5), st.floats(0.0, 1.0), st.floats(0.0, 1.0)),
    st.builds(PowerLaw, st.floats(0.05, 1.0), st.floats(0.0, 5.0), st.floats(0.0, 3.0)),
)


@settings(max_examples=60, deadline=None)
@given(m=models, u=st.floats(1e-8, 1e4))
def test_property_round_trip_and_bound(m, u):
    H = beta(m, u)
    assert 0.0 <= H <= beta_upper_bound(m, u) * (1 + 1e-12)
    assert abs(forward(m, H) - u) <= 10 * DEFAULT_TOL.abs_tol * max(1.0, u)


@settings(max_examples=60, deadline=None)
@given(m=models, u=st.floats(1e-6, 1e3), factor=st.floats(1.001, 10.0))
def test_property_monotone(m, u, factor):
    assert beta(m, u) < beta(m, u * factor)
