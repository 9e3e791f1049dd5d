import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from dualdyn.chameleon import MeasurementSetting, evolved_state
from dualdyn.eprbohm import (
    MONTE_CARLO,
    SingletFunctionalModel,
    SingletOutcomeModel,
    as_chameleon,
    chsh,
    correlation,
    marginals,
    no_signaling_defect,
    quantum_reference,
    singlet_pmf,
)
from dualdyn.errors import ConfigError, UnsupportedModelError

TSIRELSON = 2 * math.sqrt(2.0)
STD = (0.0, math.pi / 2, math.pi / 4, 3 * math.pi / 4)
MODELS = [SingletFunctionalModel(), SingletOutcomeModel()]
angle = st.floats(-20.0, 20.0, allow_nan=False)


def r1_by_scipy(a, b):
    val, _ = integrate.quad(lambda x: -2 * math.cos(x - a) * math.cos(x - b), 0, 2 * math.pi, epsabs=1e-13)
    return val / (2 * math.pi)


@pytest.mark.parametrize("a, b", [(0.0, math.pi / 4), (1.0, -2.0), (3.0, 3.0), (0.2, 5.9)])
def test_r1_quadrature_matches_independent_integral(a, b):
    got = correlation(SingletFunctionalModel(), a, b).value
    assert got == pytest.approx(r1_by_scipy(a, b), abs=1e-10)
    assert got == pytest.approx(quantum_reference(a, b), abs=1e-9)


def test_reference_value_at_quarter_turn():
    for m in MODELS:
        assert correlation(m, 0.0, math.pi / 4).value == pytest.approx(-math.sqrt(2) / 2, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(angle, angle)
def test_quadrature_equals_singlet_correlation(a, b):
    for m in MODELS:
        assert abs(correlation(m, a, b).value + math.cos(a - b)) <= 1e-9


@pytest.mark.parametrize("model", MODELS, ids=["r1", "r2"])
def test_monte_carlo_within_three_sigma(model):
    r = correlation(model, 0.3, 1.4, MONTE_CARLO, mc_count=200_000, seed=99)
    assert abs(r.value - quantum_reference(0.3, 1.4)) <= 3 * r.mc_std_error
    assert isinstance(r.value, float) and r.seed == 99 and r.count == 200_000


def test_monte_carlo_reproducible_and_thread_independent():
    m = SingletOutcomeModel()
    a = correlation(m, 0.1, 0.9, MONTE_CARLO, mc_count=150_000, seed=7, threads=1)
    b = correlation(m, 0.1, 0.9, MONTE_CARLO, mc_count=150_000, seed=7, threads=4)
    assert a.value == b.value and a.mc_std_error == b.mc_std_error
    c = correlation(m, 0.1, 0.9, MONTE_CARLO, mc_count=150_000, seed=8)
    assert c.value != a.value


def test_monte_carlo_needs_seed_and_count():
    with pytest.raises(ConfigError):
        correlation(SingletOutcomeModel(), 0, 1, MONTE_CARLO, mc_count=10)
    with pytest.raises(ConfigError):
        correlation(SingletOutcomeModel(), 0, 1, MONTE_CARLO, mc_count=1, seed=1)
    with pytest.raises(ConfigError):
        correlation(SingletOutcomeModel(), 0, 1, "simpson")


@pytest.mark.parametrize("model", MODELS, ids=["r1", "r2"])
def test_chsh_at_standard_angles(model):
    r = chsh(model, *STD)
    assert r.abs_S == pytest.approx(TSIRELSON, abs=1e-6)
    assert r.S < 0


@settings(max_examples=50, deadline=None)
@given(angle, angle, angle, angle)
def test_tsirelson_bound_holds(a, ap, b, bp):
    for m in MODELS:
        assert chsh(m, a, ap, b, bp).abs_S <= TSIRELSON + 1e-9


def test_chsh_monte_carlo():
    r = chsh(SingletOutcomeModel(), *STD, method=MONTE_CARLO, mc_count=200_000, seed=1)
    assert abs(r.abs_S - TSIRELSON) <= 3 * r.std_error


def test_singlet_marginals_and_no_signaling():
    m = SingletOutcomeModel()
    pa, pb = marginals(m, 0.4, 2.0)
    np.testing.assert_allclose(pa, [0.5, 0.5])
    np.testing.assert_allclose(pb, [0.5, 0.5])
    assert no_signaling_defect(m, 0.4, 2.0, 0.7, a_alt=1.1) == 0.0


def signaling_pmf(eps):
    # shifts Alice's marginal with Bob's setting while keeping a valid pmf
    def pmf(a, b):
        P = singlet_pmf(a, b)
        d = eps * math.cos(b)
        return P + np.array([[d, 0.0], [-d, 0.0]])

    return pmf


def test_no_signaling_detects_perturbation():
    m = SingletOutcomeModel(signaling_pmf(0.05), name="leaky")
    assert no_signaling_defect(m, 0.0, 0.0, math.pi / 2) == pytest.approx(0.05, abs=1e-12)


def test_invalid_pmf_rejected():
    m = SingletOutcomeModel(lambda a, b: np.full((2, 2), 0.3))
    with pytest.raises(ValueError):
        m.pmf(0.0, 0.0)
    with pytest.raises(UnsupportedModelError):
        no_signaling_defect(SingletFunctionalModel(), 0, 0, 1)


def test_functional_model_needs_fine_grid():
    with pytest.raises(ConfigError):
        SingletFunctionalModel(cells=100)


def test_r1_chameleon_forward_keeps_uniform_state():
    model = SingletFunctionalModel()
    alice, _ = as_chameleon(model, 1.0)
    p = evolved_state(alice, MeasurementSetting.angle("a", 0.5), model.initial_state())
    np.testing.assert_allclose(p.density, 1 / (2 * math.pi), atol=1e-12)
