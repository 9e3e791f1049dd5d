import math

import numpy as np
import pytest

from dualdyn.errors import CoefficientError, ConfigError, NegativeDensityError, StabilityError
from dualdyn.kolmogorov import (
    DiffusionSpec,
    SolverConfig,
    TimeWindow,
    adjoint_apply,
    backward_evolve,
    conjugation_defect,
    evolve_density,
    forward_adjoint_evolve,
    forward_evolve,
    generator_apply,
    generator_matrix,
    kde_density,
    simulate_paths,
)
from dualdyn.statespace import PhysicalVariable, StateSpace, StatisticalState, average, l1_distance


def ou_exact(t, m0=2.0, v0=0.25):
    return m0 * math.exp(-t), 1.0 + (v0 - 1.0) * math.exp(-2 * t)


def test_ou_forward_moments(ou_spec, ou_p0, unit_window, cn_cfg):
    p = forward_evolve(ou_spec, ou_p0, unit_window, cn_cfg)
    m, v = ou_exact(1.0)
    assert abs(p.mean() - m) <= 1e-3
    assert abs(p.variance() - v) <= 1e-3


def test_ou_backward_linear_observable(ou_space, ou_spec, unit_window, cn_cfg):
    g = PhysicalVariable.from_function(ou_space, lambda y: y)
    f = backward_evolve(ou_spec, g, unit_window, cn_cfg).values()
    assert np.max(np.abs(f - ou_space.centers * math.exp(-1.0))) <= 1e-3


def test_ou_backward_quadratic_observable(ou_space, ou_spec, unit_window, cn_cfg):
    # E[Y_1^2 | Y_0 = y] = y^2 e^{-2} + (1 - e^{-2}); compare away from the walls
    g = PhysicalVariable.from_function(ou_space, lambda y: y**2)
    f = backward_evolve(ou_spec, g, unit_window, cn_cfg).values()
    y = ou_space.centers
    inner = np.abs(y) < 5
    exact = y**2 * math.exp(-2) + 1 - math.exp(-2)
    assert np.max(np.abs(f - exact)[inner]) < 5e-3


def test_mass_conserved_over_1000_steps(ou_spec, ou_p0, unit_window, cn_cfg):
    raw = evolve_density(ou_spec, ou_p0.space, ou_p0.density, unit_window, cn_cfg)
    assert unit_window.steps(cn_cfg.dt)[0] == 1000
    assert abs(raw.sum() * ou_p0.space.h - 1.0) <= 1e-6


def test_generator_columns_sum_to_zero(ou_space, ou_spec):
    L = generator_matrix(ou_spec, ou_space, 0.0, SolverConfig())
    assert np.max(np.abs(np.asarray(L.sum(axis=0)))) < 1e-9


def _circle_problem(n):
    space = StateSpace.circle(n)
    spec = DiffusionSpec(lambda t, y: np.sin(y), lambda t, y: 1.0 + 0.3 * np.cos(y))
    f = PhysicalVariable.from_function(space, lambda x: np.cos(x) + 0.5 * np.sin(2 * x))
    p = StatisticalState.from_density(space, np.exp(np.cos(space.centers)))
    return space, spec, f, p


def _adjointness_gap(n):
    space, spec, f, p = _circle_problem(n)
    h = space.h
    lhs = h * np.dot(f.values(), generator_apply(spec, p, 0.0))
    rhs = h * np.dot(p.density, adjoint_apply(spec, f, 0.0))
    return abs(lhs + rhs)


def test_discrete_adjointness_on_circle():
    assert _adjointness_gap(512) <= 1e-4


def test_discrete_adjointness_converges_at_second_order():
    gaps = [_adjointness_gap(n) for n in (128, 256, 512)]
    for coarse, fine in zip(gaps, gaps[1:]):
        assert 3.0 <= coarse / fine <= 5.0


def test_uniform_is_stationary_for_constant_coefficients_on_circle():
    space = StateSpace.circle(64)
    spec = DiffusionSpec.constant(drift=0.7, sigma=0.5)
    p = forward_evolve(spec, StatisticalState.uniform(space), TimeWindow(0.0, 0.5), SolverConfig(dt=1e-2))
    np.testing.assert_allclose(p.density, 1 / (2 * math.pi), atol=1e-12)


def test_semigroup_property(ou_spec, ou_p0, cn_cfg):
    whole = forward_evolve(ou_spec, ou_p0, TimeWindow(0.0, 1.0), cn_cfg)
    half = forward_evolve(ou_spec, ou_p0, TimeWindow(0.0, 0.5), cn_cfg)
    both = forward_evolve(ou_spec, half, TimeWindow(0.5, 1.0), cn_cfg)
    assert np.max(np.abs(whole.density - both.density)) < 1e-12


def test_exact_adjoint_pairs_to_round_off(ou_space, ou_spec, ou_p0, unit_window):
    cfg = SolverConfig(dt=1e-2)
    g = PhysicalVariable.from_function(ou_space, lambda y: y**2)
    vg = forward_adjoint_evolve(ou_spec, g, unit_window, cfg)
    raw = evolve_density(ou_spec, ou_space, ou_p0.density, unit_window, cfg)
    h = ou_space.h
    assert abs(h * np.dot(g.values(), raw) - average(vg, ou_p0)) < 1e-12


@pytest.mark.parametrize("name, fn", [("y", lambda y: y), ("y2", lambda y: y**2), ("cos", np.cos)])
def test_conjugation_defect_small(name, fn, ou_space, ou_spec, ou_p0, unit_window, cn_cfg):
    g = PhysicalVariable.from_function(ou_space, fn)
    assert conjugation_defect(ou_spec, ou_p0, g, unit_window, cn_cfg) <= 1e-3


def test_explicit_and_crank_nicolson_agree():
    space = StateSpace.interval(-6.0, 6.0, 96)
    spec = DiffusionSpec.ornstein_uhlenbeck(1.0, 0.0, math.sqrt(2.0))
    p0 = StatisticalState.gaussian(space, 1.0, 0.5)
    w = TimeWindow(0.0, 0.5)
    dt = 0.25 * space.h**2 / 2.0
    a = forward_evolve(spec, p0, w, SolverConfig(dt=dt, scheme="explicit-euler"))
    b = forward_evolve(spec, p0, w, SolverConfig(dt=1e-3))
    assert l1_distance(a, b) < 1e-3


def test_cfl_guard():
    space = StateSpace.interval(-1.0, 1.0, 40)
    spec = DiffusionSpec.constant(sigma=1.0)
    p0 = StatisticalState.uniform(space)
    with pytest.raises(StabilityError):
        forward_evolve(spec, p0, TimeWindow(0.0, 1.0), SolverConfig(dt=0.1, scheme="explicit-euler"))


def test_time_dependent_drift_moves_mean():
    space = StateSpace.interval(-6.0, 6.0, 400)
    spec = DiffusionSpec(lambda t, y: np.full_like(y, math.cos(t)), lambda t, y: np.full_like(y, 0.3))
    p0 = StatisticalState.gaussian(space, 0.0, 0.2)
    p = forward_evolve(spec, p0, TimeWindow(0.0, 1.0), SolverConfig(dt=1e-3))
    assert abs(p.mean() - math.sin(1.0)) < 1e-3


def test_frozen_dynamics_is_identity(ou_space, ou_p0):
    p = forward_evolve(DiffusionSpec.frozen(), ou_p0, TimeWindow(0.0, 1.0), SolverConfig(dt=0.1))
    assert np.max(np.abs(p.density - ou_p0.density)) < 1e-9


def test_bad_coefficients_and_config():
    space = StateSpace.interval(0.0, 1.0, 10)
    spec = DiffusionSpec(lambda t, y: 0 * y, lambda t, y: -1 + 0 * y)
    with pytest.raises(CoefficientError):
        spec.coefficients(0.0, space.centers)
    with pytest.raises(ConfigError):
        SolverConfig(dt=0.0)
    with pytest.raises(ConfigError):
        TimeWindow(1.0, 1.0)
    with pytest.raises(ConfigError):
        forward_evolve(DiffusionSpec.constant(sigma=1.0), StatisticalState.uniform(space),
                       TimeWindow(0, 1), SolverConfig(boundary="periodic"))


def test_unresolved_drift_reports_negative_density():
    # cell Peclet number far above 2: central fluxes oscillate, and the
    # solver refuses to clip that away silently
    space = StateSpace.interval(0.0, 1.0, 50)
    spec = DiffusionSpec.constant(drift=-50.0, sigma=0.05)
    p0 = StatisticalState.gaussian(space, 0.5, 0.01)
    with pytest.raises(NegativeDensityError):
        forward_evolve(spec, p0, TimeWindow(0.0, 0.1), SolverConfig(dt=1e-3))


def test_paths_independent_of_thread_count(ou_spec, ou_p0):
    w = TimeWindow(0.0, 0.2)
    a = simulate_paths(ou_spec, ou_p0, w, 70_000, 0.01, seed=5, threads=1)
    b = simulate_paths(ou_spec, ou_p0, w, 70_000, 0.01, seed=5, threads=3)
    np.testing.assert_array_equal(a.points, b.points)


def test_monte_carlo_agrees_with_pde(ou_spec, ou_p0, unit_window):
    paths = simulate_paths(ou_spec, ou_p0, unit_window, 20_000, 1e-2, seed=2024)
    m, v = ou_exact(1.0)
    assert abs(paths.mean(lambda y: y) - m) < 4 * math.sqrt(v / 20_000)
    pde = forward_evolve(ou_spec, ou_p0, unit_window, SolverConfig(dt=1e-3))
    kde = kde_density(paths, ou_p0.space)
    assert l1_distance(kde, pde) < 0.05


def test_circle_paths_wrap():
    space = StateSpace.circle(128)
    spec = DiffusionSpec.constant(drift=3.0, sigma=1.0)
    ens = simulate_paths(spec, StatisticalState.uniform(space), TimeWindow(0.0, 1.0), 5000, 0.01, seed=1)
    assert np.all((ens.points >= 0) & (ens.points < 2 * math.pi))
