import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualdyn.eprbohm import reduce_angle
from dualdyn.errors import (
    DegenerateMeasureError,
    EmptyEnsembleError,
    EvaluationError,
    NegativeDensityError,
    SpaceMismatchError,
    UnsupportedRepresentationError,
)
from dualdyn.statespace import (
    TWO_PI,
    Interval,
    ParticleEnsemble,
    PhysicalVariable,
    StateSpace,
    StatisticalState,
    ValueSet,
    average,
    hausdorff,
    l1_distance,
    range_of,
    sample,
    sgn,
    value_set,
)


def test_sign_convention_at_zero():
    assert sgn(0.0) == 1.0
    np.testing.assert_array_equal(sgn([-2.0, 0.0, 3.0]), [-1.0, 1.0, 1.0])


def test_grid_geometry():
    s = StateSpace.interval(-1.0, 1.0, 4)
    assert s.h == 0.5
    np.testing.assert_allclose(s.centers, [-0.75, -0.25, 0.25, 0.75])
    with pytest.raises(ValueError):
        s.centers[0] = 3.0


@pytest.mark.parametrize("bad", [dict(lower=1.0, upper=0.0, n=8), dict(lower=0.0, upper=1.0, n=1)])
def test_bad_interval(bad):
    with pytest.raises(ValueError):
        StateSpace.interval(**bad)


def test_finite_space_rejects_duplicates_and_grid_queries():
    with pytest.raises(ValueError):
        StateSpace.finite([1, 1])
    s = StateSpace.finite(["a", "b"])
    with pytest.raises(UnsupportedRepresentationError):
        s.h


@given(st.floats(-1e3, 1e3, allow_nan=False))
def test_circle_points_reduce_within_round_off(x):
    circ = StateSpace.circle(64)
    f = PhysicalVariable.from_function(circ, np.cos)
    assert abs(f(x) - f(x + TWO_PI)) <= 1e-12 * max(1.0, abs(x))
    r = circ.reduce(x)
    assert 0.0 <= r < TWO_PI
    assert 0.0 <= reduce_angle(x) < TWO_PI


def test_variable_evaluation_and_arithmetic():
    s = StateSpace.interval(0.0, 1.0, 10)
    f = PhysicalVariable.from_function(s, lambda y: y, name="y")
    g = PhysicalVariable.constant(s, 2.0)
    np.testing.assert_allclose((f * g - g).values(), 2 * s.centers - 2)
    np.testing.assert_allclose((-f).values(), -s.centers)
    np.testing.assert_allclose(f(np.array([0.3])), [0.3])


def test_time_dependent_variable():
    s = StateSpace.interval(0.0, 1.0, 4)
    f = PhysicalVariable.from_function(s, lambda y, t: y * t, time_dependent=True)
    np.testing.assert_allclose(f.values(2.0), 2 * s.centers)


def test_non_finite_values_raise():
    s = StateSpace.interval(-1.0, 1.0, 4)
    f = PhysicalVariable.from_function(s, lambda y: np.where(y > 0, np.inf, y))
    with pytest.raises(EvaluationError):
        f.values()


def test_finite_space_variable_with_tuple_labels():
    s = StateSpace.finite([(1, 1), (1, -1), (-1, 1), (-1, -1)])
    f = PhysicalVariable.from_function(s, lambda st: float(st[0] * st[1]))
    np.testing.assert_array_equal(f.values(), [1, -1, -1, 1])


def test_cross_space_operations_rejected():
    a = PhysicalVariable.constant(StateSpace.interval(0, 1, 4), 1.0)
    b = PhysicalVariable.constant(StateSpace.interval(0, 1, 8), 1.0)
    with pytest.raises(SpaceMismatchError):
        a + b
    with pytest.raises(SpaceMismatchError):
        average(a, StatisticalState.uniform(b.space))


def test_state_validation():
    s = StateSpace.interval(0.0, 1.0, 4)
    with pytest.raises(NegativeDensityError):
        StatisticalState.from_density(s, [1.0, -0.1, 1.0, 1.0])
    with pytest.raises(DegenerateMeasureError):
        StatisticalState.from_density(s, np.zeros(4))
    with pytest.raises(DegenerateMeasureError):
        StatisticalState(s, density=np.full(4, 2.0))
    # tiny negative round-off is clipped away
    p = StatisticalState.from_density(s, [1.0, -1e-12, 1.0, 1.0])
    assert p.density.min() == 0.0
    assert abs(p.mass - 1.0) < 1e-12


def test_empty_ensemble():
    with pytest.raises(EmptyEnsembleError):
        ParticleEnsemble(np.array([]))


def test_gaussian_moments_on_wide_grid():
    s = StateSpace.interval(-8.0, 8.0, 512)
    p = StatisticalState.gaussian(s, 2.0, 0.25)
    # midpoint rule on a smooth, well-resolved density
    assert abs(p.mean() - 2.0) < 1e-10
    assert abs(p.variance() - 0.25) < 1e-3


def test_point_mass_and_weights():
    f = StateSpace.finite(["x", "y", "z"])
    p = StatisticalState.point_mass(f, "y")
    v = PhysicalVariable.from_samples(f, [1.0, 5.0, 9.0])
    assert average(v, p) == 5.0
    g = StateSpace.interval(0.0, 1.0, 8)
    q = StatisticalState.point_mass(g, 0.3)
    assert average(PhysicalVariable.from_function(g, lambda y: y * y), q) == pytest.approx(0.09)


def test_sampling_is_seeded_and_matches_moments():
    s = StateSpace.interval(-8.0, 8.0, 256)
    p = StatisticalState.gaussian(s, 1.0, 0.5)
    e1, e2 = sample(p, 50_000, seed=3), sample(p, 50_000, seed=3)
    np.testing.assert_array_equal(e1.points, e2.points)
    assert abs(e1.mean(lambda y: y) - 1.0) < 4 * math.sqrt(0.5 / 50_000)


def test_ranges_and_hausdorff():
    s = StateSpace.interval(0.0, 1.0, 100)
    f = PhysicalVariable.from_function(s, lambda y: y)
    r = range_of(f)
    assert isinstance(r, Interval)
    assert r.lower == pytest.approx(0.005) and r.upper == pytest.approx(0.995)
    assert hausdorff(Interval(-2.0, 2.0), ValueSet((-1.0, 1.0))) == pytest.approx(1.0)
    assert hausdorff(ValueSet((-1.0, 1.0)), ValueSet((-1.0, 1.0))) == 0.0
    fin = StateSpace.finite([0, 1, 2])
    assert value_set(PhysicalVariable.from_samples(fin, [1.0, -1.0, 1.0])).values == (-1.0, 1.0)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.0, 10.0), min_size=6, max_size=6).filter(lambda v: sum(v) > 1e-3),
       st.lists(st.floats(0.0, 10.0), min_size=6, max_size=6).filter(lambda v: sum(v) > 1e-3))
def test_l1_is_a_bounded_metric(u, v):
    s = StateSpace.interval(0.0, 3.0, 6)
    p, q = StatisticalState.from_density(s, u), StatisticalState.from_density(s, v)
    d = l1_distance(p, q)
    assert 0.0 <= d <= 2.0 + 1e-12
    assert d == pytest.approx(l1_distance(q, p))
    assert l1_distance(p, p) == 0.0
