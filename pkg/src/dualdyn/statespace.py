"""State spaces, statistical states, physical variables and averaging.

Three kinds of state space are supported: a bounded interval and the circle
``[0, 2*pi)``, both cut into ``n`` equal cells and represented by the cell
centres, and finite spaces given by an ordered list of labels. Statistical
states carry one of three representations (grid density, point weights,
particle ensemble); physical variables are either analytic rules or per-point
samples.

All objects are immutable; arrays are stored read-only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Optional, Sequence, Tuple, Union

import numpy as np

from . import rng as _rng
from .errors import (
    DegenerateMeasureError,
    EmptyEnsembleError,
    EvaluationError,
    NegativeDensityError,
    SpaceMismatchError,
    UnsupportedRepresentationError,
)

TWO_PI = 2.0 * math.pi
MASS_TOL = 1e-9
# Solver round-off below zero that is silently clipped.
CLIP_TOL = 1e-12

INTERVAL = "interval"
CIRCLE = "circle"
FINITE = "finite"


def sgn(x):
    """Sign with the convention ``sgn(0) = +1``."""
    return np.where(np.asarray(x) >= 0, 1.0, -1.0)


def reduce_angle(theta: float) -> float:
    """Angle in ``[0, 2*pi)``."""
    r = math.fmod(float(theta), TWO_PI) % TWO_PI
    return 0.0 if r >= TWO_PI else r


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class StateSpace:
    kind: str
    lower: float = 0.0
    upper: float = 0.0
    n: int = 0
    labels: Tuple[Any, ...] = ()

    def __post_init__(self):
        if self.kind in (INTERVAL, CIRCLE):
            if self.n < 2:
                raise ValueError(f"gridded state space needs n >= 2, got {self.n}")
            if not (math.isfinite(self.lower) and math.isfinite(self.upper)) or self.lower >= self.upper:
                raise ValueError(f"invalid bounds [{self.lower}, {self.upper}]")
        elif self.kind == FINITE:
            if len(self.labels) == 0:
                raise ValueError("finite state space needs at least one point")
            if len(set(self.labels)) != len(self.labels):
                raise ValueError("finite state space labels must be distinct")
        else:
            raise ValueError(f"unknown state space kind {self.kind!r}")

    @classmethod
    def interval(cls, lower: float, upper: float, n: int) -> "StateSpace":
        return cls(INTERVAL, float(lower), float(upper), int(n))

    @classmethod
    def circle(cls, n: int) -> "StateSpace":
        return cls(CIRCLE, 0.0, TWO_PI, int(n))

    @classmethod
    def finite(cls, labels: Sequence[Any]) -> "StateSpace":
        return cls(FINITE, labels=tuple(labels))

    @property
    def gridded(self) -> bool:
        return self.kind != FINITE

    @property
    def size(self) -> int:
        return self.n if self.gridded else len(self.labels)

    @property
    def h(self) -> float:
        if not self.gridded:
            raise UnsupportedRepresentationError("finite spaces have no cell width")
        return (self.upper - self.lower) / self.n

    @cached_property
    def centers(self) -> np.ndarray:
        if not self.gridded:
            raise UnsupportedRepresentationError("finite spaces have no cell centres")
        return _frozen(self.lower + (np.arange(self.n) + 0.5) * self.h)

    def reduce(self, x):
        """Map points into the space; circle points are taken mod 2*pi."""
        if self.kind == CIRCLE:
            r = np.mod(x, TWO_PI)
            # tiny negatives round up to exactly 2*pi
            return np.where(r >= TWO_PI, 0.0, r) if np.ndim(r) else (0.0 if r >= TWO_PI else r)
        return x

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x)
        if self.kind == FINITE:
            return np.array([v in self.labels for v in x.ravel()]).reshape(x.shape)
        if self.kind == CIRCLE:
            return (x >= 0.0) & (x < TWO_PI)
        return (x >= self.lower) & (x <= self.upper)


def _check_same(a: StateSpace, b: StateSpace) -> None:
    if a != b:
        raise SpaceMismatchError(f"state spaces differ: {a} vs {b}")


# --------------------------------------------------------------------------
# physical variables


@dataclass(frozen=True, eq=False)
class PhysicalVariable:
    """A real function on a state space.

    ``rule`` is vectorised over points; when ``time_dependent`` is set it is
    called as ``rule(x, t)``. Alternatively ``samples`` gives one value per
    grid cell or finite point.
    """

    space: StateSpace
    rule: Optional[Callable] = None
    samples: Optional[np.ndarray] = None
    name: str = ""
    time_dependent: bool = False

    def __post_init__(self):
        if (self.rule is None) == (self.samples is None):
            raise ValueError("give exactly one of rule or samples")
        if self.samples is not None:
            s = _frozen(self.samples)
            if s.shape != (self.space.size,):
                raise ValueError(f"expected {self.space.size} samples, got shape {s.shape}")
            object.__setattr__(self, "samples", s)

    @classmethod
    def from_function(cls, space, fn, name="", time_dependent=False) -> "PhysicalVariable":
        return cls(space, rule=fn, name=name, time_dependent=time_dependent)

    @classmethod
    def from_samples(cls, space, values, name="") -> "PhysicalVariable":
        return cls(space, samples=np.asarray(values, dtype=float), name=name)

    @classmethod
    def constant(cls, space, c: float) -> "PhysicalVariable":
        return cls.from_samples(space, np.full(space.size, float(c)), name=f"const({c})")

    def _apply_rule(self, x, t):
        if self.space.kind == FINITE and not _numeric(x):
            out = np.array([self._call_rule(v, t) for v in x], dtype=float)
        else:
            out = np.asarray(self._call_rule(x, t), dtype=float)
            out = np.broadcast_to(out, np.shape(x)).astype(float)
        return out

    def _call_rule(self, x, t):
        if self.time_dependent:
            return self.rule(x, 0.0 if t is None else t)
        return self.rule(x)

    def values(self, t: Optional[float] = None) -> np.ndarray:
        """Values at the cell centres (gridded) or at the labels (finite)."""
        if self.samples is not None:
            out = self.samples
        elif self.space.gridded:
            out = self._apply_rule(self.space.centers, t)
        else:
            out = self._apply_rule(_label_array(self.space.labels), t)
        if not np.all(np.isfinite(out)):
            raise EvaluationError(f"variable {self.name or '<anonymous>'} has non-finite values")
        return out

    def __call__(self, x, t: Optional[float] = None) -> np.ndarray:
        x = self.space.reduce(np.asarray(x) if self.space.gridded else x)
        if self.rule is not None:
            if self.space.kind == FINITE and not _numeric(x):
                x = _label_array(list(x) if isinstance(x, (list, tuple)) else [x])
            out = self._apply_rule(x, t)
        elif self.space.gridded:
            out = self._interp(np.asarray(x, dtype=float))
        else:
            index = {lab: i for i, lab in enumerate(self.space.labels)}
            seq = list(x) if isinstance(x, (list, tuple, np.ndarray)) else [x]
            out = np.array([self.samples[index[v]] for v in seq])
        if not np.all(np.isfinite(out)):
            raise EvaluationError(f"variable {self.name or '<anonymous>'} has non-finite values")
        return out

    def _interp(self, x):
        c, v = self.space.centers, self.samples
        if self.space.kind == CIRCLE:
            cc = np.concatenate(([c[-1] - TWO_PI], c, [c[0] + TWO_PI]))
            vv = np.concatenate(([v[-1]], v, [v[0]]))
            return np.interp(x, cc, vv)
        return np.interp(x, c, v)

    def on_grid(self, t: Optional[float] = None) -> "PhysicalVariable":
        """Sample-backed copy of this variable."""
        return PhysicalVariable.from_samples(self.space, self.values(t), name=self.name)

    # pointwise algebra; results are sample-backed
    def _binary(self, other, op, sym):
        if isinstance(other, PhysicalVariable):
            _check_same(self.space, other.space)
            vals = op(self.values(), other.values())
            name = f"({self.name}{sym}{other.name})"
        else:
            vals = op(self.values(), float(other))
            name = f"({self.name}{sym}{other})"
        return PhysicalVariable.from_samples(self.space, vals, name=name)

    def __add__(self, other):
        return self._binary(other, np.add, "+")

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract, "-")

    def __mul__(self, other):
        return self._binary(other, np.multiply, "*")

    __rmul__ = __mul__

    def __neg__(self):
        return PhysicalVariable.from_samples(self.space, -self.values(), name=f"-{self.name}")


def _numeric(x) -> bool:
    try:
        arr = np.asarray(x)
    except Exception:  # ragged label tuples
        return False
    return arr.ndim <= 1 and arr.dtype.kind in "fiub"


def _label_array(labels) -> np.ndarray:
    if _numeric(labels):
        return np.asarray(labels, dtype=float)
    arr = np.empty(len(labels), dtype=object)
    for i, lab in enumerate(labels):
        arr[i] = lab
    return arr


# --------------------------------------------------------------------------
# statistical states


@dataclass(frozen=True, eq=False)
class ParticleEnsemble:
    points: np.ndarray
    weights: Optional[np.ndarray] = None
    seed: Optional[int] = None
    space: Optional[StateSpace] = None

    def __post_init__(self):
        pts = np.asarray(self.points)
        if pts.dtype.kind in "fiu":
            pts = np.array(pts, dtype=float)
            if self.space is not None:
                pts = np.array(self.space.reduce(pts), dtype=float)
        else:
            pts = np.array(pts, dtype=object)
        if pts.size == 0:
            raise EmptyEnsembleError("ensemble has no points")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.weights is not None:
            w = np.array(self.weights, dtype=float)
            if w.shape != pts.shape[:1]:
                raise ValueError("weights must match points")
            if np.any(w < 0):
                raise NegativeDensityError("ensemble weights must be nonnegative")
            total = w.sum()
            if total <= 0:
                raise DegenerateMeasureError("ensemble weights sum to zero")
            w = w / total
            w.setflags(write=False)
            object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.points.shape[0]

    def mean(self, f: Callable) -> float:
        vals = np.asarray(f(self.points), dtype=float)
        if self.weights is None:
            return float(vals.mean())
        return float(np.dot(self.weights, vals))


@dataclass(frozen=True, eq=False)
class StatisticalState:
    """A probability measure on ``space``.

    Exactly one of ``density`` (gridded spaces, per cell), ``weights``
    (finite spaces, per label) or ``ensemble`` is set.
    """

    space: StateSpace
    density: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None
    ensemble: Optional[ParticleEnsemble] = None

    def __post_init__(self):
        given = [x is not None for x in (self.density, self.weights, self.ensemble)]
        if sum(given) != 1:
            raise ValueError("give exactly one representation")
        if self.density is not None and not self.space.gridded:
            raise UnsupportedRepresentationError("densities need a gridded space")
        if self.weights is not None and self.space.gridded:
            raise UnsupportedRepresentationError("weights need a finite space")
        arr = self.values
        if arr is not None:
            if arr.shape != (self.space.size,):
                raise ValueError(f"expected {self.space.size} entries, got shape {arr.shape}")
            if np.any(arr < 0):
                raise NegativeDensityError(f"negative entry {arr.min():.3e}")
            if abs(self.mass - 1.0) > MASS_TOL:
                raise DegenerateMeasureError(f"state is not normalized (mass {self.mass!r})")

    @property
    def kind(self) -> str:
        if self.density is not None:
            return "density"
        return "weights" if self.weights is not None else "ensemble"

    @property
    def values(self) -> Optional[np.ndarray]:
        return self.density if self.density is not None else self.weights

    @property
    def mass(self) -> float:
        if self.density is not None:
            return float(self.density.sum() * self.space.h)
        if self.weights is not None:
            return float(self.weights.sum())
        return 1.0

    @property
    def quadrature_weights(self) -> np.ndarray:
        """Probability attached to each grid cell or finite point."""
        if self.density is not None:
            return self.density * self.space.h
        if self.weights is not None:
            return self.weights
        raise UnsupportedRepresentationError("ensemble states have no fixed quadrature")

    # constructors ---------------------------------------------------------

    @classmethod
    def from_density(cls, space, values, normalize=True, clip_tol=CLIP_TOL) -> "StatisticalState":
        d = _clip(np.array(values, dtype=float), clip_tol)
        if normalize:
            d = d / _positive_mass(d.sum() * space.h)
        return cls(space, density=_frozen(d))

    @classmethod
    def from_weights(cls, space, values, normalize=True) -> "StatisticalState":
        w = _clip(np.array(values, dtype=float), 0.0)
        if normalize:
            w = w / _positive_mass(w.sum())
        return cls(space, weights=_frozen(w))

    @classmethod
    def from_ensemble(cls, ensemble: ParticleEnsemble, space: Optional[StateSpace] = None):
        space = space or ensemble.space
        if space is None:
            raise ValueError("ensemble state needs a space")
        return cls(space, ensemble=ensemble)

    @classmethod
    def uniform(cls, space) -> "StatisticalState":
        if space.gridded:
            return cls.from_density(space, np.ones(space.n))
        return cls.from_weights(space, np.ones(space.size))

    @classmethod
    def gaussian(cls, space, mean: float, var: float) -> "StatisticalState":
        """Gaussian density sampled at the cell centres, then normalized."""
        x = space.centers
        return cls.from_density(space, np.exp(-0.5 * (x - mean) ** 2 / var))

    @classmethod
    def point_mass(cls, space, x) -> "StatisticalState":
        if not space.gridded:
            return cls.from_weights(space, [1.0 if lab == x else 0.0 for lab in space.labels])
        return cls(space, ensemble=ParticleEnsemble(np.array([x], dtype=float), space=space))

    # derived quantities ---------------------------------------------------

    def mean(self) -> float:
        return average(PhysicalVariable.from_function(self.space, lambda y: y), self)

    def variance(self) -> float:
        m = self.mean()
        return average(PhysicalVariable.from_function(self.space, lambda y: (y - m) ** 2), self)


def _clip(d: np.ndarray, tol: float) -> np.ndarray:
    if d.size and d.min() < -tol:
        raise NegativeDensityError(f"entry {d.min():.3e} below clipping tolerance -{tol:g}")
    return np.maximum(d, 0.0)


def _positive_mass(m: float) -> float:
    if not (m > 0.0) or not math.isfinite(m):
        raise DegenerateMeasureError(f"total mass {m!r} cannot be normalized")
    return m


# --------------------------------------------------------------------------
# operations


def average(f: PhysicalVariable, p: StatisticalState, t: Optional[float] = None) -> float:
    """Integral of ``f`` against ``p``.

    Grid states use the cell-centre rule, which on the circle is the
    periodic trapezoid rule; ensembles use their (weighted) sample mean.
    """
    _check_same(f.space, p.space)
    if p.ensemble is not None:
        return p.ensemble.mean(lambda x: f(x, t))
    return float(np.dot(f.values(t), p.quadrature_weights))


def normalize(p: StatisticalState) -> StatisticalState:
    if p.density is not None:
        return StatisticalState.from_density(p.space, p.density)
    if p.weights is not None:
        return StatisticalState.from_weights(p.space, p.weights)
    return p


def sample(p: StatisticalState, count: int, seed: int) -> ParticleEnsemble:
    """Draw ``count`` points from ``p``.

    Grid densities are treated as piecewise constant: a cell is drawn by its
    probability and the point is uniform inside it.
    """
    if count <= 0:
        raise EmptyEnsembleError("sample count must be positive")
    gen = _rng.generator(seed)
    return _sample_with(p, count, gen, seed)


def _sample_with(p: StatisticalState, count: int, gen: np.random.Generator, seed=None) -> ParticleEnsemble:
    space = p.space
    if p.density is not None:
        w = p.quadrature_weights
        idx = gen.choice(space.n, size=count, p=w / w.sum())
        pts = space.lower + (idx + gen.random(count)) * space.h
        return ParticleEnsemble(pts, seed=seed, space=space)
    if p.weights is not None:
        idx = gen.choice(space.size, size=count, p=p.weights / p.weights.sum())
        labels = _label_array(space.labels)
        return ParticleEnsemble(labels[idx], seed=seed, space=space)
    ens = p.ensemble
    if len(ens) == 1:
        return ParticleEnsemble(np.repeat(ens.points, count), seed=seed, space=space)
    idx = gen.choice(len(ens), size=count, p=ens.weights)
    return ParticleEnsemble(ens.points[idx], seed=seed, space=space)


@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float

    def points(self) -> Tuple[float, float]:
        return (self.lower, self.upper)


@dataclass(frozen=True)
class ValueSet:
    values: Tuple[float, ...] = field(default_factory=tuple)

    def points(self) -> Tuple[float, ...]:
        return self.values


Range = Union[Interval, ValueSet]


def range_of(f: PhysicalVariable, space: Optional[StateSpace] = None) -> Range:
    """Range of ``f``: ``[min, max]`` over cell centres, or the exact value set.

    For gridded spaces this is a grid estimate of the true range.
    """
    space = space or f.space
    _check_same(f.space, space)
    v = f.values()
    if space.gridded:
        return Interval(float(v.min()), float(v.max()))
    return ValueSet(tuple(sorted(set(float(x) for x in v))))


def value_set(f: PhysicalVariable, decimals: int = 12) -> ValueSet:
    """Distinct values of ``f`` on its points, rounded to ``decimals``."""
    v = np.round(f.values(), decimals)
    return ValueSet(tuple(float(x) for x in np.unique(v)))


def _dist_to(x: float, r: Range) -> float:
    if isinstance(r, Interval):
        return max(r.lower - x, 0.0, x - r.upper)
    return min(abs(x - v) for v in r.values)


def _sup_dist(a: Range, b: Range) -> float:
    if isinstance(a, ValueSet):
        return max(_dist_to(x, b) for x in a.values)
    # distance to b is piecewise linear on a; its maxima sit at the ends of a
    # or at midpoints between consecutive points of b
    cands = [a.lower, a.upper]
    if isinstance(b, ValueSet):
        vs = sorted(b.values)
        cands += [0.5 * (u + w) for u, w in zip(vs, vs[1:]) if a.lower <= 0.5 * (u + w) <= a.upper]
    return max(_dist_to(x, b) for x in cands)


def hausdorff(a: Range, b: Range) -> float:
    return max(_sup_dist(a, b), _sup_dist(b, a))


def l1_distance(p: StatisticalState, q: StatisticalState) -> float:
    """L1 distance between two grid or finite states (twice total variation)."""
    _check_same(p.space, q.space)
    if p.space.gridded:
        return float(np.abs(p.density - q.density).sum() * p.space.h)
    return float(np.abs(p.weights - q.weights).sum())
