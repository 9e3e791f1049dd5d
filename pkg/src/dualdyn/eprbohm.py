"""EPR-Bohm correlation models.

Two models reproduce the singlet correlation ``E(a, b) = -cos(a - b)``.

``SingletFunctionalModel`` (R1) uses a uniformly distributed angle ``lambda``
on the circle and the setting-local variables ``sqrt(2) cos(lambda - a)``
(Alice) and ``-sqrt(2) cos(lambda - b)`` (Bob). Their range is
``[-sqrt(2), sqrt(2)]``, wider than the observed spectrum ``{-1, +1}``. This is
a minimal instantiation chosen because it gives the singlet correlation
exactly; it is not a transcription of any published construction.
:func:`as_chameleon` packages it as a measurement whose observed variables are
``+-1`` valued and whose backward dynamics pull them back to the cosines.

``SingletOutcomeModel`` (R2) is the joint outcome distribution
``P(s, t | a, b) = (1 - s t cos(a - b)) / 4``. It is a setting-pair
dependent final distribution, i.e. probabilistic contextuality; it is *not*
written as a product of per-side kernels over a shared ``lambda``, which is
impossible for ``+-1`` outcomes with these correlations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np

from . import rng as _rng
from .chameleon import ChameleonMeasurement, DualDynamics, MeasurementSetting, SettingModel
from .errors import ConfigError, UnknownSettingError, UnsupportedModelError
from .statespace import TWO_PI, PhysicalVariable, StateSpace, StatisticalState, reduce_angle, sgn

QUADRATURE = "quadrature"
MONTE_CARLO = "monte-carlo"
SQRT2 = math.sqrt(2.0)
OUTCOMES = (1, -1)
OUTCOME_PAIRS = ((1, 1), (1, -1), (-1, 1), (-1, -1))
SPECTRUM = (-1.0, 1.0)


def quantum_reference(a: float, b: float) -> float:
    """Singlet prediction ``-cos(a - b)``."""
    return -math.cos(a - b)


@dataclass(frozen=True)
class SingletFunctionalModel:
    cells: int = 360

    def __post_init__(self):
        if self.cells < 360:
            raise ConfigError("R1 quadrature needs at least 360 cells")

    @property
    def space(self) -> StateSpace:
        return StateSpace.circle(self.cells)

    def initial_state(self) -> StatisticalState:
        return StatisticalState.uniform(self.space)

    def alice_variable(self, a: float) -> PhysicalVariable:
        a = reduce_angle(a)
        return PhysicalVariable.from_function(self.space, lambda lam: SQRT2 * np.cos(lam - a), name=f"alice({a})")

    def bob_variable(self, b: float) -> PhysicalVariable:
        b = reduce_angle(b)
        return PhysicalVariable.from_function(self.space, lambda lam: -SQRT2 * np.cos(lam - b), name=f"bob({b})")


PmfFn = Callable[[float, float], np.ndarray]


def singlet_pmf(a: float, b: float) -> np.ndarray:
    """``P[s_idx, t_idx]`` with outcome order ``(+1, -1)``."""
    c = math.cos(a - b)
    st = np.array([[1.0, -1.0], [-1.0, 1.0]])
    return (1.0 - st * c) / 4.0


@dataclass(frozen=True)
class SingletOutcomeModel:
    pmf_fn: PmfFn = singlet_pmf
    name: str = "singlet"

    def pmf(self, a: float, b: float) -> np.ndarray:
        P = np.asarray(self.pmf_fn(reduce_angle(a), reduce_angle(b)), dtype=float)
        if P.shape != (2, 2) or np.any(P < 0) or abs(P.sum() - 1.0) > 1e-12:
            raise ValueError(f"invalid outcome pmf {P.tolist()}")
        return P


Model = Union[SingletFunctionalModel, SingletOutcomeModel]


@dataclass(frozen=True)
class CorrelationResult:
    value: float
    method: str
    mc_std_error: Optional[float] = None
    seed: Optional[int] = None
    count: Optional[int] = None


@dataclass(frozen=True)
class ChshResult:
    S: float
    terms: Tuple[float, float, float, float]
    std_error: Optional[float] = None

    @property
    def abs_S(self) -> float:
        return abs(self.S)


def _mc_args(mc_count, seed):
    if mc_count is None or seed is None:
        raise ConfigError("monte-carlo correlation needs mc_count and seed")
    if mc_count < 2:
        raise ConfigError("mc_count must be at least 2")


def _mc_summary(parts, count: int) -> Tuple[float, float]:
    s1 = float(sum(p[0] for p in parts))
    s2 = float(sum(p[1] for p in parts))
    mean = s1 / count
    var = max(s2 / count - mean * mean, 0.0) * count / (count - 1)
    return mean, math.sqrt(var / count)


def correlation(
    model: Model,
    a: float,
    b: float,
    method: str = QUADRATURE,
    mc_count: Optional[int] = None,
    seed: Optional[int] = None,
    threads: int = 1,
) -> CorrelationResult:
    a, b = reduce_angle(a), reduce_angle(b)
    if method == QUADRATURE:
        if isinstance(model, SingletFunctionalModel):
            # periodic trapezoid: exact for trigonometric polynomials of low degree
            A = model.alice_variable(a).values()
            B = model.bob_variable(b).values()
            return CorrelationResult(float(np.mean(A * B)), QUADRATURE)
        P = model.pmf(a, b)
        st = np.outer(OUTCOMES, OUTCOMES)
        return CorrelationResult(float((st * P).sum()), QUADRATURE)
    if method != MONTE_CARLO:
        raise ConfigError(f"unknown method {method!r}")
    _mc_args(mc_count, seed)
    if isinstance(model, SingletFunctionalModel):
        def work(gen, size):
            lam = gen.random(size) * TWO_PI
            x = -2.0 * np.cos(lam - a) * np.cos(lam - b)
            return x.sum(), (x * x).sum()
    else:
        flat = model.pmf(a, b).ravel()
        prods = np.array([s * t for s, t in OUTCOME_PAIRS], dtype=float)

        def work(gen, size):
            x = prods[gen.choice(4, size=size, p=flat)]
            return x.sum(), (x * x).sum()

    parts = _rng.run_blocks(seed, mc_count, work, threads=threads)
    mean, se = _mc_summary(parts, mc_count)
    return CorrelationResult(mean, MONTE_CARLO, se, seed, mc_count)


def chsh(
    model: Model,
    a: float,
    a_prime: float,
    b: float,
    b_prime: float,
    method: str = QUADRATURE,
    mc_count: Optional[int] = None,
    seed: Optional[int] = None,
    threads: int = 1,
) -> ChshResult:
    """``S = E(a,b) + E(a',b) + E(a',b') - E(a,b')``."""
    pairs = [(a, b), (a_prime, b), (a_prime, b_prime), (a, b_prime)]
    if method == MONTE_CARLO:
        _mc_args(mc_count, seed)
        seeds = _rng.derived_seeds(seed, 4)
        res = [correlation(model, x, y, method, mc_count, s, threads) for (x, y), s in zip(pairs, seeds)]
        se = math.sqrt(sum(r.mc_std_error**2 for r in res))
    else:
        res = [correlation(model, x, y, method) for x, y in pairs]
        se = None
    e = tuple(r.value for r in res)
    return ChshResult(e[0] + e[1] + e[2] - e[3], e, se)


def marginals(model: SingletOutcomeModel, a: float, b: float) -> Tuple[np.ndarray, np.ndarray]:
    P = model.pmf(a, b)
    return P.sum(axis=1), P.sum(axis=0)


def no_signaling_defect(model: Model, a: float, b: float, b_alt: float, a_alt: Optional[float] = None) -> float:
    """How much Alice's marginal moves when Bob switches ``b -> b_alt``.

    With ``a_alt`` the symmetric check on Bob's marginal (Alice switching
    ``a -> a_alt`` at fixed ``b``) is added.
    """
    if not isinstance(model, SingletOutcomeModel):
        raise UnsupportedModelError("no-signaling needs an outcome distribution")
    alice_1, _ = marginals(model, a, b)
    alice_2, _ = marginals(model, a, b_alt)
    defect = float(np.max(np.abs(alice_1 - alice_2)))
    if a_alt is not None:
        _, bob_1 = marginals(model, a, b)
        _, bob_2 = marginals(model, a_alt, b)
        defect += float(np.max(np.abs(bob_1 - bob_2)))
    return defect


# --------------------------------------------------------------------------
# chameleon packaging


def _mode_dynamics(space: StateSpace, angle: float, duration: float) -> DualDynamics:
    # Keeps the mean and rescales the cos(lambda - angle) component by
    # sqrt(2)*pi/4, which sends sgn(cos(. - angle)) to sqrt(2) cos(. - angle).
    # The backward map enlarges sup-norms, so it is not a Markov operator; the
    # forward map is its adjoint and stays a probability density only for
    # states whose first harmonic is weak enough.
    c = np.cos(space.centers - angle)
    h = space.h
    kappa = SQRT2 * math.pi / 4.0

    def backward(g: PhysicalVariable) -> PhysicalVariable:
        v = g.values()
        mean = v.sum() * h / TWO_PI
        coeff = (v * c).sum() * h / math.pi
        return PhysicalVariable.from_samples(space, mean + kappa * coeff * c, name=f"U[{g.name}]")

    def forward(p: StatisticalState) -> StatisticalState:
        pa = float(p.quadrature_weights @ c)
        return StatisticalState.from_density(space, 1.0 / TWO_PI + kappa * pa * c / math.pi)

    return DualDynamics(forward, backward, duration, name=f"mode({angle:.6g})")


def _single_angle(s: MeasurementSetting) -> float:
    if len(s.parameters) != 1:
        raise UnknownSettingError(f"setting {s.label!r} needs exactly one angle")
    return reduce_angle(s.parameters[0])


def as_chameleon(model: SingletFunctionalModel, duration: float) -> Tuple[ChameleonMeasurement, ChameleonMeasurement]:
    """R1 as a pair of single-side chameleon measurements (Alice, Bob).

    Observed variables are ``sgn`` of the ontic cosines; the backward
    dynamics of the setting reconstructs the ontic cosine from them.
    """
    space = model.space

    def side(sign: float):
        def resolve(s: MeasurementSetting) -> SettingModel:
            ang = _single_angle(s)
            observed = PhysicalVariable.from_function(
                space, lambda lam: sign * sgn(np.cos(lam - ang)), name=f"obs({sign:+g},{ang:.6g})"
            )
            return SettingModel(_mode_dynamics(space, ang, duration), observed)

        return resolve

    alice = ChameleonMeasurement(side(1.0), spectrum=SPECTRUM, physical=True, name="r1-alice")
    bob = ChameleonMeasurement(side(-1.0), spectrum=SPECTRUM, physical=True, name="r1-bob")
    return alice, bob


def outcome_chameleon(model: SingletOutcomeModel, duration: float, cells: int = 360) -> ChameleonMeasurement:
    """R2 as a chameleon measurement over setting pairs.

    The prepared state lives on the circle; the final state is the joint
    outcome distribution on ``{+-1}^2`` and the observed variable is the
    product ``s t``.
    """
    initial = StateSpace.circle(cells)
    final = StateSpace.finite(OUTCOME_PAIRS)
    observed = PhysicalVariable.from_function(final, lambda st: float(st[0] * st[1]), name="s*t")

    def resolve(s: MeasurementSetting) -> SettingModel:
        if len(s.parameters) != 2:
            raise UnknownSettingError(f"setting {s.label!r} needs an angle pair (a, b)")
        a, b = s.parameters
        P = model.pmf(a, b)
        row = np.array([P[OUTCOMES.index(x), OUTCOMES.index(y)] for x, y in OUTCOME_PAIRS])
        K = np.tile(row, (initial.size, 1))
        return SettingModel(DualDynamics.from_kernel(K, initial, final, duration, name="singlet-pmf"), observed)

    return ChameleonMeasurement(resolve, spectrum=SPECTRUM, physical=True, name=f"r2-{model.name}")
