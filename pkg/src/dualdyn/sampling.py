"""Detection loophole: sub-ensembles selected by detection and post-selection.

Hidden variable ``lambda`` is uniform on the circle. Each side produces a
``+-1`` outcome and is detected with a probability; both functions read only
that side's own setting. The default model has Alice detect with probability
``|cos(lambda - a)|`` and Bob always detect, with outcomes
``sgn(cos(lambda - a))`` and ``-sgn(cos(lambda - b))``. Conditioning on joint
detection then gives exactly ``E(a, b) = -cos(a - b)``, while the full
ensemble obeys the sawtooth ``-(1 - 2 phi / pi)`` and Bell's bound.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from . import rng as _rng
from .eprbohm import MONTE_CARLO, OUTCOMES, QUADRATURE, ChshResult, CorrelationResult, reduce_angle
from .errors import ConfigError, DegenerateSubensembleError
from .statespace import TWO_PI, StateSpace, StatisticalState, l1_distance, sgn

SideFn = Callable[[np.ndarray, float], np.ndarray]

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(48)


def default_alice_outcome(lam, a):
    return sgn(np.cos(lam - a))


def default_alice_detect(lam, a):
    return np.abs(np.cos(lam - a))


def default_bob_outcome(lam, b):
    return -sgn(np.cos(lam - b))


def always(lam, _angle):
    return np.ones(np.shape(lam))


def never(lam, _angle):
    return np.zeros(np.shape(lam))


def quarter_turn_breaks(a: float, b: float) -> List[float]:
    """Zeros of ``cos(lambda - a)`` and ``cos(lambda - b)``."""
    return [a + math.pi / 2, a - math.pi / 2, b + math.pi / 2, b - math.pi / 2]


@dataclass(frozen=True)
class DetectionModel:
    alice_outcome: SideFn = default_alice_outcome
    alice_detect: SideFn = default_alice_detect
    bob_outcome: SideFn = default_bob_outcome
    bob_detect: SideFn = always
    # points where any of the four functions may be non-smooth
    breakpoints: Callable[[float, float], Sequence[float]] = quarter_turn_breaks
    cells: int = 3600
    name: str = "default"

    @classmethod
    def lossless(cls, **kw) -> "DetectionModel":
        return cls(alice_detect=always, bob_detect=always, name="lossless", **kw)

    @classmethod
    def blind(cls, **kw) -> "DetectionModel":
        return cls(alice_detect=never, bob_detect=never, name="blind", **kw)

    @property
    def space(self) -> StateSpace:
        return StateSpace.circle(self.cells)


@dataclass(frozen=True)
class SubEnsembleState:
    settings: Tuple[float, float]
    state: StatisticalState


@dataclass(frozen=True)
class CoincidenceCounts:
    a: float
    b: float
    counts: np.ndarray  # n[s_idx, t_idx], outcome order (+1, -1)
    singles_alice: int
    singles_bob: int
    emitted: int
    full_product_sum: float
    seed: int

    @property
    def coincidences(self) -> int:
        return int(self.counts.sum())

    @property
    def coincidence_rate(self) -> float:
        return self.coincidences / self.emitted

    @property
    def degenerate(self) -> bool:
        return self.coincidences == 0

    def n(self, s: int, t: int) -> int:
        return int(self.counts[OUTCOMES.index(s), OUTCOMES.index(t)])

    def estimate(self) -> Tuple[float, float]:
        """Post-selected correlation estimate and its binomial standard error."""
        if self.degenerate:
            raise DegenerateSubensembleError(f"no coincidences at settings ({self.a}, {self.b})")
        nc = self.coincidences
        e = float((np.outer(OUTCOMES, OUTCOMES) * self.counts).sum()) / nc
        return e, math.sqrt(max(1.0 - e * e, 0.0) / nc)

    def full_estimate(self) -> float:
        return self.full_product_sum / self.emitted


def circle_mean(fn: Callable[[np.ndarray], np.ndarray], breaks: Sequence[float] = ()) -> float:
    """``(1/2pi) int_0^{2pi} fn`` by Gauss-Legendre on the smooth pieces between ``breaks``."""
    cuts = sorted({0.0, TWO_PI, *(reduce_angle(x) for x in breaks)})
    total = 0.0
    for lo, hi in zip(cuts, cuts[1:]):
        if hi - lo <= 0:
            continue
        half = 0.5 * (hi - lo)
        x = lo + half * (_GL_NODES + 1.0)
        total += half * float(np.dot(_GL_WEIGHTS, fn(x)))
    return total / TWO_PI


def restricted_state(m: DetectionModel, a: float, b: float) -> SubEnsembleState:
    """Uniform prior conditioned on joint detection, on the model's grid."""
    a, b = reduce_angle(a), reduce_angle(b)
    lam = m.space.centers
    w = m.alice_detect(lam, a) * m.bob_detect(lam, b)
    if not np.any(w > 0):
        raise DegenerateSubensembleError(f"joint detection probability vanishes at ({a}, {b})")
    return SubEnsembleState((a, b), StatisticalState.from_density(m.space, w))


def fair_sampling_defect(m: DetectionModel, pair1: Tuple[float, float], pair2: Tuple[float, float]) -> float:
    """L1 distance between the two detected sub-ensembles; zero means fair sampling."""
    return l1_distance(restricted_state(m, *pair1).state, restricted_state(m, *pair2).state)


def detection_rate(m: DetectionModel, a: float, b: float, side: str = "coincidence") -> float:
    a, b = reduce_angle(a), reduce_angle(b)
    br = m.breakpoints(a, b)
    if side == "alice":
        return circle_mean(lambda x: m.alice_detect(x, a), br)
    if side == "bob":
        return circle_mean(lambda x: m.bob_detect(x, b), br)
    if side == "coincidence":
        return circle_mean(lambda x: m.alice_detect(x, a) * m.bob_detect(x, b), br)
    raise ConfigError(f"unknown side {side!r}")


def postselected_correlation(
    m: DetectionModel,
    a: float,
    b: float,
    method: str = QUADRATURE,
    mc_count: Optional[int] = None,
    seed: Optional[int] = None,
    threads: int = 1,
) -> CorrelationResult:
    """Correlation of outcomes on jointly detected pairs."""
    a, b = reduce_angle(a), reduce_angle(b)
    if method == MONTE_CARLO:
        counts = _experiment(m, a, b, mc_count, seed, threads)
        e, se = counts.estimate()
        return CorrelationResult(e, MONTE_CARLO, se, seed, mc_count)
    if method != QUADRATURE:
        raise ConfigError(f"unknown method {method!r}")
    br = m.breakpoints(a, b)
    den = circle_mean(lambda x: m.alice_detect(x, a) * m.bob_detect(x, b), br)
    if den <= 0:
        raise DegenerateSubensembleError(f"joint detection probability vanishes at ({a}, {b})")
    num = circle_mean(
        lambda x: m.alice_outcome(x, a) * m.bob_outcome(x, b) * m.alice_detect(x, a) * m.bob_detect(x, b), br
    )
    return CorrelationResult(num / den, QUADRATURE)


def full_ensemble_correlation(
    m: DetectionModel,
    a: float,
    b: float,
    method: str = QUADRATURE,
    mc_count: Optional[int] = None,
    seed: Optional[int] = None,
    threads: int = 1,
) -> CorrelationResult:
    """Correlation of pre-detection outcomes over every emitted pair."""
    a, b = reduce_angle(a), reduce_angle(b)
    if method == MONTE_CARLO:
        counts = _experiment(m, a, b, mc_count, seed, threads)
        e = counts.full_estimate()
        return CorrelationResult(e, MONTE_CARLO, math.sqrt(max(1 - e * e, 0.0) / mc_count), seed, mc_count)
    if method != QUADRATURE:
        raise ConfigError(f"unknown method {method!r}")
    v = circle_mean(lambda x: m.alice_outcome(x, a) * m.bob_outcome(x, b), m.breakpoints(a, b))
    return CorrelationResult(v, QUADRATURE)


def _chsh(corr, a, a_prime, b, b_prime, method, mc_count, seed, threads) -> ChshResult:
    pairs = [(a, b), (a_prime, b), (a_prime, b_prime), (a, b_prime)]
    if method == MONTE_CARLO:
        if mc_count is None or seed is None:
            raise ConfigError("monte-carlo CHSH needs mc_count and seed")
        seeds = _rng.derived_seeds(seed, 4)
        res = [corr(x, y, method, mc_count, s, threads) for (x, y), s in zip(pairs, seeds)]
        se = math.sqrt(sum(r.mc_std_error**2 for r in res))
    else:
        res = [corr(x, y, method) for x, y in pairs]
        se = None
    e = tuple(r.value for r in res)
    return ChshResult(e[0] + e[1] + e[2] - e[3], e, se)


def postselected_chsh(m, a, a_prime, b, b_prime, method=QUADRATURE, mc_count=None, seed=None, threads=1):
    corr = lambda x, y, *args: postselected_correlation(m, x, y, *args)  # noqa: E731
    return _chsh(corr, a, a_prime, b, b_prime, method, mc_count, seed, threads)


def full_ensemble_chsh(m, a, a_prime, b, b_prime, method=QUADRATURE, mc_count=None, seed=None, threads=1):
    corr = lambda x, y, *args: full_ensemble_correlation(m, x, y, *args)  # noqa: E731
    return _chsh(corr, a, a_prime, b, b_prime, method, mc_count, seed, threads)


def _experiment(m: DetectionModel, a: float, b: float, pairs: Optional[int], seed: Optional[int], threads: int):
    if pairs is None or seed is None:
        raise ConfigError("event simulation needs a pair count and a seed")
    if pairs < 1:
        raise ConfigError("pairs_per_setting must be >= 1")

    def work(gen: np.random.Generator, size: int):
        lam = gen.random(size) * TWO_PI
        sa = m.alice_outcome(lam, a)
        tb = m.bob_outcome(lam, b)
        da = gen.random(size) < m.alice_detect(lam, a)
        db = gen.random(size) < m.bob_detect(lam, b)
        both = da & db
        n = np.zeros((2, 2), dtype=np.int64)
        for i, s in enumerate(OUTCOMES):
            for j, t in enumerate(OUTCOMES):
                n[i, j] = np.count_nonzero(both & (sa == s) & (tb == t))
        return n, int(da.sum()), int(db.sum()), float((sa * tb).sum())

    parts = _rng.run_blocks(seed, pairs, work, threads=threads)
    return CoincidenceCounts(
        a,
        b,
        sum(p[0] for p in parts),
        sum(p[1] for p in parts),
        sum(p[2] for p in parts),
        pairs,
        sum(p[3] for p in parts),
        seed,
    )


def run_loophole_experiment(
    m: DetectionModel,
    settings: Sequence[Tuple[float, float]],
    pairs_per_setting: int,
    seed: int,
    threads: int = 1,
) -> List[CoincidenceCounts]:
    """Event-by-event emission, detection and coincidence counting per setting pair."""
    seeds = _rng.derived_seeds(seed, len(settings))
    return [
        _experiment(m, reduce_angle(a), reduce_angle(b), pairs_per_setting, s, threads)
        for (a, b), s in zip(settings, seeds)
    ]


def experiment_chsh(counts: Sequence[CoincidenceCounts]) -> ChshResult:
    """CHSH from four counts tables ordered as (a,b), (a',b), (a',b'), (a,b')."""
    if len(counts) != 4:
        raise ConfigError("CHSH needs exactly four settings")
    est = [c.estimate() for c in counts]
    e = tuple(x[0] for x in est)
    return ChshResult(e[0] + e[1] + e[2] - e[3], e, math.sqrt(sum(x[1] ** 2 for x in est)))
