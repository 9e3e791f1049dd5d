"""Adaptive ("chameleon") measurement models.

A measurement of setting ``a`` is described by a pair of dynamics that both
depend on ``a``: a forward map ``V^a`` on statistical states and a backward
map ``U^a`` on physical variables, running over the measurement duration.
The variable read off at the end is the observed variable ``g``; pulling it
back with ``U^a`` gives the ontic variable ``f^a_{t0}``. Averaging the ontic
variable against the prepared state ``p0`` (classical average) and the
observed variable against ``V^a(p0)`` (observational average) must agree
whenever the two maps are conjugate.

Dynamics are opaque callables. Nothing here assumes a diffusion or even a
Markov process; the diffusion-backed constructors are one option among
several.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, MissingSpectrumError, SpaceMismatchError, UnknownSettingError
from .kolmogorov import (
    DiffusionSpec,
    SolverConfig,
    TimeWindow,
    backward_evolve,
    forward_adjoint_evolve,
    forward_evolve,
)
from .statespace import (
    PhysicalVariable,
    Range,
    StateSpace,
    StatisticalState,
    ValueSet,
    average,
    hausdorff,
    l1_distance,
    range_of,
    reduce_angle,
)

RANGE_TOL = 1e-6
SPECTRUM_TOL = 1e-9


@dataclass(frozen=True)
class MeasurementSetting:
    label: str
    parameters: Tuple[float, ...] = ()

    def __post_init__(self):
        if not self.label:
            raise ValueError("setting label must be nonempty")
        params = tuple(float(x) for x in self.parameters)
        if not all(math.isfinite(x) for x in params):
            raise ValueError(f"non-finite setting parameters {params}")
        object.__setattr__(self, "parameters", params)

    @classmethod
    def angle(cls, label: str, theta: float) -> "MeasurementSetting":
        """Single-angle setting, reduced mod 2*pi."""
        return cls(label, (reduce_angle(theta),))

    @classmethod
    def angles(cls, label: str, *thetas: float) -> "MeasurementSetting":
        return cls(label, tuple(reduce_angle(t) for t in thetas))


@dataclass(frozen=True)
class DualDynamics:
    """Forward map on states and backward map on variables over one duration."""

    forward: Callable[[StatisticalState], StatisticalState]
    backward: Callable[[PhysicalVariable], PhysicalVariable]
    duration: float
    name: str = ""

    def __post_init__(self):
        if not (self.duration > 0 and math.isfinite(self.duration)):
            raise ConfigError(f"measurement duration must be positive, got {self.duration}")

    @classmethod
    def identity(cls, duration: float) -> "DualDynamics":
        return cls(lambda p: p, lambda g: g, duration, name="identity")

    @classmethod
    def diffusion(cls, spec: DiffusionSpec, window: TimeWindow, cfg: Optional[SolverConfig] = None):
        """Forward and backward Kolmogorov solves, each from its own PDE."""
        cfg = cfg or SolverConfig()
        return cls(
            lambda p: forward_evolve(spec, p, window, cfg),
            lambda g: backward_evolve(spec, g, window, cfg),
            window.duration,
            name=f"diffusion[{spec.name}]",
        )

    @classmethod
    def diffusion_adjoint(cls, spec: DiffusionSpec, window: TimeWindow, cfg: Optional[SolverConfig] = None):
        """Forward Kolmogorov solve paired with its exact discrete adjoint."""
        cfg = cfg or SolverConfig()
        return cls(
            lambda p: forward_evolve(spec, p, window, cfg),
            lambda g: forward_adjoint_evolve(spec, g, window, cfg),
            window.duration,
            name=f"adjoint[{spec.name}]",
        )

    @classmethod
    def from_kernel(
        cls, kernel: np.ndarray, initial: StateSpace, final: StateSpace, duration: float, name: str = ""
    ) -> "DualDynamics":
        """Markov kernel ``K[i, j]`` = probability of moving from point ``i`` to ``j``.

        ``V(p)_j = sum_i P(i) K[i, j]`` and ``U(g)_i = sum_j K[i, j] g_j``.
        """
        K = np.array(kernel, dtype=float)
        if K.shape != (initial.size, final.size):
            raise ValueError(f"kernel shape {K.shape} does not match spaces")
        if np.any(K < 0) or not np.allclose(K.sum(axis=1), 1.0, atol=1e-12):
            raise ValueError("kernel rows must be probability vectors")
        K.setflags(write=False)

        def forward(p: StatisticalState) -> StatisticalState:
            if p.space != initial:
                raise SpaceMismatchError("state does not live on the kernel's initial space")
            mass = p.quadrature_weights @ K
            if final.gridded:
                return StatisticalState.from_density(final, mass / final.h)
            return StatisticalState.from_weights(final, mass)

        def backward(g: PhysicalVariable) -> PhysicalVariable:
            if g.space != final:
                raise SpaceMismatchError("variable does not live on the kernel's final space")
            return PhysicalVariable.from_samples(initial, K @ g.values(), name=f"K[{g.name}]")

        return cls(forward, backward, duration, name=name or "kernel")


@dataclass(frozen=True)
class SettingModel:
    dynamics: DualDynamics
    observed: PhysicalVariable


@dataclass(frozen=True)
class ChameleonMeasurement:
    """Setting-indexed measurement dynamics with a declared observable spectrum.

    ``resolve`` maps a setting to its :class:`SettingModel` and raises
    :class:`UnknownSettingError` for settings the model does not cover.
    ``physical`` marks models whose observed variables must respect the
    spectrum.
    """

    resolve: Callable[[MeasurementSetting], SettingModel]
    spectrum: Optional[Tuple[float, ...]] = None
    physical: bool = False
    name: str = ""
    settings: Tuple[MeasurementSetting, ...] = ()

    @classmethod
    def from_table(cls, table: Mapping[str, SettingModel], settings: Sequence[MeasurementSetting] = (), **kw):
        table = dict(table)

        def resolve(s: MeasurementSetting) -> SettingModel:
            try:
                return table[s.label]
            except KeyError:
                raise UnknownSettingError(f"no dynamics registered for setting {s.label!r}") from None

        if not settings:
            settings = tuple(MeasurementSetting(k) for k in table)
        return cls(resolve, settings=tuple(settings), **kw)

    def model(self, s: MeasurementSetting) -> SettingModel:
        return self.resolve(s)


@dataclass(frozen=True)
class AverageReport:
    classical: float
    observational: float
    gap: float
    setting: MeasurementSetting


@dataclass(frozen=True)
class RangeReport:
    ontic_range: Range
    observed_range: Range
    distance: float
    coincide: bool


def ontic_variable(m: ChameleonMeasurement, s: MeasurementSetting) -> PhysicalVariable:
    """Pre-measurement variable reconstructed from the observed one."""
    sm = m.model(s)
    return sm.dynamics.backward(sm.observed)


def evolved_state(m: ChameleonMeasurement, s: MeasurementSetting, p0: StatisticalState) -> StatisticalState:
    """State at the end of the ``s``-measurement."""
    return m.model(s).dynamics.forward(p0)


def classical_average(m: ChameleonMeasurement, s: MeasurementSetting, p0: StatisticalState) -> float:
    return average(ontic_variable(m, s), p0)


def observational_average(m: ChameleonMeasurement, s: MeasurementSetting, p0: StatisticalState) -> float:
    return average(m.model(s).observed, evolved_state(m, s, p0))


def average_report(m: ChameleonMeasurement, s: MeasurementSetting, p0: StatisticalState) -> AverageReport:
    cl = classical_average(m, s, p0)
    ob = observational_average(m, s, p0)
    return AverageReport(cl, ob, abs(cl - ob), s)


def range_coincidence_report(m: ChameleonMeasurement, s: MeasurementSetting) -> RangeReport:
    """Compare the value range of the ontic variable with that of the observed one.

    The observed range is the declared spectrum when the model has one,
    otherwise the grid range of the observed variable.
    """
    ontic = range_of(ontic_variable(m, s))
    if m.spectrum is not None:
        observed: Range = ValueSet(tuple(sorted(m.spectrum)))
    else:
        observed = range_of(m.model(s).observed)
    d = hausdorff(ontic, observed)
    return RangeReport(ontic, observed, d, d <= RANGE_TOL)


def spectral_check(m: ChameleonMeasurement, s: MeasurementSetting) -> bool:
    """True iff every value of the observed variable lies in the declared spectrum."""
    if m.spectrum is None:
        raise MissingSpectrumError(f"model {m.name or '<anonymous>'} declares no spectrum")
    spec = np.asarray(m.spectrum, dtype=float)
    vals = m.model(s).observed.values()
    return bool(np.all(np.min(np.abs(vals[:, None] - spec[None, :]), axis=1) <= SPECTRUM_TOL))


def verify_conjugation(
    m: ChameleonMeasurement,
    s: MeasurementSetting,
    p0: StatisticalState,
    family: Iterable[PhysicalVariable],
) -> float:
    """Largest conjugation gap ``|<U g, p0> - <g, V p0>|`` over a family of variables."""
    dyn = m.model(s).dynamics
    p_tau = dyn.forward(p0)
    return max(abs(average(dyn.backward(g), p0) - average(g, p_tau)) for g in family)


def contextuality_witness(
    m: ChameleonMeasurement, s1: MeasurementSetting, s2: MeasurementSetting, p0: StatisticalState
) -> float:
    """L1 distance between the final states of two settings."""
    return l1_distance(evolved_state(m, s1, p0), evolved_state(m, s2, p0))


def mismatched(forward_from: DualDynamics, backward_from: DualDynamics) -> DualDynamics:
    """Pair the forward map of one model with the backward map of another."""
    return DualDynamics(
        forward_from.forward,
        backward_from.backward,
        forward_from.duration,
        name=f"mismatch[{forward_from.name}|{backward_from.name}]",
    )


# --------------------------------------------------------------------------
# product models


def backward_matrix(dyn: DualDynamics, space: StateSpace) -> np.ndarray:
    """Matrix of a linear backward map, column ``j`` being ``U(e_j)``."""
    cols = []
    for j in range(space.size):
        e = np.zeros(space.size)
        e[j] = 1.0
        cols.append(dyn.backward(PhysicalVariable.from_samples(space, e)).values())
    return np.column_stack(cols)


@dataclass(frozen=True)
class ProductDynamics:
    """Joint measurement on ``Lambda_A x Lambda_B`` with independent per-side dynamics.

    Joint variables are arrays of shape ``(|A|, |B|)``. The joint backward
    map is ``U_A (x) U_B``; each side's factor reads only its own setting.
    """

    alice: DualDynamics
    bob: DualDynamics
    alice_space: StateSpace
    bob_space: StateSpace
    _ua: np.ndarray = field(init=False, repr=False)
    _ub: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_ua", backward_matrix(self.alice, self.alice_space))
        object.__setattr__(self, "_ub", backward_matrix(self.bob, self.bob_space))

    def backward(self, G: np.ndarray) -> np.ndarray:
        G = np.asarray(G, dtype=float)
        if G.shape != (self.alice_space.size, self.bob_space.size):
            raise ValueError(f"joint variable has shape {G.shape}")
        return self._ua @ G @ self._ub.T

    def forward_weights(self, P: np.ndarray) -> np.ndarray:
        """Joint cell masses pushed forward by the adjoint of :meth:`backward`."""
        return self._ua.T @ np.asarray(P, dtype=float) @ self._ub


def product_measurement(
    alice: ChameleonMeasurement,
    bob: ChameleonMeasurement,
    alice_space: StateSpace,
    bob_space: StateSpace,
) -> Callable[[MeasurementSetting, MeasurementSetting], ProductDynamics]:
    """Setting-pair dynamics assembled from the two single-side models."""

    def joint(a: MeasurementSetting, b: MeasurementSetting) -> ProductDynamics:
        return ProductDynamics(alice.model(a).dynamics, bob.model(b).dynamics, alice_space, bob_space)

    return joint


def ou_measurement(
    thetas: Mapping[str, float],
    space: StateSpace,
    window: TimeWindow,
    cfg: Optional[SolverConfig] = None,
    sigma: float = math.sqrt(2.0),
    exact_adjoint: bool = True,
    observed: Optional[PhysicalVariable] = None,
) -> ChameleonMeasurement:
    """OU relaxation whose rate ``theta`` depends on the setting label."""
    observed = observed or PhysicalVariable.from_function(space, lambda y: y, name="y")
    make = DualDynamics.diffusion_adjoint if exact_adjoint else DualDynamics.diffusion
    table = {
        label: SettingModel(make(DiffusionSpec.ornstein_uhlenbeck(th, 0.0, sigma), window, cfg), observed)
        for label, th in thetas.items()
    }
    settings = [MeasurementSetting(label, (th,)) for label, th in thetas.items()]
    kind = "exact-adjoint" if exact_adjoint else "independent"
    return ChameleonMeasurement.from_table(table, settings, name=f"ou-{kind}")
