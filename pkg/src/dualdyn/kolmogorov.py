"""Forward (Fokker-Planck) and backward Kolmogorov dynamics in one dimension.

Statistical states evolve forward with the generator

    L(p) = 1/2 d^2/dy^2 [sigma^2 p] - d/dy [a p]

and physical variables evolve backward, from a final condition at ``tau``,
with the conjugate operator

    W(f) = -1/2 sigma^2 f'' - a f'.

Both are discretized by second-order central differences on the same cell
grid. ``L`` is written in flux form with the drift taken at cell faces, so
the forward scheme conserves mass exactly under no-flux boundaries. ``W`` is
discretized pointwise at cell centres. The two discretizations agree with
``W = -L^T`` up to O(h^2) truncation terms, which makes the conjugation
identity a genuine two-route check rather than a tautology. The exact
discrete adjoint of the forward solver is available separately as
:func:`forward_adjoint_evolve`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import rng as _rng
from .errors import (
    CoefficientError,
    ConfigError,
    DualDynError,
    EmptyEnsembleError,
    StabilityError,
    UnsupportedRepresentationError,
)
from .statespace import (
    CIRCLE,
    TWO_PI,
    ParticleEnsemble,
    PhysicalVariable,
    StateSpace,
    StatisticalState,
    _sample_with,
    average,
)

CRANK_NICOLSON = "crank-nicolson"
EXPLICIT_EULER = "explicit-euler"
NO_FLUX = "no-flux"
PERIODIC = "periodic"
EXTRAPOLATE = "extrapolate"
NEUMANN = "neumann"

MASS_CONSERVATION_TOL = 1e-6

Coefficient = Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class DiffusionSpec:
    """Drift ``a(t, y)`` and diffusion ``sigma(t, y)``, both vectorised in ``y``."""

    drift: Coefficient
    diffusion: Coefficient
    name: str = ""

    @classmethod
    def constant(cls, drift: float = 0.0, sigma: float = 0.0) -> "DiffusionSpec":
        return cls(
            lambda t, y: np.full(np.shape(y), float(drift)),
            lambda t, y: np.full(np.shape(y), float(sigma)),
            name=f"constant(a={drift}, sigma={sigma})",
        )

    @classmethod
    def frozen(cls) -> "DiffusionSpec":
        """No drift, no diffusion: only the solver floor acts."""
        return cls.constant(0.0, 0.0)

    @classmethod
    def ornstein_uhlenbeck(cls, theta: float = 1.0, mu: float = 0.0, sigma: float = math.sqrt(2.0)):
        return cls(
            lambda t, y: -theta * (np.asarray(y) - mu),
            lambda t, y: np.full(np.shape(y), float(sigma)),
            name=f"ou(theta={theta}, mu={mu}, sigma={sigma})",
        )

    def coefficients(self, t: float, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        a = np.broadcast_to(np.asarray(self.drift(t, y), dtype=float), np.shape(y))
        s = np.broadcast_to(np.asarray(self.diffusion(t, y), dtype=float), np.shape(y))
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(s))):
            raise CoefficientError(f"non-finite drift or diffusion at t={t}")
        if np.any(s < 0):
            raise CoefficientError(f"negative diffusion coefficient at t={t}")
        return a, s


@dataclass(frozen=True)
class SolverConfig:
    dt: float = 1e-3
    scheme: str = CRANK_NICOLSON
    # None picks no-flux on intervals and periodic on the circle
    boundary: Optional[str] = None
    # boundary treatment of W on intervals; None picks quadratic extrapolation
    backward_boundary: Optional[str] = None
    sigma_floor: float = 1e-8

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError(f"dt must be positive and finite, got {self.dt}")
        if self.scheme not in (CRANK_NICOLSON, EXPLICIT_EULER):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.boundary not in (None, NO_FLUX, PERIODIC):
            raise ConfigError(f"unknown boundary {self.boundary!r}")
        if self.backward_boundary not in (None, EXTRAPOLATE, NEUMANN):
            raise ConfigError(f"unknown backward boundary {self.backward_boundary!r}")
        if self.sigma_floor < 0:
            raise ConfigError("sigma_floor must be nonnegative")

    def periodic(self, space: StateSpace) -> bool:
        if space.kind == CIRCLE:
            if self.boundary == NO_FLUX:
                raise ConfigError("the circle only supports periodic boundaries")
            return True
        if self.boundary == PERIODIC:
            raise ConfigError("periodic boundaries need a circle state space")
        return False


@dataclass(frozen=True)
class TimeWindow:
    t0: float
    tau: float

    def __post_init__(self):
        if not (math.isfinite(self.t0) and math.isfinite(self.tau)) or self.tau <= self.t0:
            raise ConfigError(f"need finite t0 < tau, got [{self.t0}, {self.tau}]")

    @property
    def duration(self) -> float:
        return self.tau - self.t0

    def steps(self, dt: float) -> Tuple[int, float]:
        """Number of steps and the uniform step that exactly spans the window."""
        n = max(1, int(math.ceil(self.duration / dt - 1e-9)))
        return n, self.duration / n


# --------------------------------------------------------------------------
# discrete operators


def _require_grid(space: StateSpace) -> None:
    if not space.gridded:
        raise UnsupportedRepresentationError("diffusion operators need a gridded state space")


def _face_positions(space: StateSpace, periodic: bool) -> np.ndarray:
    # face i sits between cells i and i+1; the wrap face closes the circle
    count = space.n if periodic else space.n - 1
    return space.lower + np.arange(1, count + 1) * space.h


def generator_matrix(spec: DiffusionSpec, space: StateSpace, t: float, cfg: SolverConfig) -> sp.csr_matrix:
    _require_grid(space)
    periodic = cfg.periodic(space)
    n, h = space.n, space.h
    _, sig = spec.coefficients(t, space.centers)
    D = np.maximum(sig, cfg.sigma_floor) ** 2
    af, _ = spec.coefficients(t, _face_positions(space, periodic))
    i = np.arange(af.size)
    j = (i + 1) % n
    # flux through face (i, j): F = c_i p_i + c_j p_j
    ci = 0.5 * af + D[i] / (2 * h)
    cj = 0.5 * af - D[j] / (2 * h)
    rows = np.concatenate([i, i, j, j])
    cols = np.concatenate([i, j, i, j])
    vals = np.concatenate([-ci, -cj, ci, cj]) / h
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def adjoint_matrix(spec: DiffusionSpec, space: StateSpace, t: float, cfg: SolverConfig) -> sp.csr_matrix:
    _require_grid(space)
    periodic = cfg.periodic(space)
    n, h = space.n, space.h
    a, sig = spec.coefficients(t, space.centers)
    D = np.maximum(sig, cfg.sigma_floor) ** 2
    lo = -0.5 * D / h**2 + a / (2 * h)
    mid = D / h**2
    hi = -0.5 * D / h**2 - a / (2 * h)
    idx = np.arange(n)
    if periodic:
        rows = np.concatenate([idx, idx, idx])
        cols = np.concatenate([(idx - 1) % n, idx, (idx + 1) % n])
        return sp.csr_matrix((np.concatenate([lo, mid, hi]), (rows, cols)), shape=(n, n))
    M = sp.lil_matrix((n, n))
    M.setdiag(mid)
    M.setdiag(lo[1:], -1)
    M.setdiag(hi[:-1], 1)
    if (cfg.backward_boundary or EXTRAPOLATE) == NEUMANN:
        # ghost value equals the boundary value: reflecting diffusion
        M[0, 0] += lo[0]
        M[n - 1, n - 1] += hi[n - 1]
    else:
        if n < 3:
            raise ConfigError("extrapolated boundary needs n >= 3")
        # quadratic extrapolation into the ghost cell, exact for quadratics
        for k, s, c in ((0, 1, lo[0]), (n - 1, -1, hi[n - 1])):
            M[k, k] += 3 * c
            M[k, k + s] += -3 * c
            M[k, k + 2 * s] += c
    return M.tocsr()


def generator_apply(spec: DiffusionSpec, p: StatisticalState, t: float, cfg: Optional[SolverConfig] = None) -> np.ndarray:
    """``L(p)`` at time ``t`` on the grid of ``p``."""
    if p.density is None:
        raise UnsupportedRepresentationError("generator needs a grid density")
    return generator_matrix(spec, p.space, t, cfg or SolverConfig()) @ p.density


def adjoint_apply(spec: DiffusionSpec, f: PhysicalVariable, t: float, cfg: Optional[SolverConfig] = None) -> np.ndarray:
    """``W(f)`` at time ``t`` on the grid of ``f``."""
    _require_grid(f.space)
    return adjoint_matrix(spec, f.space, t, cfg or SolverConfig()) @ f.values(t)


# --------------------------------------------------------------------------
# time stepping


class _Stepper:
    """Builds and caches step operators; refactorises only when coefficients change."""

    def __init__(self, build, space: StateSpace, cfg: SolverConfig, dt: float):
        self.build, self.space, self.cfg, self.dt = build, space, cfg, dt
        self._key = None
        self._mat = None
        self._lu = {}

    def matrix(self, spec: DiffusionSpec, t: float) -> sp.csr_matrix:
        a, s = spec.coefficients(t, self.space.centers)
        # face drift enters L, so it is part of the cache key
        af, _ = spec.coefficients(t, _face_positions(self.space, self.cfg.periodic(self.space)))
        key = (a.tobytes(), s.tobytes(), af.tobytes())
        if key != self._key:
            self._key, self._mat, self._lu = key, self.build(spec, self.space, t, self.cfg), {}
        return self._mat

    def solver(self, spec: DiffusionSpec, t: float, sign: float, transpose: bool = False):
        M = self.matrix(spec, t)
        k = (sign, transpose)
        if k not in self._lu:
            I = sp.identity(self.space.n, format="csc")
            A = (I - sign * 0.5 * self.dt * M).tocsc()
            self._lu[k] = spla.splu(A.T.tocsc() if transpose else A)
        return self._lu[k]


def _check_cfl(spec: DiffusionSpec, space: StateSpace, t: float, cfg: SolverConfig, dt: float) -> None:
    _, s = spec.coefficients(t, space.centers)
    smax = float(np.max(np.maximum(s, cfg.sigma_floor) ** 2))
    if smax > 0 and dt > space.h**2 / smax:
        raise StabilityError(f"explicit step dt={dt:g} exceeds CFL bound h^2/max(sigma^2)={space.h**2 / smax:g}")


def evolve_density(
    spec: DiffusionSpec, space: StateSpace, density: np.ndarray, window: TimeWindow, cfg: SolverConfig
) -> np.ndarray:
    """Raw forward solve: the density at ``tau`` before any clipping."""
    _require_grid(space)
    nsteps, dt = window.steps(cfg.dt)
    p = np.array(density, dtype=float)
    st = _Stepper(generator_matrix, space, cfg, dt)
    for k in range(nsteps):
        t = window.t0 + k * dt
        if cfg.scheme == EXPLICIT_EULER:
            _check_cfl(spec, space, t, cfg, dt)
            p = p + dt * (st.matrix(spec, t) @ p)
        else:
            rhs = p + 0.5 * dt * (st.matrix(spec, t) @ p)
            p = st.solver(spec, t + dt, +1.0).solve(rhs)
        if not np.all(np.isfinite(p)):
            raise StabilityError(f"non-finite density after step {k + 1}")
    return p


def forward_evolve(
    spec: DiffusionSpec, p0: StatisticalState, window: TimeWindow, cfg: Optional[SolverConfig] = None
) -> StatisticalState:
    """``V_{t0,tau}(p0)``: solve the Fokker-Planck equation from ``t0`` to ``tau``."""
    cfg = cfg or SolverConfig()
    if p0.density is None:
        raise UnsupportedRepresentationError("forward_evolve needs a grid density")
    p = evolve_density(spec, p0.space, p0.density, window, cfg)
    mass = p.sum() * p0.space.h
    if abs(mass - 1.0) > MASS_CONSERVATION_TOL:
        raise DualDynError(f"forward solve lost mass: {mass!r}")
    return StatisticalState.from_density(p0.space, p)


def _backward_values(spec, g: PhysicalVariable, window: TimeWindow, cfg: SolverConfig) -> np.ndarray:
    space = g.space
    _require_grid(space)
    nsteps, dt = window.steps(cfg.dt)
    f = np.array(g.values(window.tau), dtype=float)
    st = _Stepper(adjoint_matrix, space, cfg, dt)
    for k in range(nsteps, 0, -1):
        s_hi = window.t0 + k * dt
        if cfg.scheme == EXPLICIT_EULER:
            _check_cfl(spec, space, s_hi, cfg, dt)
            f = f - dt * (st.matrix(spec, s_hi) @ f)
        else:
            # (I + dt/2 W(s_lo)) f_lo = (I - dt/2 W(s_hi)) f_hi
            rhs = f - 0.5 * dt * (st.matrix(spec, s_hi) @ f)
            f = st.solver(spec, s_hi - dt, -1.0).solve(rhs)
        if not np.all(np.isfinite(f)):
            raise StabilityError(f"non-finite variable after backward step {nsteps - k + 1}")
    return f


def backward_evolve(
    spec: DiffusionSpec, g: PhysicalVariable, window: TimeWindow, cfg: Optional[SolverConfig] = None
) -> PhysicalVariable:
    """``U_{t0,tau}(g)``: integrate ``df/ds = W(f)`` from ``f(tau) = g`` down to ``t0``."""
    cfg = cfg or SolverConfig()
    vals = _backward_values(spec, g, window, cfg)
    return PhysicalVariable.from_samples(g.space, vals, name=f"U[{g.name}]")


def forward_adjoint_evolve(
    spec: DiffusionSpec, g: PhysicalVariable, window: TimeWindow, cfg: Optional[SolverConfig] = None
) -> PhysicalVariable:
    """Exact discrete adjoint of :func:`forward_evolve` applied to ``g``.

    Satisfies ``h g.(V p) = h (U g).p`` to round-off for every grid density
    ``p``.
    """
    cfg = cfg or SolverConfig()
    space = g.space
    _require_grid(space)
    nsteps, dt = window.steps(cfg.dt)
    f = np.array(g.values(window.tau), dtype=float)
    st = _Stepper(generator_matrix, space, cfg, dt)
    # V = A_N ... A_1 with A_k = B1_k^{-1} B0_k, so V^T = A_1^T ... A_N^T
    for k in range(nsteps - 1, -1, -1):
        t = window.t0 + k * dt
        if cfg.scheme == EXPLICIT_EULER:
            f = f + dt * (st.matrix(spec, t).T @ f)
        else:
            y = st.solver(spec, t + dt, +1.0, transpose=True).solve(f)
            f = y + 0.5 * dt * (st.matrix(spec, t).T @ y)
    return PhysicalVariable.from_samples(space, f, name=f"V*[{g.name}]")


def conjugation_defect(
    spec: DiffusionSpec,
    p0: StatisticalState,
    g: PhysicalVariable,
    window: TimeWindow,
    cfg: Optional[SolverConfig] = None,
) -> float:
    """``|<U(g), p0> - <g, V(p0)>|`` with independently solved ``U`` and ``V``."""
    cfg = cfg or SolverConfig()
    lhs = average(backward_evolve(spec, g, window, cfg), p0)
    rhs = average(g.on_grid(window.tau), forward_evolve(spec, p0, window, cfg))
    return abs(lhs - rhs)


# --------------------------------------------------------------------------
# Monte Carlo


def _fold_into(y: np.ndarray, lower: float, upper: float) -> np.ndarray:
    width = upper - lower
    z = np.mod(y - lower, 2 * width)
    return lower + np.where(z > width, 2 * width - z, z)


def simulate_paths(
    spec: DiffusionSpec,
    p0: StatisticalState,
    window: TimeWindow,
    path_count: int,
    dt: float,
    seed: int,
    threads: int = 1,
) -> ParticleEnsemble:
    """Euler-Maruyama paths started from ``p0``; returns the positions at ``tau``.

    Interval boundaries reflect, the circle wraps. Paths are generated in
    fixed-size blocks with per-block seeds, so ``threads`` does not change
    the result.
    """
    if path_count <= 0:
        raise EmptyEnsembleError("path_count must be positive")
    if not (dt > 0 and math.isfinite(dt)):
        raise ConfigError(f"dt must be positive, got {dt}")
    space = p0.space
    if not space.gridded:
        raise UnsupportedRepresentationError("path simulation needs an interval or the circle")
    nsteps, step = window.steps(dt)
    sq = math.sqrt(step)

    def block(gen: np.random.Generator, size: int) -> np.ndarray:
        y = np.array(_sample_with(p0, size, gen).points, dtype=float)
        for k in range(nsteps):
            t = window.t0 + k * step
            a, s = spec.coefficients(t, y)
            y = y + a * step + s * sq * gen.standard_normal(size)
            y = space.reduce(y) if space.kind == CIRCLE else _fold_into(y, space.lower, space.upper)
        return y

    parts = _rng.run_blocks(seed, path_count, block, threads=threads)
    return ParticleEnsemble(np.concatenate(parts), seed=seed, space=space)


def kde_density(ensemble: ParticleEnsemble, space: StateSpace, bandwidth: Optional[float] = None) -> StatisticalState:
    """Gaussian kernel density estimate of an ensemble on the grid of ``space``.

    Points are binned to the grid first. Default bandwidth is Silverman's
    rule; on the circle distances are taken modulo 2*pi.
    """
    x = np.asarray(ensemble.points, dtype=float)
    if bandwidth is None:
        std = x.std()
        iqr = np.subtract(*np.percentile(x, [75, 25]))
        bandwidth = 0.9 * min(std, iqr / 1.34) * x.size ** (-0.2)
    edges = space.lower + np.arange(space.n + 1) * space.h
    hist, _ = np.histogram(x, bins=edges, weights=ensemble.weights)
    c = space.centers
    diff = c[:, None] - c[None, :]
    if space.kind == CIRCLE:
        diff = np.mod(diff + math.pi, TWO_PI) - math.pi
    dens = hist @ np.exp(-0.5 * (diff / bandwidth) ** 2)
    return StatisticalState.from_density(space, dens)
