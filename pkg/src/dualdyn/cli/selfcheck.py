"""Oracle self-tests run by ``dualdyn check``.

Each check yields ``(name, passed, detail)``. They are small versions of the
acceptance oracles and finish in a few seconds.
"""
from __future__ import annotations

import math
from typing import Iterator, Tuple

import numpy as np

from ..eprbohm import SingletFunctionalModel, SingletOutcomeModel, chsh
from ..kolmogorov import DiffusionSpec, SolverConfig, TimeWindow, conjugation_defect, forward_evolve
from ..statespace import PhysicalVariable, StateSpace, StatisticalState
from .scenarios import ou_moments

Check = Tuple[str, bool, str]


def run_checks() -> Iterator[Check]:
    space = StateSpace.interval(-8.0, 8.0, 512)
    spec = DiffusionSpec.ornstein_uhlenbeck(1.0, 0.0, math.sqrt(2.0))
    window = TimeWindow(0.0, 1.0)
    cfg = SolverConfig(dt=1e-3)
    p0 = StatisticalState.gaussian(space, 2.0, 0.25)

    pt = forward_evolve(spec, p0, window, cfg)
    m, v = ou_moments(1.0, math.sqrt(2.0), 2.0, 0.25, 1.0)
    err = max(abs(pt.mean() - m), abs(pt.variance() - v))
    yield "ou-moments", err <= 1e-3, f"max moment error {err:.3e} (tol 1e-3)"

    worst = 0.0
    for fn in (lambda y: y, lambda y: y**2, np.cos):
        g = PhysicalVariable.from_function(space, fn)
        worst = max(worst, conjugation_defect(spec, p0, g, window, cfg))
    yield "conjugation-defect", worst <= 1e-3, f"max defect {worst:.3e} over y, y^2, cos y (tol 1e-3)"

    target = 2 * math.sqrt(2.0)
    for label, model in (("r1", SingletFunctionalModel()), ("r2", SingletOutcomeModel())):
        s = chsh(model, 0.0, math.pi / 2, math.pi / 4, 3 * math.pi / 4).abs_S
        yield f"chsh-{label}", abs(s - target) <= 1e-6, f"|S| = {s:.12f} (target 2*sqrt(2), tol 1e-6)"
