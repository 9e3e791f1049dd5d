"""Registered measurement models with their prepared states and test variables.

Every dual-pair model that should satisfy the classical/observational average
identity is listed by :func:`registered_models`. :func:`negative_control`
returns a deliberately broken pairing that must not.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .chameleon import (
    ChameleonMeasurement,
    DualDynamics,
    MeasurementSetting,
    SettingModel,
    mismatched,
    ou_measurement,
)
from .eprbohm import SingletFunctionalModel, SingletOutcomeModel, as_chameleon, outcome_chameleon
from .kolmogorov import DiffusionSpec, SolverConfig, TimeWindow
from .statespace import PhysicalVariable, StateSpace, StatisticalState


@dataclass(frozen=True)
class RegisteredModel:
    name: str
    measurement: ChameleonMeasurement
    settings: Tuple[MeasurementSetting, ...]
    p0: StatisticalState
    family: Tuple[PhysicalVariable, ...] = ()


def ou_family(space: StateSpace) -> Tuple[PhysicalVariable, ...]:
    return (
        PhysicalVariable.from_function(space, lambda y: y, name="y"),
        PhysicalVariable.from_function(space, lambda y: y**2, name="y2"),
        PhysicalVariable.from_function(space, np.cos, name="cos"),
    )


def registered_models(
    n: int = 512,
    lower: float = -8.0,
    upper: float = 8.0,
    dt: float = 1e-3,
    duration: float = 1.0,
    mean0: float = 2.0,
    var0: float = 0.25,
    sigma: float = math.sqrt(2.0),
    thetas: Sequence[float] = (1.0, 2.0),
    alice_angles: Sequence[float] = (0.0, math.pi / 2),
    bob_angles: Sequence[float] = (math.pi / 4, 3 * math.pi / 4),
    cells: int = 360,
) -> List[RegisteredModel]:
    space = StateSpace.interval(lower, upper, n)
    window = TimeWindow(0.0, duration)
    cfg = SolverConfig(dt=dt)
    p0 = StatisticalState.gaussian(space, mean0, var0)
    family = ou_family(space)
    table = {f"theta={th:g}": th for th in thetas}
    ou_settings = tuple(MeasurementSetting(k, (th,)) for k, th in table.items())

    ident_obs = family[0]
    identity = ChameleonMeasurement.from_table(
        {"id": SettingModel(DualDynamics.identity(duration), ident_obs)}, name="identity"
    )
    models = [
        RegisteredModel("identity", identity, (MeasurementSetting("id"),), p0, family),
        RegisteredModel(
            "ou-exact-adjoint", ou_measurement(table, space, window, cfg, sigma, True), ou_settings, p0, family
        ),
        RegisteredModel(
            "ou-independent", ou_measurement(table, space, window, cfg, sigma, False), ou_settings, p0, family
        ),
    ]

    r1 = SingletFunctionalModel(cells)
    alice, bob = as_chameleon(r1, duration)
    models.append(
        RegisteredModel(
            "r1-alice", alice, tuple(MeasurementSetting.angle(f"a={a:.6g}", a) for a in alice_angles), r1.initial_state()
        )
    )
    models.append(
        RegisteredModel(
            "r1-bob", bob, tuple(MeasurementSetting.angle(f"b={b:.6g}", b) for b in bob_angles), r1.initial_state()
        )
    )
    pairs = tuple(
        MeasurementSetting.angles(f"a={a:.6g},b={b:.6g}", a, b) for a in alice_angles for b in bob_angles
    )
    models.append(
        RegisteredModel(
            "r2-singlet",
            outcome_chameleon(SingletOutcomeModel(), duration, cells),
            pairs,
            StatisticalState.uniform(StateSpace.circle(cells)),
        )
    )
    return models


def negative_control(
    n: int = 512,
    lower: float = -8.0,
    upper: float = 8.0,
    dt: float = 1e-3,
    duration: float = 1.0,
    mean0: float = 2.0,
    var0: float = 0.25,
    sigma: float = math.sqrt(2.0),
) -> RegisteredModel:
    """Forward OU relaxation at rate 1 paired with backward OU at rate 3."""
    space = StateSpace.interval(lower, upper, n)
    window = TimeWindow(0.0, duration)
    cfg = SolverConfig(dt=dt)
    slow = DualDynamics.diffusion(DiffusionSpec.ornstein_uhlenbeck(1.0, 0.0, sigma), window, cfg)
    fast = DualDynamics.diffusion(DiffusionSpec.ornstein_uhlenbeck(3.0, 0.0, sigma), window, cfg)
    family = ou_family(space)
    m = ChameleonMeasurement.from_table(
        {"mismatch": SettingModel(mismatched(slow, fast), family[0])}, name="negative-control"
    )
    return RegisteredModel(
        "negative-control", m, (MeasurementSetting("mismatch"),), StatisticalState.gaussian(space, mean0, var0), family
    )
