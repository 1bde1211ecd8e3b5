"""Domain types shared across the package.

All quantities are SI: positions in metres along a vehicle's fixed path,
speeds in m/s, accelerations in m/s^2, times in seconds.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Hashable, NamedTuple, Optional


class ParameterError(ValueError):
    """A value violates a construction-time invariant."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def _require_finite(field: str, value: float) -> None:
    if not math.isfinite(value):
        raise ParameterError(field, f"must be finite, got {value!r}")


@dataclass(frozen=True)
class VehicleState:
    p: float
    v: float

    def __post_init__(self):
        _require_finite("p", self.p)
        _require_finite("v", self.v)


@dataclass(frozen=True)
class VehicleParams:
    """Per-vehicle controller tuning.

    ``alpha`` trades speed tracking against control effort, ``gamma`` is the
    standstill gap behind a preceding vehicle, ``kappa_T`` and ``kappa_R``
    are the crossing and rear-end barrier gains.
    """

    v_d: float = 30.0
    alpha: float = 0.25
    u_max: float = 25.0
    gamma: float = 1.0
    kappa_T: float = 0.5
    kappa_R: float = 100.0

    def __post_init__(self):
        validate_params(self)


REFERENCE_PARAMS = dict(alpha=0.25, v_d=30.0, gamma=1.0, kappa_T=0.5, kappa_R=100.0, u_max=25.0)

# (field, predicate, message), checked in declaration order
_PARAM_RULES = (
    ("v_d", lambda x: x >= 0.0, "must be >= 0"),
    ("alpha", lambda x: x > 0.0, "must be > 0"),
    ("u_max", lambda x: x > 0.0, "must be > 0"),
    ("gamma", lambda x: x >= 0.0, "must be >= 0"),
    ("kappa_T", lambda x: x > 0.0, "must be > 0"),
    ("kappa_R", lambda x: x > 0.0, "must be > 0"),
)


def validate_params(params: VehicleParams) -> VehicleParams:
    """Return ``params`` unchanged, or raise ParameterError naming the first bad field."""
    for field, ok, message in _PARAM_RULES:
        value = getattr(params, field)
        _require_finite(field, value)
        if not ok(value):
            raise ParameterError(field, f"{message}, got {value!r}")
    return params


@dataclass(frozen=True)
class CrossingWindow:
    """Scheduled interval ``[t_lo, t_hi]`` for crossing the node at ``p_node``."""

    node_id: Hashable
    p_node: float
    t_lo: float
    t_hi: float

    def __post_init__(self):
        _require_finite("p_node", self.p_node)
        _require_finite("t_lo", self.t_lo)
        _require_finite("t_hi", self.t_hi)
        if not self.t_lo < self.t_hi:
            raise ParameterError("t_hi", f"window must have t_lo < t_hi, got [{self.t_lo}, {self.t_hi}]")


@dataclass(frozen=True)
class PrecedingSignal:
    """Position and speed of the vehicle ahead; both ``None`` when there is none."""

    delta: Optional[float] = None
    delta_dot: Optional[float] = None

    def __post_init__(self):
        if (self.delta is None) != (self.delta_dot is None):
            raise ParameterError("delta", "delta and delta_dot must both be present or both absent")
        if self.delta is not None:
            _require_finite("delta", self.delta)
            _require_finite("delta_dot", self.delta_dot)

    @property
    def present(self) -> bool:
        return self.delta is not None


NO_PRECEDING = PrecedingSignal()


class ControlBounds(NamedTuple):
    """Admissible control interval; crossed bounds are kept as they are."""

    u_lower: float
    u_upper: float

    @property
    def feasible(self) -> bool:
        return self.u_lower <= self.u_upper


class ControllerMode(str, enum.Enum):
    NOMINAL = "Nominal"
    AWAITING_SCHEDULE = "AwaitingSchedule"
    SAFE_STOP = "SafeStop"


def sorted_schedule(windows) -> tuple:
    """Sort windows by node position and check arrival times do not decrease along the path."""
    ordered = tuple(sorted(windows, key=lambda w: w.p_node))
    for prev, nxt in zip(ordered, ordered[1:]):
        if nxt.t_lo < prev.t_lo:
            raise ParameterError(
                "t_lo", f"window for node {nxt.node_id!r} opens before upstream node {prev.node_id!r}"
            )
    return ordered
