"""Problem instances, battery bookkeeping, feasibility checks, and the objective.

Contents
--------
Scenario, UserEnv     immutable problem data (per-slot harvest/gain, caps)
FeasibilityReport     outcome of a strict constraint check
cumulative_harvest    per-slot increments -> running totals
battery_trace         end-of-slot battery levels for one user, no clamping
check_feasible        classify a (transmission, wastage) pair
sum_rate              the objective, in nats

Energy is stored per slot (increments); cumulative views are derived on
demand so the two representations cannot drift apart.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "FEAS_TOL",
    "GAIN_FLOOR",
    "FEASIBLE",
    "SEMI_FEASIBLE",
    "INFEASIBLE",
    "Scenario",
    "UserEnv",
    "FeasibilityReport",
    "cumulative_harvest",
    "battery_trace",
    "user_battery_trace",
    "check_feasible",
    "sum_rate",
]

# Absolute tolerance for every constraint comparison.  Floating-point water
# levels routinely land exactly on a constraint boundary, so exact tests are
# unreliable.
FEAS_TOL = 1e-9

# Gains below this cannot be priced: their inverse overflows the double
# range.  Such slots are treated exactly like zero-gain slots.
GAIN_FLOOR = 1.0 / sys.float_info.max

FEASIBLE = "feasible"
SEMI_FEASIBLE = "semi-feasible"      # only battery-capacity overshoots
INFEASIBLE = "infeasible"


def _as_float_array(x, name, ndim):
    arr = np.asarray(x, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class UserEnv:
    """One transmitter's problem data.

    Parameters
    ----------
    harvest : array of shape (K,)
        Energy harvested during each slot (increments, not running totals).
    gain : array of shape (K,)
        Magnitude-squared channel gain per slot.  May be an effective gain
        already discounted for other users' interference.
    battery_max : float
        Battery capacity.  Zero is allowed and forces slot-by-slot
        consumption.
    power_max : float
        Per-slot energy consumption cap.
    """

    harvest: np.ndarray
    gain: np.ndarray
    battery_max: float
    power_max: float

    def __post_init__(self):
        harvest = _as_float_array(self.harvest, "harvest", 1)
        gain = _as_float_array(self.gain, "gain", 1)
        if harvest.shape != gain.shape:
            raise ValueError("harvest and gain must have the same length")
        if (harvest < 0).any() or (gain < 0).any():
            raise ValueError("harvest and gain entries must be nonnegative")
        if self.battery_max < 0 or self.power_max < 0:
            raise ValueError("battery_max and power_max must be nonnegative")
        harvest.setflags(write=False)
        gain.setflags(write=False)
        object.__setattr__(self, "harvest", harvest)
        object.__setattr__(self, "gain", gain)
        object.__setattr__(self, "battery_max", float(self.battery_max))
        object.__setattr__(self, "power_max", float(self.power_max))

    @property
    def num_slots(self) -> int:
        return self.harvest.size


@dataclass(frozen=True)
class Scenario:
    """An immutable N-user, K-slot problem instance.

    harvest[n, k] and gain[n, k] are per-slot values for user n;
    battery_max[n] and power_max[n] are per-user caps (strictly positive).
    """

    harvest: np.ndarray
    gain: np.ndarray
    battery_max: np.ndarray
    power_max: np.ndarray

    def __post_init__(self):
        harvest = _as_float_array(self.harvest, "harvest", 2)
        gain = _as_float_array(self.gain, "gain", 2)
        battery_max = _as_float_array(self.battery_max, "battery_max", 1)
        power_max = _as_float_array(self.power_max, "power_max", 1)
        n, k = harvest.shape
        if gain.shape != (n, k):
            raise ValueError("gain shape does not match harvest shape")
        if battery_max.shape != (n,) or power_max.shape != (n,):
            raise ValueError("battery_max and power_max must have one entry per user")
        if (harvest < 0).any() or (gain < 0).any():
            raise ValueError("harvest and gain entries must be nonnegative")
        if (battery_max <= 0).any() or (power_max <= 0).any():
            raise ValueError("battery_max and power_max must be positive")
        for arr, nm in ((harvest, "harvest"), (gain, "gain"),
                        (battery_max, "battery_max"), (power_max, "power_max")):
            arr.setflags(write=False)
            object.__setattr__(self, nm, arr)

    @property
    def num_users(self) -> int:
        return self.harvest.shape[0]

    @property
    def num_slots(self) -> int:
        return self.harvest.shape[1]

    def user(self, n: int) -> UserEnv:
        """Slice out user n's data."""
        return UserEnv(self.harvest[n], self.gain[n],
                       float(self.battery_max[n]), float(self.power_max[n]))

    # -- canonical JSON format ------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "num_users": self.num_users,
            "num_slots": self.num_slots,
            "users": [
                {
                    "harvest": self.harvest[n].tolist(),
                    "gain": self.gain[n].tolist(),
                    "battery_max": float(self.battery_max[n]),
                    "power_max": float(self.power_max[n]),
                }
                for n in range(self.num_users)
            ],
        }

    def to_json(self, indent: int | None = None) -> str:
        return json.dumps(self.to_json_dict(), indent=indent)

    @classmethod
    def from_json_dict(cls, obj: dict) -> "Scenario":
        try:
            users = obj["users"]
            n, k = int(obj["num_users"]), int(obj["num_slots"])
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed scenario object: {exc}") from exc
        if len(users) != n:
            raise ValueError(f"scenario declares {n} users but lists {len(users)}")
        harvest = np.array([u["harvest"] for u in users], dtype=float)
        gain = np.array([u["gain"] for u in users], dtype=float)
        if harvest.shape != (n, k) or gain.shape != (n, k):
            raise ValueError("user vectors do not match the declared num_slots")
        return cls(
            harvest=harvest,
            gain=gain,
            battery_max=np.array([u["battery_max"] for u in users], dtype=float),
            power_max=np.array([u["power_max"] for u in users], dtype=float),
        )

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        return cls.from_json_dict(json.loads(text))

    @classmethod
    def single_user(cls, env: UserEnv) -> "Scenario":
        """Wrap a single-user environment as an N=1 scenario."""
        return cls(env.harvest[None, :], env.gain[None, :],
                   np.array([env.battery_max]), np.array([env.power_max]))


@dataclass(frozen=True)
class FeasibilityReport:
    """Classification of an energy schedule.

    status is FEASIBLE when there are no violations, SEMI_FEASIBLE when the
    only violations are battery levels above capacity, INFEASIBLE otherwise.
    Each violation is a (user, slot, kind, magnitude) tuple.
    """

    status: str
    violations: tuple = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return self.status == FEASIBLE


def cumulative_harvest(harvest) -> np.ndarray:
    """Running total of per-slot harvested energy (along the last axis)."""
    return np.cumsum(np.asarray(harvest, dtype=float), axis=-1)


def user_battery_trace(harvest, p, d=None) -> np.ndarray:
    """End-of-slot battery levels from one user's per-slot vectors.

    level[k] = harvested-through-k - consumed-through-k - wasted-through-k.
    No clamping: an infeasible schedule shows up as a level outside
    [0, battery_max], which `check_feasible` then flags.
    """
    harvest = np.asarray(harvest, dtype=float)
    p = np.asarray(p, dtype=float)
    if p.shape != harvest.shape:
        raise ValueError("p must have one entry per slot")
    total = np.cumsum(harvest - p)
    if d is not None:
        d = np.asarray(d, dtype=float)
        if d.shape != harvest.shape:
            raise ValueError("d must have one entry per slot")
        total -= np.cumsum(d)
    return total


def battery_trace(scenario: Scenario, user: int, p, d) -> np.ndarray:
    """End-of-slot battery levels for one user of a scenario."""
    return user_battery_trace(scenario.harvest[user], p, d)


def check_feasible(scenario: Scenario, p, d, tol: float = FEAS_TOL) -> FeasibilityReport:
    """Check every constraint of the schedule pair (p, d) at tolerance tol.

    Constraints per user and slot: 0 <= p <= power_max, d >= 0, and the
    battery level stays within [0, battery_max].
    """
    p = _as_float_array(p, "p", 2)
    d = _as_float_array(d, "d", 2)
    shape = (scenario.num_users, scenario.num_slots)
    if p.shape != shape or d.shape != shape:
        raise ValueError(f"schedules must have shape {shape}")

    violations = []
    for n in range(scenario.num_users):
        cap = scenario.power_max[n]
        bmax = scenario.battery_max[n]
        levels = user_battery_trace(scenario.harvest[n], p[n], d[n])
        for k in range(scenario.num_slots):
            if p[n, k] < -tol:
                violations.append((n, k, "power-negative", -p[n, k]))
            if p[n, k] > cap + tol:
                violations.append((n, k, "power-above-cap", p[n, k] - cap))
            if d[n, k] < -tol:
                violations.append((n, k, "wastage-negative", -d[n, k]))
            if levels[k] < -tol:
                violations.append((n, k, "battery-negative", -levels[k]))
            if levels[k] > bmax + tol:
                violations.append((n, k, "battery-above-cap", levels[k] - bmax))

    if not violations:
        status = FEASIBLE
    elif all(v[2] == "battery-above-cap" for v in violations):
        status = SEMI_FEASIBLE
    else:
        status = INFEASIBLE
    return FeasibilityReport(status=status, violations=tuple(violations))


def sum_rate(scenario: Scenario, p) -> float:
    """Sum over slots of ln(1 + sum_n p[n,k] * gain[n,k]), in nats."""
    p = _as_float_array(p, "p", 2)
    if p.shape != scenario.gain.shape:
        raise ValueError("p shape does not match the scenario")
    return float(np.sum(np.log1p(np.sum(p * scenario.gain, axis=0))))
