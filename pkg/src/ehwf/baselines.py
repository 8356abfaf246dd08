"""Comparison policies: greedy, balanced, and staircase water-filling.

Contents
--------
greedy_policy                consume as much as possible every slot
balanced_policy              aim for the same consumption every slot
staircase_wf                 water-filling under causality only (no caps)
modified_staircase           staircase clipped to the cap and the battery
iterative_modified_staircase sweep loop with modified_staircase responses
non_iterative_multiuser      per-user policy on raw gains, no interaction

All single-user policies return feasible (p, d) pairs; the multi-user
assemblers stack per-user results into a schedule matrix.
"""

from __future__ import annotations

import numpy as np

from .model import Scenario, UserEnv, cumulative_harvest
from .single_user import optimal_wastage, solve_reduced
from .mac import MacSolution, iterate_best_response

__all__ = [
    "greedy_policy",
    "balanced_policy",
    "staircase_wf",
    "modified_staircase",
    "iterative_modified_staircase",
    "non_iterative_multiuser",
]


def greedy_policy(env: UserEnv):
    """Consume up to the cap every slot; identical to the wastage recurrence."""
    d, p, _ = optimal_wastage(env)
    return p, d


def balanced_policy(env: UserEnv):
    """Aim for the average per-slot harvest, bounded by cap and availability.

    The target is the pre-wastage mean of the harvest.  Shortfalls are not
    carried forward; battery overflow is wasted where it occurs.
    """
    k_slots = env.num_slots
    tau = float(env.harvest.sum()) / k_slots
    p = np.zeros(k_slots)
    d = np.zeros(k_slots)
    level = 0.0
    for k in range(k_slots):
        avail = level + env.harvest[k]
        p[k] = min(tau, env.power_max, avail)
        level = avail - p[k]
        d[k] = max(level - env.battery_max, 0.0)
        level -= d[k]
    return p, d


def staircase_wf(env: UserEnv, with_levels: bool = False):
    """Water-filling under energy causality alone, battery and cap unbounded.

    Runs the segment search with both limits at infinity, so only
    depletion points partition the horizon and the water levels step
    upward over time.  Returns p, or (p, levels) when with_levels is set.
    """
    unbounded = UserEnv(env.harvest, env.gain,
                        battery_max=np.inf, power_max=np.inf)
    # no cap and no capacity: nothing overflows, the budget is the raw harvest
    p, _, levels = solve_reduced(unbounded, cumulative_harvest(env.harvest))
    return (p, levels) if with_levels else p


def modified_staircase(env: UserEnv):
    """Staircase allocation clipped to the cap and to the banked energy.

    The unconstrained staircase schedule is cut down slot by slot to what
    the cap and the battery actually allow; energy the clipped schedule
    leaves overflowing the battery is wasted on the spot.
    """
    stair = staircase_wf(env)
    k_slots = env.num_slots
    p = np.zeros(k_slots)
    d = np.zeros(k_slots)
    level = 0.0
    for k in range(k_slots):
        avail = level + env.harvest[k]
        p[k] = min(stair[k], env.power_max, avail)
        level = avail - p[k]
        d[k] = max(level - env.battery_max, 0.0)
        level -= d[k]
    return p, d


def iterative_modified_staircase(scenario: Scenario, eps: float = 1e-5,
                                 max_iter: int = 50) -> MacSolution:
    """Round-robin sweeps where each response is the modified staircase."""
    def respond(env, _n):
        p_n, _ = modified_staircase(env)
        return p_n
    return iterate_best_response(scenario, respond, eps=eps, max_iter=max_iter)


_POLICIES = {
    "greedy": greedy_policy,
    "balanced": balanced_policy,
    "staircase": modified_staircase,
}


def non_iterative_multiuser(policy: str, scenario: Scenario) -> np.ndarray:
    """Apply a single-user policy to every user on its raw gains.

    Users do not react to each other; the stacked schedule is what each
    would transmit alone.  policy is one of "greedy", "balanced",
    "staircase" (the capped staircase).
    """
    try:
        fn = _POLICIES[policy]
    except KeyError:
        raise ValueError(f"unknown policy {policy!r}; "
                         f"expected one of {sorted(_POLICIES)}") from None
    p = np.zeros_like(scenario.harvest)
    for n in range(scenario.num_users):
        p[n], _ = fn(scenario.user(n))
    return p
