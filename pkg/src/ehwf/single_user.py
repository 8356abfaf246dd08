"""Single-user optimal energy scheduling.

Contents
--------
optimal_wastage        minimal-total-wastage forward recurrence
effective_energy       cumulative harvest net of wastage
segment_target_energy  energy a boundary pair forces through its segment
water_fill_segment     capped water-filling at one constant level
classify_segment       feasible / semi-feasible / infeasible for a segment
solve_reduced          forward/backward boundary search on given energy
solve_single           the full pipeline: wastage, then boundary search

The solver works in two stages.  First the wastage schedule is fixed by a
greedy recurrence (waste only what overflows the battery, after consuming
as much as the cap allows); this is total-wastage minimal and leaves the
transmission problem over a pure polytope.  Second, the horizon is split
into segments by battery-depletion points (BDP, level 0) and
battery-full points (BFP, level at capacity); within a segment the
optimal allocation is capped water-filling at a single level, and the
segment boundaries are located by a forward scan with a backward
correction step whenever a candidate segment overfills the battery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    FEAS_TOL,
    FEASIBLE,
    GAIN_FLOOR,
    INFEASIBLE,
    SEMI_FEASIBLE,
    UserEnv,
    cumulative_harvest,
)

__all__ = [
    "BDP",
    "BFP",
    "SegmentSolution",
    "optimal_wastage",
    "effective_energy",
    "segment_target_energy",
    "water_fill_segment",
    "classify_segment",
    "solve_reduced",
    "solve_single",
]

BDP = "BDP"      # battery-depletion point: level 0, water level may rise after
BFP = "BFP"      # battery-full point: level at capacity, water level may drop


def optimal_wastage(env: UserEnv):
    """Greedy wastage: consume up to the cap, waste only battery overflow.

    Returns (d_star, p_greedy, battery).  d_star has minimal total wastage
    among all feasible wastage schedules; p_greedy is the max-consumption
    schedule that induces it, and battery its end-of-slot trace.
    """
    k_slots = env.num_slots
    d = np.zeros(k_slots)
    p = np.zeros(k_slots)
    battery = np.zeros(k_slots)
    level = 0.0
    for k in range(k_slots):
        avail = level + env.harvest[k]
        p[k] = min(env.power_max, avail)
        d[k] = max(avail - p[k] - env.battery_max, 0.0)
        level = avail - p[k] - d[k]
        battery[k] = level
    return d, p, battery


def effective_energy(env: UserEnv, d_star) -> np.ndarray:
    """Cumulative harvested energy minus cumulative wastage."""
    d_star = np.asarray(d_star, dtype=float)
    return cumulative_harvest(env.harvest) - np.cumsum(d_star)


def segment_target_energy(a, kind_a, b, kind_b, e_tilde, battery_max, power_max) -> float:
    """Total energy segment (a, b] must consume, given its boundary kinds.

    Boundary slots use the 1-based convention: boundary a is the end of
    slot a, so the segment covers slots a+1 .. b.  A BFP start adds a
    battery's worth of stored energy; a BFP end leaves one behind.  The
    per-slot cap bounds the total at (b-a) * power_max.
    """
    e_tilde = np.asarray(e_tilde, dtype=float)
    e_a = e_tilde[a - 1] if a > 0 else 0.0
    e_b = e_tilde[b - 1]
    swing = (battery_max if kind_a == BFP else 0.0) \
        - (battery_max if kind_b == BFP else 0.0)
    supply = e_b - e_a + swing
    return float(max(0.0, min((b - a) * power_max, supply)))


@dataclass(frozen=True)
class SegmentSolution:
    """One segment's allocation p, water level dual w, and classification.

    The water level as a height is 1/w; w = +inf is the sentinel for an
    empty segment (no positive allocation), whose height reads as 0.
    """

    p: np.ndarray
    w: float
    status: str | None = None

    @property
    def height(self) -> float:
        return 0.0 if not np.isfinite(self.w) else 1.0 / self.w


def water_fill_segment(gains, target_energy, power_max) -> SegmentSolution:
    """Allocate target_energy across slots at one water level, capped per slot.

    Solves sum_k min(P, max(0, L - 1/gain_k)) = target_energy for the level
    L exactly: the left side is piecewise linear and nondecreasing in L, so
    the solve walks its breakpoints instead of iterating.  Zero-gain slots
    always get 0, as do slots whose gain is too small to invert.  Returns
    p and w = 1/L.
    """
    gains = np.asarray(gains, dtype=float)
    glist = gains.tolist()
    n = gains.size
    cap = float(power_max)
    finite_cap = math.isfinite(cap)
    target = float(target_energy)
    if target <= 0.0:
        return SegmentSolution(p=np.zeros(n), w=np.inf)

    inv = [1.0 / g for g in glist if g > GAIN_FLOOR]
    npos = len(inv)
    if npos == 0:
        raise ValueError("cannot water-fill positive energy over all-zero gains")
    if finite_cap:
        if target > n * cap + FEAS_TOL:
            raise ValueError("target energy exceeds segment capacity")
        if target > npos * cap + FEAS_TOL:
            raise ValueError("target energy exceeds positive-gain slot capacity")
        target = min(target, npos * cap)

    if n == 1:
        # single slot: the clamped target, no level search needed
        val = min(target, cap) if finite_cap else target
        return SegmentSolution(p=np.array([val]), w=1.0 / (inv[0] + val))

    # Total consumption as a function of the level L is piecewise linear;
    # its slope rises by one where a slot starts filling (L = 1/g) and
    # drops by one where a slot saturates (L = 1/g + P).  Sweep the
    # breakpoints until the running total crosses the target.
    events = [(v, 1) for v in inv]
    if finite_cap:
        events += [(v + cap, -1) for v in inv]
    events.sort()
    slope = 0
    total = 0.0
    prev = events[0][0]
    level = None
    for x, delta in events:
        if x > prev and slope > 0:
            step = slope * (x - prev)
            if total + step >= target:
                level = prev + (target - total) / slope
                break
            total += step
        prev = x
        slope += delta
    if level is None:
        if finite_cap:
            level = prev                  # target == npos * cap up to tolerance
        else:
            level = prev + (target - total) / slope

    p_list = [min(cap, max(0.0, level - 1.0 / g)) if g > GAIN_FLOOR else 0.0
              for g in glist]
    # One exact correction pass: spread the float residual over the slots
    # strictly between the bounds, where the level actually moves mass.
    resid = target - math.fsum(p_list)
    if resid != 0.0:
        interior = [i for i, v in enumerate(p_list) if 0.0 < v < cap]
        if interior:
            bump = resid / len(interior)
            for i in interior:
                p_list[i] = min(cap, max(0.0, p_list[i] + bump))
    return SegmentSolution(p=np.array(p_list), w=1.0 / level)


def _segment_battery(p, e_slice, base_energy, start_level):
    # battery through the segment, measured from the left boundary's level
    return start_level + (np.asarray(e_slice, dtype=float) - base_energy) - np.cumsum(p)


def _status_of(p, battery, battery_max, power_max, tol):
    if float(np.min(p)) < -tol or float(np.max(p)) > power_max + tol \
            or float(np.min(battery)) < -tol:
        return INFEASIBLE
    if float(np.max(battery)) > battery_max + tol:
        return SEMI_FEASIBLE
    return FEASIBLE


def classify_segment(p, e_tilde, battery_max, power_max,
                     base_energy=0.0, start_level=0.0, tol=FEAS_TOL) -> str:
    """Classify a segment allocation against the battery bounds.

    p and e_tilde are the segment's slice of the allocation and of the
    cumulative effective energy; base_energy and start_level describe the
    left boundary (cumulative energy already seen, battery carried in).
    Semi-feasible means the only violations are levels above battery_max.
    """
    p = np.asarray(p, dtype=float)
    battery = _segment_battery(p, e_tilde, base_energy, start_level)
    return _status_of(p, battery, battery_max, power_max, tol)


def _segment_schedule(env: UserEnv, e_tilde, a, kind_a, b, kind_b):
    """Fill segment (a, b] for the given boundary kinds and classify it.

    Returns (p_segment, height, status, battery).  When the boundary
    condition forces more energy through the segment than its positive-gain
    slots can carry under the cap, the surplus is burned on zero-gain slots
    (earliest first); it contributes no rate either way.
    """
    bmax, cap = env.battery_max, env.power_max
    target = segment_target_energy(a, kind_a, b, kind_b, e_tilde, bmax, cap)
    gains = env.gain[a:b]

    if b - a >= 48 and target > 0.0 and float(np.min(gains)) > GAIN_FLOOR:
        fast = _segment_schedule_dense(env, e_tilde, a, kind_a, b, target, gains)
        if fast is not None:
            return fast

    unmet = 0.0
    if target <= 0.0:
        p_seg = np.zeros(b - a)
        height = 0.0
    else:
        pos = gains > GAIN_FLOOR
        npos = int(np.count_nonzero(pos))
        fill_target = target
        if npos and math.isfinite(cap):
            fill_target = min(target, npos * cap)
        if npos:
            sol = water_fill_segment(gains, fill_target, cap)
            p_seg = sol.p
            height = sol.height
        else:
            fill_target = 0.0
            p_seg = np.zeros(b - a)
            height = 0.0
        surplus = target - fill_target
        if surplus > FEAS_TOL:
            # Burn the surplus on zero-gain slots, earliest first but never
            # drawing the battery negative; it contributes no rate.
            p_list = p_seg.tolist()
            glist = gains.tolist()
            base_w = float(e_tilde[a - 1]) if a > 0 else 0.0
            level_w = bmax if kind_a == BFP else 0.0
            for i, e in enumerate(e_tilde[a:b].tolist()):
                level_w += e - base_w
                base_w = e
                if glist[i] <= GAIN_FLOOR and surplus > 0.0:
                    room = cap - p_list[i] if math.isfinite(cap) else surplus
                    u = min(room, surplus, level_w - p_list[i])
                    if u > 0.0:
                        p_list[i] += u
                        surplus -= u
                level_w -= p_list[i]
            p_seg = np.array(p_list)
            unmet = surplus

    # battery walk and classification in one pass over plain floats
    base = float(e_tilde[a - 1]) if a > 0 else 0.0
    level = bmax if kind_a == BFP else 0.0
    battery = []
    b_min = math.inf
    b_max_seen = -math.inf
    p_bad = unmet > FEAS_TOL
    cap_hi = cap + FEAS_TOL
    for e, q in zip(e_tilde[a:b].tolist(), p_seg.tolist()):
        if q < -FEAS_TOL or q > cap_hi:
            p_bad = True
        level += e - base - q
        base = e
        battery.append(level)
        if level < b_min:
            b_min = level
        if level > b_max_seen:
            b_max_seen = level
    if p_bad or b_min < -FEAS_TOL:
        status = INFEASIBLE
    elif b_max_seen > bmax + FEAS_TOL:
        status = SEMI_FEASIBLE
    else:
        status = FEASIBLE
    return p_seg, height, status, battery


def _segment_schedule_dense(env, e_tilde, a, kind_a, b, target, gains):
    """Array fast path for long segments with strictly positive gains.

    Same result as the scalar walk in _segment_schedule: the level solve
    replaces the event sweep and the battery comes from one cumsum.  Returns
    None when the level solve cannot place the target (caller falls back).
    """
    bmax, cap = env.battery_max, env.power_max
    inv = 1.0 / gains
    level = _level_for_consumption(inv, cap, target)
    if not math.isfinite(level):
        return None
    p_seg = np.clip(level - inv, 0.0, cap)
    resid = target - math.fsum(p_seg.tolist())
    if resid != 0.0:
        interior = (p_seg > 0.0) & (p_seg < cap)
        n_int = int(np.count_nonzero(interior))
        if n_int:
            p_seg[interior] += resid / n_int
            np.clip(p_seg, 0.0, cap, out=p_seg)
    base = float(e_tilde[a - 1]) if a > 0 else 0.0
    start = bmax if kind_a == BFP else 0.0
    battery = start + (e_tilde[a:b] - base) - np.cumsum(p_seg)
    if float(np.min(battery)) < -FEAS_TOL:
        status = INFEASIBLE
    elif float(np.max(battery)) > bmax + FEAS_TOL:
        status = SEMI_FEASIBLE
    else:
        status = FEASIBLE
    return p_seg, level, status, battery


def _level_for_consumption(inv, cap, target):
    """Smallest water level whose total draw over these slots reaches target.

    inv holds the inverse gains; each slot draws clamp(level - inv, 0, cap).
    Returns inf when every slot saturates below the target.
    """
    v = np.sort(np.asarray(inv, dtype=float))
    w = np.concatenate(([0.0], np.cumsum(v)))
    if target <= 0.0:
        return float(v[0])
    if math.isfinite(cap):
        knots = np.unique(np.concatenate((v, v + cap)))
        nsat = np.searchsorted(v, knots - cap, side="right")
    else:
        knots = np.unique(v)
        nsat = np.zeros(len(knots), dtype=int)
    nlt = np.searchsorted(v, knots, side="left")
    drawn = knots * (nlt - nsat) - (w[nlt] - w[nsat])
    if math.isfinite(cap):
        drawn = drawn + cap * nsat
    idx = int(np.searchsorted(drawn, target, side="left"))
    if idx >= len(knots):
        slope = len(v) - (int(nsat[-1]) if math.isfinite(cap) else 0)
        if slope <= 0:
            return math.inf
        return float(knots[-1] + (target - drawn[-1]) / slope)
    if idx == 0:
        return float(knots[0])
    lo, hi = float(knots[idx - 1]), float(knots[idx])
    clo, chi = float(drawn[idx - 1]), float(drawn[idx])
    if chi <= clo:
        return hi
    return lo + (target - clo) * (hi - lo) / (chi - clo)


def _scan_skip_flags(inv, supply, targets, cap, tol):
    """Mark scan candidates that provably cannot fill without going negative.

    A candidate's fill level cannot exceed the drain level of any prefix it
    spans, so comparing per-prefix draw at a running minimum of prefix drain
    levels rules candidates out without filling them.  Margins keep the test
    one-sided: a flagged candidate is infeasible, an unflagged one is merely
    undecided.  Returns None when the structure is too irregular to help.
    """
    m = len(supply)
    skip = np.zeros(m, dtype=bool)
    safe = 1e-6 * max(1.0, float(np.max(supply)))
    lim = supply + tol + safe
    level = math.inf
    pos = 0
    records = 0
    while pos < m:
        if math.isinf(level) and not math.isfinite(cap):
            drawn = np.full(m, math.inf)
        else:
            drawn = np.cumsum(np.minimum(cap, np.maximum(0.0, level - inv)))
        over = drawn[pos:] > lim[pos:]
        t0 = pos + int(np.argmax(over)) if over.any() else -1
        if t0 < 0:
            skip[pos:] = drawn[pos:] < targets[pos:] - safe
            break
        if t0 > pos:
            seg = slice(pos, t0)
            skip[seg] = drawn[seg] < targets[seg] - safe
        records += 1
        if records > 48:
            return None
        level = _level_for_consumption(inv[:t0 + 1], cap, float(lim[t0]))
        pos = t0 + 1
    return skip


def _backward_search(env, e_tilde, a, kind_a, battery0):
    """Resolve a semi-feasible segment by pinning its worst overflow as a BFP.

    Repeatedly take the largest slot whose battery exceeds capacity and
    refill up to it assuming a full battery there.  A feasible refill
    accepts that BFP; a semi-feasible one keeps shrinking; an infeasible
    one (the refill breaks causality) hands the slot back so the caller
    can rescan below it.
    """
    battery = battery0
    limit = env.battery_max + FEAS_TOL
    prev_k = None
    while True:
        over = np.flatnonzero(np.asarray(battery) > limit)
        k = a + 1 + int(over[-1]) if over.size else None
        if k is None:
            raise RuntimeError("semi-feasible segment has no overflow slot")
        if prev_k is not None and k >= prev_k:
            # Each refill pins the battery at its endpoint, so the worst
            # overflow must move left; kept as a hard stop.
            raise RuntimeError("backward search made no progress")
        prev_k = k
        p_seg, height, status, battery = _segment_schedule(env, e_tilde, a, kind_a, k, BFP)
        if status == FEASIBLE:
            return ("accept", k, p_seg, height)
        if status == INFEASIBLE:
            return ("rescan", k)


def solve_reduced(env: UserEnv, e_tilde):
    """Optimal transmission schedule for a fixed cumulative energy budget.

    e_tilde is the cumulative energy actually available per slot (harvest
    net of wastage).  Returns (p, boundaries, water_levels) where
    boundaries is the ordered (slot, kind) list starting at (0, BDP) and
    water_levels holds one height per segment (0 for empty segments).

    Each round scans right endpoints downward from the current goal and
    keeps the first candidate whose fill is feasible (confirm a boundary)
    or semi-feasible (run the backward search).  Confirming any boundary
    resets the goal to the horizon; a backward search whose refill breaks
    causality lowers the goal to its overflow slot, a restriction that
    lives only until the next confirmed boundary.
    """
    k_slots = env.num_slots
    e_tilde = np.asarray(e_tilde, dtype=float)
    cap = env.power_max
    p = np.zeros(k_slots)
    confirmed = [(0, BDP)]
    heights = []
    goal = (k_slots, BDP)
    # the goal only moves down between confirms, so rounds are bounded
    max_rounds = 2 * (k_slots + 1) * (k_slots + 2)
    rounds = 0

    while confirmed[-1][0] < k_slots:
        rounds += 1
        if rounds > max_rounds:
            raise RuntimeError("boundary search failed to terminate")
        a, kind_a = confirmed[-1]
        b, kind_b = goal
        base = float(e_tilde[a - 1]) if a > 0 else 0.0
        start = env.battery_max if kind_a == BFP else 0.0
        supply = start + (e_tilde[a:b] - base)

        # Capacity-counting filter: any schedule under the cap consumes at
        # least target - (k1 - t) * cap by slot t, so a candidate whose
        # implied battery floor dips negative can be skipped unfilled.
        pref_min = None
        if math.isfinite(cap):
            q = supply - cap * np.arange(1, b - a + 1)
            pref_min = np.minimum.accumulate(q).tolist()

        # Prefix drain-level filter: skips candidates whose fill provably
        # overdraws some prefix.  Needs strictly positive gains to price
        # every slot.
        gains_scan = env.gain[a:b]
        skip = None
        if b - a > 8 and float(np.min(gains_scan)) > GAIN_FLOOR:
            span = np.arange(1, b - a + 1, dtype=float)
            targets = supply.copy()
            if kind_b == BFP:
                targets[-1] -= env.battery_max
            np.minimum(targets, cap * span, out=targets)
            np.maximum(targets, 0.0, out=targets)
            skip = _scan_skip_flags(1.0 / gains_scan, supply, targets, cap, FEAS_TOL)

        accept = None
        rescan = None
        for k1 in range(b, a, -1):
            kind1 = kind_b if k1 == b else BDP
            if skip is not None and skip[k1 - a - 1]:
                continue
            if pref_min is not None:
                target = segment_target_energy(a, kind_a, k1, kind1,
                                               e_tilde, env.battery_max, cap)
                if pref_min[k1 - a - 1] + (k1 - a) * cap < target - FEAS_TOL:
                    continue
            p_seg, height, status, battery = _segment_schedule(
                env, e_tilde, a, kind_a, k1, kind1)
            if status == FEASIBLE:
                accept = (k1, kind1, p_seg, height)
                break
            if status == SEMI_FEASIBLE:
                outcome = _backward_search(env, e_tilde, a, kind_a, battery)
                if outcome[0] == "accept":
                    _, k, p_seg, height = outcome
                    accept = (k, BFP, p_seg, height)
                else:
                    rescan = outcome[1]
                break
        if accept is not None:
            k, kind, p_seg, height = accept
            p[a:k] = p_seg
            confirmed.append((k, kind))
            heights.append(height)
            goal = (k_slots, BDP)
        elif rescan is not None:
            goal = (rescan, BFP)
        else:
            raise RuntimeError("forward search exhausted all segment endpoints")

    return p, confirmed, heights


def solve_single(env: UserEnv):
    """Maximum-rate schedule for one user: wastage first, then segments.

    Returns (p_star, d_star, boundaries, water_levels).
    """
    d_star, _, _ = optimal_wastage(env)
    e_tilde = effective_energy(env, d_star)
    p_star, boundaries, levels = solve_reduced(env, e_tilde)
    return p_star, d_star, boundaries, levels
