"""Mean sum rate vs battery size for every scheduling policy.

Runs a small Monte Carlo sweep (inline config, no preset) and prints the
resulting table.  Per trial the same harvest and fading realizations are
reused across battery sizes, so the columns are directly comparable.
The ordering the estimates should show: optimal beats every heuristic
at every battery size, and the battery-aware policies keep gaining from
extra capacity while greedy (which never banks energy on purpose)
saturates early.
"""

from ehwf import run_experiment

config = {
    "label": "battery-sweep-demo",
    "n_users": 3,
    "n_slots": 15,
    "harvest_mean": 4.0,
    "harvest_var": 4.0,
    "battery_max": 10.0,            # overridden by the sweep
    "power_max": 15.0,
    "sweep": {"param": "battery_max", "values": [2.0, 5.0, 10.0, 20.0]},
    "policies": ["optimal", "staircase-iter", "staircase", "balanced", "greedy"],
}

result = run_experiment(config, trials=40, seed=7)
print(f"{result.label}: {len(result.rows)} rows, "
      f"{len(result.traces)} trace points\n")

header = "battery_max " + "".join(f"{pol:>16s}" for pol in result.policies)
print(header)
print("-" * len(header))
for value in result.sweep_values:
    means = [result.mean_sum_rate(pol, value) for pol in result.policies]
    print(f"{value:11.1f} " + "".join(f"{m:16.4f}" for m in means))

print("\nmean sum rate in nats, 40 trials per cell, common random numbers")

# How much of the staircase-to-optimal gap iterating the staircase
# closes.  With the smallest battery the schedules have no room to
# react to interference and the iteration can land slightly below the
# single-shot staircase; from there up it closes most of the gap.
for value in result.sweep_values:
    opt = result.mean_sum_rate("optimal", value)
    stair = result.mean_sum_rate("staircase", value)
    stair_it = result.mean_sum_rate("staircase-iter", value)
    closed = (stair_it - stair) / (opt - stair) if opt > stair else float("nan")
    print(f"battery {value:5.1f}: iterating the staircase closes "
          f"{100.0 * closed:6.1f}% of its gap to optimal")
