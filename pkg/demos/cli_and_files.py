"""The command line and the file formats, end to end.

Everything the `ehwf` console script does is also reachable in-process
through cli_main(argv), which is what this demo uses so the whole flow
runs in one interpreter.  From a shell the same steps are:

    ehwf gen --n 2 --k 8 --seed 11 --out scenario.json
    ehwf solve --in scenario.json --certify
    ehwf experiment --preset fig7 --trials 25 --out results.csv
"""

import csv
import json
import pathlib
import tempfile

from ehwf import Scenario
from ehwf.bench import cli_main

tmp = pathlib.Path(tempfile.mkdtemp(prefix="ehwf-demo-"))
scen_path = tmp / "scenario.json"
csv_path = tmp / "results.csv"

# --- generate a scenario file ---------------------------------------
rc = cli_main(["gen", "--n", "2", "--k", "8", "--m", "5", "--v", "2",
               "--b-max", "10", "--p-max", "6", "--seed", "11",
               "--out", str(scen_path)])
assert rc == 0

obj = json.loads(scen_path.read_text())
print("scenario JSON keys:", sorted(obj), "/ per user:", sorted(obj["users"][0]))
print("user 0 harvest:", [round(x, 3) for x in obj["users"][0]["harvest"]])

# The file round-trips through the library type.
scenario = Scenario.from_json(scen_path.read_text())
print(f"loaded: {scenario.num_users} users x {scenario.num_slots} slots\n")

# --- solve it, with and without certification ------------------------
print("$ ehwf solve --in scenario.json --certify")
rc = cli_main(["solve", "--in", str(scen_path), "--certify"])
print(f"(exit {rc})\n")

print("$ ehwf solve --in scenario.json --policy greedy")
rc = cli_main(["solve", "--in", str(scen_path), "--policy", "greedy"])
print(f"(exit {rc})\n")

# --- a benchmark preset to CSV --------------------------------------
print("$ ehwf experiment --preset fig7 --trials 25 --out results.csv")
rc = cli_main(["experiment", "--preset", "fig7", "--trials", "25",
               "--seed", "1", "--out", str(csv_path)])
assert rc == 0

with open(csv_path, newline="") as fh:
    rows = list(csv.DictReader(fh))
print(f"\n{csv_path.name}: {len(rows)} data rows, columns {list(rows[0])}")
sample = rows[0]
print("first row:", {k: sample[k] for k in ("scenario_id", "policy",
                                            "sum_rate_nats", "iterations")})

# Identical invocation, identical bytes (wall_time_ms excepted): the
# sweep is reproducible from (config, trials, seed) alone.
rerun = tmp / "again.csv"
cli_main(["experiment", "--preset", "fig7", "--trials", "25",
          "--seed", "1", "--out", str(rerun)])
strip = lambda path: [
    {k: v for k, v in row.items() if k != "wall_time_ms"}
    for row in csv.DictReader(open(path, newline=""))
]
print("rerun identical:", strip(csv_path) == strip(rerun))
print(f"\nworking files kept in {tmp}")
