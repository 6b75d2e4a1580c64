"""
Scenario files and reports
==========================

Every check above can be described in a JSON scenario and run from the
command line (``timely run <file>``) or from Python. Reports are
deterministic for a fixed seed.
"""

import json
import tempfile
from pathlib import Path

from timely.scenarios import list_examples, parse_scenario, run_scenario

for name, description, _ in list_examples():
    print(f"{name:<24} {description}")

scenario = parse_scenario({
    "name": "oscillator_position",
    "seed": 3,
    "system": {"coordinates": ["q", "p"], "hamiltonian": "(q^2 + p^2)/2"},
    "checks": [
        {"type": "local_timeliness", "candidate": "q",
         "states": {"random": 20, "bounds": [[-1, 1], [-1, 1]]}, "tol": 1e-6},
        {"type": "recurrence", "x0": [1, 0], "horizon": 20, "eps": 1e-6},
    ],
})

with tempfile.TemporaryDirectory() as out:
    report = run_scenario(scenario, out)
    print(report.to_text())
    print("files:", sorted(p.name for p in Path(out).iterdir()))
    print("exit status:", report.exit_status)
    print(json.dumps(report.to_dict(timings=False)["checks"][1]["details"], indent=2)[:400])
