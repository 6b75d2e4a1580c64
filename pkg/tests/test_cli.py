import io
import json
import math

import pytest

from timely.cli import main
from timely.errors import ParseError
from timely.scenarios import list_examples, load_scenario, parse_scenario, run_scenario

REQUIRED = {"free_particle_halfplane", "norton_weinberg", "harmonic_oscillator", "pendulum",
            "qubit_pauli_demo", "qutrit_pauli_demo"}

OSCILLATOR = {
    "name": "osc",
    "system": {"coordinates": ["q", "p"], "hamiltonian": "(q^2 + p^2)/2"},
    "checks": [
        {"type": "timeliness", "candidate": "q", "states": [[0, 1]],
         "t_grid": {"start": 0, "stop": "2*pi", "num": 17}, "tol": 1e-6},
    ],
}


def cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def write(tmp_path, doc, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc) if not isinstance(doc, str) else doc)
    return str(path)


def strip_timings(obj):
    if isinstance(obj, dict):
        return {k: strip_timings(v) for k, v in obj.items() if k != "timing_s"}
    if isinstance(obj, list):
        return [strip_timings(v) for v in obj]
    return obj


def test_list_examples():
    names = {row[0] for row in list_examples()}
    assert REQUIRED <= names
    code, out, _ = cli("list-examples")
    assert code == 0
    assert "norton_weinberg" in out and "free_particle_halfplane" in out


@pytest.mark.parametrize("name", sorted(REQUIRED))
def test_every_builtin_runs_to_a_definite_verdict(name):
    report = run_scenario(load_scenario(name))
    assert report.verdict in ("pass", "fail")
    assert all(r.verdict in ("pass", "fail") for r in report.records)
    expected = "fail" if name == "harmonic_oscillator" else "pass"
    assert report.verdict == expected


def test_free_particle_builtin_records_deviation():
    code, out, _ = cli("run", "free_particle_halfplane", "--format", "json")
    assert code == 0
    report = json.loads(out)
    timeliness = report["checks"][0]
    assert timeliness["type"] == "timeliness" and timeliness["verdict"] == "pass"
    assert timeliness["details"]["max_deviation"] <= 1e-6


def test_norton_builtin_records_escape_bracket():
    code, out, _ = cli("run", "norton_weinberg", "--format", "json")
    assert code == 0
    report = json.loads(out)
    cert = next(c for c in report["checks"] if c["type"] == "incompleteness")
    lo, hi = cert["details"]["escape_bracket"][0]
    assert lo - 1e-3 <= 1.0 <= hi + 1e-3


def test_oscillator_scenario_fails_with_exit_one(tmp_path):
    code, out, _ = cli("run", write(tmp_path, OSCILLATOR), "--format", "json")
    assert code == 1
    check = json.loads(out)["checks"][0]
    assert check["verdict"] == "fail"
    assert check["details"]["max_deviation"] == pytest.approx(2 * math.pi, abs=1e-6)


def test_report_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli("run", "free_particle_halfplane", "--out", str(a))[0] == 0
    assert cli("run", "free_particle_halfplane", "--out", str(b))[0] == 0
    ra = json.loads((a / "report.json").read_text())
    rb = json.loads((b / "report.json").read_text())
    assert strip_timings(ra) == strip_timings(rb)
    assert json.dumps(strip_timings(ra), indent=2) == json.dumps(strip_timings(rb), indent=2)
    csvs = sorted(p.name for p in a.glob("*.csv"))
    assert csvs and csvs == sorted(p.name for p in b.glob("*.csv"))
    for name in csvs:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert (a / csvs[0]).read_text().splitlines()[0] == "t,q,p"


def test_seed_changes_samples_and_hash():
    base = load_scenario("free_particle_halfplane")
    other = base.with_overrides(seed=5)
    assert other.config_hash != base.config_hash
    ra = run_scenario(base).to_dict(timings=False)
    rb = run_scenario(other).to_dict(timings=False)
    sa = ra["checks"][0]["details"]["per_trajectory"][0]["initial_state"]
    sb = rb["checks"][0]["details"]["per_trajectory"][0]["initial_state"]
    assert sa != sb


def test_tol_and_horizon_overrides(tmp_path):
    path = write(tmp_path, OSCILLATOR)
    code, out, _ = cli("run", path, "--tol", "10", "--format", "json")
    assert code == 0
    assert json.loads(out)["checks"][0]["details"]["tolerance"] == 10
    scen = load_scenario(path).with_overrides(horizon=3.0)
    assert scen.raw["integrator"]["horizon"] == 3.0
    code, _, err = cli("run", path, "--tol", "-1")
    assert code == 2 and "tol" in err


def test_text_format():
    code, out, _ = cli("run", "norton_weinberg")
    assert code == 0
    assert out.splitlines()[-1] == "overall: PASS"
    assert "tau_is_timely" in out


@pytest.mark.parametrize("doc,where", [
    ("{\"system\": ", "line 1"),
    ({"system": {"builtin": "nope"}, "checks": [{"type": "recurrence", "horizon": 1, "eps": 1}]},
     "system.builtin"),
    ({"system": {"coordinates": ["q", "p"], "hamiltonian": "p^^2"}, "checks": []},
     "char 2"),
    (dict(OSCILLATOR, checks=[dict(OSCILLATOR["checks"][0], tol=-1)]), "checks[0].tol"),
    (dict(OSCILLATOR, checks=[dict(OSCILLATOR["checks"][0], t_grid=[0, 2, 1])]),
     "checks[0].t_grid"),
    (dict(OSCILLATOR, checks=[dict(OSCILLATOR["checks"][0], t_grid=[1, 2])]), "checks[0].t_grid"),
    (dict(OSCILLATOR, checks=[{"type": "bogus"}]), "checks[0].type"),
    (dict(OSCILLATOR, checks=[dict(OSCILLATOR["checks"][0], extra=1)]), "checks[0]"),
    (dict(OSCILLATOR, checks=[dict(OSCILLATOR["checks"][0], candidate="q $ p")]),
     "checks[0].candidate"),
    (dict(OSCILLATOR, checks=[{"type": "pauli_demo", "candidates": []}]), "checks[0]"),
    (dict(OSCILLATOR, integrator={"rel_tol": 0}), "integrator"),
    (dict(OSCILLATOR, seed=-3), "seed"),
])
def test_parse_errors_exit_two(tmp_path, doc, where):
    code, _, err = cli("run", write(tmp_path, doc))
    assert code == 2
    assert where in err


def test_missing_file_exit_two():
    code, _, err = cli("run", "/nonexistent/scenario.json")
    assert code == 2 and "no scenario" in err


def test_parse_error_type():
    with pytest.raises(ParseError) as info:
        parse_scenario({"system": {"builtin": "pendulum"}, "checks": [{"type": "timeliness"}]})
    assert info.value.position == "checks[0]"


def test_check_errors_do_not_abort_the_run(tmp_path):
    doc = dict(OSCILLATOR, checks=[
        {"type": "incompleteness", "candidate": "q", "states": [[1, 0.5]], "h_inf": 0},
        {"type": "local_timeliness", "candidate": "q", "states": [[0, 1]], "tol": 1e-9},
    ])
    code, out, _ = cli("run", write(tmp_path, doc), "--format", "json")
    assert code == 1
    first, second = json.loads(out)["checks"]
    assert first["verdict"] == "error" and "PreconditionUnverified" in first["error"]
    assert second["verdict"] == "pass"


def test_quantum_system_from_file(tmp_path):
    (tmp_path / "qubit.json").write_text(json.dumps(
        {"dim": 2, "hamiltonian": [[0, 0], [0, 0], [0, 0], [1, 0]]}))
    doc = {"system": {"quantum": "qubit.json"},
           "checks": [{"type": "recurrence", "horizon": 10, "eps": 1e-6}]}
    code, out, _ = cli("run", write(tmp_path, doc), "--format", "json")
    assert code == 0
    rec = json.loads(out)["checks"][0]["details"]
    assert rec["T"] == pytest.approx(2 * math.pi, abs=1e-5)
    doc["system"]["quantum"] = "missing.json"
    assert cli("run", write(tmp_path, doc))[0] == 2


def test_inline_domain_and_clock_candidate(tmp_path):
    doc = {
        "system": {"coordinates": ["q", "p"], "hamiltonian": "p^2/2", "domain": ["p > 0"]},
        "observables": {"tau": "q/p"},
        "checks": [
            {"type": "uniqueness", "tau1": "tau", "tau2": {"clock": {"at": [0, 1], "radius": 0.3}},
             "states": [[0, 1]], "t_grid": {"start": -0.2, "stop": 0.2, "num": 5}, "tol": 1e-6},
            {"type": "energy_descent", "candidate": "tau", "x0": [0, 1],
             "s_grid": {"start": 0, "stop": 1, "num": 11}, "tol": 1e-6, "h_inf": 0},
        ],
    }
    code, out, _ = cli("run", write(tmp_path, doc), "--format", "json")
    report = json.loads(out)
    assert report["checks"][0]["verdict"] == "pass"
    descent = report["checks"][1]["details"]
    # the tau-flow leaves p > 0 at s = 1/2, before the requested s = 1
    assert descent["outcome"]["verdict"] == "LeftDomain" or descent["outcome"]["verdict"] == "StepUnderflow"
    assert descent["escape_bracket"][0] == pytest.approx(0.5, abs=1e-3)
    assert code == 0


def test_module_entry_point():
    import subprocess
    import sys
    res = subprocess.run([sys.executable, "-m", "timely", "list-examples"], capture_output=True,
                         text=True)
    assert res.returncode == 0 and "pendulum" in res.stdout
