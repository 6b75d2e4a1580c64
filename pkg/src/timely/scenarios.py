"""Declarative scenarios: a JSON document naming a system and a list of checks.

A scenario looks like::

    {
      "name": "free_particle_halfplane",
      "seed": 0,
      "system": {"coordinates": ["q", "p"], "hamiltonian": "p^2/2", "domain": ["p > 0"]},
      "observables": {"tau": "q/p"},
      "integrator": {"rel_tol": 1e-10},
      "checks": [{"type": "timeliness", "candidate": "tau", "states": [[0, 1]],
                  "t_grid": {"start": 0, "stop": 10, "num": 101}, "tol": 1e-6}]
    }

``system`` is one of ``{"builtin": name}``, an inline definition as above,
or ``{"quantum": path_or_object}`` with ``{"dim": n, "hamiltonian": [[re, im], ...]}``.
Everything that can be checked without running a flow (grid monotonicity,
positive tolerances, expression syntax, observable references) is checked by
:func:`parse_scenario`; problems raise :class:`ParseError` with a JSON path.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import __version__
from . import clockwork as cw
from . import kahler as kh
from . import systems
from .errors import ParseError, StationaryPoint, TimelyError, ValidationFailed
from .expr import compile_field, compile_predicate, parse
from .flow import IntegratorConfig, Trajectory
from .geometry import DynamicalSystem, PhaseSpace, SymplecticForm

__all__ = [
    "Scenario",
    "CheckRecord",
    "RunReport",
    "parse_scenario",
    "load_scenario",
    "run_scenario",
    "list_examples",
    "builtin_path",
    "CHECK_TYPES",
]

BUILTIN_DIR = Path(__file__).parent / "builtin"

BUILTIN_SYSTEMS: dict[str, Callable[[], DynamicalSystem]] = {
    "free_particle_halfplane": systems.free_particle_halfplane,
    "norton": systems.norton,
    "harmonic_oscillator": systems.harmonic_oscillator,
    "pendulum": systems.pendulum,
}

# required and optional parameters of each check type
CHECK_TYPES = {
    "timeliness": ({"candidate", "states", "t_grid", "tol"}, set()),
    "local_timeliness": ({"candidate", "states", "tol"}, set()),
    "construct_clock": ({"points", "radius"}, {"tol", "n_samples", "n_pairs", "expect"}),
    "uniqueness": ({"tau1", "tau2", "states", "t_grid", "tol"}, set()),
    "energy_descent": ({"candidate", "x0", "s_grid", "tol"}, {"h_inf", "slope_tol"}),
    "incompleteness": ({"candidate", "states", "h_inf"}, {"slack", "local_tol"}),
    "recurrence": ({"horizon", "eps"}, {"x0", "expect", "period_tol"}),
    "kahler_identities": ({"dims", "samples", "tol"}, set()),
    "killing": ({"observables", "points", "expect"},
                {"tol", "threshold", "tangent_samples", "random_expectation", "norm_grid",
                 "norm_tol"}),
    "pauli_demo": ({"candidates"}, {"random_candidates", "tol", "n_samples", "min_failure",
                                    "period_tol"}),
}
_COMMON = {"type", "name"}
_QUANTUM_ONLY = {"kahler_identities", "killing", "pauli_demo"}


# -- parsing ----------------------------------------------------------------------------------

@dataclass
class Scenario:
    """A parsed, statically validated scenario document."""

    raw: dict
    source: str
    base_dir: Path

    @property
    def name(self) -> str:
        return self.raw.get("name", Path(self.source).stem)

    @property
    def seed(self) -> int:
        return int(self.raw.get("seed", 0))

    @property
    def checks(self) -> list:
        return self.raw["checks"]

    @property
    def is_quantum(self) -> bool:
        return "quantum" in self.raw["system"]

    @property
    def config_hash(self) -> str:
        text = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def with_overrides(self, seed: Optional[int] = None, tol: Optional[float] = None,
                       horizon: Optional[float] = None) -> "Scenario":
        """Copy with command-line overrides folded into the document (and its hash)."""
        raw = copy.deepcopy(self.raw)
        if seed is not None:
            raw["seed"] = int(seed)
        if tol is not None:
            if not tol > 0:
                raise ParseError("--tol must be positive", "tol")
            for chk in raw["checks"]:
                if "tol" in chk or "tol" in CHECK_TYPES[chk["type"]][0]:
                    chk["tol"] = tol
        if horizon is not None:
            if not horizon > 0:
                raise ParseError("--horizon must be positive", "horizon")
            raw.setdefault("integrator", {})["horizon"] = horizon
            for chk in raw["checks"]:
                if "horizon" in chk:
                    chk["horizon"] = horizon
        return parse_scenario(raw, self.source, self.base_dir)


def _fail(msg, path):
    raise ParseError(msg, path)


def _positive(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
        _fail(f"expected a positive number, got {value!r}", path)


def _number(value, path) -> float:
    """A JSON number, or a constant expression string such as ``"2*pi"``."""
    if isinstance(value, bool):
        _fail("expected a number", path)
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(parse(value, ()).eval(()))
        except ParseError as exc:
            _fail(f"bad constant expression {value!r}: {exc.message}", path)
    _fail(f"expected a number, got {value!r}", path)


def _grid(entry, path) -> np.ndarray:
    if isinstance(entry, dict):
        extra = set(entry) - {"start", "stop", "num"}
        if extra or not {"start", "stop", "num"} <= set(entry):
            _fail("grid must have exactly start, stop and num", path)
        num = entry["num"]
        if not isinstance(num, int) or num < 2:
            _fail("grid num must be an integer >= 2", f"{path}.num")
        grid = np.linspace(_number(entry["start"], f"{path}.start"),
                           _number(entry["stop"], f"{path}.stop"), num)
    elif isinstance(entry, list):
        grid = np.array([_number(v, f"{path}[{i}]") for i, v in enumerate(entry)])
    else:
        _fail("grid must be a list or {start, stop, num}", path)
    if len(grid) < 2 or np.any(np.diff(grid) <= 0):
        _fail("grid must be strictly increasing", path)
    # linspace through zero can land a rounding error away from it
    grid[np.abs(grid) <= 1e-12 * (grid[-1] - grid[0])] = 0.0
    return grid


def _require_keys(obj, required, optional, path):
    if not isinstance(obj, dict):
        _fail("expected an object", path)
    missing = required - set(obj)
    if missing:
        _fail(f"missing {sorted(missing)}", path)
    unknown = set(obj) - required - optional
    if unknown:
        _fail(f"unknown keys {sorted(unknown)}", path)


def _check_states(entry, path, dim):
    """Validate a state set: explicit list or ``{"random": k, "bounds": [...]}``."""
    if isinstance(entry, dict):
        _require_keys(entry, {"random"}, {"bounds"}, path)
        if not isinstance(entry["random"], int) or entry["random"] < 1:
            _fail("random must be a positive integer", f"{path}.random")
        if dim is not None:
            bounds = entry.get("bounds")
            if not isinstance(bounds, list) or len(bounds) != dim:
                _fail(f"bounds must list {dim} [lo, hi] pairs", f"{path}.bounds")
            for i, b in enumerate(bounds):
                if not (isinstance(b, list) and len(b) == 2 and
                        _number(b[0], f"{path}.bounds[{i}]") < _number(b[1], f"{path}.bounds[{i}]")):
                    _fail("each bound must be [lo, hi] with lo < hi", f"{path}.bounds[{i}]")
        return
    if not isinstance(entry, list) or not entry:
        _fail("expected a non-empty list of states or {random: k}", path)
    for i, s in enumerate(entry):
        _check_state(s, f"{path}[{i}]", dim)


def _check_state(s, path, dim):
    if dim is None:  # quantum: list of [re, im] pairs
        if not (isinstance(s, list) and s and all(isinstance(c, list) and len(c) == 2 for c in s)):
            _fail("quantum state must be a list of [re, im] pairs", path)
        return
    if not isinstance(s, list) or len(s) != dim:
        _fail(f"state must have {dim} coordinates", path)
    for i, v in enumerate(s):
        _number(v, f"{path}[{i}]")


def _quantum_raw(entry, base_dir, path):
    if isinstance(entry, str):
        file = (base_dir / entry)
        if not file.is_file():
            _fail(f"quantum system file {entry!r} not found", path)
        try:
            return json.loads(file.read_text())
        except json.JSONDecodeError as exc:
            _fail(f"{file}: {exc.msg}", f"{path} line {exc.lineno} column {exc.colno}")
    if isinstance(entry, dict):
        return entry
    _fail("quantum must be a file path or an object", path)


def _build_system(raw, base_dir):
    """Return ``(dynamical system, QuantumSystem or None, coordinate names)``."""
    entry = raw.get("system")
    if not isinstance(entry, dict):
        _fail("system must be an object", "system")
    if "builtin" in entry:
        _require_keys(entry, {"builtin"}, set(), "system")
        name = entry["builtin"]
        if name not in BUILTIN_SYSTEMS:
            _fail(f"unknown builtin system {name!r}; choose from {sorted(BUILTIN_SYSTEMS)}",
                  "system.builtin")
        dyn = BUILTIN_SYSTEMS[name]()
        return dyn, None, dyn.space.coordinate_names
    if "quantum" in entry:
        _require_keys(entry, {"quantum"}, set(), "system")
        data = _quantum_raw(entry["quantum"], base_dir, "system.quantum")
        try:
            qs = kh.QuantumSystem.from_dict(data, name=raw.get("name", ""))
        except (ValueError, TimelyError) as exc:
            _fail(str(exc), "system.quantum")
        return qs.dynamical, qs, qs.dynamical.space.coordinate_names
    _require_keys(entry, {"coordinates", "hamiltonian"}, {"domain", "name"}, "system")
    coords = entry["coordinates"]
    if (not isinstance(coords, list) or not coords or len(coords) % 2
            or not all(isinstance(c, str) for c in coords) or len(set(coords)) != len(coords)):
        _fail("coordinates must be an even-length list of distinct names", "system.coordinates")
    try:
        h = compile_field(entry["hamiltonian"], coords, "h")
    except ParseError as exc:
        _fail(f"hamiltonian: {exc.message}", f"system.hamiltonian, char {exc.position}")
    domain = entry.get("domain", [])
    if not isinstance(domain, list):
        _fail("domain must be a list of inequalities", "system.domain")
    try:
        pred = compile_predicate(domain, coords) if domain else None
    except ParseError as exc:
        _fail(f"domain: {exc.message}", f"system.domain, char {exc.position}")
    n = len(coords) // 2
    space = PhaseSpace(2 * n, tuple(coords), pred) if pred else PhaseSpace(2 * n, tuple(coords))
    dyn = DynamicalSystem(space, SymplecticForm.canonical(n), h,
                          entry.get("name", raw.get("name", "inline")))
    return dyn, None, tuple(coords)


_PAULI = {"x": "sigma_x", "y": "sigma_y", "z": "sigma_z"}


def _quantum_observable(name, entry, table, n, path) -> kh.ObservableFunction:
    """Build an observable from ``{"pauli"|"spin"|"diag"|"matrix"|"identity"|"square"|"product"}``."""
    if not isinstance(entry, dict) or len(entry) != 1:
        _fail("observable must be an object with exactly one key", path)
    (key, val), = entry.items()
    if key == "pauli":
        if n != 2 or val not in _PAULI:
            _fail("pauli observables need dim 2 and one of x, y, z", path)
        return kh.ObservableFunction.expectation(kh.pauli_matrices()[_PAULI[val]], label=name)
    if key == "spin":
        if val not in _PAULI:
            _fail("spin must be one of x, y, z", path)
        return kh.ObservableFunction.expectation(kh.spin_matrices(n)["spin_" + val], label=name)
    if key == "identity":
        return kh.ObservableFunction.expectation(np.eye(n), label=name)
    if key == "diag":
        if not isinstance(val, list) or len(val) != n:
            _fail(f"diag needs {n} entries", path)
        return kh.ObservableFunction.expectation(
            np.diag([_number(v, f"{path}.diag") for v in val]), label=name)
    if key == "matrix":
        try:
            qs = kh.QuantumSystem.from_dict({"dim": n, "hamiltonian": val})
        except (ValueError, TimelyError) as exc:
            _fail(str(exc), path)
        return kh.ObservableFunction.expectation(qs.hamiltonian_matrix, label=name)
    if key == "square":
        base = _lookup(val, table, path)
        return kh.ObservableFunction.square(base.matrix, label=name)
    if key == "product":
        if not isinstance(val, list) or len(val) != 2:
            _fail("product needs two observable names", path)
        a, b = (_lookup(v, table, path) for v in val)
        return kh.ObservableFunction.product(a.matrix, b.matrix, label=name)
    _fail(f"unknown observable kind {key!r}", path)


def _lookup(name, table, path):
    if name not in table:
        _fail(f"unknown observable {name!r}", path)
    obs = table[name]
    if obs.kind != "expectation":
        _fail(f"{name!r} must be an expectation observable", path)
    return obs


def _build_observables(raw, quantum, coords):
    entry = raw.get("observables", {})
    if not isinstance(entry, dict):
        _fail("observables must be an object", "observables")
    table = {}
    if quantum is not None:
        table["h"] = quantum.observable
        for name, s in entry.items():
            table[name] = _quantum_observable(name, s, table, quantum.dim, f"observables.{name}")
        return table
    for name, text in entry.items():
        try:
            table[name] = compile_field(text, coords, name)
        except ParseError as exc:
            _fail(exc.message, f"observables.{name}, char {exc.position}")
    return table


def _check_candidate(ref, table, coords, quantum, path):
    """A candidate is an observable name, an inline expression, or a clock entry."""
    if isinstance(ref, dict):
        _require_keys(ref, {"clock"}, set(), path)
        clk = ref["clock"]
        _require_keys(clk, {"at", "radius"}, set(), f"{path}.clock")
        _check_state(clk["at"], f"{path}.clock.at", len(coords))
        _positive(clk["radius"], f"{path}.clock.radius")
        return
    if not isinstance(ref, str):
        _fail("candidate must be a name, an expression or {clock: ...}", path)
    if ref in table:
        return
    if quantum is not None:
        _fail(f"unknown observable {ref!r}", path)
    try:
        parse(ref, coords)
    except ParseError as exc:
        _fail(f"candidate {ref!r}: {exc.message}", f"{path}, char {exc.position}")


def _validate_check(chk, i, table, coords, quantum):
    path = f"checks[{i}]"
    if not isinstance(chk, dict) or "type" not in chk:
        _fail("each check needs a type", path)
    kind = chk["type"]
    if kind not in CHECK_TYPES:
        _fail(f"unknown check type {kind!r}; choose from {sorted(CHECK_TYPES)}", f"{path}.type")
    required, optional = CHECK_TYPES[kind]
    _require_keys(chk, required | {"type"}, optional | _COMMON, path)
    if kind in _QUANTUM_ONLY and quantum is None:
        _fail(f"{kind} needs a quantum system", path)
    dim = None if quantum is not None else len(coords)
    for key in ("tol", "eps", "radius", "horizon", "slack", "local_tol", "threshold",
                "slope_tol", "period_tol", "norm_tol"):
        if key in chk:
            _positive(chk[key], f"{path}.{key}")
    for key in ("t_grid", "s_grid", "norm_grid"):
        if key in chk:
            grid = _grid(chk[key], f"{path}.{key}")
            if key == "s_grid" and grid[0] != 0:
                _fail("s_grid must start at 0", f"{path}.s_grid")
            if key == "t_grid" and not np.any(grid == 0.0):
                _fail("t_grid must contain 0", f"{path}.t_grid")
    for key in ("states", "points"):
        if key in chk:
            _check_states(chk[key], f"{path}.{key}", dim)
    if "x0" in chk:
        _check_state(chk["x0"], f"{path}.x0", dim)
    for key in ("candidate", "tau1", "tau2"):
        if key in chk:
            _check_candidate(chk[key], table, coords, quantum, f"{path}.{key}")
    if "h_inf" in chk:
        _number(chk["h_inf"], f"{path}.h_inf")
    if kind == "construct_clock" and chk.get("expect", "clock") not in ("clock", "stationary"):
        _fail("expect must be 'clock' or 'stationary'", f"{path}.expect")
    if kind == "recurrence" and not isinstance(chk.get("expect", True), bool):
        _fail("expect must be true or false", f"{path}.expect")
    if kind == "kahler_identities":
        dims = chk["dims"]
        if not (isinstance(dims, list) and dims and all(isinstance(d, int) and d >= 2 for d in dims)):
            _fail("dims must be a list of integers >= 2", f"{path}.dims")
        if not isinstance(chk["samples"], int) or chk["samples"] < 1:
            _fail("samples must be a positive integer", f"{path}.samples")
    if kind == "killing":
        if chk["expect"] not in ("killing", "not_killing"):
            _fail("expect must be 'killing' or 'not_killing'", f"{path}.expect")
        for j, name in enumerate(chk["observables"]):
            if name not in table:
                _fail(f"unknown observable {name!r}", f"{path}.observables[{j}]")
    if kind == "pauli_demo":
        for j, name in enumerate(chk["candidates"]):
            if name not in table:
                _fail(f"unknown observable {name!r}", f"{path}.candidates[{j}]")
            if table[name].kind != "expectation":
                _fail(f"{name!r} is not an expectation observable", f"{path}.candidates[{j}]")


def parse_scenario(raw, source: str = "<memory>", base_dir=None) -> Scenario:
    """Validate a scenario document and wrap it."""
    base_dir = Path(base_dir) if base_dir is not None else Path.cwd()
    if not isinstance(raw, dict):
        _fail("scenario must be a JSON object", "$")
    allowed = {"name", "description", "topic", "seed", "system", "observables", "integrator",
               "checks", "outputs"}
    unknown = set(raw) - allowed
    if unknown:
        _fail(f"unknown keys {sorted(unknown)}", "$")
    if "system" not in raw or "checks" not in raw:
        _fail("scenario needs system and checks", "$")
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        _fail("seed must be a non-negative integer", "seed")
    try:
        IntegratorConfig(**raw.get("integrator", {}))
    except TypeError as exc:
        _fail(str(exc), "integrator")
    except ValueError as exc:
        _fail(str(exc), "integrator")
    _, quantum, coords = _build_system(raw, base_dir)
    table = _build_observables(raw, quantum, coords)
    if not isinstance(raw["checks"], list) or not raw["checks"]:
        _fail("checks must be a non-empty list", "checks")
    for i, chk in enumerate(raw["checks"]):
        _validate_check(chk, i, table, coords, quantum)
    outputs = raw.get("outputs", {})
    _require_keys(outputs, set(), {"report", "trajectories"}, "outputs")
    return Scenario(raw, source, base_dir)


def builtin_path(name: str) -> Path:
    return BUILTIN_DIR / f"{name}.json"


def load_scenario(path_or_name) -> Scenario:
    """Load a scenario file, or a builtin scenario by name."""
    path = Path(path_or_name)
    if not path.is_file():
        candidate = builtin_path(str(path_or_name))
        if candidate.is_file():
            path = candidate
        else:
            raise FileNotFoundError(f"no scenario file or builtin named {str(path_or_name)!r}")
    text = path.read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"line {exc.lineno} column {exc.colno} (char {exc.pos})") from None
    return parse_scenario(raw, str(path), path.parent)


def list_examples() -> list:
    """``(name, description, topic)`` for every builtin scenario."""
    rows = []
    for file in sorted(BUILTIN_DIR.glob("*.json")):
        raw = json.loads(file.read_text())
        rows.append((file.stem, raw.get("description", ""), raw.get("topic", "")))
    return rows


# -- running ----------------------------------------------------------------------------------

@dataclass
class CheckRecord:
    index: int
    name: str
    type: str
    verdict: str
    details: dict
    elapsed: float = 0.0
    error: Optional[str] = None
    trajectories: list = field(default_factory=list, repr=False)

    def to_dict(self, timings: bool = True) -> dict:
        out = {"index": self.index, "name": self.name, "type": self.type, "verdict": self.verdict}
        if self.error is not None:
            out["error"] = self.error
        out["details"] = self.details
        if timings:
            out["timing_s"] = self.elapsed
        return out


@dataclass
class RunReport:
    scenario: str
    source: str
    config_hash: str
    seed: int
    records: list
    version: str = __version__

    @property
    def passed(self) -> bool:
        return all(r.verdict == "pass" for r in self.records)

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    @property
    def exit_status(self) -> int:
        return 0 if self.passed else 1

    def to_dict(self, timings: bool = True) -> dict:
        return _clean({
            "toolkit": {"name": "timely", "version": self.version},
            "scenario": {"name": self.scenario, "source": self.source,
                         "config_hash": self.config_hash},
            "seed": self.seed,
            "verdict": self.verdict,
            "checks": [r.to_dict(timings) for r in self.records],
        })

    def to_json(self, timings: bool = True) -> str:
        return json.dumps(self.to_dict(timings), indent=2)

    def to_text(self) -> str:
        lines = [f"scenario {self.scenario}  (timely {self.version}, seed {self.seed}, "
                 f"config {self.config_hash[:12]})"]
        width = max(len(r.name) for r in self.records)
        for r in self.records:
            lines.append(f"  [{r.index:2d}] {r.name:<{width}}  {r.verdict.upper():<5}  "
                         f"{_headline(r)}  ({r.elapsed:.2f} s)")
        lines.append(f"overall: {self.verdict.upper()}")
        return "\n".join(lines)


def _clean(obj):
    """Make a structure strict-JSON: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


_HEADLINE_KEYS = ("max_deviation", "max_drift", "max_residual", "residual", "escape_bracket",
                  "T", "failures")


def _headline(record: CheckRecord) -> str:
    if record.error:
        return f"error: {record.error}"
    for key in _HEADLINE_KEYS:
        if key in record.details:
            return f"{key}={record.details[key]}"
    return ""


class _Context:
    def __init__(self, scenario: Scenario):
        raw = scenario.raw
        self.scenario = scenario
        self.system, self.quantum, self.coords = _build_system(raw, scenario.base_dir)
        self.table = _build_observables(raw, self.quantum, self.coords)
        self.config = IntegratorConfig(**raw.get("integrator", {}))

    def rng(self, index):
        # one stream per check, so results do not depend on which checks ran before
        return np.random.default_rng([self.scenario.seed, index])

    def field(self, ref):
        if isinstance(ref, dict):
            entry = ref["clock"]
            clock = cw.construct_local_clock(self.system, np.array(entry["at"], dtype=float),
                                             entry["radius"], self.config)
            return cw.CandidateObservable(clock.as_field(self.config, "clock"), "clock")
        if ref in self.table:
            obj = self.table[ref]
            if isinstance(obj, kh.ObservableFunction):
                return cw.CandidateObservable(obj.scalar_field(), ref)
            return cw.CandidateObservable(obj, ref)
        return cw.CandidateObservable(compile_field(ref, self.coords, ref), ref)

    def states(self, entry, rng):
        if isinstance(entry, list):
            return [self.state(s) for s in entry]
        count = entry["random"]
        if self.quantum is not None:
            return [kh.random_point(self.quantum.dim, rng).state() for _ in range(count)]
        bounds = np.array([[_number(v, "") for v in b] for b in entry["bounds"]])
        out = []
        for _ in range(1000 * count):
            x = rng.uniform(bounds[:, 0], bounds[:, 1])
            if self.system.space.contains(x):
                out.append(x)
                if len(out) == count:
                    return out
        raise ValueError("could not sample states inside the domain from the given bounds")

    def state(self, s):
        if self.quantum is not None:
            z = np.array([complex(re, im) for re, im in s])
            return kh.ProjectivePoint(z).state()
        return np.array([_number(v, "") for v in s])

    def point(self, s):
        return kh.ProjectivePoint(kh.to_complex(self.state(s)))


def _grid_of(entry):
    return _grid(entry, "")


def _timeliness(ctx, chk, rng):
    rep = cw.verify_timeliness(ctx.system, ctx.field(chk["candidate"]),
                               ctx.states(chk["states"], rng), _grid_of(chk["t_grid"]),
                               chk["tol"], ctx.config)
    trajs = [(f"traj{k}", c.trajectory) for k, c in enumerate(rep.per_trajectory)]
    return rep.passed, rep.to_dict(), trajs


def _local_timeliness(ctx, chk, rng):
    rep = cw.verify_local_timeliness(ctx.system, ctx.field(chk["candidate"]),
                                     ctx.states(chk["states"], rng), chk["tol"])
    return rep.passed, rep.to_dict(), []


def _construct_clock(ctx, chk, rng):
    expect = chk.get("expect", "clock")
    tol = chk.get("tol", 1e-6)
    entries = []
    ok = True
    for k, x in enumerate(ctx.states(chk["points"], rng)):
        kw = {"tol": tol, "seed": int(rng.integers(2**31))}
        for key in ("n_samples", "n_pairs"):
            if key in chk:
                kw[key] = chk[key]
        try:
            clock = cw.construct_local_clock(ctx.system, x, chk["radius"], ctx.config, **kw)
        except StationaryPoint as exc:
            entries.append({"point": x, "result": "stationary", "message": str(exc)})
            ok &= expect == "stationary"
            continue
        except ValidationFailed as exc:
            entries.append({"point": x, "result": "validation_failed", "message": str(exc)})
            ok = False
            continue
        entries.append({"point": x, "result": "clock", "radius": clock.radius,
                        "validation_residual": clock.validation_residual,
                        "pairs_checked": clock.pairs_checked})
        ok &= expect == "clock" and clock.validation_residual <= tol
    residuals = [e["validation_residual"] for e in entries if "validation_residual" in e]
    details = {"expect": expect, "tolerance": tol, "points": entries}
    if residuals:
        details["max_residual"] = max(residuals)
    return ok, details, []


def _uniqueness(ctx, chk, rng):
    rep = cw.uniqueness_decomposition(ctx.system, ctx.field(chk["tau1"]), ctx.field(chk["tau2"]),
                                      ctx.states(chk["states"], rng), _grid_of(chk["t_grid"]),
                                      chk["tol"], ctx.config)
    return rep.passed, rep.to_dict(), []


def _energy_descent(ctx, chk, rng):
    h_inf = _number(chk["h_inf"], "") if "h_inf" in chk else None
    rep = cw.energy_descent_check(ctx.system, ctx.field(chk["candidate"]), ctx.state(chk["x0"]),
                                  _grid_of(chk["s_grid"]), chk["tol"], h_inf, ctx.config)
    details = rep.to_dict()
    ok = rep.passed
    if "slope_tol" in chk:
        details["slope_tolerance"] = chk["slope_tol"]
        ok = ok and abs(rep.slope + 1.0) <= chk["slope_tol"]
    if rep.outcome.escape_bracket is not None:
        details["escape_bracket"] = list(rep.outcome.escape_bracket)
    return ok, details, [("tau_flow", rep.trajectory)]


def _incompleteness(ctx, chk, rng):
    kw = {k: chk[k] for k in ("slack", "local_tol") if k in chk}
    cert = cw.incompleteness_certificate(ctx.system, ctx.field(chk["candidate"]),
                                         ctx.states(chk["states"], rng),
                                         _number(chk["h_inf"], ""), ctx.config, **kw)
    details = cert.to_dict()
    details["escape_bracket"] = [e["outcome"]["escape_bracket"] for e in cert.entries]
    return cert.passed, details, []


def _recurrence(ctx, chk, rng):
    expect = chk.get("expect", True)
    if ctx.quantum is not None:
        x0 = ctx.state(chk["x0"]) if "x0" in chk else kh.ProjectivePoint(
            np.ones(ctx.quantum.dim)).state()
        rec = cw.recurrence_obstruction(ctx.system, x0, chk["horizon"], chk["eps"], ctx.config,
                                        metric=kh.projective_metric)
    else:
        if "x0" not in chk:
            raise ValueError("classical recurrence checks need x0")
        x0 = ctx.state(chk["x0"])
        rec = cw.recurrence_obstruction(ctx.system, x0, chk["horizon"], chk["eps"], ctx.config)
    details = {"x0": x0, "expect_recurrence": expect, "horizon": chk["horizon"]}
    ok = (rec is not None) == expect
    if rec is not None:
        details.update(rec.to_dict())
    if ctx.quantum is not None and rec is not None:
        oracle = kh.recurrence_period(ctx.quantum)
        tol = chk.get("period_tol", 1e-5)
        details["oracle_period"] = oracle
        details["period_error"] = abs(rec.T - oracle)
        ok = ok and abs(rec.T - oracle) <= tol
    return ok, details, []


def _kahler_identities(ctx, chk, rng):
    per_dim = {}
    worst = 0.0
    for n in chk["dims"]:
        res = kh.kahler_identity_residuals(n, chk["samples"], int(rng.integers(2**31)))
        per_dim[str(n)] = res
        worst = max(worst, *res.values())
    return worst <= chk["tol"], {"tolerance": chk["tol"], "max_residual": worst,
                                 "per_dimension": per_dim}, []


def _killing(ctx, chk, rng):
    expect = chk["expect"]
    limit = chk.get("tol", 1e-5) if expect == "killing" else chk.get("threshold", 1e-3)
    obs = [ctx.table[name] for name in chk["observables"]]
    n = ctx.quantum.dim
    for k in range(chk.get("random_expectation", 0)):
        obs.append(kh.ObservableFunction.expectation(kh.random_hermitian(n, rng), f"random{k}"))
    if isinstance(chk["points"], list):
        points = [ctx.point(s) for s in chk["points"]]
    else:
        points = [kh.random_point(n, rng) for _ in range(chk["points"]["random"])]
    entries = []
    ok = True
    for o in obs:
        for p in points:
            r = kh.killing_residual(o, p, chk.get("tangent_samples", 50),
                                    seed=int(rng.integers(2**31)))
            entries.append({"observable": o.label, "kind": o.kind, "point": kh.to_real(
                p.representative), "residual": r})
            ok &= r <= limit if expect == "killing" else r >= limit
    residuals = [e["residual"] for e in entries]
    details = {"expect": expect, "limit": limit, "max_residual": max(residuals),
               "min_residual": min(residuals), "samples": entries}
    if "norm_grid" in chk:
        grid = _grid_of(chk["norm_grid"])
        drifts = [kh.killing_norm_constancy(o, p, grid, diagnostic=True)
                  for o in obs for p in points]
        details["norm_drift_max"] = max(drifts)
        if expect == "killing":
            ok = ok and max(drifts) <= chk.get("norm_tol", 1e-8)
    return ok, details, []


def _pauli_demo(ctx, chk, rng):
    n = ctx.quantum.dim
    cands = [ctx.table[name] for name in chk["candidates"]]
    for k in range(chk.get("random_candidates", 0)):
        cands.append(kh.ObservableFunction.expectation(kh.random_hermitian(n, rng), f"random{k}"))
    rep = kh.pauli_obstruction_demo(ctx.quantum, cands, chk.get("tol", 1e-6),
                                    chk.get("n_samples", 50), int(rng.integers(2**31)),
                                    config=ctx.config)
    details = rep.to_dict()
    ok = rep.passed
    if "min_failure" in chk:
        weakest = min(c["deviation_at_recurrence"] for c in rep.candidates)
        details["min_failure"] = chk["min_failure"]
        details["weakest_failure_at_recurrence"] = weakest
        ok = ok and weakest >= chk["min_failure"]
    try:
        oracle = kh.recurrence_period(ctx.quantum)
    except ValueError:
        oracle = None
    if oracle is not None and math.isfinite(oracle):
        details["oracle_period"] = oracle
        if rep.recurrence is None:
            ok = False
        else:
            details["period_error"] = abs(rep.recurrence.T - oracle)
            ok = ok and details["period_error"] <= chk.get("period_tol", 1e-5)
    details["failures"] = sum(c["fails"] for c in rep.candidates)
    return ok, details, []


_HANDLERS = {
    "timeliness": _timeliness,
    "local_timeliness": _local_timeliness,
    "construct_clock": _construct_clock,
    "uniqueness": _uniqueness,
    "energy_descent": _energy_descent,
    "incompleteness": _incompleteness,
    "recurrence": _recurrence,
    "kahler_identities": _kahler_identities,
    "killing": _killing,
    "pauli_demo": _pauli_demo,
}


def _run_check(ctx, index, chk) -> CheckRecord:
    name = chk.get("name", f"{chk['type']}_{index}")
    start = time.perf_counter()
    try:
        ok, details, trajs = _HANDLERS[chk["type"]](ctx, chk, ctx.rng(index))
        verdict, error = ("pass" if ok else "fail"), None
    except Exception as exc:  # recorded as a check error; remaining checks still run
        verdict, details, trajs = "error", {}, []
        error = f"{type(exc).__name__}: {exc}"
    return CheckRecord(index, name, chk["type"], verdict, _clean(details),
                       time.perf_counter() - start, error, trajs)


def run_scenario(scenario: Scenario, out_dir=None) -> RunReport:
    """Execute every check in order and optionally write the report and trajectories."""
    ctx = _Context(scenario)
    records = [_run_check(ctx, i, chk) for i, chk in enumerate(scenario.checks)]
    report = RunReport(scenario.name, Path(scenario.source).name, scenario.config_hash,
                       scenario.seed, records)
    if out_dir is not None:
        write_outputs(report, scenario, out_dir, ctx.coords)
    return report


def write_outputs(report: RunReport, scenario: Scenario, out_dir, coordinate_names) -> list:
    """Write the JSON report and (unless disabled) one CSV per trajectory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    outputs = scenario.raw.get("outputs", {})
    written = []
    if outputs.get("trajectories", True):
        for r in report.records:
            files = []
            for label, tr in r.trajectories:
                if not isinstance(tr, Trajectory):
                    continue
                fname = f"{r.index:02d}_{r.name}_{label}.csv"
                tr.to_csv(out / fname, coordinate_names)
                files.append(fname)
            if files:
                r.details["trajectory_files"] = files
                written.extend(files)
    report_name = outputs.get("report", "report.json")
    (out / report_name).write_text(report.to_json() + "\n")
    written.append(report_name)
    return written

