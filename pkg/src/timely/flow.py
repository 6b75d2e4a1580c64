"""Integral curves of Hamiltonian vector fields.

The default integrator is the Dormand-Prince 5(4) embedded pair with
standard step-size control. A fixed-step implicit midpoint rule is available
for long structure-preserving runs.

A flow can stop early for three reasons, each reported with a bracket
``(t_lo, t_hi)`` around the parameter at which it fails:

* ``LeftDomain`` - a state (or stage state) violates the domain predicate;
* ``Blowup`` - a state, or the vector field at it, exceeds ``blowup_norm``
  in Euclidean norm, or stops being finite;
* ``StepUnderflow`` - error control demands a step below
  ``1e3 * eps * max(1, |t|)``.

Invalid trial steps are bisected until the failing step is shorter than
``bracket_tol``, which bounds the bracket width. Escape is therefore
*certified* when reported; the absence of escape up to a horizon is only
evidence of completeness.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError, DomainError, NoCrossing, TangentialCrossing
from .geometry import DynamicalSystem, ScalarField, gradient

__all__ = [
    "IntegratorConfig",
    "Verdict",
    "FlowOutcome",
    "Trajectory",
    "Section",
    "Step",
    "vector_field_rhs",
    "solve",
    "integrate",
    "escape_time",
    "first_crossing",
    "drift_along",
    "hermite",
]

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "adaptive_rk"
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = math.inf
    max_steps: int = 10**7
    blowup_norm: float = 1e8
    horizon: float = 100.0
    bracket_tol: float = 1e-6
    first_step: Optional[float] = None

    def __post_init__(self):
        if self.method not in ("adaptive_rk", "implicit_midpoint"):
            raise ConfigError(f"unknown integration method {self.method!r}")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ConfigError("tolerances must be positive")
        if not self.blowup_norm > 1:
            raise ConfigError("blowup_norm must exceed 1")
        if not self.horizon > 0:
            raise ConfigError("horizon must be positive")
        if not self.max_step > 0:
            raise ConfigError("max_step must be positive")
        if not self.bracket_tol > 0:
            raise ConfigError("bracket_tol must be positive")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be at least 1")
        if self.method == "implicit_midpoint" and not math.isfinite(self.max_step):
            raise ConfigError("implicit_midpoint needs a finite max_step (its fixed step)")

    def with_(self, **kw) -> "IntegratorConfig":
        return replace(self, **kw)


class Verdict(str, enum.Enum):
    COMPLETED = "Completed"
    LEFT_DOMAIN = "LeftDomain"
    BLOWUP = "Blowup"
    STEP_UNDERFLOW = "StepUnderflow"
    MAX_STEPS = "MaxSteps"

    def __str__(self):
        return self.value


_ESCAPES = (Verdict.LEFT_DOMAIN, Verdict.BLOWUP, Verdict.STEP_UNDERFLOW)


@dataclass(frozen=True)
class FlowOutcome:
    verdict: Verdict
    escape_bracket: Optional[tuple] = None
    t_end: float = 0.0

    def __post_init__(self):
        if (self.escape_bracket is not None) != (self.verdict in _ESCAPES):
            raise ValueError("escape bracket must be present exactly for escape verdicts")

    @property
    def completed(self) -> bool:
        return self.verdict is Verdict.COMPLETED

    @property
    def escaped(self) -> bool:
        return self.verdict in _ESCAPES

    @property
    def escape_estimate(self) -> Optional[float]:
        if self.escape_bracket is None:
            return None
        return 0.5 * (self.escape_bracket[0] + self.escape_bracket[1])

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "escape_bracket": list(self.escape_bracket) if self.escape_bracket else None,
            "t_end": self.t_end,
        }


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled integral curve; samples are monotone in integration order."""

    t: np.ndarray
    states: np.ndarray
    generator_tag: str = ""

    def __len__(self):
        return len(self.t)

    @property
    def end(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self, path, coordinate_names: Sequence[str]):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", *coordinate_names])
            for t, x in zip(self.t, self.states):
                w.writerow([f"{t:.17g}", *(f"{v:.17g}" for v in x)])

    def to_record(self, outcome: Optional[FlowOutcome] = None,
                  coordinate_names: Optional[Sequence[str]] = None) -> dict:
        rec = {
            "generator": self.generator_tag,
            "t": [float(v) for v in self.t],
            "states": [[float(v) for v in x] for x in self.states],
        }
        if coordinate_names is not None:
            rec["coordinates"] = list(coordinate_names)
        if outcome is not None:
            rec["outcome"] = outcome.to_dict()
        return rec

    def to_json(self, path, outcome=None, coordinate_names=None):
        with open(path, "w") as fh:
            json.dump(self.to_record(outcome, coordinate_names), fh, indent=2)


@dataclass(frozen=True)
class Step:
    """One accepted step with endpoint derivatives, for dense output."""

    t0: float
    y0: np.ndarray
    f0: np.ndarray
    t1: float
    y1: np.ndarray
    f1: np.ndarray

    def __call__(self, t: float) -> np.ndarray:
        return hermite(self, t)


def hermite(step: Step, t: float) -> np.ndarray:
    """Cubic Hermite interpolant of an accepted step."""
    h = step.t1 - step.t0
    if h == 0:
        return step.y0.copy()
    s = (t - step.t0) / h
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return h00 * step.y0 + h10 * h * step.f0 + h01 * step.y1 + h11 * h * step.f1


@dataclass(frozen=True)
class Section:
    """Zero set of ``level``, anchored at a state on it."""

    level: ScalarField
    anchor: np.ndarray
    transversality: float

    def __post_init__(self):
        if abs(self.level(self.anchor)) > 1e-10:
            raise ValueError("section anchor does not lie on the level set")
        if not self.transversality > 1e-8:
            raise ValueError("section is not transversal at its anchor")

    @classmethod
    def through(cls, system: DynamicalSystem, level: ScalarField, anchor, generator=None):
        anchor = np.asarray(anchor, dtype=float)
        v = vector_field_rhs(system, generator or system.hamiltonian)(anchor)
        trans = abs(float(gradient(level, anchor, system.space) @ v))
        return cls(level, anchor, trans)


class _Invalid(Exception):
    def __init__(self, verdict: Verdict):
        self.verdict = verdict


def vector_field_rhs(system: DynamicalSystem, generator: ScalarField):
    """Right-hand side ``x -> F(x)`` for the flow of ``generator``.

    Raises :class:`DomainError` for states outside the domain.
    """
    space = system.space
    fm = system.form.field_matrix
    in_space = space.domain
    in_field = generator.domain
    closed = generator.grad

    def rhs(x):
        if not in_space(x) or (in_field is not None and not in_field(x)):
            raise DomainError(f"state {np.asarray(x).tolist()} outside the domain")
        if closed is not None:
            return fm @ np.asarray(closed(x), dtype=float)
        return fm @ gradient(generator, x, space)

    return rhs


def _guarded(rhs, blowup_norm):
    limit = blowup_norm * blowup_norm

    def g(x):
        # the negated comparison also rejects nan
        if not float(x @ x) <= limit:
            raise _Invalid(Verdict.BLOWUP)
        try:
            v = rhs(x)
        except DomainError:
            raise _Invalid(Verdict.LEFT_DOMAIN) from None
        except (FloatingPointError, OverflowError, ZeroDivisionError):
            raise _Invalid(Verdict.BLOWUP) from None
        if not float(v @ v) <= limit:
            raise _Invalid(Verdict.BLOWUP)
        return v

    return g


# Dormand-Prince 5(4) tableau
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_A_ROWS = [np.array(row) for row in _A]
_E = _B - np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


def _initial_step(f, t0, y0, f0, direction, rtol, atol):
    # Hairer, Norsett & Wanner, II.4
    scale = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    try:
        f1 = f(y0 + direction * h0 * f0)
        d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    except _Invalid:
        return h0 * 1e-3
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1)


def _dp_step(f, y, fy, h):
    k = np.empty((7, len(y)))
    k[0] = fy
    for i in range(1, 7):
        k[i] = f(y + h * (_A_ROWS[i] @ k[:i]))
    y_new = y + h * (_B[:6] @ k[:6])
    err = h * (_E @ k)
    return y_new, k[6], err


def _midpoint_step(f, y, fy, h):
    # simplified Newton on y1 = y + h f((y + y1)/2): one central-difference Jacobian per step
    y1 = y + h * fy
    n = len(y)
    mid = 0.5 * (y + y1)
    jac = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1e-6 * max(1.0, abs(mid[j]))
        jac[:, j] = (f(mid + e) - f(mid - e)) / (2 * e[j])
    lhs = np.eye(n) - 0.5 * h * jac
    prev = np.inf
    for _ in range(50):
        res = y1 - y - h * f(0.5 * (y + y1))
        dy = np.linalg.solve(lhs, -res)
        y1 = y1 + dy
        size = np.linalg.norm(dy)
        # stop at rounding level, or once the corrections stop shrinking
        if size <= 4 * _EPS * max(1.0, np.linalg.norm(y1)) or size >= prev:
            break
        prev = size
    return y1, f(y1)


def solve(system: DynamicalSystem, generator: ScalarField, x0, t_span, config: IntegratorConfig,
          t_eval: Optional[Sequence[float]] = None,
          on_step: Optional[Callable[[Step], bool]] = None,
          projection: Optional[Callable[[np.ndarray], np.ndarray]] = None):
    """Core integration loop.

    Parameters
    ----------
    t_eval : sequence of float, optional
        Parameter values (monotone in integration direction) that steps are
        clipped to land on exactly. Only these are returned as samples when
        given; otherwise every accepted step is.
    on_step : callable, optional
        Called with each accepted :class:`Step`; returning True stops the
        integration with verdict ``Completed`` at that step.
    projection : callable, optional
        Applied to every accepted state (e.g. renormalisation). Must commute
        with the flow.

    Returns
    -------
    (t, states, outcome)
    """
    x0 = np.asarray(x0, dtype=float)
    system.space.check(x0)
    if not generator.defined_at(x0):
        raise DomainError(f"generator {generator.name!r} undefined at the initial state")
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not (math.isfinite(t0) and math.isfinite(t1)):
        raise ConfigError("integration span must be finite")

    with np.errstate(all="ignore"):
        return _solve(system, generator, x0, t0, t1, config, t_eval, on_step, projection)


def _solve(system, generator, x0, t0, t1, config, t_eval, on_step, projection):
    f = _guarded(vector_field_rhs(system, generator), config.blowup_norm)
    try:
        f0 = f(x0)
    except _Invalid as exc:
        raise DomainError(f"initial state is invalid ({exc.verdict.value})") from None

    direction = 1.0 if t1 >= t0 else -1.0
    stops = list(t_eval) if t_eval is not None else []
    if stops:
        arr = np.asarray(stops, dtype=float)
        if np.any(direction * np.diff(arr) < 0):
            raise ConfigError("t_eval must be monotone in the integration direction")
    ts, ys = [], []
    stop_idx = 0

    def record(t, y):
        nonlocal stop_idx
        if t_eval is None:
            ts.append(t)
            ys.append(y.copy())
            return
        while stop_idx < len(stops) and direction * (stops[stop_idx] - t) <= 0:
            if stops[stop_idx] == t:
                ts.append(t)
                ys.append(y.copy())
            stop_idx += 1

    record(t0, x0)

    def done(verdict, t, bracket=None):
        out = FlowOutcome(verdict, bracket, float(t))
        return np.asarray(ts, dtype=float), np.asarray(ys, dtype=float).reshape(len(ts), len(x0)), out

    if t0 == t1:
        return done(Verdict.COMPLETED, t0)

    t, y, fy = t0, x0, f0
    implicit = config.method == "implicit_midpoint"
    if implicit:
        h = config.max_step
    elif config.first_step is not None:
        h = config.first_step
    else:
        h = _initial_step(f, t0, x0, f0, direction, config.rel_tol, config.abs_tol)
    h = min(h, config.max_step)
    rejected_last = False
    n_steps = 0
    while direction * (t1 - t) > 0:
        if n_steps >= config.max_steps:
            return done(Verdict.MAX_STEPS, t)
        target = t1
        while stop_idx < len(stops) and direction * (stops[stop_idx] - t) <= 0:
            stop_idx += 1
        if stop_idx < len(stops) and direction * (stops[stop_idx] - t1) < 0:
            target = stops[stop_idx]
        remaining = abs(target - t)
        h_try = min(h, remaining, config.max_step)
        clipped = h_try == remaining
        t_new = target if clipped else t + direction * h_try
        try:
            if implicit:
                y_new, f_new = _midpoint_step(f, y, fy, direction * h_try)
                err_norm = 0.0
            else:
                y_new, f_new, err = _dp_step(f, y, fy, direction * h_try)
                scale = config.abs_tol + config.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
                err_norm = float(np.sqrt(np.mean((err / scale) ** 2)))
        except _Invalid as exc:
            if h_try <= config.bracket_tol:
                lo, hi = sorted((t, t + direction * h_try))
                return done(exc.verdict, t, (float(lo), float(hi)))
            h = 0.5 * h_try
            rejected_last = True
            continue
        if err_norm > 1.0:
            h = h_try * max(0.2, 0.9 * err_norm ** -0.2)
            if h < 1e3 * _EPS * max(1.0, abs(t)):
                lo, hi = sorted((t, t + direction * h_try))
                return done(Verdict.STEP_UNDERFLOW, t, (float(lo), float(hi)))
            rejected_last = True
            continue

        n_steps += 1
        if projection is not None:
            y_new = projection(y_new)
            f_new = f(y_new)
        step = Step(t, y, fy, t_new, y_new, f_new)
        t, y, fy = t_new, y_new, f_new
        record(t, y)
        if on_step is not None and on_step(step):
            return done(Verdict.COMPLETED, t)
        if not implicit:
            factor = 5.0 if err_norm == 0 else min(5.0, 0.9 * err_norm ** -0.2)
            if rejected_last:
                factor = min(factor, 1.0)
            # a step shortened to hit a grid point says little about the next one
            if not (clipped and h_try < h):
                h = h_try * factor
        rejected_last = False
    return done(Verdict.COMPLETED, t)


def integrate(system: DynamicalSystem, generator: ScalarField, x0, span,
              config: Optional[IntegratorConfig] = None, t_eval=None, projection=None):
    """Flow ``x0`` along the Hamiltonian vector field of ``generator``.

    Returns ``(Trajectory, FlowOutcome)``.
    """
    config = config or IntegratorConfig()
    t, ys, out = solve(system, generator, x0, span, config, t_eval=t_eval, projection=projection)
    return Trajectory(t, ys, generator.name), out


def escape_time(system: DynamicalSystem, generator: ScalarField, x0,
                config: Optional[IntegratorConfig] = None) -> Optional[float]:
    """Signed parameter at which the flow through ``x0`` fails, or ``None``.

    Both directions are probed up to ``config.horizon``; if both fail the
    one closer to zero is returned.
    """
    config = config or IntegratorConfig()
    found = []
    for sign in (1.0, -1.0):
        _, _, out = solve(system, generator, x0, (0.0, sign * config.horizon), config)
        if out.escaped:
            found.append(out.escape_estimate)
    if not found:
        return None
    return min(found, key=abs)


def _crossing_in_step(system, generator, level, step: Step, t_lo, config, target_tol):
    """Locate the zero of ``level`` inside an accepted step, after ``t_lo``.

    Bisection on the Hermite interpolant, then Newton polishing on the true
    flow started at the beginning of the step.
    """
    lo, hi = t_lo, step.t1
    l_lo = level(hermite(step, lo))
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        l_mid = level(hermite(step, mid))
        if l_mid == 0:
            lo = hi = mid
            break
        if np.sign(l_mid) == np.sign(l_lo):
            lo, l_lo = mid, l_mid
        else:
            hi = mid
        if abs(hi - lo) <= 1e-14 * max(1.0, abs(mid)):
            break
    t_star = 0.5 * (lo + hi)
    a, b = sorted((t_lo, step.t1))
    rhs = vector_field_rhs(system, generator)

    def flow_to(t):
        if t == step.t0:
            return step.y0
        _, ys, out = solve(system, generator, step.y0, (step.t0, t), config)
        if not out.completed:
            raise NoCrossing("flow failed while polishing a crossing")
        return ys[-1]

    x = flow_to(t_star)
    for _ in range(8):
        val = level(x)
        if abs(val) <= target_tol:
            break
        rate = float(gradient(level, x, system.space) @ rhs(x))
        if rate == 0:
            break
        t_next = t_star - val / rate
        if not a <= t_next <= b:
            break
        t_star = t_next
        x = flow_to(t_star)
    return t_star, x


def first_crossing(system: DynamicalSystem, generator: ScalarField, x0, section: Section,
                   direction: str = "forward", config: Optional[IntegratorConfig] = None,
                   min_time: float = 0.0, max_time: Optional[float] = None,
                   transversality_threshold: float = 1e-8, level_tol: float = 1e-10):
    """First parameter of the given sign at which the flow meets ``section``.

    Crossings with ``|t| <= min_time`` are ignored, so ``min_time > 0`` asks
    for the *next* return when ``x0`` already lies on the section.

    Returns
    -------
    (t_star, x_star)
    """
    config = config or IntegratorConfig()
    if direction not in ("forward", "backward"):
        raise ValueError("direction must be 'forward' or 'backward'")
    level = section.level
    x0 = np.asarray(x0, dtype=float)
    if min_time <= 0 and abs(level(x0)) <= level_tol:
        return 0.0, x0.copy()
    sign = 1.0 if direction == "forward" else -1.0
    bound = config.horizon if max_time is None else max_time
    rhs = vector_field_rhs(system, generator)
    found = {}

    def on_step(step: Step):
        if abs(step.t1) <= min_time:
            return False
        t_lo = step.t0
        if abs(step.t0) < min_time:
            # only the part of the step beyond min_time counts
            t_lo = sign * min_time
        l0, l1 = level(hermite(step, t_lo)), level(step.y1)
        if abs(l1) <= level_tol or np.sign(l0) != np.sign(l1):
            found["step"] = (step, t_lo)
            return True
        return False

    _, _, out = solve(system, generator, x0, (0.0, sign * bound), config, on_step=on_step)
    if "step" not in found:
        raise NoCrossing(
            f"no crossing within |t| <= {bound} (flow {out.verdict.value} at t={out.t_end:.6g})"
        )
    step, t_lo = found["step"]
    if abs(level(step.y1)) <= level_tol:
        t_star, x_star = step.t1, step.y1
    else:
        t_star, x_star = _crossing_in_step(system, generator, level, step, t_lo, config, level_tol)
    trans = abs(float(gradient(level, x_star, system.space) @ rhs(x_star)))
    if trans < transversality_threshold:
        raise TangentialCrossing(f"crossing at t={t_star:.6g} has transversality {trans:.3g}")
    return float(t_star), x_star


def drift_along(field: ScalarField, trajectory: Trajectory) -> float:
    """Largest ``|f(c_t) - f(c_0)|`` over the samples of a trajectory."""
    values = np.array([field(x) for x in trajectory.states])
    if len(values) == 0:
        return 0.0
    return float(np.max(np.abs(values - values[0])))
