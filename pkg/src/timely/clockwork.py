"""Time observables: timeliness checks, local clocks and their obstructions.

All verdicts are relative to finite samples. A timeliness pass means
"timely on this grid from these initial states"; an escape is certified,
while the absence of one only bounds the flow up to a horizon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import (DomainError, NoCrossing, OutsideBall, PreconditionUnverified,
                     StationaryPoint, TangentialCrossing, ValidationFailed)
from .flow import (FlowOutcome, IntegratorConfig, Section, Step, Trajectory,
                   first_crossing, integrate, solve, vector_field_rhs, _initial_step, _guarded)
from .geometry import (DynamicalSystem, ScalarField, hamiltonian_vector_field,
                       is_stationary, poisson_bracket)

__all__ = [
    "CandidateObservable",
    "TrajectoryCheck",
    "TimelinessReport",
    "LocalTimelinessReport",
    "LocalClock",
    "UniquenessReport",
    "EnergyDescentReport",
    "IncompletenessCertificate",
    "Recurrence",
    "verify_timeliness",
    "verify_local_timeliness",
    "construct_local_clock",
    "clock_value",
    "uniqueness_decomposition",
    "energy_descent_check",
    "incompleteness_certificate",
    "recurrence_obstruction",
]


@dataclass(frozen=True)
class CandidateObservable:
    tau: ScalarField
    label: str = "tau"


Candidate = Union[CandidateObservable, ScalarField]


def _field(candidate: Candidate) -> ScalarField:
    return candidate.tau if isinstance(candidate, CandidateObservable) else candidate


def _label(candidate: Candidate) -> str:
    return candidate.label if isinstance(candidate, CandidateObservable) else candidate.name


def _split_grid(t_grid):
    grid = np.asarray(t_grid, dtype=float)
    if grid.ndim != 1 or len(grid) == 0:
        raise ValueError("t_grid must be a non-empty 1-d sequence")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    if not np.any(grid == 0.0):
        raise ValueError("t_grid must contain 0")
    forward = grid[grid >= 0]
    backward = grid[grid <= 0][::-1]
    return grid, forward, backward


def _flow_on_grid(system, generator, x0, forward, backward, config):
    """Integrate both ways from ``x0`` landing exactly on the grid.

    Returns the merged, increasing ``(t, states)`` and the two outcomes.
    """
    outcomes = []
    ts, xs = [], []
    if len(backward) > 1:
        tr, out = integrate(system, generator, x0, (0.0, backward[-1]), config, t_eval=backward)
        outcomes.append(out)
        ts.extend(tr.t[:0:-1])
        xs.extend(tr.states[:0:-1])
    tr, out = integrate(system, generator, x0, (0.0, forward[-1]), config, t_eval=forward)
    if len(forward) > 1:
        outcomes.append(out)
    ts.extend(tr.t)
    xs.extend(tr.states)
    if not outcomes:
        outcomes.append(out)
    return Trajectory(np.asarray(ts), np.asarray(xs), generator.name), outcomes


@dataclass
class TrajectoryCheck:
    initial_state: list
    max_deviation: float
    outcomes: list
    samples: int
    grid_points: int
    trajectory: Optional[Trajectory] = field(default=None, repr=False)

    @property
    def completed(self) -> bool:
        return all(o.completed for o in self.outcomes) and self.samples == self.grid_points

    def to_dict(self) -> dict:
        return {
            "initial_state": self.initial_state,
            "max_deviation": self.max_deviation,
            "samples": self.samples,
            "grid_points": self.grid_points,
            "outcomes": [o.to_dict() for o in self.outcomes],
        }


@dataclass
class TimelinessReport:
    """Outcome of checking ``tau(c_t) = tau(c_0) + t`` on a finite grid."""

    label: str
    per_trajectory: list
    tolerance: float
    grid: tuple

    @property
    def max_deviation(self) -> float:
        return max((c.max_deviation for c in self.per_trajectory), default=0.0)

    @property
    def passed(self) -> bool:
        return all(c.max_deviation <= self.tolerance and c.completed for c in self.per_trajectory)

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        return {
            "candidate": self.label,
            "verdict": self.verdict,
            "scope": "on this grid",
            "tolerance": self.tolerance,
            "grid": {"min": self.grid[0], "max": self.grid[1], "points": self.grid[2]},
            "max_deviation": self.max_deviation,
            "per_trajectory": [c.to_dict() for c in self.per_trajectory],
        }


def verify_timeliness(system: DynamicalSystem, candidate: Candidate, initial_states,
                      t_grid, tol: float, config: Optional[IntegratorConfig] = None
                      ) -> TimelinessReport:
    """Check the timer property along h-trajectories on a parameter grid.

    Grids may extend to negative times; both directions are integrated. A
    trajectory that escapes before the grid ends is evaluated on the part it
    survived and counts as a failure.
    """
    config = config or IntegratorConfig()
    tau = _field(candidate)
    grid, forward, backward = _split_grid(t_grid)
    checks = []
    for x0 in initial_states:
        x0 = system.space.check(x0)
        traj, outcomes = _flow_on_grid(system, system.hamiltonian, x0, forward, backward, config)
        tau0 = tau(x0)
        dev = [abs(tau(x) - tau0 - t) for t, x in zip(traj.t, traj.states)]
        checks.append(TrajectoryCheck(
            initial_state=[float(v) for v in x0],
            max_deviation=float(max(dev)),
            outcomes=outcomes,
            samples=len(traj.t),
            grid_points=len(grid),
            trajectory=traj,
        ))
    return TimelinessReport(_label(candidate), checks, tol,
                            (float(grid[0]), float(grid[-1]), len(grid)))


@dataclass
class LocalTimelinessReport:
    label: str
    brackets: list
    tolerance: float

    @property
    def max_deviation(self) -> float:
        return max((abs(b - 1.0) for b in self.brackets), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tolerance

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        return {
            "candidate": self.label,
            "verdict": self.verdict,
            "tolerance": self.tolerance,
            "samples": len(self.brackets),
            "max_deviation": self.max_deviation,
            "bracket_range": [min(self.brackets), max(self.brackets)] if self.brackets else None,
        }


def verify_local_timeliness(system: DynamicalSystem, candidate: Candidate, sample_states,
                            tol: float) -> LocalTimelinessReport:
    """Check ``{h, tau} = 1`` pointwise."""
    tau = _field(candidate)
    values = [poisson_bracket(system, system.hamiltonian, tau, x) for x in sample_states]
    return LocalTimelinessReport(_label(candidate), values, tol)


# -- local clocks -------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LocalClock:
    """Flow-time-since-section clock on a validated ball.

    The section is the hyperplane through ``anchor`` normal to the
    Hamiltonian vector field there.
    """

    system: DynamicalSystem
    section: Section
    radius: float
    speed: float
    time_bound: float
    validation_residual: float
    pairs_checked: int

    @property
    def anchor(self) -> np.ndarray:
        return self.section.anchor

    def contains(self, y) -> bool:
        return float(np.linalg.norm(np.asarray(y, dtype=float) - self.anchor)) <= self.radius

    def as_field(self, config: Optional[IntegratorConfig] = None, name: str = "clock") -> ScalarField:
        """The clock as a scalar field defined on its ball (gradient by finite differences)."""
        return ScalarField(lambda y: clock_value(self, y, config), None, name=name,
                           domain=self.contains)


def _hyperplane_section(system, x):
    v = hamiltonian_vector_field(system, system.hamiltonian, x)
    speed = float(np.linalg.norm(v))
    normal = v / speed
    anchor = np.array(x, dtype=float)
    level = ScalarField(lambda y: float((y - anchor) @ normal), lambda y: normal.copy(),
                        name="section")
    return Section(level, anchor, speed), speed


def _clock_time(system, section, y, config, time_bound, min_rate=None):
    level = section.level(y)
    if level == 0.0:
        return 0.0
    direction = "backward" if level > 0 else "forward"
    t_star, x_star = first_crossing(system, system.hamiltonian, y, section, direction, config,
                                    max_time=time_bound)
    if min_rate is not None:
        rate = float(section.level.grad(x_star)
                     @ hamiltonian_vector_field(system, system.hamiltonian, x_star))
        if rate < min_rate:
            raise TangentialCrossing(f"crossing rate {rate:.3g} below {min_rate:.3g}")
    return -t_star


def clock_value(clock: LocalClock, y, config: Optional[IntegratorConfig] = None) -> float:
    """Signed flow time from the clock's section to ``y``."""
    y = np.asarray(y, dtype=float)
    if not clock.contains(y):
        raise OutsideBall(f"{y.tolist()} lies outside the clock ball of radius {clock.radius}")
    return _clock_time(clock.system, clock.section, y, config or IntegratorConfig(),
                       clock.time_bound)


def _ball_samples(rng, center, radius, count):
    d = len(center)
    dirs = rng.normal(size=(count, d))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    r = radius * rng.uniform(size=count) ** (1.0 / d)
    return center + dirs * r[:, None]


def construct_local_clock(system: DynamicalSystem, x, requested_radius: float,
                          config: Optional[IntegratorConfig] = None, *, n_samples: int = 200,
                          n_pairs: int = 50, tol: float = 1e-6, seed: int = 0,
                          max_halvings: int = 10) -> LocalClock:
    """Build and validate a local clock around a non-stationary point.

    The ball radius starts at ``requested_radius`` and halves until every
    sampled point has a well-conditioned first crossing within the time
    bound and the two-point identity holds on sampled trajectory pairs.
    """
    config = config or IntegratorConfig()
    x = system.space.check(x)
    if is_stationary(system, x, 1e-8):
        raise StationaryPoint(f"no clock can run at the stationary point {x.tolist()}")
    section, speed = _hyperplane_section(system, x)
    rhs = vector_field_rhs(system, system.hamiltonian)
    rng = np.random.default_rng(seed)
    radius = float(requested_radius)
    last_reason = ""
    for _ in range(max_halvings + 1):
        time_bound = 4.0 * radius / speed
        try:
            residual, pairs = _validate_ball(system, section, x, radius, speed, time_bound,
                                             config, rng, n_samples, n_pairs, tol, rhs)
        except _BallRejected as exc:
            last_reason = str(exc)
            radius *= 0.5
            continue
        return LocalClock(system, section, radius, speed, time_bound, residual, pairs)
    raise ValidationFailed(
        f"no radius down to {requested_radius / 2**max_halvings:.3g} validated ({last_reason})"
    )


class _BallRejected(Exception):
    pass


def _validate_ball(system, section, x, radius, speed, time_bound, config, rng,
                   n_samples, n_pairs, tol, rhs):
    points = _ball_samples(rng, x, radius, n_samples)
    min_rate = 0.5 * speed
    values = []
    for y in points:
        if not system.space.contains(y):
            raise _BallRejected("ball leaves the phase-space domain")
        try:
            values.append(_clock_time(system, section, y, config, time_bound, min_rate))
        except (NoCrossing, TangentialCrossing, DomainError) as exc:
            raise _BallRejected(f"crossing check failed: {exc}") from None
    worst = 0.0
    pairs = 0
    for y, value in zip(points[:n_pairs], values[:n_pairs]):
        dt = rng.uniform(-0.5, 0.5) * radius / speed
        tr, out = integrate(system, system.hamiltonian, y, (0.0, dt), config)
        y2 = tr.end
        if not out.completed or np.linalg.norm(y2 - x) > radius:
            continue
        try:
            value2 = _clock_time(system, section, y2, config, time_bound, min_rate)
        except (NoCrossing, TangentialCrossing, DomainError) as exc:
            raise _BallRejected(f"crossing check failed: {exc}") from None
        worst = max(worst, abs(value2 - value - dt))
        pairs += 1
    if worst > tol:
        raise _BallRejected(f"two-point residual {worst:.3g} exceeds {tol:.3g}")
    if pairs == 0:
        raise _BallRejected("no sampled pair stayed inside the ball")
    return worst, pairs


# -- uniqueness -------------------------------------------------------------------------------

@dataclass
class UniquenessReport:
    labels: tuple
    drifts: list
    samples: list
    tolerance: float

    @property
    def max_drift(self) -> float:
        return max(self.drifts, default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_drift <= self.tolerance and all(n > 0 for n in self.samples)

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        return {
            "candidates": list(self.labels),
            "verdict": self.verdict,
            "tolerance": self.tolerance,
            "max_drift": self.max_drift,
            "drifts": self.drifts,
            "samples": self.samples,
        }


def uniqueness_decomposition(system: DynamicalSystem, tau1: Candidate, tau2: Candidate,
                             initial_states, t_grid, tol: float,
                             config: Optional[IntegratorConfig] = None) -> UniquenessReport:
    """Check that ``tau2 - tau1`` is constant along each h-trajectory.

    Samples where either candidate is undefined (e.g. outside a clock's ball)
    are skipped; the trajectory's first usable sample is the reference.
    """
    config = config or IntegratorConfig()
    f1, f2 = _field(tau1), _field(tau2)
    _, forward, backward = _split_grid(t_grid)
    drifts, counts = [], []
    for x0 in initial_states:
        x0 = system.space.check(x0)
        traj, _ = _flow_on_grid(system, system.hamiltonian, x0, forward, backward, config)
        diffs = [f2(x) - f1(x) for x in traj.states if f1.defined_at(x) and f2.defined_at(x)]
        counts.append(len(diffs))
        drifts.append(float(np.max(np.abs(np.asarray(diffs) - diffs[0]))) if diffs else math.inf)
    return UniquenessReport((_label(tau1), _label(tau2)), drifts, counts, tol)


# -- energy descent and incompleteness ---------------------------------------------------------

@dataclass
class EnergyDescentReport:
    label: str
    max_deviation: float
    slope: float
    intercept: float
    residual: float
    samples: int
    outcome: FlowOutcome
    h_initial: float
    h_inf: Optional[float]
    s_max: float
    tolerance: float
    trajectory: Optional[Trajectory] = field(default=None, repr=False)

    @property
    def predicted_bound(self) -> Optional[float]:
        return None if self.h_inf is None else self.h_initial - self.h_inf

    @property
    def contradiction(self) -> bool:
        """Completed beyond the energy-descent bound: impossible for a correct run."""
        bound = self.predicted_bound
        return bound is not None and self.outcome.completed and self.s_max > bound + 1e-3

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tolerance and not self.contradiction

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        return {
            "candidate": self.label,
            "verdict": self.verdict,
            "tolerance": self.tolerance,
            "max_deviation": self.max_deviation,
            "slope": self.slope,
            "intercept": self.intercept,
            "fit_residual": self.residual,
            "samples": self.samples,
            "h_initial": self.h_initial,
            "h_inf": self.h_inf,
            "predicted_bound": self.predicted_bound,
            "outcome": self.outcome.to_dict(),
        }


def energy_descent_check(system: DynamicalSystem, candidate: Candidate, x0, s_grid,
                         tol: float, h_inf: Optional[float] = None,
                         config: Optional[IntegratorConfig] = None) -> EnergyDescentReport:
    """Follow the flow generated by ``tau`` and compare ``h`` with ``h(0) - s``."""
    config = config or IntegratorConfig()
    tau = _field(candidate)
    s_grid = np.asarray(s_grid, dtype=float)
    if s_grid[0] != 0.0 or np.any(np.diff(s_grid) * np.sign(s_grid[-1] or 1.0) <= 0):
        raise ValueError("s_grid must start at 0 and be strictly monotone")
    x0 = system.space.check(x0)
    h = system.hamiltonian
    tr, out = integrate(system, tau, x0, (0.0, float(s_grid[-1])), config, t_eval=s_grid)
    h_vals = np.array([h(x) for x in tr.states])
    dev = np.abs(h_vals - h_vals[0] + tr.t)
    if len(tr.t) >= 2:
        slope, intercept = np.polyfit(tr.t, h_vals, 1)
        residual = float(np.sqrt(np.mean((h_vals - (slope * tr.t + intercept)) ** 2)))
    else:
        slope, intercept, residual = math.nan, float(h_vals[0]), 0.0
    return EnergyDescentReport(_label(candidate), float(dev.max()), float(slope), float(intercept),
                               residual, len(tr.t), out, float(h_vals[0]), h_inf,
                               float(s_grid[-1]), tol, tr)


@dataclass
class IncompletenessCertificate:
    label: str
    h_inf: float
    entries: list
    local_timeliness: LocalTimelinessReport

    @property
    def passed(self) -> bool:
        return bool(self.entries) and all(e["escaped"] and e["within_bound"] for e in self.entries)

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        return {
            "candidate": self.label,
            "verdict": self.verdict,
            "h_inf_asserted": self.h_inf,
            "local_timeliness": self.local_timeliness.to_dict(),
            "samples": self.entries,
        }


def incompleteness_certificate(system: DynamicalSystem, candidate: Candidate, sample_states,
                               h_inf: float, config: Optional[IntegratorConfig] = None,
                               local_tol: float = 1e-6, slack: float = 1e-3
                               ) -> IncompletenessCertificate:
    """Certify that the flow generated by a locally timely ``tau`` escapes.

    With ``{h, tau} = 1`` the energy falls with unit slope along the flow of
    ``tau``, so the flow from ``x0`` must fail by ``s = h(x0) - h_inf``.
    ``h_inf`` is the caller-asserted infimum of ``h``; it is recorded, not
    verified.
    """
    config = config or IntegratorConfig()
    tau = _field(candidate)
    local = verify_local_timeliness(system, candidate, sample_states, local_tol)
    if not local.passed:
        raise PreconditionUnverified(
            f"{_label(candidate)} is not locally timely (max |{{h,tau}} - 1| = {local.max_deviation:.3g})"
        )
    entries = []
    for x0 in sample_states:
        x0 = system.space.check(x0)
        bound = system.hamiltonian(x0) - h_inf
        span = 2.0 * bound + 1.0
        _, _, out = solve(system, tau, x0, (0.0, span), config)
        escape = out.escape_estimate
        entries.append({
            "initial_state": [float(v) for v in x0],
            "predicted_bound": float(bound),
            "outcome": out.to_dict(),
            "escaped": out.escaped,
            "escape_parameter": escape,
            "within_bound": escape is not None and escape <= bound + slack,
        })
    return IncompletenessCertificate(_label(candidate), float(h_inf), entries, local)


# -- recurrence -------------------------------------------------------------------------------

@dataclass(frozen=True)
class Recurrence:
    """A near-return ``|c_T - c_0| <= eps`` of an h-orbit."""

    T: float
    distance: float
    eps: float
    lipschitz: float

    @property
    def violation_lower_bound(self) -> float:
        """Lower bound on ``|tau(c_T) - tau(c_0) - T|`` for any tau with the given Lipschitz constant."""
        return self.T - self.lipschitz * self.distance

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "distance": self.distance,
            "eps": self.eps,
            "timeliness_violation_lower_bound": self.violation_lower_bound,
        }


def recurrence_obstruction(system: DynamicalSystem, x0, horizon: float, eps: float,
                           config: Optional[IntegratorConfig] = None,
                           t_min: Optional[float] = None,
                           metric: Optional[Callable[[np.ndarray, np.ndarray], float]] = None,
                           lipschitz: float = 1.0, subsamples: int = 8) -> Optional[Recurrence]:
    """First ``T > t_min`` at which the h-orbit of ``x0`` returns within ``eps``.

    Local minima of the distance to ``x0`` are detected on the dense output
    and refined with a bounded scalar minimisation on the true flow.
    ``metric`` defaults to the Euclidean distance of the chart.
    """
    config = config or IntegratorConfig()
    x0 = system.space.check(x0)
    if metric is None:
        def metric(a, b):
            return float(np.linalg.norm(a - b))
    if t_min is None:
        f = _guarded(vector_field_rhs(system, system.hamiltonian), config.blowup_norm)
        h0 = _initial_step(f, 0.0, x0, f(x0), 1.0, config.rel_tol, config.abs_tol)
        t_min = 10.0 * h0

    history = []  # (t, d, step) samples of the distance
    found = {}

    def flow_from(step: Step, t):
        if t == step.t0:
            return step.y0
        _, ys, out = solve(system, system.hamiltonian, step.y0, (step.t0, t), config)
        return ys[-1]

    def refine(a, b, step):
        res = minimize_scalar(lambda t: metric(flow_from(step, t), x0), bounds=(a, b),
                              method="bounded", options={"xatol": 1e-12})
        return float(res.x), float(res.fun)

    def on_step(step: Step):
        for s in np.linspace(0.0, 1.0, subsamples + 1)[1:]:
            t = step.t0 + s * (step.t1 - step.t0)
            history.append((t, metric(step(t), x0), step))
            if len(history) > 3:
                history.pop(0)
            if len(history) < 3:
                continue
            (ta, da, sa), (tb, db, _), (tc, dc, _) = history
            # a sampled local minimum that could hide a return within eps
            if tb > t_min and db <= da and db < dc and db <= eps + 2.0 * max(da - db, dc - db):
                t_star, d_star = refine(ta, tc, sa)
                if d_star <= eps and t_star > t_min:
                    found["rec"] = Recurrence(t_star, d_star, eps, lipschitz)
                    return True
        return False

    solve(system, system.hamiltonian, x0, (0.0, horizon), config, on_step=on_step)
    return found.get("rec")
