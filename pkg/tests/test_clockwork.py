import math

import numpy as np
import pytest

from timely.clockwork import (CandidateObservable, clock_value, construct_local_clock,
                              energy_descent_check, incompleteness_certificate,
                              recurrence_obstruction, uniqueness_decomposition,
                              verify_local_timeliness, verify_timeliness)
from timely.errors import OutsideBall, PreconditionUnverified, StationaryPoint
from timely.flow import integrate
from timely.systems import (coordinate, free_particle_halfplane, free_particle_tau,
                            harmonic_oscillator, norton, norton_tau, pendulum)

FP_STARTS = [[0.0, 1.0], [-3.0, 2.0], [5.0, 0.5]]
GRID = np.linspace(0.0, 10.0, 41)


def test_free_particle_tau_is_timely():
    rep = verify_timeliness(free_particle_halfplane(), CandidateObservable(free_particle_tau()),
                            FP_STARTS, GRID, 1e-6)
    assert rep.passed and rep.max_deviation <= 1e-6
    assert rep.to_dict()["scope"] == "on this grid"


def test_timeliness_with_negative_times():
    grid = np.arange(-2, 11) * 0.2  # backward flow from p = 1 stays in p > 0
    rep = verify_timeliness(free_particle_halfplane(), free_particle_tau(), [[0.0, 1.0]], grid, 1e-8)
    assert rep.passed


def test_norton_tau_is_timely():
    rep = verify_timeliness(norton(), norton_tau(), [[0.0, 0.0], [1.0, -1.0]], GRID, 1e-6)
    assert rep.passed


def test_oscillator_position_is_not_timely():
    grid = np.linspace(0.0, 2 * math.pi, 33)
    rep = verify_timeliness(harmonic_oscillator(), coordinate(0, "q"), [[0.0, 1.0]], grid, 1e-6)
    assert not rep.passed
    assert rep.max_deviation == pytest.approx(2 * math.pi, abs=1e-6)


def test_grid_must_contain_zero():
    with pytest.raises(ValueError):
        verify_timeliness(harmonic_oscillator(), coordinate(0), [[0.0, 1.0]], [1.0, 2.0], 1e-6)


def test_escaping_trajectory_fails_with_partial_record():
    # the h-flow of h = -p^3/3 ... use the tau-flow of the free particle as "h"
    from timely.geometry import DynamicalSystem
    fp = free_particle_halfplane()
    sys = DynamicalSystem(fp.space, fp.form, free_particle_tau())
    rep = verify_timeliness(sys, CandidateObservable(coordinate(0), "q"), [[0.0, 1.0]],
                            np.linspace(0, 1, 11), 1e6)
    assert not rep.passed
    check = rep.per_trajectory[0]
    assert not check.completed
    assert check.samples < check.grid_points


def test_local_timeliness_examples():
    rng = np.random.default_rng(0)
    pts = np.column_stack([rng.uniform(-5, 5, 100), rng.uniform(0.1, 10, 100)])
    assert verify_local_timeliness(free_particle_halfplane(), free_particle_tau(), pts, 1e-6).passed
    pts = rng.uniform(-3, 3, (50, 2))
    assert verify_local_timeliness(norton(), norton_tau(), pts, 1e-8).passed
    rep = verify_local_timeliness(harmonic_oscillator(), coordinate(0), pts, 1e-6)
    assert not rep.passed
    # {h, q} = p
    assert np.allclose(rep.brackets, pts[:, 1])


def test_timely_implies_locally_timely():
    fp = free_particle_halfplane()
    tau = free_particle_tau()
    rep = verify_timeliness(fp, tau, FP_STARTS, GRID, 1e-6)
    assert rep.passed
    states = np.vstack([c.trajectory.states for c in rep.per_trajectory])
    assert verify_local_timeliness(fp, tau, states, 1e-5).passed


def test_clock_examples():
    fp = free_particle_halfplane()
    clock = construct_local_clock(fp, [0.0, 1.0], 0.5)
    assert clock.radius <= 0.5
    assert clock_value(clock, [0.0, 1.0]) == 0.0
    assert clock_value(clock, [0.2, 1.0]) == pytest.approx(0.2, abs=1e-9)
    with pytest.raises(OutsideBall):
        clock_value(clock, [3.0, 1.0])
    with pytest.raises(StationaryPoint):
        construct_local_clock(harmonic_oscillator(), [0.0, 0.0], 0.5)


def test_pendulum_clock_two_point_identity():
    sys = pendulum()
    clock = construct_local_clock(sys, [0.0, 1.0], 0.2)
    assert clock.validation_residual <= 1e-6
    assert clock.pairs_checked >= 20
    # independent arcs inside the ball
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(10):
        y = clock.anchor + rng.uniform(-0.4, 0.4, 2) * clock.radius
        dt = rng.uniform(-0.2, 0.2) * clock.radius
        tr, out = integrate(sys, sys.hamiltonian, y, (0.0, dt))
        if clock.contains(tr.end):
            worst = max(worst, abs(clock_value(clock, tr.end) - clock_value(clock, y) - dt))
    assert worst <= 1e-6


def test_clock_shrinks_radius_near_domain_edge():
    fp = free_particle_halfplane()
    clock = construct_local_clock(fp, [0.0, 0.3], 1.0, n_samples=50, n_pairs=20)
    assert clock.radius < 0.3


def test_uniqueness_examples():
    fp = free_particle_halfplane()
    tau = free_particle_tau()
    rep = uniqueness_decomposition(fp, tau, tau + fp.hamiltonian, FP_STARTS, GRID, 1e-8)
    assert rep.passed
    rep = uniqueness_decomposition(fp, tau, tau, FP_STARTS, GRID, 1e-12)
    assert rep.max_drift == 0.0
    clock = construct_local_clock(fp, [0.0, 1.0], 0.5)
    rep = uniqueness_decomposition(fp, tau, clock.as_field(), [[0.0, 1.0], [0.1, 1.1]],
                                   np.linspace(-0.2, 0.2, 9), 1e-6)
    assert rep.passed


@pytest.mark.parametrize("shift", ["zero", "energy", "momentum"])
def test_adding_constant_of_motion_keeps_timeliness(shift):
    fp = free_particle_halfplane()
    tau = free_particle_tau()
    f = {"zero": 0.0 * fp.hamiltonian, "energy": fp.hamiltonian, "momentum": coordinate(1)}[shift]
    assert verify_timeliness(fp, tau, FP_STARTS, GRID, 1e-6).passed
    assert verify_timeliness(fp, tau + f, FP_STARTS, GRID, 1e-6).passed


def test_energy_descent_examples():
    rep = energy_descent_check(norton(), norton_tau(), [0.0, 0.0], np.linspace(0, 0.99, 100),
                               1e-6, h_inf=0.0)
    assert rep.passed
    assert rep.slope == pytest.approx(-1.0, abs=1e-6)
    assert rep.residual <= 1e-8
    rep = energy_descent_check(free_particle_halfplane(), free_particle_tau(), [0.0, 1.0],
                               np.linspace(0, 0.49, 50), 1e-6, h_inf=0.0)
    assert rep.passed and abs(rep.slope + 1) <= 1e-6 and rep.residual <= 1e-8
    rep = energy_descent_check(norton(), norton_tau(), [0.0, 0.0], [0.0], 1e-6)
    assert rep.max_deviation == 0.0


def test_energy_descent_flags_contradiction_past_bound():
    rep = energy_descent_check(norton(), norton_tau(), [0.0, 0.0], np.linspace(0, 1.5, 16),
                               1e-6, h_inf=0.0)
    assert rep.outcome.escaped and not rep.contradiction
    assert rep.outcome.escape_estimate == pytest.approx(1.0, abs=1e-3)


def test_incompleteness_examples():
    cert = incompleteness_certificate(norton(), norton_tau(), [[0.0, 0.0]], 0.0)
    assert cert.passed
    lo, hi = cert.entries[0]["outcome"]["escape_bracket"]
    assert 1 - 1e-3 <= lo <= hi <= 1 + 1e-3
    assert cert.entries[0]["predicted_bound"] == 1.0
    cert = incompleteness_certificate(free_particle_halfplane(), free_particle_tau(),
                                      [[0.0, 1.0]], 0.0)
    assert cert.passed
    assert cert.entries[0]["escape_parameter"] <= 0.5 + 1e-3
    with pytest.raises(PreconditionUnverified):
        incompleteness_certificate(harmonic_oscillator(), coordinate(0), [[1.0, 0.5]], 0.0)


def test_escape_before_bound_on_many_samples():
    rng = np.random.default_rng(4)
    samples = np.column_stack([rng.uniform(-2, 2, 8), rng.uniform(-1, 1, 8)])
    cert = incompleteness_certificate(norton(), norton_tau(), samples, 0.0)
    assert cert.passed
    for e in cert.entries:
        assert e["escape_parameter"] == pytest.approx(math.exp(e["initial_state"][1]), abs=1e-3)


def test_recurrence_examples():
    rec = recurrence_obstruction(harmonic_oscillator(), [1.0, 0.0], 20.0, 1e-6)
    assert rec is not None
    assert rec.T == pytest.approx(2 * math.pi, abs=1e-5)
    assert rec.violation_lower_bound >= 2 * math.pi - 1e-5
    assert recurrence_obstruction(free_particle_halfplane(), [0.0, 1.0], 100.0, 1e-6) is None


def test_recurrence_of_slow_oscillator():
    rec = recurrence_obstruction(harmonic_oscillator(0.5), [0.0, 1.0], 30.0, 1e-6)
    assert rec.T == pytest.approx(4 * math.pi, abs=1e-5)
