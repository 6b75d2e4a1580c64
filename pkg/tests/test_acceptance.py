"""Acceptance criteria, each at its stated tolerance.

Run ``pytest tests/test_acceptance.py -v``; the terminal summary prints one
PASS/FAIL line per criterion.
"""

import io
import json
import math

import numpy as np
import pytest
from scipy.linalg import expm
from scipy.optimize import minimize_scalar

from timely.cli import main
from timely.clockwork import (clock_value, construct_local_clock, energy_descent_check,
                              incompleteness_certificate, uniqueness_decomposition,
                              verify_timeliness)
from timely.errors import StationaryPoint
from timely.flow import IntegratorConfig, integrate, solve
from timely.kahler import (ObservableFunction, ProjectivePoint, QuantumSystem,
                           kahler_identity_residuals, killing_norm_constancy, killing_residual,
                           pauli_matrices, pauli_obstruction_demo, projective_distance,
                           projective_flow, random_hermitian, random_point, spin_matrices)
from timely.scenarios import load_scenario, run_scenario
from timely.systems import (free_particle_halfplane, free_particle_tau, harmonic_oscillator,
                            norton, norton_tau, pendulum)

criterion = pytest.mark.criterion
GRID = np.linspace(0.0, 10.0, 101)


@criterion(1, "free particle: q/p is timely on 10 random starts, deviation <= 1e-6")
def test_ac1_free_particle_timeliness():
    rng = np.random.default_rng(1)
    starts = np.column_stack([rng.uniform(-5, 5, 10), rng.uniform(0.2, 5, 10)])
    rep = verify_timeliness(free_particle_halfplane(), free_particle_tau(), starts, GRID, 1e-6)
    assert rep.passed
    assert rep.max_deviation <= 1e-6


@criterion(2, "Norton: q/e^p timely, tau-flow escapes at s = 1, h = 1 - s")
def test_ac2_norton():
    sys, tau = norton(), norton_tau()
    rng = np.random.default_rng(2)
    starts = np.vstack([[0.0, 0.0], rng.uniform(-2, 2, (4, 2))])
    rep = verify_timeliness(sys, tau, starts, GRID, 1e-6)
    assert rep.passed and rep.max_deviation <= 1e-6

    cert = incompleteness_certificate(sys, tau, [[0.0, 0.0]], 0.0)
    lo, hi = cert.entries[0]["outcome"]["escape_bracket"]
    assert lo - 1e-3 <= 1.0 <= hi + 1e-3

    s = np.linspace(0.0, 0.999, 200)
    tr, out = integrate(sys, tau, [0.0, 0.0], (0.0, s[-1]), t_eval=s)
    assert out.completed
    h = np.array([sys.hamiltonian(x) for x in tr.states])
    assert np.max(np.abs(h - (1.0 - s))) <= 1e-6


@criterion(3, "local clocks at 20 random points of pendulum and free particle; "
              "stationary point rejected")
@pytest.mark.parametrize("which", ["pendulum", "free_particle"])
def test_ac3_local_clocks(which):
    rng = np.random.default_rng(3)
    if which == "pendulum":
        sys = pendulum()
        points = rng.uniform(-2, 2, (20, 2))
    else:
        sys = free_particle_halfplane()
        points = np.column_stack([rng.uniform(-3, 3, 20), rng.uniform(0.5, 3, 20)])
    for x in points:
        clock = construct_local_clock(sys, x, 0.2, seed=int(rng.integers(2**31)))
        assert clock.validation_residual <= 1e-6
        # independent two-point check inside the validated ball
        for _ in range(3):
            y = clock.anchor + rng.uniform(-0.35, 0.35, 2) * clock.radius
            dt = rng.uniform(-0.15, 0.15) * clock.radius
            tr, out = integrate(sys, sys.hamiltonian, y, (0.0, dt))
            if clock.contains(tr.end):
                assert abs(clock_value(clock, tr.end) - clock_value(clock, y) - dt) <= 1e-6


@criterion(3, "local clocks at 20 random points of pendulum and free particle; "
              "stationary point rejected")
def test_ac3_stationary_point():
    with pytest.raises(StationaryPoint):
        construct_local_clock(harmonic_oscillator(), [0.0, 0.0], 0.5)


@criterion(4, "uniqueness: (tau + h) - tau and clock - q/p are conserved to 1e-6")
def test_ac4_uniqueness():
    sys, tau = free_particle_halfplane(), free_particle_tau()
    rng = np.random.default_rng(4)
    starts = np.column_stack([rng.uniform(-3, 3, 5), rng.uniform(0.5, 3, 5)])
    rep = uniqueness_decomposition(sys, tau, tau + sys.hamiltonian, starts, GRID, 1e-6)
    assert rep.passed and rep.max_drift <= 1e-6

    clock = construct_local_clock(sys, [0.0, 1.0], 0.4)
    near = [[0.0, 1.0], [0.05, 1.05], [-0.05, 0.97]]
    rep = uniqueness_decomposition(sys, tau, clock.as_field(), near,
                                   np.linspace(-0.1, 0.1, 9), 1e-6)
    assert rep.passed and rep.max_drift <= 1e-6


@criterion(5, "tau-flows escape before h(x0) - h_inf, descent slope -1 to 1e-6")
@pytest.mark.parametrize("which", ["free_particle", "norton"])
def test_ac5_energy_descent(which):
    if which == "norton":
        sys, tau, x0, h_inf = norton(), norton_tau(), [0.0, 0.0], 0.0
    else:
        sys, tau, x0, h_inf = free_particle_halfplane(), free_particle_tau(), [0.0, 1.0], 0.0
    bound = sys.hamiltonian(x0) - h_inf
    cert = incompleteness_certificate(sys, tau, [x0], h_inf)
    assert cert.passed
    assert cert.entries[0]["escape_parameter"] <= bound + 1e-3
    rep = energy_descent_check(sys, tau, x0, np.linspace(0.0, 0.98 * bound, 50), 1e-6,
                               h_inf=h_inf)
    assert rep.passed
    assert abs(rep.slope + 1.0) <= 1e-6


@criterion(6, "Kahler identities at 100 samples for n = 2, 3, 5, residuals <= 1e-12")
@pytest.mark.parametrize("n", [2, 3, 5])
def test_ac6_kahler_identities(n):
    residuals = kahler_identity_residuals(n, samples=100, seed=60 + n)
    assert set(residuals) == {"compatibility", "j_invariance_g", "j_invariance_omega",
                              "phase_invariance"}
    assert max(residuals.values()) <= 1e-12


@criterion(7, "projective flows match the matrix-exponential orbit to 1e-8 on [0, 10]")
@pytest.mark.parametrize("n", [2, 3, 5])
def test_ac7_schrodinger_correspondence(n):
    rng = np.random.default_rng(70 + n)
    grid = np.linspace(0.0, 10.0, 41)
    for _ in range(5):
        H, F = random_hermitian(n, rng), random_hermitian(n, rng)
        psi0 = random_point(n, rng)
        points, _, out = projective_flow(QuantumSystem(H), ObservableFunction.expectation(F),
                                         psi0, (0.0, 10.0), t_eval=grid)
        assert out.completed
        z0 = psi0.representative
        worst = max(projective_distance(expm(-1j * s * F) @ z0, p.representative)
                    for s, p in zip(grid, points))
        assert worst <= 1e-8


PAULI = pauli_matrices()
SX, SY, SZ = PAULI["sigma_x"], PAULI["sigma_y"], PAULI["sigma_z"]
PLUS = np.array([1.0, 1.0]) / math.sqrt(2)
PLUS_I = np.array([1.0, 1j]) / math.sqrt(2)
WEINBERG = [
    (ObservableFunction.square(SX, "sx^2"), PLUS_I),
    (ObservableFunction.square(SY, "sy^2"), PLUS),
    (ObservableFunction.square(SZ, "sz^2"), PLUS),
    (ObservableFunction.product(SX, SZ, "sx*sz"), PLUS_I),
    (ObservableFunction.product(SY, SZ, "sy*sz"), PLUS),
]


@criterion(8, "Killing residual <= 1e-5 on 20 expectations, >= 1e-3 on 5 Weinberg functions")
def test_ac8_killing_dichotomy():
    rng = np.random.default_rng(8)
    for k in range(20):
        n = (2, 3)[k % 2]
        obs = ObservableFunction.expectation(random_hermitian(n, rng))
        assert killing_residual(obs, random_point(n, rng), 30, seed=k) <= 1e-5
    for obs, z in WEINBERG:
        assert killing_residual(obs, ProjectivePoint(z), 30) >= 1e-3


@criterion(9, "metric norm of expectation fields constant to 1e-8 over [0, 4 pi]")
def test_ac9_norm_constancy():
    rng = np.random.default_rng(9)
    grid = np.linspace(0.0, 4 * math.pi, 65)
    for n in (2, 3, 5):
        obs = ObservableFunction.expectation(random_hermitian(n, rng))
        assert killing_norm_constancy(obs, random_point(n, rng), grid) <= 1e-8


def _candidates(n, rng):
    named = PAULI if n == 2 else spin_matrices(n)
    cands = [ObservableFunction.expectation(m, k) for k, m in named.items()]
    cands.append(ObservableFunction.expectation(np.eye(n), "identity"))
    cands += [ObservableFunction.expectation(random_hermitian(n, rng), f"random_{k}")
              for k in range(10)]
    return cands


@criterion(10, "qubit and qutrit: every candidate fails by >= 1 at the recurrence time")
@pytest.mark.parametrize("diag", [[0.0, 1.0], [0.0, 1.0, 3.0]])
def test_ac10_pauli_demo(diag):
    n = len(diag)
    H = np.diag(diag)
    rep = pauli_obstruction_demo(QuantumSystem(H), _candidates(n, np.random.default_rng(10 + n)))
    assert rep.passed
    assert len(rep.candidates) == len(_candidates(n, np.random.default_rng(0)))
    for c in rep.candidates:
        assert c["deviation_at_recurrence"] >= 1.0

    # oracle: least s > 0 at which the matrix-exponential orbit returns to the start
    psi0 = np.ones(n) / math.sqrt(n)
    dist = lambda s: projective_distance(expm(-1j * s * H) @ psi0, psi0)  # noqa: E731
    s = np.linspace(0.1, 10.0, 9901)
    d = np.array([dist(v) for v in s])
    away = int(np.argmax(d > 0.5))
    k = away + int(np.argmax(d[away:] < 0.05))
    oracle = minimize_scalar(dist, bounds=(s[k] - 0.1, s[k] + 0.1), method="bounded",
                             options={"xatol": 1e-10}).x
    assert abs(rep.recurrence.T - oracle) <= 1e-5


def _oscillator_error(cfg, T=10.0):
    sys = harmonic_oscillator()
    t, ys, _ = solve(sys, sys.hamiltonian, np.array([1.0, 0.0]), (0.0, T), cfg)
    return len(t) - 1, float(np.linalg.norm(ys[-1] - [math.cos(T), -math.sin(T)]))


@criterion(11, "infrastructure: integrator order, report determinism, CLI exit status")
def test_ac11_integrator_order():
    # halving the step: error ratio 2^order
    errs = [_oscillator_error(IntegratorConfig(rel_tol=1.0, abs_tol=1.0, max_step=h,
                                               first_step=h))[1] for h in (0.2, 0.1, 0.05)]
    assert min(math.log2(a / b) for a, b in zip(errs, errs[1:])) >= 4.0
    # halving the tolerance: error ~ steps^-order
    runs = [_oscillator_error(IntegratorConfig(rel_tol=tol, abs_tol=1e-2 * tol))
            for tol in 1e-7 / 2.0 ** np.arange(6)]
    steps, errs = map(np.array, zip(*runs))
    assert -np.polyfit(np.log(steps), np.log(errs), 1)[0] >= 4.0


@criterion(11, "infrastructure: integrator order, report determinism, CLI exit status")
def test_ac11_report_determinism():
    a = run_scenario(load_scenario("norton_weinberg")).to_json(timings=False)
    b = run_scenario(load_scenario("norton_weinberg")).to_json(timings=False)
    assert a == b


@criterion(11, "infrastructure: integrator order, report determinism, CLI exit status")
@pytest.mark.parametrize("name,status", [("free_particle_halfplane", 0),
                                         ("harmonic_oscillator", 1)])
def test_ac11_cli_exit_status(name, status):
    out = io.StringIO()
    assert main(["run", name, "--format", "json"], out, io.StringIO()) == status
    assert json.loads(out.getvalue())["verdict"] == ("pass" if status == 0 else "fail")
