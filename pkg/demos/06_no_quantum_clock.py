"""
No quantum clock on a finite-dimensional system
===============================================

Projective space is compact, so every h-orbit of H = diag(0, 1) returns to
its start after 2 pi. A clock would have to read 2 pi larger there, which no
function can do. Every candidate fails, whether a Pauli matrix, the identity
or a random observable.
"""

import numpy as np

from timely.kahler import (ObservableFunction, QuantumSystem, pauli_matrices,
                           pauli_obstruction_demo, random_hermitian, recurrence_period)

H = np.diag([0.0, 1.0])
qs = QuantumSystem(H, "qubit")
print("least common period:", recurrence_period(qs))

rng = np.random.default_rng(2)
candidates = [ObservableFunction.expectation(m, k) for k, m in pauli_matrices().items()]
candidates.append(ObservableFunction.expectation(np.eye(2), "identity"))
candidates += [ObservableFunction.expectation(random_hermitian(2, rng), f"random_{k}")
               for k in range(3)]

report = pauli_obstruction_demo(qs, candidates)
print("recurrence found at T =", report.recurrence.T)
for c in report.candidates:
    print(f"{c['candidate']:>10}: |tau(T) - tau(0) - T| = {c['deviation_at_recurrence']:.6f}, "
          f"bracket range {np.round(c['bracket_range'], 3)}")
print("every candidate fails:", report.passed)
