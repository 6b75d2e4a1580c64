"""
Projective Hilbert space as a Kahler manifold
=============================================

States are rays of C^n. The Fubini-Study metric g and the symplectic form
Omega are linked by the complex structure J. Expectation functions <F>
generate flows that are isometries; quadratic functions such as <F>^2 do not.
"""

import numpy as np
from scipy.linalg import expm

from timely.kahler import (ObservableFunction, ProjectivePoint, kahler_identity_residuals,
                           killing_norm_constancy, killing_residual, pauli_matrices,
                           projective_distance, projective_flow, random_hermitian, random_point)

for n in (2, 3, 5):
    res = kahler_identity_residuals(n, samples=100)
    print(f"n = {n}: worst identity residual {max(res.values()):.1e}")

# the flow of <F> is the unitary orbit exp(-isF) psi
rng = np.random.default_rng(1)
F = random_hermitian(3, rng)
psi0 = random_point(3, rng)
grid = np.linspace(0, 10, 11)
points, _, _ = projective_flow(None, ObservableFunction.expectation(F), psi0, (0, 10), t_eval=grid)
gap = max(projective_distance(expm(-1j * s * F) @ psi0.representative, p.representative)
          for s, p in zip(grid, points))
print("distance to matrix exponential orbit:", gap)

sx = pauli_matrices()["sigma_x"]
psi = ProjectivePoint(np.array([1.0, 1j]) / np.sqrt(2))
print("Killing residual of <sx>:  ", killing_residual(ObservableFunction.expectation(sx), psi))
print("Killing residual of <sx>^2:", killing_residual(ObservableFunction.square(sx), psi))
print("norm drift of <F> over [0, 4 pi]:",
      killing_norm_constancy(ObservableFunction.expectation(F), psi0, np.linspace(0, 4 * np.pi, 33)))
