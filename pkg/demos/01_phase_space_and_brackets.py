"""
Phase space, Hamiltonian fields and Poisson brackets
====================================================

A dynamical system is a domain of R^2n, a symplectic form and a Hamiltonian.
Here we build the free particle on the half-plane p > 0 and look at the
bracket {h, tau} of the candidate clock tau = q/p.
"""

import numpy as np

from timely.geometry import ScalarField, gradient, hamiltonian_vector_field, poisson_bracket
from timely.systems import coordinate, free_particle_halfplane, free_particle_tau, harmonic_oscillator

fp = free_particle_halfplane()
tau = free_particle_tau()
x = np.array([0.3, 1.7])

# the Hamiltonian field of h = p^2/2 moves q at speed p
print("X_h at", x, "=", hamiltonian_vector_field(fp, fp.hamiltonian, x))

# a clock must satisfy {h, tau} = 1 everywhere
print("{h, tau} =", poisson_bracket(fp, fp.hamiltonian, tau, x))

# the analytic gradient agrees with central differences on a copy that has no gradient
print("grad tau:", tau.grad(x))
print("finite differences:", gradient(ScalarField(tau.func), x, fp.space))

# on the oscillator, {h, q} = p oscillates in sign: q is not a clock
osc = harmonic_oscillator()
for p in (1.0, 0.0, -1.0):
    print(f"oscillator {{h, q}} at p = {p:+}:",
          poisson_bracket(osc, osc.hamiltonian, coordinate(0, "q"), [0.5, p]))
