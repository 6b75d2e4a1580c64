"""
Flows that leave their domain
=============================

The flow generated by tau = q/e^p on the plane with h = e^p runs p downward
as log(1 - s), so it stops existing at s = 1. The integrator reports this as
an escape with a bracket around the escape parameter instead of a trajectory
that silently ends.
"""

import numpy as np

from timely.flow import IntegratorConfig, escape_time, integrate
from timely.systems import norton, norton_tau

sys = norton()
tau = norton_tau()

tr, outcome = integrate(sys, tau, [0.0, 0.0], (0.0, 2.0))
print("verdict:", outcome.verdict)
print("escape bracket:", outcome.escape_bracket)
print("accepted steps:", len(tr.t) - 1)

# along the flow, energy decreases with unit slope
s = np.linspace(0.0, 0.9, 10)
tr, _ = integrate(sys, tau, [0.0, 0.0], (0.0, 0.9), t_eval=s)
for si, xi in zip(tr.t, tr.states):
    print(f"s = {si:.1f}   h = {sys.hamiltonian(xi):.12f}   1 - s = {1 - si:.12f}")

# escape parameter from several starts: e^{p0}
for p0 in (-1.0, 0.0, 0.5):
    est = escape_time(sys, tau, [0.0, p0], IntegratorConfig(horizon=10.0))
    print(f"p0 = {p0:+.1f}: escape at {est:.8f}, e^p0 = {np.exp(p0):.8f}")
