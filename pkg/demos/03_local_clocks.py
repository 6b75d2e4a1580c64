"""
Local clocks near non-stationary points
=======================================

Near any point where the Hamiltonian field does not vanish, the time taken
to reach a transversal section is a local clock. We build one on the
pendulum, check the two-point identity tau(phi_t y) = tau(y) + t, and see
the construction refuse a stationary point.
"""

import numpy as np

from timely.clockwork import clock_value, construct_local_clock
from timely.errors import StationaryPoint
from timely.flow import integrate
from timely.systems import pendulum

sys = pendulum()
clock = construct_local_clock(sys, [0.5, 1.0], requested_radius=0.3)
print("validated radius:", clock.radius)
print("validation residual:", clock.validation_residual)

rng = np.random.default_rng(0)
y = clock.anchor + 0.2 * clock.radius * rng.standard_normal(2)
for t in (0.01, 0.05, 0.1):
    tr, _ = integrate(sys, sys.hamiltonian, y, (0.0, t))
    if clock.contains(tr.end):
        print(f"t = {t}: clock advanced by {clock_value(clock, tr.end) - clock_value(clock, y):.12f}")

try:
    construct_local_clock(sys, [0.0, 0.0], 0.3)
except StationaryPoint as exc:
    print("origin:", exc)
