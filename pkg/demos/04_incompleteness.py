"""
Global clocks generate incomplete flows
=======================================

If tau is a clock and h is bounded below by h_inf, then h drops at unit rate
along the tau-flow, so that flow must stop before parameter h(x0) - h_inf.
The certificate checks this bound for both closed-form examples.
"""

from timely.clockwork import energy_descent_check, incompleteness_certificate
from timely.systems import free_particle_halfplane, free_particle_tau, norton, norton_tau
import numpy as np

for label, sys, tau, x0 in (("free particle", free_particle_halfplane(), free_particle_tau(),
                             [0.0, 1.0]),
                            ("exponential", norton(), norton_tau(), [0.0, 0.0])):
    cert = incompleteness_certificate(sys, tau, [x0], h_inf=0.0)
    entry = cert.entries[0]
    print(f"{label}: bound {entry['predicted_bound']:.6f}, "
          f"escape {entry['escape_parameter']:.6f}, verdict {cert.verdict}")
    bound = entry["predicted_bound"]
    rep = energy_descent_check(sys, tau, x0, np.linspace(0, 0.9 * bound, 30), 1e-6, h_inf=0.0)
    print(f"    energy slope {rep.slope:.10f}, residual {rep.residual:.2e}")
