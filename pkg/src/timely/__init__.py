"""Numerical checks of time observables on symplectic and Kahler dynamical systems."""

__version__ = "0.1.0"

from .errors import *  # noqa: E402,F401,F403
from .geometry import (DynamicalSystem, PhaseSpace, ScalarField, SymplecticForm,  # noqa: E402
                       gradient, hamiltonian_vector_field, is_stationary, poisson_bracket)
from .flow import (FlowOutcome, IntegratorConfig, Section, Trajectory, Verdict,  # noqa: E402
                   drift_along, escape_time, first_crossing, integrate)
from .clockwork import (CandidateObservable, LocalClock, clock_value,  # noqa: E402
                        construct_local_clock, energy_descent_check, incompleteness_certificate,
                        recurrence_obstruction, uniqueness_decomposition,
                        verify_local_timeliness, verify_timeliness)
from .kahler import (ObservableFunction, ProjectivePoint, ProjectiveTangent,  # noqa: E402
                     QuantumSystem, complex_structure, kahler_forms, killing_norm_constancy,
                     killing_residual, pauli_obstruction_demo, projective_flow)
