"""Ready-made one-degree-of-freedom systems with their clock candidates."""

from __future__ import annotations

import numpy as np

from .geometry import DynamicalSystem, ScalarField

__all__ = [
    "free_particle_halfplane",
    "free_particle_tau",
    "norton",
    "norton_tau",
    "harmonic_oscillator",
    "pendulum",
    "coordinate",
]


def coordinate(index: int, name: str = "") -> ScalarField:
    """The coordinate function ``x -> x[index]``."""

    def grad(x):
        g = np.zeros_like(x)
        g[index] = 1.0
        return g

    return ScalarField(lambda x: x[index], grad, name=name or f"x{index}")


def free_particle_halfplane(m: float = 1.0) -> DynamicalSystem:
    """``h = p^2 / 2m`` on the half-plane ``p > 0``."""
    h = ScalarField(lambda x: x[1] ** 2 / (2 * m),
                    lambda x: np.array([0.0, x[1] / m]), name="h")
    return DynamicalSystem.canonical(h, domain=lambda x: x[1] > 0, coordinate_names=("q", "p"),
                                     name="free_particle_halfplane")


def free_particle_tau(m: float = 1.0) -> ScalarField:
    """The timely function ``m q / p``."""
    return ScalarField(lambda x: m * x[0] / x[1],
                       lambda x: np.array([m / x[1], -m * x[0] / x[1] ** 2]), name="tau")


def norton() -> DynamicalSystem:
    """``h = exp(p)`` on the whole plane."""
    h = ScalarField(lambda x: np.exp(x[1]), lambda x: np.array([0.0, np.exp(x[1])]), name="h")
    return DynamicalSystem.canonical(h, coordinate_names=("q", "p"), name="norton")


def norton_tau() -> ScalarField:
    """The timely Weinberg-type function ``q / exp(p)``."""
    return ScalarField(lambda x: x[0] * np.exp(-x[1]),
                       lambda x: np.array([np.exp(-x[1]), -x[0] * np.exp(-x[1])]), name="tau")


def harmonic_oscillator(omega: float = 1.0) -> DynamicalSystem:
    """``h = (p^2 + omega^2 q^2) / 2``."""
    h = ScalarField(lambda x: 0.5 * (x[1] ** 2 + omega**2 * x[0] ** 2),
                    lambda x: np.array([omega**2 * x[0], x[1]]), name="h")
    return DynamicalSystem.canonical(h, coordinate_names=("q", "p"), name="harmonic_oscillator")


def pendulum() -> DynamicalSystem:
    """``h = p^2 / 2 - cos q``."""
    h = ScalarField(lambda x: 0.5 * x[1] ** 2 - np.cos(x[0]),
                    lambda x: np.array([np.sin(x[0]), x[1]]), name="h")
    return DynamicalSystem.canonical(h, coordinate_names=("q", "p"), name="pendulum")
