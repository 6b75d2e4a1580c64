"""Finite-dimensional quantum mechanics as a Kahler dynamical system.

States are points of complex projective space CP^{n-1}, stored as unit
vectors with a fixed phase. Tangent vectors are horizontal lifts
(orthogonal to the representative), on which

    <X, Y> = g(X, Y) + i Omega(X, Y),     J X = i X.

Observables are functions on CP^{n-1}: expectation values ``<psi, F psi>``
and the wider Weinberg class (smooth functions of several expectation
values). Dynamics uses the realification of C^n, ``x = sqrt(2) (Re z, Im z)``,
which is a global canonical chart: the degree-2 homogeneous extension
``|z|^2 phi(z / |z|)`` of an observable ``phi`` generates a flow that is
phase-equivariant and projects to the Hamiltonian flow of ``phi``. For an
expectation value this flow is the Schrodinger evolution ``exp(-i s F)``.
Note the symplectic form of that chart is ``2 Omega``; the Hamiltonian flows
here are calibrated to ``exp(-i s F)`` rather than to ``Omega`` itself.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Callable, Optional, Sequence

import numpy as np

from .clockwork import (CandidateObservable, Recurrence, recurrence_obstruction,
                        verify_timeliness)
from .errors import BaseMismatch, DimensionMismatch, KindMismatch
from .flow import IntegratorConfig, integrate, solve
from .geometry import DynamicalSystem, ScalarField, poisson_bracket

__all__ = [
    "QuantumSystem",
    "ProjectivePoint",
    "ProjectiveTangent",
    "ObservableFunction",
    "phase_fix",
    "projective_distance",
    "to_real",
    "to_complex",
    "random_hermitian",
    "random_point",
    "random_tangent",
    "pauli_matrices",
    "spin_matrices",
    "kahler_forms",
    "complex_structure",
    "expectation_value",
    "hamiltonian_field",
    "projective_flow",
    "flow_map",
    "killing_residual",
    "killing_norm_constancy",
    "recurrence_period",
    "projective_metric",
    "kahler_identity_residuals",
    "PauliDemoReport",
    "pauli_obstruction_demo",
]

_SQRT2 = math.sqrt(2.0)
_HERMITIAN_TOL = 1e-12


def _hermitian(matrix, what="matrix") -> np.ndarray:
    m = np.array(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"{what} must be square, got shape {m.shape}")
    if np.max(np.abs(m - m.conj().T), initial=0.0) > _HERMITIAN_TOL:
        raise ValueError(f"{what} is not Hermitian")
    m = 0.5 * (m + m.conj().T)
    m.setflags(write=False)
    return m


def to_real(z) -> np.ndarray:
    """Canonical real coordinates ``sqrt(2) (Re z, Im z)`` of a complex vector."""
    z = np.asarray(z, dtype=complex)
    return _SQRT2 * np.concatenate([z.real, z.imag])


def to_complex(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = len(x) // 2
    return (x[:n] + 1j * x[n:]) / _SQRT2


def phase_fix(v) -> tuple:
    """Normalise ``v`` and rotate its phase canonically.

    The first component whose modulus is maximal (within 1e-12) is made real
    and positive. Returns ``(representative, phase)`` with
    ``representative = phase * v / |v|``.
    """
    v = np.asarray(v, dtype=complex)
    norm = np.linalg.norm(v)
    if norm == 0 or not np.isfinite(norm):
        raise ValueError("cannot phase-fix a zero or non-finite vector")
    u = v / norm
    mod = np.abs(u)
    k = int(np.flatnonzero(mod >= mod.max() - 1e-12)[0])
    phase = np.conj(u[k]) / mod[k]
    return phase * u, phase / norm


@dataclass(frozen=True, eq=False)
class ProjectivePoint:
    """A ray of C^n, held as its phase-fixed unit representative."""

    representative: np.ndarray

    def __init__(self, vector):
        rep, _ = phase_fix(vector)
        rep.setflags(write=False)
        object.__setattr__(self, "representative", rep)

    @property
    def dim(self) -> int:
        return len(self.representative)

    def state(self) -> np.ndarray:
        """Real canonical coordinates of the representative."""
        return to_real(self.representative)

    def distance(self, other: "ProjectivePoint") -> float:
        return projective_distance(self.representative, other.representative)

    def __eq__(self, other):
        if not isinstance(other, ProjectivePoint) or other.dim != self.dim:
            return NotImplemented
        return bool(np.allclose(self.representative, other.representative, rtol=0, atol=1e-12))

    def __repr__(self):
        return f"ProjectivePoint({np.array2string(self.representative, precision=6)})"


def projective_distance(a, b) -> float:
    """Sine of the Fubini-Study angle between the rays of ``a`` and ``b``.

    Computed as the norm of the part of ``b`` orthogonal to ``a``, which has
    no cancellation error near zero.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    return float(np.linalg.norm(b - a * np.vdot(a, b)))


@dataclass(frozen=True, eq=False)
class ProjectiveTangent:
    """Horizontal lift of a tangent vector at a projective point."""

    base: ProjectivePoint
    vector: np.ndarray

    def __post_init__(self):
        v = np.array(self.vector, dtype=complex)
        if v.shape != (self.base.dim,):
            raise DimensionMismatch("tangent and base dimensions differ")
        if abs(np.vdot(self.base.representative, v)) > 1e-12 * max(1.0, np.linalg.norm(v)):
            raise ValueError("tangent lift is not orthogonal to the representative")
        v.setflags(write=False)
        object.__setattr__(self, "vector", v)

    @classmethod
    def from_lift(cls, psi, X) -> "ProjectiveTangent":
        """Tangent at the ray of ``psi`` represented by ``X`` at the (unnormalised) vector ``psi``.

        The vertical part of ``X`` is removed and the lift is carried to the
        phase-fixed representative, so the result does not depend on the
        phase of ``(psi, X)``.
        """
        psi = np.asarray(psi, dtype=complex)
        X = np.asarray(X, dtype=complex)
        rep, phase = phase_fix(psi)
        lift = phase * X
        lift = lift - rep * np.vdot(rep, lift)
        return cls(ProjectivePoint(rep), lift)

    def __mul__(self, c):
        return ProjectiveTangent(self.base, self.vector * c)

    __rmul__ = __mul__


def complex_structure(X: ProjectiveTangent) -> ProjectiveTangent:
    """``J X``: multiplication of the lift by ``i``."""
    return ProjectiveTangent(X.base, 1j * X.vector)


def kahler_forms(X: ProjectiveTangent, Y: ProjectiveTangent) -> tuple:
    """``(g(X, Y), Omega(X, Y))`` as real and imaginary parts of ``<X, Y>``."""
    if X.base != Y.base:
        raise BaseMismatch("tangent vectors are attached to different points")
    c = np.vdot(X.vector, Y.vector)
    return float(c.real), float(c.imag)


def kahler_identity_residuals(n: int, samples: int = 100, seed: int = 0) -> dict:
    """Largest violations of the Kahler compatibility identities at random data.

    For random points and tangent pairs ``(X, Y)`` this measures
    ``g(X, Y) - Omega(X, J Y)``, the ``J``-invariance of ``g`` and ``Omega``,
    and the independence of ``g``, ``Omega`` and the point itself from the
    phase of the lift.
    """
    rng = np.random.default_rng(seed)
    worst = dict.fromkeys(("compatibility", "j_invariance_g", "j_invariance_omega",
                           "phase_invariance"), 0.0)
    for _ in range(samples):
        psi = random_point(n, rng)
        X = random_tangent(psi, rng)
        Y = random_tangent(psi, rng)
        JX, JY = complex_structure(X), complex_structure(Y)
        g, om = kahler_forms(X, Y)
        g_j, om_j = kahler_forms(JX, JY)
        worst["compatibility"] = max(worst["compatibility"], abs(g - kahler_forms(X, JY)[1]))
        worst["j_invariance_g"] = max(worst["j_invariance_g"], abs(g - g_j))
        worst["j_invariance_omega"] = max(worst["j_invariance_omega"], abs(om - om_j))
        # same ray and tangent, presented through a rescaled and rotated lift
        c = rng.uniform(0.5, 2.0) * np.exp(1j * rng.uniform(0, 2 * math.pi))
        z = psi.representative
        X2 = ProjectiveTangent.from_lift(c * z, c * X.vector)
        Y2 = ProjectiveTangent.from_lift(c * z, c * Y.vector)
        g2, om2 = kahler_forms(X2, Y2)
        point_gap = float(np.max(np.abs(X2.base.representative - z)))
        worst["phase_invariance"] = max(worst["phase_invariance"], abs(g2 - g), abs(om2 - om),
                                        point_gap)
    return {k: float(v) for k, v in worst.items()}


# -- observables ------------------------------------------------------------------------------

def _identity_outer(values):
    return values[0]


def _identity_outer_grad(values):
    return np.ones(1)


@dataclass(frozen=True, eq=False)
class ObservableFunction:
    """A smooth function of expectation values on projective space.

    ``kind == "expectation"`` is ``<psi, F psi>`` for one Hermitian ``F``;
    ``kind == "weinberg"`` is ``outer(e_1, ..., e_k)`` with
    ``e_j = <psi, F_j psi>`` and ``outer_grad`` its gradient.
    """

    kind: str
    matrices: tuple
    outer: Callable = _identity_outer
    outer_grad: Callable = _identity_outer_grad
    label: str = "f"

    def __post_init__(self):
        if self.kind not in ("expectation", "weinberg"):
            raise ValueError(f"unknown observable kind {self.kind!r}")
        mats = tuple(_hermitian(m, f"matrix of {self.label!r}") for m in self.matrices)
        if not mats:
            raise ValueError("an observable needs at least one matrix")
        if len({m.shape for m in mats}) != 1:
            raise DimensionMismatch("observable matrices have different sizes")
        if self.kind == "expectation" and len(mats) != 1:
            raise ValueError("expectation observables take exactly one matrix")
        object.__setattr__(self, "matrices", mats)

    @classmethod
    def expectation(cls, F, label: str = "F") -> "ObservableFunction":
        return cls("expectation", (F,), label=label)

    @classmethod
    def weinberg(cls, matrices, outer, outer_grad, label: str = "w") -> "ObservableFunction":
        return cls("weinberg", tuple(matrices), outer, outer_grad, label)

    @classmethod
    def square(cls, F, label: str = "") -> "ObservableFunction":
        """``<psi, F psi>^2``."""
        return cls.weinberg((F,), lambda e: e[0] ** 2, lambda e: np.array([2.0 * e[0]]),
                            label or "square")

    @classmethod
    def product(cls, F, G, label: str = "") -> "ObservableFunction":
        """``<psi, F psi> <psi, G psi>``."""
        return cls.weinberg((F, G), lambda e: e[0] * e[1], lambda e: np.array([e[1], e[0]]),
                            label or "product")

    @property
    def dim(self) -> int:
        return self.matrices[0].shape[0]

    @property
    def matrix(self) -> np.ndarray:
        if self.kind != "expectation":
            raise KindMismatch("only expectation observables have a single generator")
        return self.matrices[0]

    def _expectations(self, z) -> np.ndarray:
        nz = np.vdot(z, z).real
        return np.array([np.vdot(z, F @ z).real / nz for F in self.matrices])

    def value(self, z) -> float:
        return float(self.outer(self._expectations(z)))

    def dzbar(self, z) -> np.ndarray:
        """Wirtinger derivative of the homogeneous extension ``|z|^2 outer(e(z))``."""
        e = self._expectations(z)
        w = self.outer(e) * z
        for c, F, ej in zip(self.outer_grad(e), self.matrices, e):
            w = w + c * (F @ z - ej * z)
        return w

    def scalar_field(self) -> ScalarField:
        """The homogeneous extension as a field in the real canonical chart."""
        if self.kind == "expectation":
            # cheaper closed form
            F = self.matrices[0]

            def func(x):
                z = to_complex(x)
                return float(np.vdot(z, F @ z).real)

            def grad(x):
                w = F @ to_complex(x)
                return _SQRT2 * np.concatenate([w.real, w.imag])
        else:
            def func(x):
                z = to_complex(x)
                return float(np.vdot(z, z).real * self.value(z))

            def grad(x):
                w = self.dzbar(to_complex(x))
                return _SQRT2 * np.concatenate([w.real, w.imag])

        return ScalarField(func, grad, name=self.label)


def _check_dim(obs: ObservableFunction, n: int):
    if obs.dim != n:
        raise DimensionMismatch(f"observable acts on C^{obs.dim}, state lives in C^{n}")


def expectation_value(obs: ObservableFunction, psi: ProjectivePoint) -> float:
    _check_dim(obs, psi.dim)
    return obs.value(psi.representative)


def hamiltonian_field(obs: ObservableFunction, psi: ProjectivePoint) -> ProjectiveTangent:
    """Horizontal lift of the Hamiltonian vector field of ``obs`` at ``psi``."""
    _check_dim(obs, psi.dim)
    z = psi.representative
    v = -1j * obs.dzbar(z)
    return ProjectiveTangent(psi, v - z * np.vdot(z, v))


# -- quantum systems --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class QuantumSystem:
    """Hermitian generator ``H`` on C^n with its Kahler dynamical system."""

    hamiltonian_matrix: np.ndarray
    name: str = ""
    dynamical: DynamicalSystem = field(init=False, repr=False)

    def __post_init__(self):
        H = _hermitian(self.hamiltonian_matrix, "Hamiltonian")
        if H.shape[0] < 2:
            raise DimensionMismatch("a quantum system needs dimension >= 2")
        object.__setattr__(self, "hamiltonian_matrix", H)
        n = H.shape[0]
        names = [f"x{k + 1}" for k in range(n)] + [f"y{k + 1}" for k in range(n)]
        h = ObservableFunction.expectation(H, label="h").scalar_field()
        object.__setattr__(self, "dynamical",
                           DynamicalSystem.canonical(h, n, coordinate_names=names,
                                                     name=self.name or f"quantum_{n}"))

    @property
    def dim(self) -> int:
        return self.hamiltonian_matrix.shape[0]

    @property
    def observable(self) -> ObservableFunction:
        return ObservableFunction.expectation(self.hamiltonian_matrix, label="h")

    @classmethod
    def from_dict(cls, data: dict, name: str = "") -> "QuantumSystem":
        """Load ``{"dim": n, "hamiltonian": [[re, im], ...]}`` (row-major pairs).

        The pairs may be given flat (``n*n`` pairs) or as ``n`` rows of ``n``.
        """
        try:
            n = int(data["dim"])
            pairs = np.asarray(data["hamiltonian"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed quantum system description: {exc}") from None
        if pairs.size != 2 * n * n or pairs.shape[-1] != 2:
            raise DimensionMismatch(f"expected {n * n} (re, im) pairs for dim {n}")
        pairs = pairs.reshape(n, n, 2)
        return cls(pairs[..., 0] + 1j * pairs[..., 1], name=data.get("name", name))

    @classmethod
    def from_json(cls, path) -> "QuantumSystem":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        H = self.hamiltonian_matrix
        return {
            "name": self.name,
            "dim": self.dim,
            "hamiltonian": [[float(v.real), float(v.imag)] for v in H.ravel()],
        }


def random_hermitian(n: int, rng=None, scale: float = 1.0) -> np.ndarray:
    rng = np.random.default_rng(rng)
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * 0.5 * (a + a.conj().T)


def random_point(n: int, rng=None) -> ProjectivePoint:
    rng = np.random.default_rng(rng)
    return ProjectivePoint(rng.normal(size=n) + 1j * rng.normal(size=n))


def random_tangent(psi: ProjectivePoint, rng=None, unit: bool = True) -> ProjectiveTangent:
    rng = np.random.default_rng(rng)
    z = psi.representative
    v = rng.normal(size=psi.dim) + 1j * rng.normal(size=psi.dim)
    v = v - z * np.vdot(z, v)
    if unit:
        v = v / np.linalg.norm(v)
    return ProjectiveTangent(psi, v)


def pauli_matrices() -> dict:
    return {
        "sigma_x": np.array([[0, 1], [1, 0]], dtype=complex),
        "sigma_y": np.array([[0, -1j], [1j, 0]], dtype=complex),
        "sigma_z": np.array([[1, 0], [0, -1]], dtype=complex),
    }


def spin_matrices(n: int) -> dict:
    """Spin-``(n-1)/2`` angular momentum matrices ``S_x, S_y, S_z`` in dimension ``n``."""
    j = (n - 1) / 2
    m = j - np.arange(n)
    raise_ = np.zeros((n, n), dtype=complex)
    for k in range(1, n):
        raise_[k - 1, k] = math.sqrt(j * (j + 1) - m[k] * (m[k] + 1))
    lower = raise_.conj().T
    return {
        "spin_x": (raise_ + lower) / 2,
        "spin_y": (raise_ - lower) / 2j,
        "spin_z": np.diag(m).astype(complex),
    }


def _obs_system(obs: ObservableFunction) -> DynamicalSystem:
    return DynamicalSystem.canonical(obs.scalar_field(), obs.dim, name=obs.label)


def _renormalise(x):
    z = to_complex(x)
    return to_real(phase_fix(z)[0])


def projective_flow(system: Optional[QuantumSystem], obs: ObservableFunction,
                    psi0: ProjectivePoint, span, config: Optional[IntegratorConfig] = None,
                    t_eval=None) -> tuple:
    """Integrate the Hamiltonian flow of ``obs`` on projective space.

    Each accepted state is renormalised and re-phase-fixed; both operations
    commute with the flow. Returns ``(points, trajectory, outcome)`` where
    ``points`` are :class:`ProjectivePoint` samples of the real trajectory.
    """
    config = config or IntegratorConfig()
    if system is not None and system.dim != obs.dim:
        raise DimensionMismatch("observable and system dimensions differ")
    _check_dim(obs, psi0.dim)
    field = obs.scalar_field()
    dyn = DynamicalSystem.canonical(field, obs.dim)
    tr, out = integrate(dyn, field, psi0.state(), span, config, t_eval=t_eval,
                        projection=_renormalise)
    points = [ProjectivePoint(to_complex(x)) for x in tr.states]
    return points, tr, out


def flow_map(obs: ObservableFunction, z, s: float, config: Optional[IntegratorConfig] = None
             ) -> np.ndarray:
    """Time-``s`` flow of ``obs`` applied to a vector of C^n (no renormalisation)."""
    config = config or IntegratorConfig(rel_tol=1e-13, abs_tol=1e-15)
    field = obs.scalar_field()
    dyn = DynamicalSystem.canonical(field, obs.dim)
    _, ys, out = solve(dyn, field, to_real(z), (0.0, s), config)
    if not out.completed:
        raise RuntimeError(f"flow map failed: {out.verdict}")
    return to_complex(ys[-1])


def _horizontal(z, v):
    z = z / np.linalg.norm(z)
    return v - z * np.vdot(z, v)


def killing_residual(obs: ObservableFunction, psi: ProjectivePoint, tangent_samples: int = 50,
                     delta: float = 1e-4, seed: int = 0, fd_step: float = 1e-4,
                     config: Optional[IntegratorConfig] = None) -> float:
    """Finite-time estimate of the Lie derivative of ``g`` along the flow of ``obs``.

    The differential of the time-``delta`` flow map is formed by central
    differences on a real basis of the horizontal space; sampled unit tangent
    pairs ``(X, Y)`` are pushed forward and the largest
    ``|g(X', Y') - g(X, Y)| / delta`` is returned. The flow of a homogeneous
    extension maps horizontal vectors to horizontal vectors, so no
    re-projection is applied.
    """
    _check_dim(obs, psi.dim)
    z = psi.representative
    n = psi.dim
    # real orthonormal basis of the horizontal space: {b, i b} for b orthonormal to z
    q, _ = np.linalg.qr(np.column_stack([z, np.eye(n, dtype=complex)]))
    comp = [q[:, k] for k in range(1, n)]
    basis = []
    for b in comp:
        b = _horizontal(z, b)
        basis.extend([b, 1j * b])
    # differentiate the displacement phi(w) - w, so an identity flow gives exactly zero
    derivs = []
    for b in basis:
        up, dn = z + fd_step * b, z - fd_step * b
        d_up = flow_map(obs, up, delta, config) - up
        d_dn = flow_map(obs, dn, delta, config) - dn
        derivs.append((d_up - d_dn) / (2 * fd_step))
    B = np.array(basis)
    D = np.array(derivs)
    # gram(B + D) - gram(B)
    change = (B.conj() @ D.T + D.conj() @ B.T + D.conj() @ D.T).real
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(tangent_samples):
        a = rng.normal(size=len(basis))
        b = rng.normal(size=len(basis))
        a /= np.linalg.norm(a)
        b /= np.linalg.norm(b)
        worst = max(worst, abs(a @ change @ b) / delta)
    return float(worst)


def _metric_norm(obs, x):
    z = to_complex(x)
    z = z / np.linalg.norm(z)
    v = _horizontal(z, -1j * obs.dzbar(z))
    return float(np.vdot(v, v).real)


def killing_norm_constancy(obs: ObservableFunction, psi0: ProjectivePoint, s_grid,
                           config: Optional[IntegratorConfig] = None,
                           diagnostic: bool = False) -> float:
    """Largest drift of ``g(F, F)`` along the flow of ``obs`` over ``s_grid``.

    Only asserted for expectation observables; Weinberg observables need
    ``diagnostic=True``.
    """
    if obs.kind != "expectation" and not diagnostic:
        raise KindMismatch("norm constancy is a property of expectation observables; "
                           "pass diagnostic=True to measure a Weinberg observable")
    s_grid = np.asarray(s_grid, dtype=float)
    _, tr, out = projective_flow(None, obs, psi0, (s_grid[0], s_grid[-1]), config, t_eval=s_grid)
    norms = np.array([_metric_norm(obs, x) for x in tr.states])
    return float(np.max(np.abs(norms - norms[0])))


def recurrence_period(system: QuantumSystem, max_denominator: int = 1000) -> float:
    """Least common period ``2 pi / gcd(gaps)`` for rational eigenvalue gaps."""
    ev = np.linalg.eigvalsh(system.hamiltonian_matrix)
    gaps = [ev[k] - ev[0] for k in range(1, len(ev)) if ev[k] - ev[0] > 1e-12]
    if not gaps:
        return math.inf
    fracs = [Fraction(g).limit_denominator(max_denominator) for g in gaps]
    for g, f in zip(gaps, fracs):
        if abs(g - float(f)) > 1e-9:
            raise ValueError("eigenvalue gaps are not rational; orbits need not close")

    def gcd(a: Fraction, b: Fraction) -> Fraction:
        while b:
            a, b = b, a % b
        return a

    return 2 * math.pi / float(reduce(gcd, fracs))


def projective_metric(a, b) -> float:
    """Projective distance between two states in real canonical coordinates."""
    return projective_distance(to_complex(a), to_complex(b))


@dataclass
class PauliDemoReport:
    system_label: str
    recurrence: Optional[Recurrence]
    candidates: list
    tolerance: float
    start: list

    @property
    def passed(self) -> bool:
        return bool(self.candidates) and all(c["fails"] for c in self.candidates)

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        return {
            "system": self.system_label,
            "verdict": self.verdict,
            "tolerance": self.tolerance,
            "reason": "compact projective phase space: h-orbits recur, so no function can be timely",
            "recurrence": self.recurrence.to_dict() if self.recurrence else None,
            "start": self.start,
            "candidates": self.candidates,
        }


def pauli_obstruction_demo(system: QuantumSystem, candidates: Sequence[ObservableFunction],
                           tol: float = 1e-6, n_samples: int = 50, seed: int = 0,
                           psi0: Optional[ProjectivePoint] = None, horizon: Optional[float] = None,
                           config: Optional[IntegratorConfig] = None) -> PauliDemoReport:
    """Show that no expectation observable is a clock for ``system``.

    For each candidate ``T`` the bracket ``{h, t}`` is evaluated at random
    states and the timer property is checked along the h-orbit of ``psi0``
    up to its recurrence time. The demo passes when every candidate fails at
    least one of the two checks by more than ``tol``.
    """
    config = config or IntegratorConfig()
    n = system.dim
    for c in candidates:
        if c.kind != "expectation":
            raise KindMismatch(f"candidate {c.label!r} is not an expectation observable")
        _check_dim(c, n)
    if psi0 is None:
        psi0 = ProjectivePoint(np.ones(n))
    dyn = system.dynamical
    x0 = psi0.state()
    if horizon is None:
        try:
            horizon = 1.5 * recurrence_period(system)
        except ValueError:
            horizon = 200.0
        if not math.isfinite(horizon):
            horizon = 10.0
    rec = recurrence_obstruction(dyn, x0, horizon, 1e-6, config, metric=projective_metric)
    T_check = rec.T if rec is not None else horizon
    grid = np.linspace(0.0, T_check, 65)
    rng = np.random.default_rng(seed)
    states = [random_point(n, rng).state() for _ in range(n_samples)]
    entries = []
    for c in candidates:
        field = c.scalar_field()
        brackets = np.array([poisson_bracket(dyn, dyn.hamiltonian, field, x) for x in states])
        bracket_dev = float(np.max(np.abs(brackets - 1.0)))
        report = verify_timeliness(dyn, CandidateObservable(field, c.label), [x0], grid, tol, config)
        traj = report.per_trajectory[0].trajectory
        t0 = field(traj.states[0])
        dev_at_T = abs(field(traj.states[-1]) - t0 - traj.t[-1])
        entries.append({
            "candidate": c.label,
            "bracket_max_deviation": bracket_dev,
            "bracket_range": [float(brackets.min()), float(brackets.max())],
            "timeliness_max_deviation": report.max_deviation,
            "deviation_at_recurrence": float(dev_at_T),
            "fails": bool(bracket_dev > tol or report.max_deviation > tol),
        })
    return PauliDemoReport(system.name or f"quantum_{n}", rec, entries, tol,
                           [float(v) for v in x0])
