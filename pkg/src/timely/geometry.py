"""Phase spaces, scalar fields, symplectic forms and Poisson brackets.

Everything lives in a single global chart of canonical coordinates
``(q1..qn, p1..pn)``; the phase space itself is an open subset of R^2n
described by a boolean domain predicate.

Sign convention
---------------
The Hamiltonian vector field of ``f`` is ``F^a = Omega^{ba} d_b f`` with the
canonical form chosen so that the flow of ``h`` obeys

    dq/dt = dh/dp,    dp/dt = -dh/dq,

and the bracket is defined as ``{f, g} = F^a d_a g``, i.e. the rate of change
of ``g`` along the flow of ``f``. With this choice ``{h, tau} = d tau / dt``.
In components this is ``{f, g} = df/dp dg/dq - df/dq dg/dp``, the *negative*
of the common textbook bracket ``df/dq dg/dp - df/dp dg/dq``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError

__all__ = [
    "PhaseSpace",
    "ScalarField",
    "SymplecticForm",
    "DynamicalSystem",
    "gradient",
    "hamiltonian_vector_field",
    "poisson_bracket",
    "is_stationary",
    "fd_step",
]

_EPS = np.finfo(float).eps
_CBRT_EPS = _EPS ** (1.0 / 3.0)


def _everywhere(x: np.ndarray) -> bool:
    return True


@dataclass(frozen=True)
class PhaseSpace:
    """An open subset of R^dim carried by canonical coordinates.

    Parameters
    ----------
    dim : int
        Even dimension ``2n``.
    coordinate_names : sequence of str, optional
        Labels; defaults to ``q1..qn, p1..pn``.
    domain : callable, optional
        Predicate ``state -> bool`` describing the open domain. Defaults to
        the whole of R^dim.
    """

    dim: int
    coordinate_names: tuple = ()
    domain: Callable[[np.ndarray], bool] = _everywhere

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2 or self.dim % 2:
            raise ValueError(f"phase-space dimension must be even and >= 2, got {self.dim}")
        n = self.dim // 2
        names = tuple(self.coordinate_names) or tuple(
            [f"q{i + 1}" for i in range(n)] + [f"p{i + 1}" for i in range(n)]
        )
        if len(names) != self.dim:
            raise ValueError("need one coordinate name per dimension")
        object.__setattr__(self, "coordinate_names", names)

    @property
    def n(self) -> int:
        return self.dim // 2

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return x.shape == (self.dim,) and bool(np.all(np.isfinite(x))) and bool(self.domain(x))

    def check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise DomainError(f"state has shape {x.shape}, expected ({self.dim},)")
        if not self.contains(x):
            raise DomainError(f"state {x.tolist()} is outside the phase-space domain")
        return x

    def openness_violations(self, points, rng=None, n_perturb=16, scale=1e-7):
        """Return the sampled points whose tiny perturbations leave the domain.

        A sampling test of the open-set property of the domain predicate.
        """
        rng = np.random.default_rng(rng)
        bad = []
        for x in points:
            x = np.asarray(x, dtype=float)
            if not self.contains(x):
                continue
            r = scale * max(1.0, float(np.linalg.norm(x)))
            for _ in range(n_perturb):
                if not self.contains(x + r * rng.uniform(-1, 1, self.dim)):
                    bad.append(x)
                    break
        return bad


def fd_step(x: np.ndarray) -> np.ndarray:
    """Per-coordinate central-difference step ``cbrt(eps) * max(1, |x_i|)``."""
    return _CBRT_EPS * np.maximum(1.0, np.abs(x))


@dataclass(frozen=True)
class ScalarField:
    """A real function on phase space together with its gradient.

    If ``grad`` is given the field is in closed-form mode and the supplied
    covector is returned by :func:`gradient`; otherwise central finite
    differences are used.

    ``domain`` is an optional extra predicate restricting where the field is
    defined (on top of the phase-space domain), e.g. the validated ball of a
    local clock.
    """

    func: Callable[[np.ndarray], float]
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "f"
    domain: Optional[Callable[[np.ndarray], bool]] = None

    @property
    def gradient_mode(self) -> str:
        return "closed_form" if self.grad is not None else "finite_difference"

    def defined_at(self, x) -> bool:
        return self.domain is None or bool(self.domain(np.asarray(x, dtype=float)))

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if not self.defined_at(x):
            raise DomainError(f"field {self.name!r} undefined at {x.tolist()}")
        return float(self.func(x))

    # small algebra so that tau + h, g * h, etc. can be built in tests and scenarios
    def _combine(self, other, op, dop, name):
        if isinstance(other, (int, float)):
            c = float(other)
            other = ScalarField(lambda x: c, lambda x: np.zeros_like(x), name=repr(c))
        closed = self.grad is not None and other.grad is not None
        f, g = self, other

        def func(x):
            return op(f.func(x), g.func(x))

        grad = None
        if closed:
            def grad(x):
                return dop(f.func(x), g.func(x), np.asarray(f.grad(x), float),
                           np.asarray(g.grad(x), float))

        doms = [d for d in (f.domain, g.domain) if d is not None]
        dom = None
        if doms:
            def dom(x):
                return all(d(x) for d in doms)

        return ScalarField(func, grad, name=name, domain=dom)

    def __add__(self, other):
        return self._combine(other, lambda a, b: a + b, lambda a, b, da, db: da + db,
                             f"({self.name} + {getattr(other, 'name', other)})")

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, lambda a, b: a - b, lambda a, b, da, db: da - db,
                             f"({self.name} - {getattr(other, 'name', other)})")

    def __mul__(self, other):
        return self._combine(other, lambda a, b: a * b,
                             lambda a, b, da, db: b * da + a * db,
                             f"({self.name} * {getattr(other, 'name', other)})")

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0


@dataclass(frozen=True, eq=False)
class SymplecticForm:
    """Constant antisymmetric invertible matrix ``Omega_ab``."""

    matrix: np.ndarray
    inverse: np.ndarray = field(init=False, repr=False)
    field_matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2:
            raise ValueError("symplectic matrix must be square of even size")
        if not np.array_equal(m + m.T, np.zeros_like(m)):
            raise ValueError("symplectic matrix must be exactly antisymmetric")
        if not np.isfinite(np.linalg.cond(m)):
            raise ValueError("symplectic matrix is singular")
        inv = np.linalg.inv(m)
        if not np.allclose(m @ inv, np.eye(len(m)), rtol=0, atol=1e-12):
            raise ValueError("symplectic matrix is too ill-conditioned to invert")
        m.setflags(write=False)
        inv.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "inverse", inv)
        # F^a = Omega^{ba} d_b f, i.e. F = inverse^T @ grad
        fm = inv.T.copy()
        fm.setflags(write=False)
        object.__setattr__(self, "field_matrix", fm)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def canonical(cls, n: int) -> "SymplecticForm":
        eye = np.eye(n)
        zero = np.zeros((n, n))
        return cls(np.block([[zero, eye], [-eye, zero]]))

    def __call__(self, u, v) -> float:
        return float(np.asarray(u) @ self.matrix @ np.asarray(v))


@dataclass(frozen=True, eq=False)
class DynamicalSystem:
    """The triple (phase space, symplectic form, Hamiltonian)."""

    space: PhaseSpace
    form: SymplecticForm
    hamiltonian: ScalarField
    name: str = ""

    def __post_init__(self):
        if self.form.dim != self.space.dim:
            raise ValueError(
                f"form dimension {self.form.dim} does not match space dimension {self.space.dim}"
            )

    @classmethod
    def canonical(cls, hamiltonian: ScalarField, n: int = 1, domain=None,
                  coordinate_names: Sequence[str] = (), name: str = "") -> "DynamicalSystem":
        space = PhaseSpace(2 * n, tuple(coordinate_names), domain or _everywhere)
        return cls(space, SymplecticForm.canonical(n), hamiltonian, name)

    @property
    def dim(self) -> int:
        return self.space.dim


def gradient(field: ScalarField, x, space: Optional[PhaseSpace] = None) -> np.ndarray:
    """Covector ``d_a f`` at ``x``.

    In finite-difference mode the central stencil uses the step of
    :func:`fd_step`; if a stencil point leaves the domain that coordinate
    falls back to a one-sided difference with half the step.
    """
    x = np.asarray(x, dtype=float)

    def inside(y):
        ok = field.defined_at(y)
        if space is not None:
            ok = ok and space.contains(y)
        return ok

    if not inside(x):
        raise DomainError(f"gradient of {field.name!r} requested outside its domain at {x.tolist()}")
    if field.grad is not None:
        return np.asarray(field.grad(x), dtype=float)

    steps = fd_step(x)
    out = np.empty_like(x)
    for i, h in enumerate(steps):
        e = np.zeros_like(x)
        e[i] = h
        up, dn = x + e, x - e
        if inside(up) and inside(dn):
            out[i] = (field.func(up) - field.func(dn)) / (2 * h)
            continue
        half = 0.5 * e
        if inside(x + half):
            out[i] = (field.func(x + half) - field.func(x)) / half[i]
        elif inside(x - half):
            out[i] = (field.func(x) - field.func(x - half)) / half[i]
        else:
            raise DomainError(
                f"finite-difference stencil for {field.name!r} leaves the domain at {x.tolist()}"
            )
    return out


def hamiltonian_vector_field(system: DynamicalSystem, field: ScalarField, x) -> np.ndarray:
    """Tangent vector ``F^a = Omega^{ba} d_b f`` at ``x``."""
    x = system.space.check(x)
    return system.form.field_matrix @ gradient(field, x, system.space)


def poisson_bracket(system: DynamicalSystem, f: ScalarField, g: ScalarField, x) -> float:
    """``{f, g}(x) = F^a d_a g``: the derivative of ``g`` along the flow of ``f``."""
    x = system.space.check(x)
    df = gradient(f, x, system.space)
    dg = gradient(g, x, system.space)
    m = system.form.field_matrix
    # antisymmetrised so that {f, f} = 0 and {f, g} = -{g, f} hold exactly in floating point
    return float(0.5 * (dg @ (m @ df) - df @ (m @ dg)))


def is_stationary(system: DynamicalSystem, x, tol: float = 1e-10) -> bool:
    return float(np.linalg.norm(hamiltonian_vector_field(system, system.hamiltonian, x))) <= tol
