"""Three-dimensional Lie algebras with their Nambu and Lie-Poisson brackets.

Structure constants are stored as ``c[l, j, k]`` with ``[e_j, e_k] = c[l, j, k] e_l``.
The Poisson matrix of the dual is ``J[j, k](xi) = c[l, j, k] xi[l]``, which for
so(3) gives ``J @ dH = dH x xi``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError, NambuError

EPS_CBRT = np.finfo(float).eps ** (1.0 / 3.0)


def levi_civita() -> np.ndarray:
    eps = np.zeros((3, 3, 3))
    for i, j, k in itertools.permutations(range(3)):
        eps[i, j, k] = np.linalg.det(np.eye(3)[[i, j, k]])
    return eps


LEVI_CIVITA = levi_civita()


@dataclass(frozen=True)
class LieAlgebra3:
    c: np.ndarray
    label: str = ""

    def __post_init__(self):
        c = np.array(self.c, dtype=float)
        if c.shape != (3, 3, 3):
            raise DimensionError(f"structure constants must have shape (3, 3, 3), got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    def antisymmetry_residual(self) -> float:
        return float(np.max(np.abs(self.c + self.c.transpose(0, 2, 1))))


def so3() -> LieAlgebra3:
    return LieAlgebra3(LEVI_CIVITA, "bianchi-IX")


def heisenberg() -> LieAlgebra3:
    # basis ordering (r, q, p): [e_2, e_3] = e_1
    c = np.zeros((3, 3, 3))
    c[0, 1, 2], c[0, 2, 1] = 1.0, -1.0
    return LieAlgebra3(c, "heisenberg")


def bianchi_from(n: np.ndarray, a: Sequence[float] = (0.0, 0.0, 0.0), label: str = "") -> LieAlgebra3:
    """Class A/B construction ``c[k, i, j] = eps[i, j, l] n[l, k] + delta[k, j] a[i] - delta[k, i] a[j]``.

    The result is a Lie algebra iff ``n`` is symmetric and ``n @ a = 0``.
    """
    n = np.asarray(n, dtype=float)
    a = np.asarray(a, dtype=float)
    eye = np.eye(3)
    c = (
        np.einsum("ijl,lk->kij", LEVI_CIVITA, n)
        + np.einsum("kj,i->kij", eye, a)
        - np.einsum("ki,j->kij", eye, a)
    )
    return LieAlgebra3(c, label)


def bianchi(kind: str, h: float = 1.0) -> LieAlgebra3:
    """Standard Bianchi catalogue.

    ``kind`` is one of I, II, III, IV, V, VI0, VIh, VII0, VIIh, VIII, IX.
    ``h`` parameterises the one-parameter families VI_h and VII_h (``a = (h, 0, 0)``).
    """
    table = {
        "I": ((0, 0, 0), (0, 0, 0)),
        "II": ((1, 0, 0), (0, 0, 0)),
        "III": ((0, 1, -1), (1, 0, 0)),
        "IV": ((0, 0, 1), (1, 0, 0)),
        "V": ((0, 0, 0), (1, 0, 0)),
        "VI0": ((0, 1, -1), (0, 0, 0)),
        "VIh": ((0, 1, -1), (h, 0, 0)),
        "VII0": ((0, 1, 1), (0, 0, 0)),
        "VIIh": ((0, 1, 1), (h, 0, 0)),
        "VIII": ((-1, 1, 1), (0, 0, 0)),
        "IX": ((1, 1, 1), (0, 0, 0)),
    }
    if kind not in table:
        raise NambuError(f"unknown Bianchi type {kind!r}")
    diag, a = table[kind]
    return bianchi_from(np.diag(diag), a, f"bianchi-{kind}")


BIANCHI_TYPES = ("I", "II", "III", "IV", "V", "VI0", "VIh", "VII0", "VIIh", "VIII", "IX")


def builtin_algebras() -> dict[str, LieAlgebra3]:
    algs = {"so3": so3(), "heisenberg": heisenberg()}
    for kind in BIANCHI_TYPES:
        alg = bianchi(kind)
        algs[alg.label] = alg
    return algs


def lie_bracket(alg: LieAlgebra3, x, y) -> np.ndarray:
    return np.einsum("ljk,j,k->l", alg.c, np.asarray(x, float), np.asarray(y, float))


def nambu_bracket(grad_g, grad_h1, grad_h2) -> float:
    """Scalar triple product ``grad_g . (grad_h1 x grad_h2)``."""
    return float(np.dot(grad_g, np.cross(grad_h1, grad_h2)))


def lie_poisson_matrix(alg: LieAlgebra3, xi) -> np.ndarray:
    return np.einsum("ljk,l->jk", alg.c, np.asarray(xi, float))


def deform(M) -> LieAlgebra3:
    """Candidate algebra with bracket ``M.T @ (x cross y)``; Jacobi holds only for some M."""
    M = np.asarray(M, dtype=float)
    if M.shape != (3, 3):
        raise DimensionError("deformation matrix must be 3x3")
    return LieAlgebra3(np.einsum("ml,mjk->ljk", M, LEVI_CIVITA), "deformed")


def jacobi_residual(alg: LieAlgebra3) -> float:
    basis = np.eye(3)
    worst = 0.0
    for i, j, k in itertools.product(range(3), repeat=3):
        ei, ej, ek = basis[i], basis[j], basis[k]
        s = (
            lie_bracket(alg, lie_bracket(alg, ei, ej), ek)
            + lie_bracket(alg, lie_bracket(alg, ej, ek), ei)
            + lie_bracket(alg, lie_bracket(alg, ek, ei), ej)
        )
        worst = max(worst, float(np.linalg.norm(s)))
    return worst


def jacobi_residual_constants(alg: LieAlgebra3) -> float:
    """Jacobi identity evaluated directly on the structure constants (independent of ``lie_bracket``)."""
    c = alg.c
    t = (
        np.einsum("mij,pmk->ijkp", c, c)
        + np.einsum("mjk,pmi->ijkp", c, c)
        + np.einsum("mki,pmj->ijkp", c, c)
    )
    return float(np.max(np.abs(t)))


# --------------------------------------------------------------------------- observables


def fd_gradient(f: Callable[[np.ndarray], float], xi) -> np.ndarray:
    """Central differences with step ``cbrt(eps) * max(1, |xi_j|)`` per coordinate."""
    xi = np.asarray(xi, dtype=float)
    g = np.empty_like(xi)
    for j in range(xi.size):
        h = EPS_CBRT * max(1.0, abs(xi[j]))
        xp, xm = xi.copy(), xi.copy()
        xp[j] += h
        xm[j] -= h
        g[j] = (f(xp) - f(xm)) / (xp[j] - xm[j])
    return g


class Observable:
    """A smooth function on phase space with an (optional) analytic gradient."""

    def __init__(self, value: Callable, gradient: Callable | None = None, name: str = ""):
        self._value = value
        self._gradient = gradient
        self.name = name

    def __call__(self, xi) -> float:
        return float(self._value(np.asarray(xi, dtype=float)))

    def grad(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        if self._gradient is None:
            return fd_gradient(self, xi)
        return np.asarray(self._gradient(xi), dtype=float)

    @property
    def analytic(self) -> bool:
        return self._gradient is not None

    def __repr__(self):
        return f"Observable({self.name or '?'})"


class Polynomial(Observable):
    """Multivariate polynomial ``sum coeff * prod xi_i**e_i`` with exact gradients."""

    def __init__(self, terms: dict[tuple[int, ...], float], dim: int, name: str = ""):
        self.terms = {tuple(int(e) for e in k): float(v) for k, v in terms.items() if v != 0.0}
        self.dim = dim
        for k in self.terms:
            if len(k) != dim:
                raise DimensionError(f"exponent {k} does not match dimension {dim}")
        super().__init__(self._eval, self._grad, name)

    def _eval(self, xi):
        return sum(c * np.prod(xi ** np.array(e)) for e, c in self.terms.items())

    def _grad(self, xi):
        g = np.zeros(self.dim)
        for e, c in self.terms.items():
            for i in range(self.dim):
                if e[i] == 0:
                    continue
                ed = np.array(e)
                ed[i] -= 1
                g[i] += c * e[i] * np.prod(xi ** ed)
        return g

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    @classmethod
    def random(cls, dim: int, degree: int, rng: np.random.Generator, scale: float = 1.0) -> "Polynomial":
        terms = {}
        for e in itertools.product(range(degree + 1), repeat=dim):
            if 0 < sum(e) <= degree:
                terms[e] = scale * rng.standard_normal()
        return cls(terms, dim, f"random-deg{degree}")


def coordinate(j: int, dim: int = 3) -> Polynomial:
    e = [0] * dim
    e[j] = 1
    return Polynomial({tuple(e): 1.0}, dim, f"xi{j + 1}")


def quadratic(A, b=None, name: str = "") -> Observable:
    """``1/2 xi.A.xi + b.xi`` with symmetric-part gradient."""
    A = np.asarray(A, dtype=float)
    b = np.zeros(A.shape[0]) if b is None else np.asarray(b, dtype=float)
    S = 0.5 * (A + A.T)
    return Observable(lambda x: 0.5 * x @ A @ x + b @ x, lambda x: S @ x + b, name or "quadratic")


def half_norm_squared(dim: int = 3) -> Observable:
    return quadratic(np.eye(dim), name="half|xi|^2")


def euler_top_energy(moments) -> Observable:
    moments = _check_moments(moments)
    return quadratic(np.diag(1.0 / moments), name="kinetic")


# --------------------------------------------------------------------------- Poisson systems


@dataclass(frozen=True)
class PoissonSystem:
    dim: int
    J: Callable[[np.ndarray], np.ndarray]
    casimirs: tuple[Observable, ...] = field(default_factory=tuple)
    label: str = ""


def lie_poisson_system(alg: LieAlgebra3, casimirs: Sequence[Observable] = ()) -> PoissonSystem:
    return PoissonSystem(3, lambda xi: lie_poisson_matrix(alg, xi), tuple(casimirs), alg.label)


def so3_system() -> PoissonSystem:
    return lie_poisson_system(so3(), [half_norm_squared()])


def heisenberg_system() -> PoissonSystem:
    return lie_poisson_system(heisenberg(), [coordinate(0)])


def poisson_bracket(sys: PoissonSystem, G: Observable, H: Observable, xi) -> float:
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (sys.dim,):
        raise DimensionError(f"phase point of shape {xi.shape} for system of dimension {sys.dim}")
    return float(G.grad(xi) @ sys.J(xi) @ H.grad(xi))


def casimir_check(sys: PoissonSystem, C: Observable, samples: int = 100, seed: int = 0) -> float:
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        xi = rng.standard_normal(sys.dim)
        r = np.linalg.norm(sys.J(xi) @ C.grad(xi)) / (1.0 + xi @ xi)
        worst = max(worst, float(r))
    return worst


def antisymmetry_check(sys: PoissonSystem, samples: int = 100, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        J = sys.J(rng.standard_normal(sys.dim))
        worst = max(worst, float(np.max(np.abs(J + J.T))))
    return worst


# --------------------------------------------------------------------------- Nambu dynamics


def nambu_observable(A: Observable, B: Observable, C: Observable) -> Observable:
    """The observable ``xi -> {A, B, C}(xi)``; its own gradient falls back to finite differences."""
    return Observable(lambda xi: nambu_bracket(A.grad(xi), B.grad(xi), C.grad(xi)), name=f"{{{A.name},{B.name},{C.name}}}")


def fundamental_identity_residual(A, B, C, H1, H2, xi) -> float:
    xi = np.asarray(xi, dtype=float)

    def nb(f, g, h):
        return nambu_bracket(f.grad(xi), g.grad(xi), h.grad(xi))

    lhs = nb(nambu_observable(A, B, C), H1, H2)
    rhs = (
        nb(nambu_observable(A, H1, H2), B, C)
        + nb(A, nambu_observable(B, H1, H2), C)
        + nb(A, B, nambu_observable(C, H1, H2))
    )
    return abs(lhs - rhs)


def _check_moments(moments) -> np.ndarray:
    moments = np.asarray(moments, dtype=float)
    if moments.shape != (3,):
        raise DimensionError("need three moments of inertia")
    if np.any(moments <= 0):
        raise ValueError(f"moments of inertia must be positive, got {moments.tolist()}")
    return moments


def euler_top_rhs(xi, moments) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    return np.cross(xi / _check_moments(moments), xi)


# --------------------------------------------------------------------------- text I/O


def load_algebra(path: str | Path) -> LieAlgebra3:
    """Read ``label = ...`` and ``constants = <27 numbers>`` (row-major [l][j][k]).

    Blank lines and ``#`` comments are ignored; constants may span several lines
    as long as each continuation line starts with whitespace.
    """
    entries: dict[str, str] = {}
    current = None
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        if raw[:1].isspace() and current is not None:
            entries[current] += " " + line.strip()
            continue
        if "=" not in line:
            raise NambuError(f"malformed line in {path}: {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in ("label", "constants"):
            raise NambuError(f"unknown key {key!r} in {path}")
        entries[key] = value
        current = key
    if "constants" not in entries:
        raise NambuError(f"{path}: missing 'constants'")
    values = [float(v) for v in entries["constants"].replace(",", " ").split()]
    if len(values) != 27:
        raise DimensionError(f"{path}: expected 27 structure constants, got {len(values)}")
    return LieAlgebra3(np.array(values).reshape(3, 3, 3), entries.get("label", ""))


def dump_algebra(alg: LieAlgebra3, path: str | Path) -> None:
    nums = " ".join(repr(float(v)) for v in alg.c.ravel())
    Path(path).write_text(f"label = {alg.label}\nconstants = {nums}\n")
