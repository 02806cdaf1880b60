"""Canonicalizations of the so(3) Lie-Poisson algebra.

Two Clebsch maps are provided: the angular momentum ``xi = q x p`` on R^6 and the
Cayley-Klein (spin) map on R^4 ~ C^2 with ``z_j = q_j + i p_j``. Canonical
coordinates are always ordered ``(q_1..q_n, p_1..p_n)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra3 import Observable, so3, lie_poisson_matrix
from .errors import ChartError, DimensionError


@dataclass(frozen=True)
class CanonicalState:
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float).copy()
        p = np.asarray(self.p, dtype=float).copy()
        if q.shape != p.shape or q.ndim != 1:
            raise DimensionError(f"q and p must be equal-length vectors, got {q.shape} and {p.shape}")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise ValueError("non-finite canonical coordinates")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([self.q, self.p])

    @classmethod
    def from_z(cls, z) -> "CanonicalState":
        z = np.asarray(z, dtype=float)
        if z.size % 2:
            raise DimensionError("odd-length canonical vector")
        n = z.size // 2
        return cls(z[:n], z[n:])


def symplectic_matrix(n: int) -> np.ndarray:
    I = np.eye(n)
    O = np.zeros((n, n))
    return np.block([[O, I], [-I, O]])


def canonical_bracket(grad_g, grad_h) -> float:
    grad_g = np.asarray(grad_g)
    grad_h = np.asarray(grad_h)
    if grad_g.shape != grad_h.shape or grad_g.ndim != 1 or grad_g.size % 2:
        raise DimensionError("canonical gradients must be equal, even-length vectors")
    n = grad_g.size // 2
    return grad_g[:n] @ grad_h[n:] - grad_g[n:] @ grad_h[:n]


def canonical_vector_field(grad_h) -> np.ndarray:
    """``J_c @ dH``: (dH/dp, -dH/dq)."""
    grad_h = np.asarray(grad_h, dtype=float)
    n = grad_h.size // 2
    return np.concatenate([grad_h[n:], -grad_h[:n]])


# --------------------------------------------------------------------------- angular momentum (R^6)


def _as_state3(s) -> CanonicalState:
    if not isinstance(s, CanonicalState):
        s = CanonicalState.from_z(s)
    if s.q.size != 3:
        raise DimensionError(f"angular momentum map needs n = 3, got n = {s.q.size}")
    return s


def angular_momentum_map(s) -> np.ndarray:
    s = _as_state3(s)
    return np.cross(s.q, s.p)


def _cross_matrix(a) -> np.ndarray:
    return np.array([[0.0, -a[2], a[1]], [a[2], 0.0, -a[0]], [-a[1], a[0], 0.0]])


def angular_momentum_jacobian(s) -> np.ndarray:
    """3x6 derivative of ``q x p`` with respect to ``(q, p)``."""
    s = _as_state3(s)
    return np.hstack([-_cross_matrix(s.p), _cross_matrix(s.q)])


def pullback_gradient_qp(grad_xi, s) -> np.ndarray:
    s = _as_state3(s)
    g = np.asarray(grad_xi, dtype=float)
    return np.concatenate([np.cross(s.p, g), -np.cross(s.q, g)])


def _so3_bracket(G: Observable, H: Observable, xi) -> float:
    return float(G.grad(xi) @ lie_poisson_matrix(so3(), xi) @ H.grad(xi))


def reduction_residual_sp6(G: Observable, H: Observable, s) -> float:
    """``|{G o xi, H o xi}_sp6 - {G, H}_so3|`` at ``xi = q x p``.

    The canonical side uses the chain rule through the explicit Jacobian of ``q x p``.
    """
    s = _as_state3(s)
    xi = angular_momentum_map(s)
    D = angular_momentum_jacobian(s)
    lhs = canonical_bracket(D.T @ G.grad(xi), D.T @ H.grad(xi))
    return abs(lhs - _so3_bracket(G, H, xi))


def lift_angular_momentum(xi, scale: float = 1.0, shear: float = 0.0, frame: int = 0) -> CanonicalState:
    """A canonical state with ``q x p = xi``.

    ``q`` is a unit vector orthogonal to ``xi`` (scaled by ``scale``); ``p`` is the
    matching orthogonal momentum plus ``shear * q``, which leaves ``q x p`` unchanged.
    ``frame`` picks which coordinate axis seeds the orthogonal direction.
    """
    xi = np.asarray(xi, dtype=float)
    nrm = np.linalg.norm(xi)
    if nrm == 0.0:
        return CanonicalState(np.zeros(3), np.zeros(3))
    seed = np.eye(3)[frame % 3]
    if abs(seed @ xi) > 0.9 * nrm:
        seed = np.eye(3)[(frame + 1) % 3]
    q = seed - (seed @ xi) * xi / nrm**2
    q *= scale / np.linalg.norm(q)
    p = np.cross(xi, q) / (q @ q) + shear * q
    return CanonicalState(q, p)


def gauge_angle_sp6(s) -> float:
    """Conjugate of ``C = |q x p|^2 / 2``: rotation angle of ``q`` about ``xi``, divided by ``|xi|``.

    Chart-local: uses the component ``j = argmax |q_j|``.
    """
    s = _as_state3(s)
    xi = np.cross(s.q, s.p)
    nx = np.linalg.norm(xi)
    j = int(np.argmax(np.abs(s.q)))
    if nx == 0.0 or s.q[j] == 0.0:
        raise ChartError("gauge angle undefined for vanishing angular momentum")
    return -np.arctan2(np.cross(xi, s.q)[j], nx * s.q[j]) / nx


# --------------------------------------------------------------------------- spin / Cayley-Klein (R^4)


def _as_spin(Z) -> np.ndarray:
    if isinstance(Z, CanonicalState):
        Z = Z.z
    Z = np.asarray(Z, dtype=float)
    if Z.shape != (4,):
        raise DimensionError(f"spin state must have 4 real components, got {Z.shape}")
    return Z


def spin_to_complex(Z) -> np.ndarray:
    q1, q2, p1, p2 = _as_spin(Z)
    return np.array([q1 + 1j * p1, q2 + 1j * p2])


def complex_to_spin(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return np.array([z[0].real, z[1].real, z[0].imag, z[1].imag])


def cayley_klein_map(Z) -> np.ndarray:
    q1, q2, p1, p2 = _as_spin(Z)
    return 0.5 * np.array([q1 * q2 + p1 * p2, q1 * p2 - q2 * p1, 0.5 * (q1**2 + p1**2 - q2**2 - p2**2)])


def cayley_klein_jacobian(Z) -> np.ndarray:
    q1, q2, p1, p2 = _as_spin(Z)
    return 0.5 * np.array(
        [
            [q2, q1, p2, p1],
            [p2, -p1, -q2, q1],
            [q1, -q2, p1, -p2],
        ]
    )


PAULI = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex)


def cayley_klein_pauli(Z) -> np.ndarray:
    """Same map written as ``xi_j = z^* sigma_j z / 4``."""
    z = spin_to_complex(Z)
    return np.array([np.real(np.conj(z) @ s @ z) for s in PAULI]) / 4.0


def lift_spin(xi) -> np.ndarray:
    """A spin state ``Z`` with ``cayley_klein_map(Z) = xi``."""
    xi = np.asarray(xi, dtype=float)
    r = np.linalg.norm(xi)
    a = 2.0 * (r + xi[2])
    if a > 1e-300:
        z1 = np.sqrt(a)
        z2 = 2.0 * (xi[0] + 1j * xi[1]) / z1
    else:
        z1, z2 = 0.0, np.sqrt(4.0 * r)
    return complex_to_spin([z1, z2])


def su2_casimir(Z) -> float:
    return 0.5 * float(_as_spin(Z) @ _as_spin(Z))


def gauge_angle_su2(Z) -> float:
    """Angle conjugate to the spin Casimir, ``{theta, C}_4 = 1``.

    With ``z_j = q_j + i p_j`` the Hamiltonian flow of ``C`` is ``z -> exp(-i t) z``,
    so the conjugate angle is minus the half-sum of the principal phases.
    """
    z = spin_to_complex(Z)
    if np.any(z == 0):
        raise ChartError("gauge angle undefined when a spin component vanishes")
    return -0.5 * float(np.angle(z[0]) + np.angle(z[1]))


def spin_reduction_residual(G: Observable, H: Observable, Z) -> float:
    Z = _as_spin(Z)
    xi = cayley_klein_map(Z)
    D = cayley_klein_jacobian(Z)
    lhs = canonical_bracket(D.T @ G.grad(xi), D.T @ H.grad(xi))
    return abs(lhs - _so3_bracket(G, H, xi))


# --------------------------------------------------------------------------- local chart on so(3)*


def so3_chart(xi) -> np.ndarray:
    """Coordinates ``(C, phi, xi_1)`` with ``C = |xi|^2/2`` and ``phi = atan2(-xi_2, xi_3)``."""
    xi = np.asarray(xi, dtype=float)
    if xi[1] ** 2 + xi[2] ** 2 == 0.0:
        raise ChartError("chart singular on the xi_1 axis (xi_2 = xi_3 = 0)")
    return np.array([0.5 * xi @ xi, np.arctan2(-xi[1], xi[2]), xi[0]])


def so3_chart_jacobian(xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    s2 = xi[1] ** 2 + xi[2] ** 2
    if s2 == 0.0:
        raise ChartError("chart singular on the xi_1 axis (xi_2 = xi_3 = 0)")
    return np.array(
        [
            [xi[0], xi[1], xi[2]],
            [0.0, -xi[2] / s2, xi[1] / s2],
            [1.0, 0.0, 0.0],
        ]
    )


def so3_local_poisson(xi) -> tuple[np.ndarray, np.ndarray]:
    """Poisson matrix of so(3)* pushed into the chart ``(C, phi, xi_1)``.

    Returns ``(J_prime, coords)``; ``J_prime = D J D^T`` is the constant canonical form
    with the Casimir in the kernel.
    """
    D = so3_chart_jacobian(xi)
    Jp = D @ lie_poisson_matrix(so3(), xi) @ D.T
    return Jp, so3_chart(xi)
