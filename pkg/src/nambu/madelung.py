"""Madelung/Clebsch correspondence for 1-, 2- and 3-component wave functions.

Mass is normalized to 1. Components are stored as a complex array of shape
``(n, N, N, N)``. Phases are principal-branch; fields with nodes are rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, NodeError
from .field import (
    RHO_FLOOR,
    ClebschFields,
    Grid3,
    Polytropic,
    check_density,
    clebsch_velocity,
)

PAULI = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex)


def _gell_mann() -> np.ndarray:
    lam = np.zeros((8, 3, 3), dtype=complex)
    lam[0][0, 1] = lam[0][1, 0] = 1
    lam[1][0, 1], lam[1][1, 0] = -1j, 1j
    lam[2][0, 0], lam[2][1, 1] = 1, -1
    lam[3][0, 2] = lam[3][2, 0] = 1
    lam[4][0, 2], lam[4][2, 0] = -1j, 1j
    lam[5][1, 2] = lam[5][2, 1] = 1
    lam[6][1, 2], lam[6][2, 1] = -1j, 1j
    lam[7] = np.diag([1, 1, -2]) / np.sqrt(3)
    return lam


GELL_MANN = _gell_mann()


@dataclass(frozen=True)
class SpinorField:
    psi: np.ndarray
    hbar: float = 1.0

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=complex)
        if psi.ndim == 3:
            psi = psi[None]
        if psi.ndim != 4 or psi.shape[0] not in (1, 2, 3):
            raise DimensionError(f"spinor must have 1-3 components on a 3-D grid, got shape {psi.shape}")
        if not self.hbar > 0:
            raise ValueError("hbar must be positive")
        object.__setattr__(self, "psi", psi)

    @property
    def n(self) -> int:
        return self.psi.shape[0]

    @property
    def rho(self) -> np.ndarray:
        return np.sum(np.abs(self.psi) ** 2, axis=0)

    def norm(self, grid: Grid3) -> float:
        return grid.integrate(self.rho)


@dataclass(frozen=True)
class MadelungData:
    rho: np.ndarray
    S: np.ndarray
    hbar: float = 1.0

    @property
    def n(self) -> int:
        return self.rho.shape[0]


def madelung_decompose(Psi: SpinorField, floor: float = RHO_FLOOR) -> MadelungData:
    rho = np.abs(Psi.psi) ** 2
    if np.min(rho) <= floor:
        j = int(np.argmin(np.min(rho.reshape(Psi.n, -1), axis=1)))
        raise NodeError(f"component {j} has a node (|psi|^2 = {np.min(rho):.3e}); phase undefined")
    return MadelungData(rho, Psi.hbar * np.angle(Psi.psi), Psi.hbar)


def madelung_compose(m: MadelungData) -> SpinorField:
    return SpinorField(np.sqrt(m.rho) * np.exp(1j * m.S / m.hbar), m.hbar)


def clebsch_from_madelung(m: MadelungData, n: int | None = None) -> ClebschFields:
    """Linear change of variables from ``(rho_j, S_j)`` to Clebsch potentials.

    Unused potentials are returned as zero fields.
    """
    n = m.n if n is None else n
    if m.n != n:
        raise DimensionError(f"Madelung data has {m.n} components, expected {n}")
    r, S = m.rho, m.S
    zero = np.zeros_like(r[0])
    if n == 1:
        return ClebschFields(r[0], zero, zero, S[0], zero, zero)
    if n == 2:
        return ClebschFields(r[0] + r[1], r[0] - r[1], zero, 0.5 * (S[0] + S[1]), 0.5 * (S[0] - S[1]), zero)
    if n == 3:
        return ClebschFields(
            r[0] + r[1] + r[2],
            r[0] - r[2],
            0.5 * r[0] - r[1] + 0.5 * r[2],
            (S[0] + S[1] + S[2]) / 3.0,
            0.5 * (S[0] - S[2]),
            (S[0] - 2.0 * S[1] + S[2]) / 3.0,
        )
    raise DimensionError(f"unsupported component count {n}")


def madelung_from_clebsch(c: ClebschFields, n: int, hbar: float = 1.0) -> MadelungData:
    """Inverse of :func:`clebsch_from_madelung`."""
    rho, a1, a2, phi, b1, b2 = c.varrho, c.alpha1, c.alpha2, c.phi, c.beta1, c.beta2
    if n == 1:
        r, S = [rho], [phi]
    elif n == 2:
        r, S = [0.5 * (rho + a1), 0.5 * (rho - a1)], [phi + b1, phi - b1]
    elif n == 3:
        r2 = (rho - 2.0 * a2) / 3.0
        r = [0.5 * (rho - r2 + a1), r2, 0.5 * (rho - r2 - a1)]
        S = [phi + 0.5 * b2 + b1, phi - b2, phi + 0.5 * b2 - b1]
    else:
        raise DimensionError(f"unsupported component count {n}")
    return MadelungData(np.array(r), np.array(S), hbar)


def momentum_density(grid: Grid3, Psi: SpinorField, floor: float = RHO_FLOOR):
    """``Re[Psi^* . (-i hbar grad Psi)] / rho``."""
    rho = check_density(Psi.rho, floor)
    acc = np.zeros((3,) + rho.shape)
    for psi in Psi.psi:
        acc += np.imag(np.conj(psi) * grid.grad_complex(psi))
    return Psi.hbar * acc / rho


def spin_densities(Psi: SpinorField, floor: float = RHO_FLOOR) -> list[np.ndarray]:
    """``S_l = Psi^* lambda_l Psi / rho`` with Pauli (n=2) or Gell-Mann (n=3) matrices."""
    rho = check_density(Psi.rho, floor)
    if Psi.n == 1:
        return []
    mats = PAULI if Psi.n == 2 else GELL_MANN
    return [np.real(np.einsum("a...,ab,b...->...", np.conj(Psi.psi), lam, Psi.psi)) / rho for lam in mats]


def spin_densities_closed_form(m: MadelungData) -> list[np.ndarray]:
    """Spin densities written through densities and phase differences only."""
    r, S, hb = m.rho, m.S, m.hbar
    rho = np.sum(r, axis=0)
    if m.n == 1:
        return []
    if m.n == 2:
        c = clebsch_from_madelung(m)
        amp = np.sqrt(np.maximum(c.varrho**2 - c.alpha1**2, 0.0)) / c.varrho
        return [amp * np.cos(2 * c.beta1 / hb), -amp * np.sin(2 * c.beta1 / hb), c.alpha1 / c.varrho]

    def pair(i, j):
        a = 2 * np.sqrt(r[i] * r[j]) / rho
        d = (S[i] - S[j]) / hb
        return a * np.cos(d), -a * np.sin(d)

    s1, s2 = pair(0, 1)
    s4, s5 = pair(0, 2)
    s6, s7 = pair(1, 2)
    s3 = (r[0] - r[1]) / rho
    s8 = (r[0] + r[1] - 2 * r[2]) / (np.sqrt(3) * rho)
    return [s1, s2, s3, s4, s5, s6, s7, s8]


# --------------------------------------------------------------------------- energies


def _internal_energy(eps, rho):
    if eps is None:
        return np.zeros_like(rho)
    if hasattr(eps, "eps"):
        return eps.eps(rho)
    if callable(eps):
        return eps(rho)
    return np.broadcast_to(np.asarray(eps, dtype=float), rho.shape)


@dataclass(frozen=True)
class QuantumEnergy:
    operator: float
    madelung: float
    classical: float

    @property
    def quantum(self) -> float:
        """Part of the Madelung form proportional to hbar^2."""
        return self.madelung - self.classical


def classical_energy(grid: Grid3, c: ClebschFields, eps=None) -> float:
    """``int (|v|^2/2 + eps) rho`` with the Clebsch velocity."""
    v = clebsch_velocity(grid, c)
    return grid.integrate((0.5 * np.sum(v * v, axis=0) + _internal_energy(eps, c.varrho)) * c.varrho)


def quantum_hamiltonian(grid: Grid3, Psi: SpinorField, eps=None) -> QuantumEnergy:
    """Evaluate the quantum Hamiltonian in operator form and in Madelung/Clebsch form.

    ``eps`` is an internal-energy closure (object with ``.eps``), a callable of rho,
    an external potential array, or None.
    """
    hb = Psi.hbar
    rho = check_density(Psi.rho)
    eps_rho = _internal_energy(eps, rho) * rho
    kin = sum(np.real(np.conj(psi) * (-0.5 * hb**2) * grid.laplacian_complex(psi)) for psi in Psi.psi)
    operator = grid.integrate(kin + eps_rho)

    m = madelung_decompose(Psi)
    c = clebsch_from_madelung(m)
    classical = classical_energy(grid, c, eps)
    grad_rho = grid.grad(rho)
    # masked derivatives of the closed-form spin densities, never of ratio fields
    spin = sum(np.sum(grid.dealias(grid.grad(s)) ** 2, axis=0) for s in spin_densities_closed_form(m))
    q = (hb**2 / 8.0) * (np.sum(grad_rho**2, axis=0) / rho**2 + spin) * rho
    return QuantumEnergy(operator, classical + grid.integrate(q), classical)


# --------------------------------------------------------------------------- evolution


def nls_step(grid: Grid3, Psi: SpinorField, dt: float, h=Polytropic(1.0), potential=None) -> SpinorField:
    """Strang split step for ``i hbar d_t psi_j = (-hbar^2/2 lap + h(rho) + V) psi_j``."""
    if not dt > 0:
        raise ValueError("time step must be positive")
    hb = Psi.hbar
    half = np.exp(-0.25j * hb * grid.k2 * dt)
    enthalpy = h.h if hasattr(h, "h") else h
    psi = np.fft.ifftn(np.fft.fftn(Psi.psi, axes=(1, 2, 3)) * half, axes=(1, 2, 3))
    rho = np.sum(np.abs(psi) ** 2, axis=0)
    phase = enthalpy(rho) if enthalpy is not None else 0.0
    if potential is not None:
        phase = phase + potential
    psi = psi * np.exp(-1j * dt * phase / hb)
    psi = np.fft.ifftn(np.fft.fftn(psi, axes=(1, 2, 3)) * half, axes=(1, 2, 3))
    return SpinorField(psi, hb)


def nls_energy(grid: Grid3, Psi: SpinorField, closure=Polytropic(1.0), potential=None) -> float:
    hb = Psi.hbar
    rho = Psi.rho
    kin = sum(np.real(np.conj(psi) * (-0.5 * hb**2) * grid.laplacian_complex(psi)) for psi in Psi.psi)
    pot = closure.eps(rho) * rho if closure is not None else 0.0
    if potential is not None:
        pot = pot + potential * rho
    return grid.integrate(kin + pot)


# --------------------------------------------------------------------------- quantum corrections


def quantum_pressure(grid: Grid3, rho, hbar: float):
    """``(hbar^2/2) lap(sqrt rho) / sqrt rho``."""
    sq = np.sqrt(check_density(rho))
    return 0.5 * hbar**2 * grid.laplacian(sq) / sq


def quantum_force(grid: Grid3, rho, spins, hbar: float):
    """``(hbar^2/2) [grad(lap sqrt rho / sqrt rho) - sum_l div(rho grad S_l (x) grad S_l) / (2 rho)]``."""
    rho = check_density(rho)
    sq = np.sqrt(rho)
    force = grid.grad(grid.laplacian(sq) / sq)
    for s in spins:
        gs = grid.grad(s)
        stress = rho * gs[:, None] * gs[None, :]  # [i, j]
        force = force - np.stack([grid.div(stress[i]) for i in range(3)]) / (2.0 * rho)
    return 0.5 * hbar**2 * force


def helicity_clebsch(grid: Grid3, c: ClebschFields) -> float:
    """``int [(a2) grad(a1) - (a1) grad(a2)] . grad beta1 x grad beta2`` with ``a_j = alpha_j / rho``."""
    rho = check_density(c.varrho)
    a1, a2 = c.alpha1 / rho, c.alpha2 / rho
    w = a2 * grid.grad(a1) - a1 * grid.grad(a2)
    return grid.inner(w, np.cross(grid.grad(c.beta1), grid.grad(c.beta2), axis=0))


def helicity_direct(grid: Grid3, v) -> float:
    return grid.inner(v, grid.curl(v))


# --------------------------------------------------------------------------- canonical brackets of psi


def smooth_spinor(grid: Grid3, n: int = 2, hbar: float = 1.0, amplitude: float = 0.2, phase: float = 0.3) -> SpinorField:
    """Node-free, low-mode reference field used by bracket and correspondence checks."""
    comps = []
    for j in range(n):
        x0, x1, x2 = (grid.X[(j + i) % 3] for i in range(3))
        sqrt_rho = 1.0 + amplitude * (1.0 - 0.3 * j) * np.cos(x0 + j)
        S = phase * hbar * (np.sin(x1 + 0.5 * j) + 0.5 * np.cos(x2 + x0))
        comps.append(sqrt_rho * np.exp(1j * S / hbar) / np.sqrt(n))
    return SpinorField(np.array(comps), hbar)


def ccr_matrices(grid: Grid3, Psi: SpinorField) -> tuple[np.ndarray, np.ndarray]:
    """Bracket matrices ``{psi_a(x), psi_b^*(y)}`` and ``{psi_a(x), psi_b(y)}``.

    Each cell's ``(rho_j, S_j)`` is a canonical pair with weight ``1/cell_volume``;
    the brackets follow from the chain rule through ``psi = sqrt(rho) exp(i S / hbar)``.
    Rows and columns are flattened over ``(component, cell)``.
    """
    m = madelung_decompose(Psi)
    psi = Psi.psi.ravel()
    rho = m.rho.ravel()
    d_rho = np.diag(psi / (2.0 * rho))  # d psi / d rho
    d_S = np.diag(1j * psi / Psi.hbar)  # d psi / d S
    w = 1.0 / grid.cell_volume
    psi_conj = w * (d_rho @ np.conj(d_S).T - d_S @ np.conj(d_rho).T)
    psi_psi = w * (d_rho @ d_S.T - d_S @ d_rho.T)
    return psi_conj, psi_psi


def ccr_expected(grid: Grid3, n: int, hbar: float) -> np.ndarray:
    return np.eye(n * grid.N**3) / (1j * hbar * grid.cell_volume)


def _flat(grid: Grid3, comp: int, point) -> int:
    if np.ndim(point) == 0:
        idx = int(point)
    else:
        idx = int(np.ravel_multi_index(tuple(point), (grid.N,) * 3))
    return comp * grid.N**3 + idx


def ccr_residual(grid: Grid3, a: int, b: int, x, y, hbar: float = 1.0, Psi: SpinorField | None = None) -> complex:
    """``{psi_a(x), psi_b^*(y)} - delta_ab delta_xy / (i hbar dV)`` for one entry."""
    if Psi is None:
        Psi = smooth_spinor(grid, n=max(a, b) + 1, hbar=hbar)
    if max(a, b) >= Psi.n:
        raise DimensionError("component index out of range")
    i, j = _flat(grid, a, x), _flat(grid, b, y)
    m = madelung_decompose(Psi)
    psi = Psi.psi.ravel()
    rho = m.rho.ravel()
    value = 0.0
    if i == j:
        dr_i, dS_i = psi[i] / (2 * rho[i]), 1j * psi[i] / hbar
        value = (dr_i * np.conj(dS_i) - dS_i * np.conj(dr_i)) / grid.cell_volume
    expected = (1.0 / (1j * hbar * grid.cell_volume)) if i == j else 0.0
    return complex(value - expected)


# --------------------------------------------------------------------------- snapshots


def write_spinor_snapshot(prefix: str | Path, grid: Grid3, Psi: SpinorField, time: float) -> None:
    """Interleaved (re, im) little-endian float64, x fastest, components in sequence."""
    prefix = Path(prefix)
    with open(prefix.with_suffix(".bin"), "wb") as fh:
        for psi in Psi.psi:
            c = np.ascontiguousarray(psi.transpose(2, 1, 0)).astype("<c16")
            fh.write(c.tobytes())
    meta = {"n": Psi.n, "hbar": Psi.hbar, "N": grid.N, "time": float(time), "dtype": "<c16", "order": "x-fastest"}
    prefix.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def read_spinor_snapshot(prefix: str | Path) -> tuple[dict, SpinorField]:
    prefix = Path(prefix)
    meta = json.loads(prefix.with_suffix(".json").read_text())
    N, n = meta["N"], meta["n"]
    raw = np.fromfile(prefix.with_suffix(".bin"), dtype="<c16").reshape(n, N, N, N)
    return meta, SpinorField(raw.transpose(0, 3, 2, 1).copy(), meta["hbar"])


# --------------------------------------------------------------------------- classical limit


def classical_limit_data(grid: Grid3) -> ClebschFields:
    """Two-component data with uniform beta, so the quantum correction is purely O(hbar^2)."""
    X, Y, Z = grid.X
    return ClebschFields.build(
        grid,
        varrho=1.0 + 0.1 * np.cos(X) + 0.05 * np.sin(Y),
        alpha1=0.2 * np.sin(Z) + 0.1 * np.cos(X),
        phi=0.05 * np.sin(Y) + 0.03 * np.cos(Z),
        beta1=0.1,
    )


def hbar_scaling(grid: Grid3, c: ClebschFields, hbars, closure) -> tuple[float, list[float]]:
    """Log-log slope of ``|H_q(hbar) - H_classical|`` against hbar."""
    classical = classical_energy(grid, c, closure)
    gaps = []
    for hb in hbars:
        Psi = madelung_compose(madelung_from_clebsch(c, 2, hb))
        gaps.append(abs(quantum_hamiltonian(grid, Psi, closure).operator - classical))
    return float(np.polyfit(np.log(hbars), np.log(gaps), 1)[0]), gaps


def track_classical(
    grid: Grid3, c: ClebschFields, n: int, hbar: float, dt: float, nsteps: int, g: float = 1.0
) -> np.ndarray:
    """Sup-norm distance between quantum and classical ``(rho, v)`` at each step.

    The wave function is built from the Clebsch data and advanced with :func:`nls_step`;
    the classical state follows ``fluid_rhs`` with the matching enthalpy ``g rho`` under rk4.
    """
    from .field import FluidState, fluid_from_clebsch, fluid_rhs
    from .integrate import step_rk4

    closure = Polytropic(g)
    Psi = madelung_compose(madelung_from_clebsch(c, n, hbar))
    u = fluid_from_clebsch(grid, c)

    def rhs(a):
        d_rho, d_v = fluid_rhs(grid, FluidState(a[0], a[1:]), closure)
        return np.concatenate([d_rho[None], d_v])

    a = np.concatenate([u.rho[None], u.v])
    out = np.empty(nsteps + 1)
    out[0] = 0.0
    for i in range(nsteps):
        Psi = nls_step(grid, Psi, dt, closure)
        a = step_rk4(rhs, a, dt)
        d_rho = np.max(np.abs(Psi.rho - a[0]))
        d_v = np.max(np.abs(momentum_density(grid, Psi) - a[1:]))
        out[i + 1] = max(d_rho, d_v)
    return out
