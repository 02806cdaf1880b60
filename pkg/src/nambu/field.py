"""Pseudo-spectral operators and ideal-fluid dynamics on the periodic box [0, 2pi)^3.

Scalar fields are real arrays of shape ``(N, N, N)`` indexed ``[ix, iy, iz]``;
vector fields have shape ``(3, N, N, N)``. Quadratic and higher products that are
differentiated or time-advanced are filtered with the 2/3 rule.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import DensityUnderflowError, DimensionError, FieldConstraintError

RHO_FLOOR = 1e-8
BOX = 2.0 * np.pi


class Grid3:
    """Uniform N^3 grid with cached wavenumbers and the 2/3 dealiasing mask."""

    def __init__(self, N: int):
        if N < 8 or N % 2:
            raise ValueError(f"grid size must be even and >= 8, got {N}")
        self.N = N
        self.L = BOX
        self.dx = BOX / N
        self.cell_volume = self.dx**3
        self.volume = BOX**3
        self.x = self.dx * np.arange(N)
        self.X = np.stack(np.meshgrid(self.x, self.x, self.x, indexing="ij"))
        k1 = np.fft.fftfreq(N, d=1.0 / N)
        self.k = np.stack(np.meshgrid(k1, k1, k1, indexing="ij"))
        kd1 = k1.copy()
        kd1[N // 2] = 0.0  # odd derivatives drop the Nyquist mode
        self.kd = np.stack(np.meshgrid(kd1, kd1, kd1, indexing="ij"))
        self.k2 = np.sum(self.k**2, axis=0)
        self.kd2 = np.sum(self.kd**2, axis=0)
        self.mask = np.all(np.abs(self.k) <= N / 3.0, axis=0)

    def __repr__(self):
        return f"Grid3(N={self.N})"

    # transforms ------------------------------------------------------------
    @staticmethod
    def fft(f):
        return np.fft.fftn(f, axes=(-3, -2, -1))

    @staticmethod
    def ifft(fh):
        return np.fft.ifftn(fh, axes=(-3, -2, -1)).real

    @staticmethod
    def ifft_complex(fh):
        return np.fft.ifftn(fh, axes=(-3, -2, -1))

    def dealias(self, f):
        return self.ifft(self.fft(f) * self.mask)

    # calculus --------------------------------------------------------------
    def grad(self, f):
        fh = np.fft.fftn(f)
        return np.stack([self.ifft(1j * self.kd[i] * fh) for i in range(3)])

    def grad_complex(self, f):
        fh = np.fft.fftn(f)
        return np.stack([np.fft.ifftn(1j * self.kd[i] * fh) for i in range(3)])

    def div(self, v):
        vh = self.fft(v)
        return self.ifft(1j * np.sum(self.kd * vh, axis=0))

    def curl(self, v):
        vh = self.fft(v)
        return self.ifft(1j * np.cross(self.kd, vh, axis=0))

    def laplacian(self, f):
        return self.ifft(-self.k2 * self.fft(f))

    def laplacian_complex(self, f):
        return np.fft.ifftn(-self.k2 * np.fft.fftn(f))

    # quadrature ------------------------------------------------------------
    def integrate(self, f) -> float:
        return float(np.sum(f) * self.cell_volume)

    def inner(self, a, b) -> float:
        return float(np.sum(a * b) * self.cell_volume)

    def mean(self, f):
        return np.mean(f, axis=(-3, -2, -1))


# --------------------------------------------------------------------------- test fields


def random_solenoidal(grid: Grid3, rng: np.random.Generator, kmax: int = 2, amplitude: float = 1.0):
    """Random real, divergence-free, zero-mean vector field with |k_i| <= kmax."""
    shape = (3, grid.N, grid.N, grid.N)
    vh = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    low = np.all(np.abs(grid.k) <= kmax, axis=0)
    vh *= low
    v = grid.ifft(vh)  # real part symmetrizes the spectrum
    vh = grid.fft(v)
    k2 = np.where(grid.kd2 == 0, 1.0, grid.kd2)
    vh -= grid.kd * np.sum(grid.kd * vh, axis=0) / k2
    vh[:, 0, 0, 0] = 0.0
    v = grid.ifft(vh)
    return amplitude * v / np.max(np.abs(v))


def random_scalar(grid: Grid3, rng: np.random.Generator, kmax: int = 2, amplitude: float = 1.0, mean: float = 0.0):
    fh = (rng.standard_normal(grid.k2.shape) + 1j * rng.standard_normal(grid.k2.shape))
    fh *= np.all(np.abs(grid.k) <= kmax, axis=0)
    fh[0, 0, 0] = 0.0
    f = grid.ifft(fh)
    return mean + amplitude * f / np.max(np.abs(f))


def beltrami(grid: Grid3):
    """``(0, sin x, cos x)``: curl eigenfield with eigenvalue 1."""
    x = grid.X[0]
    return np.stack([np.zeros_like(x), np.sin(x), np.cos(x)])


# --------------------------------------------------------------------------- vortex dynamics


def _check_vector(grid: Grid3, v):
    v = np.asarray(v, dtype=float)
    if v.shape != (3, grid.N, grid.N, grid.N):
        raise DimensionError(f"vector field of shape {v.shape} on {grid}")
    return v


def curl(grid: Grid3, v):
    return grid.curl(_check_vector(grid, v))


def check_vorticity(grid: Grid3, omega, tol: float = 1e-10):
    """Reject fields that are not divergence-free and zero-mean (relative to their size)."""
    omega = _check_vector(grid, omega)
    scale = max(1.0, float(np.max(np.abs(omega))))
    div = float(np.max(np.abs(grid.div(omega))))
    mean = float(np.max(np.abs(grid.mean(omega))))
    if div > tol * scale * grid.N:
        raise FieldConstraintError(f"vorticity has divergence {div:.3e}")
    if mean > tol * scale:
        raise FieldConstraintError(f"vorticity has nonzero mean {mean:.3e}")
    return omega


def inv_curl(grid: Grid3, omega, check: bool = True):
    """Divergence-free, zero-mean ``v`` with ``curl v = omega``: ``v_k = i k x omega_k / |k|^2``."""
    if check:
        omega = check_vorticity(grid, omega)
    wh = grid.fft(omega)
    k2 = np.where(grid.kd2 == 0, 1.0, grid.kd2)
    vh = 1j * np.cross(grid.kd, wh, axis=0) / k2
    vh[:, grid.kd2 == 0] = 0.0
    return grid.ifft(vh)


def vortex_rhs(grid: Grid3, omega, check: bool = True):
    """``d omega/dt = curl((curl^-1 omega) x omega)`` with 2/3-rule filtering."""
    w = grid.dealias(omega)
    v = inv_curl(grid, w, check=check)
    prod = np.cross(v, w, axis=0)
    ph = grid.fft(prod) * grid.mask
    return grid.ifft(1j * np.cross(grid.kd, ph, axis=0))


def helicity(grid: Grid3, omega) -> float:
    """``1/2 <curl^-1 omega, omega>``."""
    return 0.5 * grid.inner(inv_curl(grid, omega), omega)


def kinetic_energy(grid: Grid3, omega) -> float:
    v = inv_curl(grid, omega)
    return 0.5 * grid.inner(v, v)


def vortex_cfl_dt(grid: Grid3, omega, cfl: float = 0.1) -> float:
    vmax = float(np.max(np.linalg.norm(inv_curl(grid, omega), axis=0)))
    return cfl * grid.dx / max(vmax, 1e-300)


# --------------------------------------------------------------------------- compressible barotropic fluid


@dataclass(frozen=True)
class Isothermal:
    """``h(rho) = c^2 log rho`` with matching specific internal energy ``c^2 (log rho - 1)``."""

    c: float = 1.0

    def h(self, rho):
        return self.c**2 * np.log(rho)

    def eps(self, rho):
        return self.c**2 * (np.log(rho) - 1.0)

    __call__ = h


@dataclass(frozen=True)
class Polytropic:
    """``h(rho) = g rho`` (Gross-Pitaevskii form), internal energy ``g rho / 2``."""

    g: float = 1.0

    def h(self, rho):
        return self.g * np.asarray(rho)

    def eps(self, rho):
        return 0.5 * self.g * np.asarray(rho)

    __call__ = h


def _enthalpy(h) -> Callable:
    return h.h if hasattr(h, "h") else h


def check_density(rho, floor: float = RHO_FLOOR):
    m = float(np.min(rho))
    if not m > floor:
        raise DensityUnderflowError(f"density minimum {m:.3e} below floor {floor:.1e}")
    return rho


@dataclass(frozen=True)
class FluidState:
    rho: np.ndarray
    v: np.ndarray

    def pack(self):
        return np.concatenate([self.rho[None], self.v])

    @classmethod
    def unpack(cls, a):
        return cls(a[0], a[1:4])


def fluid_rhs(grid: Grid3, u: FluidState, h=Isothermal()) -> tuple[np.ndarray, np.ndarray]:
    """``(-div(rho v), -(v . grad) v - grad h(rho))``."""
    rho = check_density(u.rho)
    v = _check_vector(grid, u.v)
    drho = -grid.div(grid.dealias(rho * v))
    dv_grad = np.stack([grid.grad(v[i]) for i in range(3)])  # [i, j] = d_j v_i
    adv = np.einsum("j...,ij...->i...", v, dv_grad)
    dv = -grid.dealias(adv) - grid.grad(grid.dealias(_enthalpy(h)(rho)))
    return drho, dv


def fluid_poisson_apply(grid: Grid3, u: FluidState, grad_f: tuple) -> tuple[np.ndarray, np.ndarray]:
    """Apply the fluid Poisson operator: ``(-div F_v, -grad F_rho - (curl v / rho) x F_v)``."""
    rho = check_density(u.rho)
    f_rho, f_v = grad_f
    w = grid.curl(_check_vector(grid, u.v))
    out_rho = -grid.div(grid.dealias(f_v))
    out_v = -grid.grad(grid.dealias(f_rho)) - grid.dealias(np.cross(w / rho, f_v, axis=0))
    return out_rho, out_v


def fluid_energy_gradient(u: FluidState, h=Isothermal()) -> tuple[np.ndarray, np.ndarray]:
    """``(1/2 |v|^2 + h(rho), rho v)``."""
    return 0.5 * np.sum(u.v**2, axis=0) + _enthalpy(h)(u.rho), u.rho * u.v


def fluid_energy(grid: Grid3, u: FluidState, closure=Isothermal()) -> float:
    return grid.integrate((0.5 * np.sum(u.v**2, axis=0) + closure.eps(u.rho)) * u.rho)


def total_mass(grid: Grid3, rho) -> float:
    return grid.integrate(rho)


def fluid_helicity(grid: Grid3, v) -> float:
    """``int v . curl v``."""
    return grid.inner(v, grid.curl(v))


# --------------------------------------------------------------------------- Clebsch parameterization


CLEBSCH_NAMES = ("varrho", "alpha1", "alpha2", "phi", "beta1", "beta2")


@dataclass(frozen=True)
class ClebschFields:
    varrho: np.ndarray
    alpha1: np.ndarray
    alpha2: np.ndarray
    phi: np.ndarray
    beta1: np.ndarray
    beta2: np.ndarray

    def pack(self):
        return np.stack([getattr(self, n) for n in CLEBSCH_NAMES])

    @classmethod
    def unpack(cls, a):
        return cls(*a)

    @classmethod
    def build(cls, grid: Grid3, varrho=1.0, alpha1=0.0, alpha2=0.0, phi=0.0, beta1=0.0, beta2=0.0):
        shape = (grid.N,) * 3
        return cls(*(np.broadcast_to(np.asarray(f, dtype=float), shape).copy()
                     for f in (varrho, alpha1, alpha2, phi, beta1, beta2)))


def clebsch_velocity(grid: Grid3, c: ClebschFields):
    """``grad phi + (alpha1/varrho) grad beta1 + (alpha2/varrho) grad beta2``, evaluated pointwise."""
    rho = check_density(c.varrho)
    return grid.grad(c.phi) + (c.alpha1 / rho) * grid.grad(c.beta1) + (c.alpha2 / rho) * grid.grad(c.beta2)


def clebsch_vorticity(grid: Grid3, c: ClebschFields):
    """``sum_j grad(alpha_j/varrho) x grad beta_j`` computed without forming v."""
    rho = check_density(c.varrho)
    return sum(
        np.cross(grid.grad(a / rho), grid.grad(b), axis=0)
        for a, b in ((c.alpha1, c.beta1), (c.alpha2, c.beta2))
    )


def clebsch_rhs(grid: Grid3, c: ClebschFields, h=Isothermal(), freeze: tuple[str, ...] = ()) -> ClebschFields:
    """Canonical evolution of the Clebsch potentials.

    Densities obey ``d/dt + div(v .) = 0``; scalars ``beta_j`` are Lie-dragged
    (``d/dt + v . grad = 0``); ``phi`` obeys ``(d/dt + v . grad) phi = |v|^2/2 - h``.
    Names in ``freeze`` get a zero time derivative (subsystem restriction).
    """
    rho = check_density(c.varrho)
    v = clebsch_velocity(grid, c)

    def transport_density(a):
        return -grid.div(grid.dealias(a * v))

    def transport_scalar(s):
        return -grid.dealias(np.sum(v * grid.grad(s), axis=0))

    d = {
        "varrho": transport_density(rho),
        "alpha1": transport_density(c.alpha1),
        "alpha2": transport_density(c.alpha2),
        "phi": transport_scalar(c.phi) + grid.dealias(0.5 * np.sum(v * v, axis=0) - _enthalpy(h)(rho)),
        "beta1": transport_scalar(c.beta1),
        "beta2": transport_scalar(c.beta2),
    }
    for name in freeze:
        d[name] = np.zeros_like(d[name])
    return ClebschFields(**d)


def clebsch_induced_rates(grid: Grid3, c: ClebschFields, h=Isothermal()) -> tuple[np.ndarray, np.ndarray]:
    """``(d rho/dt, d v/dt)`` implied by the Clebsch evolution (chain rule through the velocity map)."""
    rho = c.varrho
    dc = clebsch_rhs(grid, c, h)
    dv = grid.grad(dc.phi)
    for a, b, da, db in ((c.alpha1, c.beta1, dc.alpha1, dc.beta1), (c.alpha2, c.beta2, dc.alpha2, dc.beta2)):
        da_hat = (da * rho - a * dc.varrho) / rho**2  # time derivative of alpha/varrho
        dv = dv + da_hat * grid.grad(b) + (a / rho) * grid.grad(db)
    return dc.varrho, dv


def fluid_from_clebsch(grid: Grid3, c: ClebschFields) -> FluidState:
    return FluidState(c.varrho.copy(), clebsch_velocity(grid, c))


# --------------------------------------------------------------------------- snapshots and diagnostics


def write_snapshot(prefix: str | Path, grid: Grid3, fields: dict[str, np.ndarray], time: float, extra: dict | None = None):
    """Flat little-endian float64 binary (x fastest) plus a JSON sidecar.

    Vector fields are written component by component.
    """
    prefix = Path(prefix)
    names = []
    with open(prefix.with_suffix(".bin"), "wb") as fh:
        for name, f in fields.items():
            f = np.asarray(f, dtype="<f8")
            comps = [f] if f.ndim == 3 else list(f)
            for i, comp in enumerate(comps):
                fh.write(np.ascontiguousarray(comp.transpose(2, 1, 0)).tobytes())
                names.append(name if f.ndim == 3 else f"{name}_{'xyz'[i]}")
    meta = {"N": grid.N, "L": grid.L, "fields": names, "time": float(time), "dtype": "<f8", "order": "x-fastest"}
    meta.update(extra or {})
    prefix.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return names


def read_snapshot(prefix: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    prefix = Path(prefix)
    meta = json.loads(prefix.with_suffix(".json").read_text())
    N = meta["N"]
    raw = np.fromfile(prefix.with_suffix(".bin"), dtype=meta.get("dtype", "<f8"))
    blocks = raw.reshape(len(meta["fields"]), N, N, N)
    return meta, {name: b.transpose(2, 1, 0).copy() for name, b in zip(meta["fields"], blocks)}
