"""Time stepping for finite-dimensional Poisson systems, with invariant tracking."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .algebra3 import (
    Observable,
    PoissonSystem,
    euler_top_energy,
    half_norm_squared,
    so3_system,
)
from .clebsch import (
    angular_momentum_map,
    canonical_vector_field,
    cayley_klein_jacobian,
    cayley_klein_map,
    lift_angular_momentum,
    lift_spin,
)
from .errors import ConvergenceError, DimensionError

DRIFT_FLOOR = 1e-300


def step_rk4(rhs: Callable, x, dt: float):
    if not dt > 0:
        raise ValueError(f"time step must be positive, got {dt}")
    k1 = rhs(x)
    k2 = rhs(x + 0.5 * dt * k1)
    k3 = rhs(x + 0.5 * dt * k2)
    k4 = rhs(x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def hamiltonian_vector_field(sys: PoissonSystem, H: Observable) -> Callable[[np.ndarray], np.ndarray]:
    return lambda xi: sys.J(xi) @ H.grad(xi)


def step_implicit_midpoint(
    sys: PoissonSystem, H: Observable, xi, dt: float, tol: float = 1e-13, max_iter: int = 50
) -> np.ndarray:
    """One implicit-midpoint step solved by fixed-point iteration."""
    if not dt > 0:
        raise ValueError(f"time step must be positive, got {dt}")
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    xi = np.asarray(xi, dtype=float)
    f = hamiltonian_vector_field(sys, H)
    new = xi + dt * f(xi)
    delta = np.inf
    for _ in range(max_iter):
        with np.errstate(over="ignore", invalid="ignore"):
            nxt = xi + dt * f(0.5 * (xi + new))
            delta = float(np.linalg.norm(nxt - new))
        if not np.isfinite(delta):
            raise ConvergenceError("implicit midpoint iteration diverged", delta)
        new = nxt
        if delta <= tol:
            return new
    raise ConvergenceError(f"implicit midpoint did not converge in {max_iter} iterations (|delta| = {delta:.3e})", delta)


@dataclass(frozen=True)
class HamiltonianSystem:
    """A Poisson system together with its Hamiltonian and the invariants to monitor."""

    poisson: PoissonSystem
    hamiltonian: Observable
    invariants: Mapping[str, Observable] = field(default_factory=dict)
    state_names: Sequence[str] = ()

    def rhs(self, xi):
        return self.poisson.J(xi) @ self.hamiltonian.grad(xi)


def euler_top(moments) -> HamiltonianSystem:
    H1 = euler_top_energy(moments)
    return HamiltonianSystem(so3_system(), H1, {"H1": H1, "H2": half_norm_squared()}, ("xi1", "xi2", "xi3"))


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    invariant_series: dict[str, np.ndarray]
    state_names: Sequence[str] = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if len(self.times) != len(self.states):
            raise DimensionError("times and states differ in length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        for name, series in self.invariant_series.items():
            if len(series) != len(self.times):
                raise DimensionError(f"invariant series {name!r} has wrong length")

    def drift(self, name: str) -> np.ndarray:
        """Relative deviation of an invariant from its initial value."""
        s = np.asarray(self.invariant_series[name])
        return np.abs(s - s[0]) / max(abs(s[0]), DRIFT_FLOOR)

    def max_drift(self, name: str) -> float:
        return float(np.max(self.drift(name)))

    def columns(self) -> list[str]:
        names = list(self.state_names) or [f"x{i + 1}" for i in range(self.states.shape[1])]
        return ["time", *names, *self.invariant_series]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns())
            inv = list(self.invariant_series.values())
            for i, t in enumerate(self.times):
                row = [t, *self.states[i], *(s[i] for s in inv)]
                w.writerow([format(float(v), ".17g") for v in row])

    def to_json(self, path: str | Path) -> None:
        doc = {
            "meta": self.meta,
            "columns": self.columns(),
            "max_drift": {k: self.max_drift(k) for k in self.invariant_series},
        }
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def simulate(system: HamiltonianSystem, x0, dt: float, nsteps: int, method: str = "midpoint", **solver) -> Trajectory:
    if nsteps < 1:
        raise ValueError("nsteps must be >= 1")
    if method == "rk4":
        step = lambda x: step_rk4(system.rhs, x, dt)
    elif method == "midpoint":
        step = lambda x: step_implicit_midpoint(system.poisson, system.hamiltonian, x, dt, **solver)
    else:
        raise ValueError(f"unknown method {method!r}")
    x = np.asarray(x0, dtype=float)
    states = np.empty((nsteps + 1, x.size))
    states[0] = x
    for n in range(nsteps):
        x = step(x)
        states[n + 1] = x
    series = {name: np.array([obs(s) for s in states]) for name, obs in system.invariants.items()}
    times = dt * np.arange(nsteps + 1)
    return Trajectory(times, states, series, system.state_names, {"method": method, "dt": dt, "nsteps": nsteps})


# --------------------------------------------------------------------------- three realizations of the Euler top


def _lifted_rhs_sp6(H: Observable):
    def rhs(z):
        q, p = z[:3], z[3:]
        g = H.grad(np.cross(q, p))
        # (dH/dp, -dH/dq) with dH/dq = p x g, dH/dp = -q x g
        return np.concatenate([-np.cross(q, g), -np.cross(p, g)])

    return rhs


def _lifted_rhs_spin(H: Observable):
    def rhs(Z):
        return canonical_vector_field(cayley_klein_jacobian(Z).T @ H.grad(cayley_klein_map(Z)))

    return rhs


def realization_trajectories(xi0, moments, dt: float, nsteps: int, lift=None) -> dict[str, np.ndarray]:
    """rk4 trajectories of xi(t) from so(3)*, R^6 (q x p) and R^4 (Cayley-Klein)."""
    xi0 = np.asarray(xi0, dtype=float)
    if np.linalg.norm(xi0) == 0.0:
        raise ValueError("no admissible lift for xi0 = 0")
    H = euler_top_energy(moments)
    direct = lambda xi: np.cross(H.grad(xi), xi)
    s0 = lift if lift is not None else lift_angular_momentum(xi0)
    if np.linalg.norm(angular_momentum_map(s0) - xi0) > 1e-12 * max(1.0, np.linalg.norm(xi0)):
        raise ValueError("supplied lift does not reproduce xi0")
    runs = {
        "so3": (direct, xi0, lambda x: x),
        "sp6": (_lifted_rhs_sp6(H), s0.z, lambda z: np.cross(z[:3], z[3:])),
        "spin": (_lifted_rhs_spin(H), lift_spin(xi0), cayley_klein_map),
    }
    out = {}
    for name, (rhs, x, proj) in runs.items():
        xs = np.empty((nsteps + 1, 3))
        xs[0] = proj(x)
        for n in range(nsteps):
            x = step_rk4(rhs, x, dt)
            xs[n + 1] = proj(x)
        out[name] = xs
    return out


def compare_realizations(xi0, moments, dt: float, nsteps: int, lift=None) -> float:
    """Max over time of pairwise ``|xi_a - xi_b|`` among the three realizations."""
    tr = realization_trajectories(xi0, moments, dt, nsteps, lift)
    names = list(tr)
    worst = 0.0
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            d = np.linalg.norm(tr[names[i]] - tr[names[j]], axis=1)
            worst = max(worst, float(np.max(d)))
    return worst


def convergence_order(xi0, moments, t_final: float, dts: Sequence[float]) -> tuple[float, list[float]]:
    """Least-squares slope of log(discrepancy) against log(dt) at fixed final time."""
    errs = [compare_realizations(xi0, moments, dt, int(round(t_final / dt))) for dt in dts]
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    return float(slope), errs


def flow_jacobian_determinant(rhs: Callable, x, dt: float, substeps: int = 1) -> float:
    """det of the finite-difference Jacobian of the rk4 dt-flow map at x."""
    x = np.asarray(x, dtype=float)
    h_dt = dt / substeps

    def flow(y):
        for _ in range(substeps):
            y = step_rk4(rhs, y, h_dt)
        return y

    n = x.size
    D = np.empty((n, n))
    for j in range(n):
        h = 1e-6 * max(1.0, abs(x[j]))
        e = np.zeros(n)
        e[j] = h
        D[:, j] = (flow(x + e) - flow(x - e)) / (2 * h)
    return float(np.linalg.det(D))
