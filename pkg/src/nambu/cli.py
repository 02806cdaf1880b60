"""Command-line experiment runner.

Each subcommand writes ``<out>.csv`` and ``<out>.json`` and prints one summary line of
``key=value`` pairs. Floats are printed with 17 significant digits so that repeated
runs can be compared byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import algebra3 as a3
from . import clebsch as cl
from . import field as fd
from . import integrate as it
from . import madelung as md
from .errors import ConfigError, NambuError

EXPERIMENTS = ("euler-top", "bracket-check", "reduce-check", "vortex", "fluid", "clebsch-fluid", "nls", "correspondence")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

# per-experiment defaults for the step size, step count and grid size
DEFAULTS = {
    "euler-top": {"dt": 1e-2, "steps": 10_000},
    "bracket-check": {},
    "reduce-check": {"dt": 1e-3, "steps": 1000},
    "vortex": {"dt": 0.0, "steps": 100, "grid_n": 16},
    "fluid": {"dt": 1e-2, "steps": 50, "grid_n": 16},
    "clebsch-fluid": {"dt": 1e-2, "steps": 50, "grid_n": 16},
    "nls": {"dt": 1e-3, "steps": 100, "grid_n": 16},
    "correspondence": {"dt": 1e-3, "steps": 50, "grid_n": 16, "hbar": 0.25},
}


@dataclass
class RunConfig:
    experiment: str
    out: str = ""
    seed: int = 0
    dt: float = 1e-2
    steps: int = 100
    grid_n: int = 16
    hbar: float = 1.0
    moments: tuple = (1.0, 2.0, 3.0)
    xi0: tuple = (1.0, 0.1, 0.1)
    method: str = "midpoint"
    samples: int = 100
    cfl: float = 0.1
    g: float = 1.0
    sound_speed: float = 1.0
    components: int = 2
    degree: int = 3

    def validate(self) -> "RunConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if not self.dt >= 0 or (self.dt == 0 and self.experiment != "vortex"):
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.steps < 1:
            raise ConfigError(f"steps must be >= 1, got {self.steps}")
        if self.grid_n < 8 or self.grid_n % 2:
            raise ConfigError(f"grid_n must be even and >= 8, got {self.grid_n}")
        if not self.hbar > 0:
            raise ConfigError(f"hbar must be positive, got {self.hbar}")
        if len(self.moments) != 3 or min(self.moments) <= 0:
            raise ConfigError("moments must be three positive numbers")
        if len(self.xi0) != 3:
            raise ConfigError("xi0 must have three entries")
        if self.method not in ("midpoint", "rk4"):
            raise ConfigError(f"method must be midpoint or rk4, got {self.method!r}")
        if self.samples < 1:
            raise ConfigError("samples must be >= 1")
        if not 0 < self.cfl <= 1:
            raise ConfigError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.sound_speed <= 0:
            raise ConfigError("sound_speed must be positive")
        if self.components not in (1, 2, 3):
            raise ConfigError("components must be 1, 2 or 3")
        if self.degree < 1:
            raise ConfigError("degree must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        return self


FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(key: str, value):
    f = FIELDS[key]
    try:
        if f.type == "tuple":
            if isinstance(value, str):
                value = [v for v in value.replace(",", " ").split() if v]
            return tuple(float(v) for v in value)
        if f.type == "int":
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        if f.type == "float":
            return float(value)
        return str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key!r}: {value!r}") from exc


def read_config_file(path: str | Path) -> dict:
    """Flat ``key = value`` text (``#`` comments) or a JSON object."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if text.lstrip().startswith("{"):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON config: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("JSON config must be an object")
        return raw
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        k, v = line.split("=", 1)
        raw[k.strip()] = v.strip()
    return raw


def parse_config(experiment: str, file_values: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Apply file values over the defaults, then flag overrides, then validate."""
    values = dict(DEFAULTS.get(experiment, {}))
    for src in (file_values or {}, overrides or {}):
        for k, v in src.items():
            key = k.replace("-", "_")
            if key == "experiment":
                if v != experiment:
                    raise ConfigError(f"config is for {v!r}, not {experiment!r}")
                continue
            if key not in FIELDS:
                raise ConfigError(f"unknown config key {k!r}")
            if v is not None:
                values[key] = _coerce(key, v)
    cfg = RunConfig(experiment=experiment, **values)
    if not cfg.out:
        cfg.out = experiment
    return cfg.validate()


# --------------------------------------------------------------------------- output helpers


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_table(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_report(path: Path, cfg: RunConfig, summary: dict) -> None:
    config = {k: v for k, v in dataclasses.asdict(cfg).items() if k != "out"}
    doc = {"config": config, "summary": {k: _jsonable(v) for k, v in summary.items()}}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def summary_line(experiment: str, summary: dict) -> str:
    return " ".join([f"experiment={experiment}", *(f"{k}={fmt(v)}" for k, v in summary.items())])


def _paths(cfg: RunConfig) -> tuple[Path, Path]:
    base = Path(cfg.out)
    base.parent.mkdir(parents=True, exist_ok=True)
    return base.with_name(base.name + ".csv"), base.with_name(base.name + ".json")


# --------------------------------------------------------------------------- experiments


def run_euler_top(cfg: RunConfig) -> dict:
    system = it.euler_top(cfg.moments)
    traj = it.simulate(system, cfg.xi0, cfg.dt, cfg.steps, cfg.method)
    csv_path, _ = _paths(cfg)
    traj.to_csv(csv_path)
    return {"max_drift_H1": traj.max_drift("H1"), "max_drift_H2": traj.max_drift("H2")}


def run_bracket_check(cfg: RunConfig) -> dict:
    rng = np.random.default_rng(cfg.seed)
    rows = []
    for name, alg in a3.builtin_algebras().items():
        sys_ = a3.lie_poisson_system(alg)
        rows.append(("jacobi", name, a3.jacobi_residual(alg)))
        rows.append(("antisymmetry", name, a3.antisymmetry_check(sys_, cfg.samples, cfg.seed)))
    worst_deform = 0.0
    for _ in range(cfg.samples):
        A = rng.standard_normal((3, 3))
        worst_deform = max(worst_deform, a3.jacobi_residual(a3.deform(A + A.T)))
    rows.append(("jacobi", "deform-symmetric", worst_deform))
    worst_nambu = 0.0
    H2 = a3.half_norm_squared()
    so3_sys = a3.so3_system()
    for _ in range(cfg.samples):
        G = a3.Polynomial.random(3, cfg.degree, rng)
        H = a3.Polynomial.random(3, cfg.degree, rng)
        xi = rng.standard_normal(3)
        lhs = a3.nambu_bracket(G.grad(xi), H.grad(xi), H2.grad(xi))
        worst_nambu = max(worst_nambu, abs(lhs - a3.poisson_bracket(so3_sys, G, H, xi)))
    rows.append(("nambu-lie-poisson", "so3", worst_nambu))
    worst_fi = 0.0
    for _ in range(20):
        obs = [a3.Polynomial.random(3, 2, rng) for _ in range(5)]
        worst_fi = max(worst_fi, a3.fundamental_identity_residual(*obs, rng.standard_normal(3)))
    rows.append(("fundamental-identity", "R3", worst_fi))
    csv_path, _ = _paths(cfg)
    write_table(csv_path, ["check", "subject", "residual"], rows)
    return {
        "max_jacobi": max(r[2] for r in rows if r[0] == "jacobi"),
        "max_antisymmetry": max(r[2] for r in rows if r[0] == "antisymmetry"),
        "nambu_identity": worst_nambu,
        "fundamental_identity": worst_fi,
    }


def run_reduce_check(cfg: RunConfig) -> dict:
    rng = np.random.default_rng(cfg.seed)
    rows = []
    for i in range(cfg.samples):
        G = a3.Polynomial.random(3, cfg.degree, rng)
        H = a3.Polynomial.random(3, cfg.degree, rng)
        s = rng.standard_normal(6)
        Z = rng.standard_normal(4)
        rows.append((i, cl.reduction_residual_sp6(G, H, s), cl.spin_reduction_residual(G, H, Z)))
    discrepancy = it.compare_realizations(cfg.xi0, cfg.moments, cfg.dt, cfg.steps)
    order, _ = it.convergence_order(cfg.xi0, cfg.moments, 2.0, [0.2, 0.1, 0.05, 0.025])
    csv_path, _ = _paths(cfg)
    write_table(csv_path, ["sample", "residual_sp6", "residual_spin"], rows)
    return {
        "max_residual_sp6": max(r[1] for r in rows),
        "max_residual_spin": max(r[2] for r in rows),
        "realization_discrepancy": discrepancy,
        "convergence_order": order,
    }


DIAGNOSTIC_COLUMNS = ["time", "energy", "helicity", "mass"]


def _series_drift(values) -> float:
    v = np.asarray(values)
    return float(np.max(np.abs(v - v[0])) / max(abs(v[0]), it.DRIFT_FLOOR))


def run_vortex(cfg: RunConfig) -> dict:
    grid = fd.Grid3(cfg.grid_n)
    rng = np.random.default_rng(cfg.seed)
    omega = fd.curl(grid, fd.random_solenoidal(grid, rng))
    dt = cfg.dt if cfg.dt > 0 else fd.vortex_cfl_dt(grid, omega, cfg.cfl)
    rhs = lambda w: fd.vortex_rhs(grid, w, check=False)
    rows = []
    for n in range(cfg.steps + 1):
        if n:
            omega = it.step_rk4(rhs, omega, dt)
        # unit density, so the mass column is the box volume
        rows.append((n * dt, fd.kinetic_energy(grid, omega), fd.helicity(grid, omega), grid.volume))
    csv_path, _ = _paths(cfg)
    write_table(csv_path, DIAGNOSTIC_COLUMNS, rows)
    fd.write_snapshot(Path(cfg.out + "_omega"), grid, {"omega": omega}, rows[-1][0])
    return {
        "dt": dt,
        "helicity_drift": _series_drift([r[2] for r in rows]),
        "energy_drift": _series_drift([r[1] for r in rows]),
    }


def run_fluid(cfg: RunConfig) -> dict:
    grid = fd.Grid3(cfg.grid_n)
    rng = np.random.default_rng(cfg.seed)
    closure = fd.Isothermal(cfg.sound_speed)
    rho = fd.random_scalar(grid, rng, amplitude=0.05, mean=1.0)
    v = fd.random_solenoidal(grid, rng, amplitude=0.1)
    a = np.concatenate([rho[None], v])

    def rhs(a):
        d_rho, d_v = fd.fluid_rhs(grid, fd.FluidState(a[0], a[1:]), closure)
        return np.concatenate([d_rho[None], d_v])

    rows = []
    for n in range(cfg.steps + 1):
        if n:
            a = it.step_rk4(rhs, a, cfg.dt)
        u = fd.FluidState(a[0], a[1:])
        rows.append((n * cfg.dt, fd.fluid_energy(grid, u, closure), fd.fluid_helicity(grid, u.v), fd.total_mass(grid, u.rho)))
    csv_path, _ = _paths(cfg)
    write_table(csv_path, DIAGNOSTIC_COLUMNS, rows)
    fd.write_snapshot(Path(cfg.out + "_state"), grid, {"rho": a[0], "v": a[1:]}, rows[-1][0])
    return {
        "mass_drift": _series_drift([r[3] for r in rows]),
        "energy_drift": _series_drift([r[1] for r in rows]),
        "min_density": float(np.min(a[0])),
    }


def clebsch_test_data(grid: fd.Grid3) -> fd.ClebschFields:
    """Smooth, moderate-amplitude Clebsch potentials used by the consistency experiment."""
    X, Y, Z = grid.X
    return fd.ClebschFields.build(
        grid,
        varrho=1.0 + 0.02 * np.cos(X),
        alpha1=0.1 * np.sin(Y),
        alpha2=0.1 * np.cos(X),
        phi=0.05 * np.sin(Z),
        beta1=0.5 * np.sin(Z),
        beta2=0.5 * np.cos(Y),
    )


def clebsch_fluid_errors(grid: fd.Grid3, c: fd.ClebschFields, dt: float, steps: int, closure) -> np.ndarray:
    """Per-step sup-norm gaps ``(rho, v)`` between Clebsch and direct fluid evolution."""

    def fluid(a):
        d_rho, d_v = fd.fluid_rhs(grid, fd.FluidState(a[0], a[1:]), closure)
        return np.concatenate([d_rho[None], d_v])

    def potentials(p):
        return fd.clebsch_rhs(grid, fd.ClebschFields.unpack(p), closure).pack()

    u = fd.fluid_from_clebsch(grid, c)
    a = np.concatenate([u.rho[None], u.v])
    p = c.pack()
    errs = np.zeros((steps + 1, 2))
    for n in range(1, steps + 1):
        a = it.step_rk4(fluid, a, dt)
        p = it.step_rk4(potentials, p, dt)
        w = fd.fluid_from_clebsch(grid, fd.ClebschFields.unpack(p))
        errs[n] = np.max(np.abs(w.rho - a[0])), np.max(np.abs(w.v - a[1:]))
    return errs


def run_clebsch_fluid(cfg: RunConfig) -> dict:
    grid = fd.Grid3(cfg.grid_n)
    errs = clebsch_fluid_errors(grid, clebsch_test_data(grid), cfg.dt, cfg.steps, fd.Isothermal(cfg.sound_speed))
    csv_path, _ = _paths(cfg)
    write_table(csv_path, ["step", "time", "err_rho", "err_v"], [(n, n * cfg.dt, *e) for n, e in enumerate(errs)])
    return {"max_err_rho": float(np.max(errs[:, 0])), "max_err_v": float(np.max(errs[:, 1]))}


def run_nls(cfg: RunConfig) -> dict:
    grid = fd.Grid3(cfg.grid_n)
    closure = fd.Polytropic(cfg.g)
    Psi = md.smooth_spinor(grid, cfg.components, cfg.hbar)
    rows = []
    worst_step = 0.0
    for n in range(cfg.steps + 1):
        if n:
            before = Psi.norm(grid)
            Psi = md.nls_step(grid, Psi, cfg.dt, closure)
            worst_step = max(worst_step, abs(Psi.norm(grid) - before) / before)
        c = md.clebsch_from_madelung(md.madelung_decompose(Psi))
        norm, energy = Psi.norm(grid), md.nls_energy(grid, Psi, closure)
        v = md.momentum_density(grid, Psi)
        rows.append((n * cfg.dt, energy, fd.fluid_helicity(grid, v), norm, norm, energy, md.helicity_clebsch(grid, c)))
    csv_path, _ = _paths(cfg)
    write_table(csv_path, [*DIAGNOSTIC_COLUMNS, "norm", "H_q", "helicity_clebsch"], rows)
    md.write_spinor_snapshot(Path(cfg.out + "_psi"), grid, Psi, rows[-1][0])
    return {"max_norm_drift_per_step": worst_step, "H_q_drift": _series_drift([r[1] for r in rows])}


def run_correspondence(cfg: RunConfig) -> dict:
    grid = fd.Grid3(cfg.grid_n)
    closure = fd.Polytropic(cfg.g)
    rows = []
    for n in (1, 2, 3):
        Psi = md.smooth_spinor(grid, n, cfg.hbar)
        c = md.clebsch_from_madelung(md.madelung_decompose(Psi))
        mom = float(np.max(np.abs(md.momentum_density(grid, Psi) - fd.clebsch_velocity(grid, c))))
        E = md.quantum_hamiltonian(grid, Psi, closure)
        rows.append((n, mom, abs(E.operator - E.madelung) / abs(E.operator)))
    slope, _ = md.hbar_scaling(grid, md.classical_limit_data(grid), [1.0, 0.5, 0.25], closure)
    small = fd.Grid3(8)
    Psi8 = md.smooth_spinor(small, 2, cfg.hbar)
    bracket, same = md.ccr_matrices(small, Psi8)
    ccr = float(max(np.max(np.abs(bracket - md.ccr_expected(small, 2, cfg.hbar))), np.max(np.abs(same))))
    track = md.track_classical(grid, md.classical_limit_data(grid), 2, cfg.hbar, cfg.dt, cfg.steps, cfg.g)
    csv_path, _ = _paths(cfg)
    write_table(csv_path, ["components", "momentum_mismatch", "hamiltonian_mismatch"], rows)
    return {
        "momentum_mismatch": max(r[1] for r in rows),
        "hamiltonian_mismatch": max(r[2] for r in rows),
        "hbar_slope": slope,
        "ccr_residual": ccr,
        "classical_divergence": float(track[-1]),
        "classical_divergence_over_hbar2": float(track[-1] / cfg.hbar**2),
    }


RUNNERS = {
    "euler-top": run_euler_top,
    "bracket-check": run_bracket_check,
    "reduce-check": run_reduce_check,
    "vortex": run_vortex,
    "fluid": run_fluid,
    "clebsch-fluid": run_clebsch_fluid,
    "nls": run_nls,
    "correspondence": run_correspondence,
}


def run(cfg: RunConfig) -> dict:
    summary = RUNNERS[cfg.experiment](cfg)
    _, json_path = _paths(cfg)
    write_report(json_path, cfg, summary)
    return summary


# --------------------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nambu", description="Run Lie-Poisson and Clebsch experiments.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value or JSON config file")
    common.add_argument("--out", help="output path prefix (default: experiment name)")
    common.add_argument("--seed", type=int)
    common.add_argument("--dt", type=float)
    common.add_argument("--steps", type=int)
    common.add_argument("--grid-n", type=int, dest="grid_n")
    common.add_argument("--hbar", type=float)
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        sub.add_parser(name, parents=[common])
    return parser


def _error(kind: str, exc: Exception, code: int) -> int:
    print(json.dumps({"error": kind, "type": type(exc).__name__, "message": str(exc)}, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    flags = {k: getattr(args, k) for k in ("out", "seed", "dt", "steps", "grid_n", "hbar")}
    try:
        file_values = read_config_file(args.config) if args.config else {}
        cfg = parse_config(args.experiment, file_values, flags)
    except ConfigError as exc:
        return _error("config", exc, EXIT_CONFIG)
    try:
        summary = run(cfg)
    except ConfigError as exc:
        return _error("config", exc, EXIT_CONFIG)
    except (NambuError, FloatingPointError) as exc:
        return _error("numerical", exc, EXIT_NUMERICAL)
    print(summary_line(cfg.experiment, summary))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
