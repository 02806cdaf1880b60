import json

import numpy as np
import pytest

from nambu import field as fd
from nambu.errors import DensityUnderflowError, DimensionError, FieldConstraintError
from nambu.integrate import step_rk4


def _conv(grid, ah, bh):
    """Circular convolution of two spectra, normalized like the FFT of a pointwise product."""
    N = grid.N
    out = np.zeros(np.broadcast(ah, bh).shape, dtype=complex)
    for p in np.ndindex(N, N, N):
        shifted = np.roll(bh, shift=p, axis=(-3, -2, -1))  # b_{k - p}
        out += ah[(...,) + p][..., None, None, None] * shifted
    return out / N**3


def test_grid_rejects_bad_size():
    with pytest.raises(ValueError):
        fd.Grid3(7)
    with pytest.raises(ValueError):
        fd.Grid3(4)


def test_curl_examples(grid16):
    x = grid16.X[0]
    z = np.zeros_like(x)
    assert np.allclose(fd.curl(grid16, fd.beltrami(grid16)), fd.beltrami(grid16), atol=1e-13)
    phi = np.sin(x) * np.cos(2 * grid16.X[1]) + np.cos(grid16.X[2])
    assert np.allclose(fd.curl(grid16, grid16.grad(phi)), 0, atol=1e-13)
    assert np.allclose(fd.curl(grid16, np.stack([z, np.sin(x), z])), np.stack([z, z, np.cos(x)]), atol=1e-13)


def test_curl_rejects_wrong_shape(grid8):
    with pytest.raises(DimensionError):
        fd.curl(grid8, np.zeros((2, 8, 8, 8)))


def test_inv_curl_examples(grid16):
    x = grid16.X[0]
    z = np.zeros_like(x)
    assert np.allclose(fd.inv_curl(grid16, np.stack([z, z, np.cos(x)])), np.stack([z, np.sin(x), z]), atol=1e-13)
    assert np.allclose(fd.inv_curl(grid16, fd.beltrami(grid16)), fd.beltrami(grid16), atol=1e-13)
    assert not np.any(fd.inv_curl(grid16, np.zeros((3, 16, 16, 16))))


def test_inv_curl_rejects_invalid_vorticity(grid8):
    x = grid8.X[0]
    z = np.zeros_like(x)
    with pytest.raises(FieldConstraintError):
        fd.inv_curl(grid8, np.stack([np.sin(x), z, z]))
    with pytest.raises(FieldConstraintError):
        fd.inv_curl(grid8, np.stack([z + 1.0, z, z]))


def test_curl_inverse_and_self_adjointness(grid16, rng):
    w1 = fd.curl(grid16, fd.random_solenoidal(grid16, rng, kmax=4))
    w2 = fd.curl(grid16, fd.random_solenoidal(grid16, rng, kmax=4))
    assert np.max(np.abs(fd.curl(grid16, fd.inv_curl(grid16, w1)) - w1)) <= 1e-12
    lhs = grid16.inner(fd.inv_curl(grid16, w1), w2)
    rhs = grid16.inner(w1, fd.inv_curl(grid16, w2))
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def test_vortex_rhs_examples(grid16):
    assert np.max(np.abs(fd.vortex_rhs(grid16, fd.beltrami(grid16)))) <= 1e-12
    assert not np.any(fd.vortex_rhs(grid16, np.zeros((3, 16, 16, 16))))


def test_vortex_rhs_matches_convolution_oracle(grid8, rng):
    g = grid8
    omega = fd.curl(g, fd.random_solenoidal(g, rng, kmax=2))
    wh = g.fft(omega) * g.mask
    k2 = np.where(g.kd2 == 0, 1.0, g.kd2)
    vh = 1j * np.cross(g.kd, wh, axis=0) / k2
    prod = np.stack(
        [
            _conv(g, vh[1], wh[2]) - _conv(g, vh[2], wh[1]),
            _conv(g, vh[2], wh[0]) - _conv(g, vh[0], wh[2]),
            _conv(g, vh[0], wh[1]) - _conv(g, vh[1], wh[0]),
        ]
    )
    expected = g.ifft(1j * np.cross(g.kd, prod * g.mask, axis=0))
    assert np.max(np.abs(fd.vortex_rhs(g, omega) - expected)) <= 1e-12


def test_fluid_rhs_matches_convolution_oracle(grid8, rng):
    g = grid8
    closure = fd.Polytropic(0.7)
    rho = fd.random_scalar(g, rng, kmax=1, amplitude=0.1, mean=1.0)
    v = fd.random_solenoidal(g, rng, kmax=1) + grid8.grad(np.sin(grid8.X[0]))
    rh, vh = g.fft(rho), g.fft(v)
    drho = -1j * np.sum(g.kd * np.stack([_conv(g, rh, vh[i]) for i in range(3)]) * g.mask, axis=0)
    adv = np.stack([sum(_conv(g, vh[j], 1j * g.kd[j] * vh[i]) for j in range(3)) for i in range(3)])
    dv = -adv * g.mask - 1j * g.kd * (0.7 * rh * g.mask)
    got_rho, got_v = fd.fluid_rhs(g, fd.FluidState(rho, v), closure)
    assert np.max(np.abs(got_rho - g.ifft(drho))) <= 1e-12
    assert np.max(np.abs(got_v - g.ifft(dv))) <= 1e-12


def test_helicity_and_energy_examples(grid16):
    b = fd.beltrami(grid16)
    assert fd.helicity(grid16, b) == pytest.approx(4 * np.pi**3, abs=1e-10)
    assert fd.kinetic_energy(grid16, b) == pytest.approx(4 * np.pi**3, abs=1e-10)
    x = grid16.X[0]
    z = np.zeros_like(x)
    assert fd.helicity(grid16, np.stack([z, z, np.cos(x)])) == pytest.approx(0, abs=1e-12)
    assert fd.helicity(grid16, np.zeros_like(b)) == 0.0
    assert fd.kinetic_energy(grid16, 2 * b) == pytest.approx(4 * fd.kinetic_energy(grid16, b))


def test_vortex_conservation(grid16):
    omega = fd.curl(grid16, fd.random_solenoidal(grid16, np.random.default_rng(0)))
    dt = fd.vortex_cfl_dt(grid16, omega)
    h0, e0 = fd.helicity(grid16, omega), fd.kinetic_energy(grid16, omega)
    for _ in range(100):
        omega = step_rk4(lambda w: fd.vortex_rhs(grid16, w, check=False), omega, dt)
    assert abs(fd.helicity(grid16, omega) - h0) / abs(h0) <= 1e-6
    assert abs(fd.kinetic_energy(grid16, omega) - e0) / e0 <= 1e-6


def test_fluid_rhs_examples(grid16):
    one = np.ones((16, 16, 16))
    d_rho, d_v = fd.fluid_rhs(grid16, fd.FluidState(one, np.zeros((3, 16, 16, 16))))
    assert not np.any(d_rho) and not np.any(d_v)
    x = grid16.X[0]
    c = np.array([0.3, -0.2, 0.5])
    v = np.broadcast_to(c[:, None, None, None], (3, 16, 16, 16)).copy()
    d_rho, _ = fd.fluid_rhs(grid16, fd.FluidState(1 + 0.1 * np.sin(x), v))
    assert np.allclose(d_rho, -0.3 * 0.1 * np.cos(x), atol=1e-13)


def test_fluid_rhs_rejects_low_density(grid8):
    with pytest.raises(DensityUnderflowError):
        fd.fluid_rhs(grid8, fd.FluidState(np.zeros((8, 8, 8)), np.zeros((3, 8, 8, 8))))


def test_fluid_poisson_apply_examples(grid16, rng):
    rho = fd.random_scalar(grid16, rng, amplitude=0.1, mean=1.0)
    v = fd.random_solenoidal(grid16, rng, amplitude=0.3)
    u = fd.FluidState(rho, v)
    zero = fd.fluid_poisson_apply(grid16, u, (np.zeros_like(rho), np.zeros_like(v)))
    assert not np.any(zero[0]) and not np.any(zero[1])
    for closure in (fd.Isothermal(), fd.Polytropic(2.0)):
        ham = fd.fluid_poisson_apply(grid16, u, fd.fluid_energy_gradient(u, closure))
        direct = fd.fluid_rhs(grid16, u, closure)
        assert np.max(np.abs(ham[0] - direct[0])) <= 1e-12
        assert np.max(np.abs(ham[1] - direct[1])) <= 1e-12
    pot = grid16.grad(np.sin(grid16.X[1]))
    f_rho, f_v = fd.random_scalar(grid16, rng), fd.random_solenoidal(grid16, rng)
    out = fd.fluid_poisson_apply(grid16, fd.FluidState(rho, pot), (f_rho, f_v))
    assert np.allclose(out[0], -grid16.div(grid16.dealias(f_v)), atol=1e-12)
    assert np.allclose(out[1], -grid16.grad(grid16.dealias(f_rho)), atol=1e-12)


def test_fluid_conserves_mass_and_energy(grid16, rng):
    closure = fd.Isothermal()
    a = fd.FluidState(fd.random_scalar(grid16, rng, amplitude=0.05, mean=1.0), fd.random_solenoidal(grid16, rng, amplitude=0.1)).pack()

    def rhs(a):
        return np.concatenate([x if x.ndim == 4 else x[None] for x in fd.fluid_rhs(grid16, fd.FluidState.unpack(a), closure)])

    m0 = fd.total_mass(grid16, a[0])
    e0 = fd.fluid_energy(grid16, fd.FluidState.unpack(a), closure)
    for _ in range(20):
        a = step_rk4(rhs, a, 1e-2)
    assert fd.total_mass(grid16, a[0]) == pytest.approx(m0, rel=1e-13)
    assert fd.fluid_energy(grid16, fd.FluidState.unpack(a), closure) == pytest.approx(e0, rel=1e-8)


def test_clebsch_velocity_examples(grid16):
    X, Y, Z = grid16.X
    phi = np.sin(X) + np.cos(2 * Z)
    c = fd.ClebschFields.build(grid16, phi=phi)
    assert np.allclose(fd.clebsch_velocity(grid16, c), grid16.grad(phi), atol=1e-14)
    c = fd.ClebschFields.build(grid16, alpha1=np.cos(Z), beta1=np.sin(X))
    assert np.allclose(fd.clebsch_velocity(grid16, c), np.cos(Z) * grid16.grad(np.sin(X)), atol=1e-14)
    c = fd.ClebschFields.build(grid16, alpha1=1.0, beta1=np.sin(Y))
    expected = np.stack([0 * Y, np.cos(Y), 0 * Y])
    assert np.allclose(fd.clebsch_velocity(grid16, c), expected, atol=1e-13)


def test_clebsch_vorticity_matches_curl(grid16):
    c = _clebsch_data(grid16)
    w = fd.clebsch_vorticity(grid16, c)
    assert np.max(np.abs(grid16.curl(fd.clebsch_velocity(grid16, c)) - w)) <= 1e-12


def _clebsch_data(grid):
    X, Y, Z = grid.X
    return fd.ClebschFields.build(
        grid,
        varrho=1 + 0.02 * np.cos(X),
        alpha1=0.1 * np.sin(Y),
        alpha2=0.1 * np.cos(X),
        phi=0.05 * np.sin(Z),
        beta1=0.5 * np.sin(Z),
        beta2=0.5 * np.cos(Y),
    )


def test_clebsch_rhs_static_equilibrium(grid16):
    c = fd.ClebschFields.build(grid16, varrho=2.0)
    d = fd.clebsch_rhs(grid16, c, h=fd.Isothermal(1.0))
    assert np.allclose(d.phi, -np.log(2.0), atol=1e-14)
    for name in ("varrho", "alpha1", "alpha2", "beta1", "beta2"):
        assert not np.any(getattr(d, name))


def test_clebsch_rhs_hamilton_jacobi_pair(grid16):
    X = grid16.X[0]
    c = fd.ClebschFields.build(grid16, varrho=1 + 0.1 * np.cos(X), phi=0.1 * np.sin(X))
    d = fd.clebsch_rhs(grid16, c, fd.Polytropic(1.0))
    v = grid16.grad(c.phi)
    expected = -grid16.dealias(0.5 * np.sum(v * v, axis=0) + c.varrho)
    assert np.allclose(d.phi, expected, atol=1e-13)


def test_clebsch_rhs_incompressible_subsystem_is_lie_dragged(grid16):
    c = _clebsch_data(grid16)
    d = fd.clebsch_rhs(grid16, c, freeze=("varrho", "phi"))
    v = fd.clebsch_velocity(grid16, c)
    assert not np.any(d.varrho) and not np.any(d.phi)
    assert np.allclose(d.beta1, -grid16.dealias(np.sum(v * grid16.grad(c.beta1), axis=0)), atol=1e-14)
    assert np.allclose(d.alpha1, -grid16.div(grid16.dealias(c.alpha1 * v)), atol=1e-14)


def test_clebsch_induced_rates_match_fluid(grid16):
    c = _clebsch_data(grid16)
    d_rho, d_v = fd.clebsch_induced_rates(grid16, c)
    f_rho, f_v = fd.fluid_rhs(grid16, fd.fluid_from_clebsch(grid16, c))
    assert np.max(np.abs(d_rho - f_rho)) <= 1e-9
    assert np.max(np.abs(d_v - f_v)) <= 1e-8


def test_clebsch_pack_roundtrip(grid8):
    c = fd.ClebschFields.build(grid8, varrho=2.0, beta2=np.sin(grid8.X[0]))
    back = fd.ClebschFields.unpack(c.pack())
    for name in fd.CLEBSCH_NAMES:
        assert np.array_equal(getattr(back, name), getattr(c, name))


def test_snapshot_roundtrip_and_layout(tmp_path, grid8, rng):
    v = fd.random_solenoidal(grid8, rng)
    rho = fd.random_scalar(grid8, rng, mean=2.0)
    names = fd.write_snapshot(tmp_path / "snap", grid8, {"rho": rho, "v": v}, 1.5, {"note": "x"})
    assert names == ["rho", "v_x", "v_y", "v_z"]
    meta, fields = fd.read_snapshot(tmp_path / "snap")
    assert meta["time"] == 1.5 and meta["note"] == "x"
    assert np.array_equal(fields["rho"], rho) and np.array_equal(fields["v_y"], v[1])
    raw = np.fromfile(tmp_path / "snap.bin", dtype="<f8")
    assert raw[1] == rho[1, 0, 0]  # x index varies fastest
    assert json.loads((tmp_path / "snap.json").read_text())["order"] == "x-fastest"


def test_closures():
    rho = np.array([0.5, 1.0, 2.0])
    iso = fd.Isothermal(2.0)
    assert np.allclose(iso.h(rho), 4 * np.log(rho))
    # h = d(rho eps)/d rho for both closures
    for cl in (iso, fd.Polytropic(1.5)):
        d = 1e-6
        num = ((rho + d) * cl.eps(rho + d) - (rho - d) * cl.eps(rho - d)) / (2 * d)
        assert np.allclose(num, cl.h(rho), atol=1e-8)
