import json
import math
import os

import numpy as np
import pytest

from conftest import DATA
from magenergy import magnetostatics as ms
from magenergy.energy import image_energy, self_energy
from magenergy.errors import RegionError
from magenergy.model import CylindricalBesselCosine, ProbeGeometry, SphericalBessel
from magenergy.oracle import (
    SCHEME_MC,
    SCHEME_NESTED,
    SCHEME_TGL,
    QuadratureSpec,
    StencilShiftWarning,
    fd_vector_calculus,
    image_energy_mc,
    image_energy_tgl,
    oracle_d_mag_zeta,
    oracle_energy,
    oracle_image_moment_mc,
    oracle_vector_potential,
)
from magenergy.verification import package_value

SPH = SphericalBessel.normalized(0.25e-9)
G1 = ProbeGeometry(d=1e-9, mu_r2=0.0)


def test_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(scheme="simpson")
    with pytest.raises(ValueError):
        QuadratureSpec(points=1)
    with pytest.raises(ValueError):
        QuadratureSpec(seed=-1)


def test_zero_contrast_has_no_image_energy():
    res = oracle_energy(SPH, ProbeGeometry(d=1e-9, mu_r2=1.0), spec=QuadratureSpec(points=8), include_self=False)
    assert res.image_energy.value == 0.0
    mc = image_energy_mc(SPH, ProbeGeometry(d=1e-9, mu_r2=1.0), QuadratureSpec(SCHEME_MC, samples=1000))
    assert mc.value == 0.0


def test_image_energy_tgl_matches_closed_form():
    res = oracle_energy(SPH, G1, spec=QuadratureSpec(points=12), include_self=False)
    assert res.image_energy.value == pytest.approx(float(image_energy(G1)), rel=1e-4)


def test_nested_scheme_converges():
    res = oracle_energy(SPH, G1.replace(eta=0.6), spec=QuadratureSpec(SCHEME_NESTED, points=6, tolerance=1e-8))
    assert res.image_energy.converged and res.self_energy.converged
    assert res.image_energy.value == pytest.approx(float(image_energy(G1.replace(eta=0.6))), rel=1e-6)
    assert res.self_energy.value == pytest.approx(self_energy(SPH, G1), rel=1e-6)
    assert res.total == res.self_energy.value + res.image_energy.value


def test_angular_sweep_fits_law():
    etas = np.array([0.0, math.pi / 4, math.pi / 2])
    vals = np.array([image_energy_tgl(SPH, G1, 10, eta=e) for e in etas])
    A = np.stack([np.ones(3), np.cos(2 * etas)], axis=1)
    coef, *_ = np.linalg.lstsq(A, vals, rcond=None)
    assert np.max(np.abs(A @ coef - vals)) <= 1e-3 * np.abs(vals).max()
    assert coef[0] / coef[1] == pytest.approx(3.0, rel=1e-6)


def test_two_schemes_agree():
    g = G1.replace(eta=0.7)
    tgl = image_energy_tgl(SPH, g, 12)
    mc = image_energy_mc(SPH, g, QuadratureSpec(SCHEME_MC, samples=200_000, seed=7))
    assert abs(mc.value - tgl) <= 4 * mc.error


def test_monte_carlo_bit_reproducible():
    spec = QuadratureSpec(SCHEME_MC, samples=50_000, seed=99, block_size=4096)
    a = image_energy_mc(SPH, G1, spec)
    b = image_energy_mc(SPH, G1, spec)
    assert a.value == b.value and a.error == b.error


def test_monte_carlo_blocks_are_independent_streams():
    # the first block of a longer run equals a run of one block
    short = image_energy_mc(SPH, G1, QuadratureSpec(SCHEME_MC, samples=4096, seed=5, block_size=4096))
    long = image_energy_mc(SPH, G1, QuadratureSpec(SCHEME_MC, samples=8192, seed=5, block_size=4096))
    other = image_energy_mc(SPH, G1, QuadratureSpec(SCHEME_MC, samples=4096, seed=6, block_size=4096))
    assert short.value != other.value
    assert long.value != short.value


def test_monte_carlo_error_is_honest():
    exact = float(image_energy(G1))
    errs, devs = [], []
    for n in (20_000, 80_000):
        r = image_energy_mc(SPH, G1, QuadratureSpec(SCHEME_MC, samples=n, seed=3))
        errs.append(r.error)
        devs.append(abs(r.value - exact))
        assert devs[-1] <= 4 * r.error
    # quadrupling the samples halves the reported error
    assert errs[1] / errs[0] == pytest.approx(0.5, rel=0.15)


def test_deterministic_error_is_honest():
    exact = float(image_energy(G1))
    for n in (4, 6, 8):
        res = oracle_energy(SPH, G1, spec=QuadratureSpec(points=n), include_self=False).image_energy
        assert abs(res.value - exact) <= 3 * res.error


def test_vector_potential_inside_support():
    rng = np.random.default_rng(8)
    g = ProbeGeometry(d=1e-9, mu_r2=0.0, eta=0.9)
    pts = []
    while len(pts) < 20:
        p = rng.uniform(-0.25e-9, 0.25e-9, 3)
        if np.linalg.norm(p) < 0.24e-9:
            pts.append(p)
    x = np.array(pts)
    a = oracle_vector_potential(SPH, g, x, QuadratureSpec(points=16), part="direct")
    b = ms.vector_potential_cartesian(SPH, g, x)
    assert np.all(np.linalg.norm(a - b, axis=1) <= 1e-5 * np.linalg.norm(b, axis=1))


def test_image_potential_at_region_one_points():
    rng = np.random.default_rng(9)
    g = ProbeGeometry(d=1e-9, mu_r2=0.0, eta=1.9)
    x = rng.uniform(-0.8e-9, 0.8e-9, (20, 3))
    a = oracle_vector_potential(SPH, g, x, QuadratureSpec(points=16), part="image")
    b = ms.image_vector_potential_cartesian(SPH, g, x)
    assert np.all(np.linalg.norm(a - b, axis=1) <= 1e-5 * np.linalg.norm(b, axis=1))


def test_far_field_potential_is_dipole():
    g = ProbeGeometry(d=1.0, mu_r2=1.0, eta=0.4)
    x = np.array([[5e-9, -3e-9, 4e-9]])
    a = oracle_vector_potential(SPH, g, x, QuadratureSpec(points=12), part="direct")[0]
    m = ms.spin_moment(g)
    r = np.linalg.norm(x[0])
    dip = 1e-7 * 4 * math.pi / (4 * math.pi) * np.cross(m, x[0]) / r**3
    assert np.linalg.norm(a - dip) <= 1e-6 * np.linalg.norm(dip)


def test_fd_constant_field():
    res = fd_vector_calculus(lambda p: np.array([1.0, -2.0, 3.0]), np.zeros(3), 1e-3)
    assert np.all(res.curl == 0.0) and res.divergence == 0.0


def test_fd_linear_field():
    M = np.array([[0.0, 2.0, 0.0], [-1.0, 0.5, 0.0], [0.0, 0.0, 3.0]])
    res = fd_vector_calculus(lambda p: M @ p, np.array([0.1, 0.2, 0.3]), 1e-2)
    np.testing.assert_allclose(res.curl, [0.0, 0.0, -3.0], atol=1e-12)
    assert res.divergence == pytest.approx(3.5)


def test_fd_coulomb_gauge():
    g = ProbeGeometry(d=1e-9, mu_r2=0.0, eta=0.8)
    x = np.array([0.1e-9, 0.05e-9, -0.08e-9])
    res = fd_vector_calculus(lambda p: ms.vector_potential_cartesian(SPH, g, p[None])[0], x, 1e-12)
    assert abs(res.divergence) <= max(10 * res.divergence_error, 1e-9 * np.linalg.norm(res.curl) * 1e-9)


def test_fd_shifts_stencil_at_interface():
    g = ProbeGeometry(d=1e-9, mu_r2=0.0)
    x = np.array([0.3e-9, 0.0, 1e-9 - 5e-13])
    with pytest.warns(StencilShiftWarning):
        res = fd_vector_calculus(lambda p: ms.total_vector_potential_cartesian(SPH, g, p[None])[0], x, 1e-12)
    assert 2 in res.shifted_axes
    b = ms.magnetic_induction(SPH, g, x[None])[0]
    assert np.linalg.norm(res.curl - b) <= 1e-5 * np.linalg.norm(b)


def test_fd_region_callback_triggers_shift():
    def region(p):
        return "support" if np.linalg.norm(p) <= 0.25e-9 else "I"

    x = np.array([0.25e-9 - 4e-13, 0.0, 0.0])
    g = ProbeGeometry(d=1e-9, mu_r2=0.0)
    with pytest.warns(StencilShiftWarning):
        fd_vector_calculus(lambda p: ms.magnetic_induction(SPH, g, p[None])[0], x, 1e-12, region=region)
    with pytest.raises(RegionError):
        fd_vector_calculus(lambda p: (_ for _ in ()).throw(RegionError("no")), x, 1e-12)


def test_zeta_route_matches_tensor_manifest():
    with open(os.path.join(DATA, "oracle_manifest.json")) as fh:
        entry = next(e for e in json.load(fh)["entries"] if e["kind"] == "d_mag_cylindrical")
    p = CylindricalBesselCosine.normalized(entry["profile"]["R_m"], entry["profile"]["H_m"])
    z = oracle_d_mag_zeta(p, ProbeGeometry(d=entry["geometry"]["d_m"], mu_r2=0.0), n=24)
    assert z.value_hz == pytest.approx(entry["expected"], rel=1e-6)


def test_image_moment_mc_rejects_spherical():
    with pytest.raises(Exception):
        oracle_image_moment_mc(SPH, G1, 2, QuadratureSpec(SCHEME_MC, samples=100))


def test_regression_manifest():
    with open(os.path.join(DATA, "oracle_manifest.json")) as fh:
        doc = json.load(fh)
    assert len(doc["entries"]) >= 7
    for e in doc["entries"]:
        assert {"geometry", "scheme", "seed", "expected", "tolerance"} <= set(e)
        assert e["scheme"] in (SCHEME_TGL, SCHEME_MC)
        if e["scheme"] == SCHEME_MC:
            assert isinstance(e["seed"], int)
        v = package_value(e)
        assert abs(v - e["expected"]) <= e["tolerance"] * abs(e["expected"]), e["name"]
