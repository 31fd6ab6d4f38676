import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from magenergy.energy import (
    classical_energy,
    d_mag_spherical,
    d_mag_spherical_from_profile,
    h_mag_expectation,
    image_energy,
    image_energy_coefficient,
    image_energy_force,
    nv_superposition_energy,
    self_energy,
)
from magenergy.errors import InvalidGeometryError, WrongProfileKindError
from magenergy.model import CustomRadial, CylindricalBesselCosine, ProbeGeometry, SphericalBessel, normalize_profile
from magenergy.oracle import self_energy_tgl

NEV = 1.602176634e-28
SPH = SphericalBessel.normalized(0.25e-9)


def spin_matrices(J):
    m = np.arange(J, -J - 1, -1)
    jp = np.diag(np.sqrt(J * (J + 1) - m[1:] * (m[1:] + 1)), 1)
    jx = 0.5 * (jp + jp.T)
    jy = -0.5j * (jp - jp.T)
    return jx, jy, np.diag(m)


def coherent_state(J, eta):
    """|J, J> rotated by eta about y."""
    from scipy.linalg import expm

    _, jy, _ = spin_matrices(J)
    psi = np.zeros(int(round(2 * J)) + 1, dtype=complex)
    psi[0] = 1.0
    return expm(-1j * eta * jy) @ psi


def quantum_image_energy(geom, J, eta):
    """<psi| C (Jx^2 + Jy^2 + 2 Jz^2) |psi>, the operator whose classical limit is C J^2 (3 + cos 2 eta) / 2."""
    jx, jy, jz = spin_matrices(J)
    psi = coherent_state(J, eta)
    op = jx @ jx + jy @ jy + 2 * jz @ jz
    return 2 * image_energy_coefficient(geom) * float(np.real(np.conj(psi) @ op @ psi))


def test_superconductor_d_mag_at_1nm():
    d = d_mag_spherical(ProbeGeometry(d=1e-9, mu_r2=0.0)).value_hz
    assert d == pytest.approx(-3.245e6, rel=1e-3)


def test_d_mag_sign_follows_contrast():
    assert d_mag_spherical(ProbeGeometry(d=1e-9, mu_r2=2.0)).value_hz > 0
    assert d_mag_spherical(ProbeGeometry(d=1e-9, mu_r2=1.0)).value_hz == 0.0


def test_angular_variation_at_1nm():
    g = ProbeGeometry(d=1e-9, mu_r2=0.0)
    dE = abs(float(image_energy(g, eta=math.pi / 2) - image_energy(g, eta=0.0)))
    assert dE == pytest.approx(2.15e-27, rel=2e-3)
    assert dE / NEV == pytest.approx(13.4, rel=2e-3)


def test_force_magnitude_and_direction():
    g = ProbeGeometry(d=1e-9, mu_r2=0.0)
    assert image_energy_force(SPH, g) == pytest.approx(-12.9e-18, rel=2e-3)
    assert image_energy_force(SPH, g.replace(eta=math.pi / 2)) == pytest.approx(-6.45e-18, rel=2e-3)
    assert image_energy_force(SPH, g.replace(mu_r2=1e6)) > 0


def test_force_is_minus_energy_gradient():
    g = ProbeGeometry(d=2e-9, mu_r2=0.3, eta=0.9)
    h = 1e-15
    dE = (float(image_energy(g.replace(d=g.d + h))) - float(image_energy(g.replace(d=g.d - h)))) / (2 * h)
    assert image_energy_force(SPH, g) == pytest.approx(-dE, rel=1e-6)


def test_image_energy_angular_law_values():
    g = ProbeGeometry(d=1e-9, mu_r2=0.0)
    c = image_energy_coefficient(g)
    assert float(image_energy(g, eta=0.0)) == pytest.approx(4 * c)
    assert float(image_energy(g, eta=math.pi / 2)) == pytest.approx(2 * c)


def test_self_energy_matches_tensor_quadrature():
    g = ProbeGeometry(d=1e-9, mu_r2=0.0, eta=0.3)
    assert self_energy_tgl(SPH, g, 12) == pytest.approx(self_energy(SPH, g), rel=1e-8)


def test_self_energy_diverges_as_profile_shrinks():
    g = ProbeGeometry(d=1e-9)
    e1 = self_energy(SphericalBessel.normalized(0.2e-9), g)
    e2 = self_energy(SphericalBessel.normalized(0.1e-9), g)
    assert e2 / e1 == pytest.approx(8.0, rel=1e-9)


def test_classical_energy_breakdown():
    g = ProbeGeometry(d=1e-9, mu_r2=0.0, eta=0.4)
    br = classical_energy(SPH, g)
    assert br.total == br.self_energy + br.image_energy
    assert br.self_energy_regularization_dependent
    with pytest.raises(WrongProfileKindError):
        classical_energy(CylindricalBesselCosine.normalized(0.2e-9, 0.2e-9), g)
    with pytest.raises(InvalidGeometryError):
        classical_energy(SphericalBessel.normalized(1e-9), g)


def test_profile_independence():
    g = ProbeGeometry(d=1e-9, mu_r2=0.0)
    ref = d_mag_spherical(g).value_hz
    r = np.linspace(0, 0.3e-9, 301)
    poly = normalize_profile(CustomRadial(r, (1 - (r / 0.3e-9) ** 2) ** 2))
    for p in (SPH, SphericalBessel.normalized(0.5e-9), poly):
        assert d_mag_spherical_from_profile(p, g).value_hz == pytest.approx(ref, rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-9, 1e-7), st.floats(0.0, 10.0))
def test_d_mag_scales_as_inverse_cube(d, mu):
    a = d_mag_spherical(ProbeGeometry(d=d, mu_r2=mu)).value_hz
    b = d_mag_spherical(ProbeGeometry(d=2 * d, mu_r2=mu)).value_hz
    assert b == pytest.approx(a / 8, rel=1e-13, abs=1e-300)


def test_nv_superposition_energy_matches_angular_law():
    for eta in np.linspace(0, math.pi, 9):
        assert nv_superposition_energy(1.0, eta) == pytest.approx((3 + math.cos(2 * eta)) / 4, abs=1e-15)


def test_half_spin_has_no_angular_dependence():
    g = ProbeGeometry(d=1e-9, mu_r2=0.0, J=0.5)
    vals = [h_mag_expectation(SPH, g, eta=e, include_self=False) for e in np.linspace(0, math.pi, 7)]
    assert np.ptp(vals) == 0.0
    q = [quantum_image_energy(g, 0.5, e) for e in np.linspace(0, math.pi, 7)]
    assert np.ptp(q) <= 1e-15 * abs(q[0])


@pytest.mark.parametrize("J", [1, 1.5, 2, 5])
def test_expectation_angular_part_matches_spin_matrices(J):
    # the two routes differ only by an eta-independent constant
    g = ProbeGeometry(d=1e-9, mu_r2=0.0, J=J)
    etas = np.linspace(0, math.pi, 7)
    pkg = np.array([h_mag_expectation(SPH, g, eta=e, include_self=False) for e in etas])
    mat = np.array([quantum_image_energy(g, J, e) for e in etas])
    diff = pkg - mat
    assert np.ptp(diff) <= 1e-10 * np.abs(pkg).max()
    assert diff[0] == pytest.approx(-2 * image_energy_coefficient(g) * J, rel=1e-9)


def test_expectation_includes_self_energy():
    g = ProbeGeometry(d=1e-9, mu_r2=0.0, J=1)
    full = h_mag_expectation(SPH, g)
    assert full - h_mag_expectation(SPH, g, include_self=False) == pytest.approx(self_energy(SPH, g), rel=1e-12)


def test_invalid_spin_rejected():
    with pytest.raises(InvalidGeometryError):
        h_mag_expectation(SPH, ProbeGeometry(d=1e-9), J=0.7)
