"""Magnetic energy of a spherical spin density and the induced fine-structure shift.

Energies are in J, D coefficients in Hz (energy coefficient divided by h with
dimensionless J_z eigenvalues).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .constants import CODATA, PhysicalConstants
from .errors import InvalidGeometryError, WrongProfileKindError
from .model import ProbeGeometry, SphericalProfile, check_spin

METHOD_SPHERICAL = "sphericalClosedForm"
METHOD_CYLINDRICAL = "cylindricalSeries"
METHOD_ORACLE = "oracleQuadrature"


@dataclass(frozen=True)
class MagneticEnergyBreakdown:
    """Classical magnetic energy split into self and image parts (J).

    ``self_energy`` depends on the regularizing profile and diverges as R -> 0;
    it is never used by the sensing layer.
    """

    self_energy: float
    image_energy: float
    eta: float
    self_energy_regularization_dependent: bool = True

    @property
    def total(self) -> float:
        return self.self_energy + self.image_energy


@dataclass(frozen=True)
class EffectiveD:
    """A fine-structure coefficient with its provenance and error estimate."""

    value_hz: float
    method: str
    error_estimate_hz: float
    geometry: Optional[ProbeGeometry] = None
    converged: bool = True
    terms: Optional[tuple] = None
    intrinsic_hz: Optional[float] = None

    def __post_init__(self):
        if self.converged and self.value_hz != 0 and not abs(self.error_estimate_hz) < abs(self.value_hz):
            object.__setattr__(self, "converged", False)


def _check_spherical(profile, geom):
    if not isinstance(profile, SphericalProfile):
        raise WrongProfileKindError("spherical energy needs a spherical profile")
    if geom.d <= profile.support_radius:
        raise InvalidGeometryError("d must exceed the support radius R")


def image_energy_coefficient(geom: ProbeGeometry, constants: PhysicalConstants = CODATA) -> float:
    """contrast * mu0 mu_r1 muB^2 / (32 pi d^3), in J (per J^2)."""
    return geom.contrast * constants.energy_scale * geom.mu_r1 / (32.0 * math.pi * geom.d**3)


def self_energy(profile, geom: ProbeGeometry, constants: PhysicalConstants = CODATA) -> float:
    """(16/3) pi mu0 mu_r1 muB^2 J^2 * integral P(r)^2 r^2 dr."""
    from scipy import integrate

    R = profile.support_radius
    points = None if not hasattr(profile, "r") else profile.r[1:-1] / R
    val, _ = integrate.quad(lambda u: float(profile.density(u * R)) ** 2 * u * u, 0.0, 1.0,
                            epsabs=0.0, epsrel=1e-11, limit=400, points=points)
    p2r2 = val * R**3
    return 16.0 / 3.0 * math.pi * constants.energy_scale * geom.mu_r1 * geom.J**2 * p2r2


def classical_energy(profile, geom: ProbeGeometry, constants: PhysicalConstants = CODATA
                     ) -> MagneticEnergyBreakdown:
    """Classical energy of a spin moment tilted by ``geom.eta``."""
    _check_spherical(profile, geom)
    img = image_energy_coefficient(geom, constants) * geom.J**2 * (3.0 + math.cos(2.0 * geom.eta))
    return MagneticEnergyBreakdown(self_energy(profile, geom, constants), img, geom.eta)


def image_energy(geom: ProbeGeometry, constants: PhysicalConstants = CODATA, eta=None):
    """Image part of the classical energy; vectorized over ``eta``."""
    eta = geom.eta if eta is None else np.asarray(eta, dtype=float)
    return image_energy_coefficient(geom, constants) * geom.J**2 * (3.0 + np.cos(2.0 * eta))


def image_energy_force(profile, geom: ProbeGeometry, constants: PhysicalConstants = CODATA) -> float:
    """Force along +z (N), towards the interface, from the image energy.

    At fixed spin current the force is +grad E, so F_z = -dE/dd = 3 E_image / d.
    Negative values push the spin away from the interface (diamagnetic repulsion).
    """
    _check_spherical(profile, geom)
    return 3.0 * float(image_energy(geom, constants)) / geom.d


def d_mag_spherical(geom: ProbeGeometry, constants: PhysicalConstants = CODATA) -> EffectiveD:
    """Closed-form region-II fine-structure shift for a spherical density (Hz)."""
    value = geom.contrast * constants.energy_scale * geom.mu_r1 / (16.0 * math.pi * geom.d**3 * constants.h)
    return EffectiveD(value, METHOD_SPHERICAL, 0.0, geom)


def d_mag_spherical_from_profile(profile, geom: ProbeGeometry, constants: PhysicalConstants = CODATA
                                 ) -> EffectiveD:
    """Same shift assembled from the profile's radial moments.

    Uses the l = 2 image moment R_2(r) = c_2 r^2, c_2 = sqrt(5/16pi)/(4 d^3),
    and the radial integral of (3/r R_2 + R_2') P' r^2 = 5 c_2 * int P' r^3.
    Agreement with :func:`d_mag_spherical` for any normalized profile is the
    profile-independence property.
    """
    from scipy import integrate

    _check_spherical(profile, geom)
    R = profile.support_radius
    points = None if not hasattr(profile, "r") else profile.r[1:-1] / R
    val, err = integrate.quad(lambda u: float(profile.radial_derivative(u * R)) * u**3, 0.0, 1.0,
                              epsabs=0.0, epsrel=1e-12, limit=400, points=points)
    c2 = math.sqrt(5.0 / (16.0 * math.pi)) / (4.0 * geom.d**3)
    radial = 5.0 * c2 * val * R**4
    pref = 4.0 * math.sqrt(math.pi) * constants.energy_scale * geom.mu_r1 / (15.0 * math.sqrt(5.0))
    value = -pref * geom.contrast * radial / constants.h
    err = abs(value) * max(err / abs(val), 1e-15)
    return EffectiveD(value, METHOD_ORACLE, err, geom)


def h_mag_expectation(profile, geom: ProbeGeometry, J: Optional[float] = None, eta: Optional[float] = None,
                      constants: PhysicalConstants = CODATA, include_self: bool = True) -> float:
    """<J,J| H_mag |J,J> for a spin of length J pointing along ``eta`` (J).

    With ``include_self=False`` only the region-II part is returned.
    """
    J = check_spin(geom.J if J is None else J)
    eta = geom.eta if eta is None else float(eta)
    coeff = image_energy_coefficient(geom, constants)
    img = coeff * J**2 * (3.0 + math.cos(2 * eta) + (1.0 - math.cos(2 * eta)) / (2.0 * J))
    if not include_self:
        return img
    _check_spherical(profile, geom)
    return self_energy(profile, geom.replace(J=J), constants) + img


def tilted_spin1_state(eta: float) -> np.ndarray:
    """|J_eta> in the basis (|+1>, |0>, |-1>)."""
    c, s = math.cos(eta / 2.0), math.sin(eta / 2.0)
    return np.array([c * c, math.sqrt(0.5) * math.sin(eta), s * s])


JZ_SQUARED = np.diag([1.0, 0.0, 1.0])


def nv_superposition_energy(D: float, eta: float) -> float:
    """<J_eta| D J_z^2 |J_eta> by explicit 3x3 algebra; equals D (3 + cos 2 eta) / 4."""
    psi = tilted_spin1_state(eta)
    return float(psi @ (D * JZ_SQUARED) @ psi)
