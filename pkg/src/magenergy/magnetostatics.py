"""Current density, vector potentials and induction of a spin near an interface.

The spin sits at the origin; region II fills z > d.  Its moment density is
``m P(x)`` with ``m = g muB J n(eta)``, and its current is ``grad P x m``.
Region II is replaced by the mirrored current scaled by the permeability
contrast, whose field in region I is that of a point dipole

    m_img = contrast * (-m_x, -m_y, m_z)

at (0, 0, 2d), because the image support never overlaps region I.

Fields are evaluated in Cartesian components internally; the public
``current_density``, ``vector_potential`` and ``image_vector_potential``
return spherical (r, theta, phi) components like the closed forms they
implement.  Poles and the origin are handled by the Cartesian route, so no
0/0 ever occurs.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .constants import CODATA, PhysicalConstants
from .errors import InvalidGeometryError, RegionError, WrongProfileKindError
from .model import ProbeGeometry, SphericalProfile, moment_direction, require_inside_region_one

REGION_I = "I"
REGION_II = "II"
REGION_SUPPORT = "support"


# ---------------------------------------------------------------------------
# basis conversions
# ---------------------------------------------------------------------------


def spherical_angles(x):
    """Return (r, theta, phi) of Cartesian points; theta = phi = 0 at the origin."""
    x = np.asarray(x, dtype=float)
    r = np.sqrt(np.sum(x * x, axis=-1))
    theta = np.arctan2(np.hypot(x[..., 0], x[..., 1]), x[..., 2])
    phi = np.arctan2(x[..., 1], x[..., 0])
    return r, theta, phi


def spherical_basis(theta, phi):
    """Unit vectors (r_hat, theta_hat, phi_hat) as arrays of shape (..., 3)."""
    st, ct = np.sin(theta), np.cos(theta)
    sp, cp = np.sin(phi), np.cos(phi)
    r_hat = np.stack([st * cp, st * sp, ct], axis=-1)
    t_hat = np.stack([ct * cp, ct * sp, -st], axis=-1)
    p_hat = np.stack([-sp, cp, np.zeros_like(sp)], axis=-1)
    return r_hat, t_hat, p_hat


def cartesian_to_spherical(x, v):
    """Project Cartesian vector components ``v`` at points ``x`` on (r, theta, phi)."""
    _, theta, phi = spherical_angles(x)
    basis = spherical_basis(theta, phi)
    v = np.asarray(v, dtype=float)
    return np.stack([np.sum(v * e, axis=-1) for e in basis], axis=-1)


def spherical_to_cartesian(x, v):
    _, theta, phi = spherical_angles(x)
    r_hat, t_hat, p_hat = spherical_basis(theta, phi)
    v = np.asarray(v, dtype=float)
    return v[..., 0:1] * r_hat + v[..., 1:2] * t_hat + v[..., 2:3] * p_hat


# ---------------------------------------------------------------------------
# sources
# ---------------------------------------------------------------------------


def spin_moment(geom: ProbeGeometry, constants: PhysicalConstants = CODATA) -> np.ndarray:
    """Integrated moment vector g muB J n(eta) in A m^2."""
    return constants.g_factor * constants.muB * geom.J * moment_direction(geom.eta)


def image_moment(geom: ProbeGeometry, constants: PhysicalConstants = CODATA) -> np.ndarray:
    m = spin_moment(geom, constants)
    return geom.contrast * np.array([-m[0], -m[1], m[2]])


def image_position(geom: ProbeGeometry) -> np.ndarray:
    return np.array([0.0, 0.0, 2.0 * geom.d])


def _require_spherical(profile):
    if not isinstance(profile, SphericalProfile):
        raise WrongProfileKindError("closed-form fields need a spherical profile")


def _require_region_one(x, geom):
    x = np.asarray(x, dtype=float)
    if np.any(x[..., 2] >= geom.d):
        raise RegionError("point lies in region II (z >= d); only region-I fields are defined")
    return x


def current_density_cartesian(profile, geom, x, constants=CODATA):
    """j = grad P x m in A/m^2 (Cartesian); zero outside the support."""
    x = np.asarray(x, dtype=float)
    m = spin_moment(geom, constants)
    return np.cross(profile.gradient_at(x), m)


def current_density(profile, geom: ProbeGeometry, x, constants=CODATA):
    """Spin current density in spherical components (A/m^2)."""
    _require_spherical(profile)
    x = np.asarray(x, dtype=float)
    return cartesian_to_spherical(x, current_density_cartesian(profile, geom, x, constants))


# ---------------------------------------------------------------------------
# vector potentials
# ---------------------------------------------------------------------------


def vector_potential_cartesian(profile, geom, x, constants=CODATA):
    x = np.asarray(x, dtype=float)
    r = np.sqrt(np.sum(x * x, axis=-1))
    m = spin_moment(geom, constants)
    g = profile.enclosed_over_r3(r)
    return constants.mu0 * geom.mu_r1 * g[..., None] * np.cross(m, x)


def vector_potential(profile, geom: ProbeGeometry, x, constants=CODATA):
    """Vector potential of the spin's own current (T m), spherical components.

    Valid at every point; outside the support it reduces to the dipole form.
    """
    _require_spherical(profile)
    x = np.asarray(x, dtype=float)
    return cartesian_to_spherical(x, vector_potential_cartesian(profile, geom, x, constants))


def _dipole_potential(m, center, x, prefactor):
    s = np.asarray(x, dtype=float) - center
    s2 = np.sum(s * s, axis=-1)
    return prefactor * np.cross(m, s) / (s2 * np.sqrt(s2))[..., None]


def image_vector_potential_cartesian(profile, geom, x, constants=CODATA):
    x = _require_region_one(x, geom)
    require_inside_region_one(profile, geom)
    pref = constants.mu0 * geom.mu_r1 / (4.0 * math.pi)
    return _dipole_potential(image_moment(geom, constants), image_position(geom), x, pref)


def image_vector_potential(profile, geom: ProbeGeometry, x, constants=CODATA):
    """Vector potential of the mirrored current in region I (T m), spherical components."""
    x = np.asarray(x, dtype=float)
    return cartesian_to_spherical(x, image_vector_potential_cartesian(profile, geom, x, constants))


def total_vector_potential_cartesian(profile, geom, x, constants=CODATA):
    return vector_potential_cartesian(profile, geom, x, constants) + image_vector_potential_cartesian(
        profile, geom, x, constants
    )


# ---------------------------------------------------------------------------
# induction
# ---------------------------------------------------------------------------


def direct_induction(profile, geom, x, constants=CODATA):
    """curl A of the spin's own current, Cartesian, any position.

    B = mu0 mu_r1 [ (3M/r^3 - P)(r.m) r / r^2 - (M/r^3) m + P m ], M(r) the
    enclosed radial moment.  Finite at r = 0, where it equals (2/3) mu0 mu_r1 P(0) m.
    """
    _require_spherical(profile)
    x = np.asarray(x, dtype=float)
    r = np.sqrt(np.sum(x * x, axis=-1))
    m = spin_moment(geom, constants)
    g = profile.enclosed_over_r3(r)
    p = profile.density(r)
    safe = np.where(r > 0, r, 1.0)
    rhat = np.where((r > 0)[..., None], x / safe[..., None], 0.0)
    rm = rhat @ m
    radial = (3.0 * g - p) * rm
    return constants.mu0 * geom.mu_r1 * (radial[..., None] * rhat + (p - g)[..., None] * m)


def _dipole_induction(m, center, x, prefactor):
    s = np.asarray(x, dtype=float) - center
    s2 = np.sum(s * s, axis=-1)
    s1 = np.sqrt(s2)
    sm = s @ m
    return prefactor * (3.0 * sm[..., None] * s / s2[..., None] - m) / (s2 * s1)[..., None]


def image_induction(profile, geom, x, constants=CODATA):
    x = _require_region_one(x, geom)
    require_inside_region_one(profile, geom)
    pref = constants.mu0 * geom.mu_r1 / (4.0 * math.pi)
    return _dipole_induction(image_moment(geom, constants), image_position(geom), x, pref)


def magnetic_induction(profile, geom: ProbeGeometry, x, constants=CODATA):
    """Total magnetic induction in region I (T), Cartesian components."""
    x = _require_region_one(x, geom)
    return direct_induction(profile, geom, x, constants) + image_induction(profile, geom, x, constants)


def region_two_display_induction(profile, geom, x, constants=CODATA):
    """Illustrative field inside region II.

    Boundary matching gives the transmitted field as the direct field scaled
    by 2 mu_r2 / (mu_r1 + mu_r2) = 1 + contrast.  Used for figures only.
    """
    return (1.0 + geom.contrast) * direct_induction(profile, geom, x, constants)


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FieldGrid:
    """Induction sampled on a regular box, rows ordered z-major, then y, then x."""

    extent: tuple
    resolution: tuple
    positions: np.ndarray
    B: np.ndarray
    region: np.ndarray

    HEADER = ("x_m", "y_m", "z_m", "Bx_T", "By_T", "Bz_T", "region")

    @property
    def magnitude(self) -> np.ndarray:
        return np.linalg.norm(self.B, axis=-1)

    def magnitude_array(self) -> np.ndarray:
        """|B| reshaped to (nz, ny, nx)."""
        nx, ny, nz = self.resolution
        return self.magnitude.reshape(nz, ny, nx)

    def rows(self):
        for p, b, reg in zip(self.positions, self.B, self.region):
            yield (*(repr(float(v)) for v in p), *(repr(float(v)) for v in b), str(reg))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.HEADER)
        w.writerows(self.rows())
        return buf.getvalue()

    def to_json(self) -> str:
        records = [dict(zip(self.HEADER, (float(a) for a in row[:6]))) | {"region": row[6]} for row in self.rows()]
        doc = {"extent_m": [list(map(float, e)) for e in self.extent], "resolution": list(self.resolution),
               "samples": records}
        return json.dumps(doc, indent=1) + "\n"


def grid_positions(extent, resolution):
    """Sample positions (N, 3) ordered z-major, then y, then x."""
    (x0, x1), (y0, y1), (z0, z1) = extent
    nx, ny, nz = (int(n) for n in resolution)
    if min(nx, ny, nz) <= 0:
        raise ValueError("resolution must be positive along every axis")
    xs, ys, zs = np.linspace(x0, x1, nx), np.linspace(y0, y1, ny), np.linspace(z0, z1, nz)
    Z, Y, X = np.meshgrid(zs, ys, xs, indexing="ij")
    return np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=-1)


def classify_regions(profile, geom, positions):
    r = np.linalg.norm(positions, axis=-1)
    region = np.full(len(positions), REGION_I, dtype=object)
    region[r <= profile.support_radius] = REGION_SUPPORT
    region[positions[:, 2] >= geom.d] = REGION_II
    return region


def render_field_grid(profile, geom: ProbeGeometry, extent, resolution, include_region_two=False,
                      constants=CODATA) -> FieldGrid:
    """Sample B on a box.

    Region-II samples are only produced with ``include_region_two=True``;
    they carry the illustrative transmitted field and the label ``"II"``.
    """
    _require_spherical(profile)
    require_inside_region_one(profile, geom)
    if any(int(n) <= 0 for n in resolution):
        raise ValueError("resolution must be positive along every axis")
    pos = grid_positions(extent, resolution)
    region = classify_regions(profile, geom, pos)
    two = region == REGION_II
    if np.any(two) and not include_region_two:
        raise RegionError("grid extends into region II; pass include_region_two=True for display fill")
    B = np.empty_like(pos)
    if np.any(~two):
        B[~two] = magnetic_induction(profile, geom, pos[~two], constants)
    if np.any(two):
        B[two] = region_two_display_induction(profile, geom, pos[two], constants)
    return FieldGrid(tuple(tuple(map(float, e)) for e in extent), tuple(int(n) for n in resolution), pos, B,
                     region.astype(str))


def figure_panel_extent(geom: ProbeGeometry, half_width_factor: float = 1.0):
    """xz-plane box centred between spin and interface used for the field-map panels."""
    if half_width_factor <= 0:
        raise InvalidGeometryError("half_width_factor must be positive")
    w = half_width_factor * geom.d
    return ((-w, w), (0.0, 0.0), (-w, 2.0 * geom.d - w))
