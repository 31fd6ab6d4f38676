"""Geometry, spin-density profiles and their normalization.

Spherical profiles expose ``density(r)``, ``radial_derivative(r)`` and
``enclosed(r)`` (the integral of P r'^2 from 0 to r).  Cylindrical profiles
expose ``density(rho, z)`` and ``gradient(rho, z)``.  Both kinds also accept
Cartesian points through ``density_at`` / ``gradient_at``.

All profiles are immutable.  Constructors produce an *un-normalized* object
(``norm=1``); use :func:`normalize_profile` or the ``*.normalized(...)``
factories to obtain a unit-normalized density.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Union

import numpy as np
from scipy import integrate, interpolate, special

from .errors import InvalidGeometryError, InvalidProfileError, WrongProfileKindError

BESSEL_J0_ZERO = float(special.jn_zeros(0, 1)[0])

# 3-point Gauss-Legendre on [0, 1]; exact for the piecewise polynomials below.
_GL3_X, _GL3_W = np.polynomial.legendre.leggauss(3)
_GL3_X = 0.5 * (_GL3_X + 1.0)
_GL3_W = 0.5 * _GL3_W


@dataclass(frozen=True)
class QuadratureSettings:
    """Tolerances for the adaptive 1D quadratures (scipy QUADPACK)."""

    epsabs: float = 1e-12
    epsrel: float = 1e-9
    limit: int = 200


DEFAULT_QUADRATURE = QuadratureSettings()


class QuadResult(NamedTuple):
    value: float
    error: float


# ---------------------------------------------------------------------------
# geometry
# ---------------------------------------------------------------------------


def contrast_factor(mu_r1: float, mu_r2: float) -> float:
    """(mu_r2 - mu_r1) / (mu_r2 + mu_r1), the strength of every image term."""
    if mu_r1 < 0 or mu_r2 < 0:
        raise InvalidGeometryError("relative permeabilities must be non-negative")
    denom = mu_r2 + mu_r1
    if denom == 0:
        raise InvalidGeometryError("both permeabilities are zero")
    return (mu_r2 - mu_r1) / denom


@dataclass(frozen=True)
class ProbeGeometry:
    """Spin in region I at the origin, region II filling z > d.

    Attributes
    ----------
    d : float
        Spin-to-interface distance in m.
    mu_r1, mu_r2 : float
        Relative permeabilities of regions I and II.
    J : float
        Total spin quantum number (half-integer >= 1/2).
    eta : float
        Tilt of the moment from the interface normal, in [0, pi].
    """

    d: float
    mu_r1: float = 1.0
    mu_r2: float = 1.0
    J: float = 1.0
    eta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.d) and self.d > 0):
            raise InvalidGeometryError(f"d must be positive and finite, got {self.d!r}")
        if not (math.isfinite(self.mu_r1) and self.mu_r1 > 0):
            raise InvalidGeometryError("mu_r1 must be positive")
        if not (math.isfinite(self.mu_r2) and self.mu_r2 >= 0):
            raise InvalidGeometryError("mu_r2 must be non-negative")
        check_spin(self.J)
        if not (0.0 <= self.eta <= math.pi):
            raise InvalidGeometryError("eta must lie in [0, pi]")

    @property
    def contrast(self) -> float:
        return contrast_factor(self.mu_r1, self.mu_r2)

    def replace(self, **changes) -> "ProbeGeometry":
        return dataclasses.replace(self, **changes)


def check_spin(J: float) -> float:
    twice = 2.0 * J
    if not (math.isfinite(J) and J >= 0.5 and abs(twice - round(twice)) < 1e-12):
        raise InvalidGeometryError(f"J must be a half-integer >= 1/2, got {J!r}")
    return float(J)


def permeability_contrast(geom: ProbeGeometry) -> float:
    """Permeability contrast of a probe geometry, in [-1, 1]."""
    return contrast_factor(geom.mu_r1, geom.mu_r2)


def moment_direction(eta: float) -> np.ndarray:
    """Unit vector of the spin moment, tilted by ``eta`` in the xz plane."""
    return np.array([math.sin(eta), 0.0, math.cos(eta)])


# ---------------------------------------------------------------------------
# spherical profiles
# ---------------------------------------------------------------------------


def _spherical_coords(x):
    x = np.asarray(x, dtype=float)
    return np.sqrt(np.sum(x * x, axis=-1))


class SphericalProfile:
    """Mixin for radially symmetric densities P(r) supported on r <= R."""

    symmetry = "spherical"

    @property
    def support_radius(self) -> float:
        raise NotImplementedError

    @property
    def z_extent(self) -> float:
        return self.support_radius

    @property
    def extent(self) -> float:
        return self.support_radius

    def density_at(self, x):
        return self.density(_spherical_coords(x))

    def gradient_at(self, x):
        x = np.asarray(x, dtype=float)
        r = _spherical_coords(x)
        dp = self.radial_derivative(r)
        with np.errstate(invalid="ignore", divide="ignore"):
            scale = np.where(r > 0, dp / np.where(r > 0, r, 1.0), 0.0)
        return x * scale[..., None]

    def axial_density(self, rho, z):
        return self.density(np.hypot(rho, z))

    def axial_gradient(self, rho, z):
        r = np.hypot(rho, z)
        dp = self.radial_derivative(r)
        safe = np.where(r > 0, r, 1.0)
        return np.where(r > 0, dp * rho / safe, 0.0), np.where(r > 0, dp * z / safe, 0.0)


@dataclass(frozen=True, eq=False)
class SphericalBessel(SphericalProfile):
    """P(r) = norm * j0(pi r / R)**2 for r <= R."""

    R: float
    norm: float = 1.0
    kind = "spherical_bessel"

    def __post_init__(self):
        if not (math.isfinite(self.R) and self.R > 0):
            raise InvalidProfileError("R must be positive")

    @classmethod
    def normalized(cls, R: float) -> "SphericalBessel":
        return cls(R, math.pi / (2.0 * R**3))

    @property
    def support_radius(self) -> float:
        return self.R

    def density(self, r):
        r = np.asarray(r, dtype=float)
        u = r / self.R
        p = self.norm * np.sinc(u) ** 2
        return np.where(u <= 1.0, p, 0.0)

    def radial_derivative(self, r):
        r = np.asarray(r, dtype=float)
        x = math.pi * r / self.R
        small = x < 0.1
        xs = np.where(small, 1.0, x)
        j0 = np.sinc(x / math.pi)
        series = -x / 3.0 + x**3 / 30.0 - x**5 / 840.0 + x**7 / 45360.0
        dj0 = np.where(small, series, (xs * np.cos(xs) - np.sin(xs)) / xs**2)
        out = self.norm * 2.0 * j0 * dj0 * math.pi / self.R
        return np.where(r <= self.R, out, 0.0)

    def enclosed(self, r):
        """Integral of P(r') r'^2 dr' from 0 to min(r, R)."""
        r = np.minimum(np.asarray(r, dtype=float), self.R)
        x = 2.0 * math.pi * r / self.R
        # x - sin(x), series near zero to avoid cancellation
        series = x**3 / 6.0 - x**5 / 120.0 + x**7 / 5040.0 - x**9 / 362880.0
        diff = np.where(x < 0.05, series, x - np.sin(x))
        return self.norm * (self.R / math.pi) ** 2 * self.R / (4.0 * math.pi) * diff

    def enclosed_over_r3(self, r):
        """enclosed(r) / r**3 with the finite r -> 0 limit P(0)/3."""
        r = np.asarray(r, dtype=float)
        small = r < 1e-6 * self.R
        safe = np.where(small, self.R, r)
        return np.where(small, self.norm / 3.0, self.enclosed(safe) / safe**3)


@dataclass(frozen=True, eq=False)
class CustomRadial(SphericalProfile):
    """Tabulated radial density with monotone cubic (PCHIP) interpolation.

    The support radius is the first zero sample following the last nonzero
    one; the table must therefore end with a zero.
    """

    r: np.ndarray
    values: np.ndarray
    norm: float = 1.0
    kind = "custom_radial"
    _interp: object = field(init=False, repr=False)
    _R: float = field(init=False, repr=False)

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if r.ndim != 1 or r.shape != v.shape or r.size < 3:
            raise InvalidProfileError("radial table needs matching 1D arrays of length >= 3")
        if r[0] != 0.0 or np.any(np.diff(r) <= 0):
            raise InvalidProfileError("radial grid must start at 0 and increase strictly")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise InvalidProfileError("density samples must be finite and non-negative")
        nz = np.flatnonzero(v)
        if nz.size and nz[-1] == v.size - 1:
            raise InvalidProfileError("radial table must end with a zero sample")
        last = nz[-1] + 1 if nz.size else v.size - 1
        r, v = r[: last + 1], v[: last + 1]
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "_R", float(r[-1]))
        object.__setattr__(self, "_interp", interpolate.PchipInterpolator(r, v, extrapolate=False))

    @classmethod
    def from_function(cls, func, R: float, samples: int = 401) -> "CustomRadial":
        r = np.linspace(0.0, R, samples)
        v = np.asarray(func(r), dtype=float)
        v[-1] = 0.0
        return cls(r, np.clip(v, 0.0, None))

    @property
    def support_radius(self) -> float:
        return self._R

    def density(self, r):
        r = np.asarray(r, dtype=float)
        v = self._interp(np.clip(r, 0.0, self._R))
        return np.where(r <= self._R, self.norm * np.clip(v, 0.0, None), 0.0)

    def radial_derivative(self, r):
        r = np.asarray(r, dtype=float)
        v = self._interp(np.clip(r, 0.0, self._R), 1)
        return np.where(r <= self._R, self.norm * v, 0.0)

    def _interval_integrals(self, power: int):
        a, b = self.r[:-1], self.r[1:]
        h = b - a
        nodes = a[:, None] + h[:, None] * _GL3_X[None, :]
        vals = self._interp(nodes) * nodes**power
        return h * (vals @ _GL3_W)

    def enclosed(self, r):
        """Exact (to rounding) integral of the interpolant times r'^2."""
        r = np.minimum(np.asarray(r, dtype=float), self._R)
        cum = np.concatenate([[0.0], np.cumsum(self._interval_integrals(2))])
        idx = np.clip(np.searchsorted(self.r, r, side="right") - 1, 0, self.r.size - 2)
        a = self.r[idx]
        h = r - a
        nodes = a[..., None] + h[..., None] * _GL3_X
        part = h * ((self._interp(nodes) * nodes**2) @ _GL3_W)
        return self.norm * (cum[idx] + part)

    def enclosed_over_r3(self, r):
        r = np.asarray(r, dtype=float)
        small = r < 1e-9 * self._R
        safe = np.where(small, self._R, r)
        return np.where(small, self.norm * float(self._interp(0.0)) / 3.0, self.enclosed(safe) / safe**3)


# ---------------------------------------------------------------------------
# cylindrical profiles
# ---------------------------------------------------------------------------


class CylindricalProfile:
    """Mixin for densities P(rho, z) even in z, supported on rho <= R, |z| <= H/2."""

    symmetry = "cylindrical"
    R: float
    H: float

    @property
    def z_extent(self) -> float:
        return 0.5 * self.H

    @property
    def extent(self) -> float:
        return math.hypot(self.R, 0.5 * self.H)

    @property
    def aspect_ratio(self) -> float:
        """lambda = H / R."""
        return self.H / self.R

    def axial_density(self, rho, z):
        return self.density(rho, z)

    def axial_gradient(self, rho, z):
        return self.gradient(rho, z)

    def density_at(self, x):
        x = np.asarray(x, dtype=float)
        return self.density(np.hypot(x[..., 0], x[..., 1]), x[..., 2])

    def gradient_at(self, x):
        x = np.asarray(x, dtype=float)
        rho = np.hypot(x[..., 0], x[..., 1])
        gr, gz = self.gradient(rho, x[..., 2])
        safe = np.where(rho > 0, rho, 1.0)
        c = np.where(rho > 0, x[..., 0] / safe, 0.0)
        s = np.where(rho > 0, x[..., 1] / safe, 0.0)
        return np.stack([gr * c, gr * s, gz], axis=-1)


@dataclass(frozen=True, eq=False)
class CylindricalBesselCosine(CylindricalProfile):
    """P = norm * [J0(j01 rho / R) cos(pi z / H)]**2 inside the cylinder."""

    R: float
    H: float
    norm: float = 1.0
    kind = "cylindrical_bessel_cosine"

    def __post_init__(self):
        if not (self.R > 0 and self.H > 0 and math.isfinite(self.R) and math.isfinite(self.H)):
            raise InvalidProfileError("R and H must be positive")

    @classmethod
    def normalized(cls, R: float, H: float) -> "CylindricalBesselCosine":
        j1 = special.j1(BESSEL_J0_ZERO)
        return cls(R, H, 2.0 / (math.pi * R**2 * H * j1**2))

    def _inside(self, rho, z):
        return (rho <= self.R) & (np.abs(z) <= 0.5 * self.H)

    def density(self, rho, z):
        rho = np.asarray(rho, dtype=float)
        z = np.asarray(z, dtype=float)
        val = self.norm * (special.j0(BESSEL_J0_ZERO * rho / self.R) * np.cos(math.pi * z / self.H)) ** 2
        return np.where(self._inside(rho, z), val, 0.0)

    def gradient(self, rho, z):
        rho = np.asarray(rho, dtype=float)
        z = np.asarray(z, dtype=float)
        k = BESSEL_J0_ZERO / self.R
        q = math.pi / self.H
        j0 = special.j0(k * rho)
        c = np.cos(q * z)
        inside = self._inside(rho, z)
        g_rho = self.norm * 2.0 * j0 * (-special.j1(k * rho)) * k * c**2
        g_z = self.norm * j0**2 * 2.0 * c * (-np.sin(q * z)) * q
        return np.where(inside, g_rho, 0.0), np.where(inside, g_z, 0.0)


@dataclass(frozen=True, eq=False)
class CustomCylindrical(CylindricalProfile):
    """Tabulated P(rho, z) on a rectangular grid, bicubic-spline interpolated.

    ``rho`` must start at 0 and ``z`` must be symmetric about 0.  The support
    box is the grid itself; samples on its outer boundary must be zero.
    """

    rho: np.ndarray
    z: np.ndarray
    values: np.ndarray
    norm: float = 1.0
    kind = "custom_cylindrical"
    _spline: object = field(init=False, repr=False)

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        z = np.asarray(self.z, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if v.shape != (rho.size, z.size) or rho.size < 4 or z.size < 4:
            raise InvalidProfileError("values must have shape (len(rho), len(z)) with >= 4 samples each")
        if rho[0] != 0.0 or np.any(np.diff(rho) <= 0) or np.any(np.diff(z) <= 0):
            raise InvalidProfileError("grids must increase strictly and rho must start at 0")
        if not np.allclose(z, -z[::-1], rtol=0, atol=1e-12 * np.abs(z).max()):
            raise InvalidProfileError("z grid must be symmetric about 0")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise InvalidProfileError("density samples must be finite and non-negative")
        if not np.allclose(v, v[:, ::-1], rtol=1e-12, atol=1e-12 * np.abs(v).max()):
            raise InvalidProfileError("density must be even in z")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "_spline", interpolate.RectBivariateSpline(rho, z, v, kx=3, ky=3, s=0))

    @property
    def R(self) -> float:
        return float(self.rho[-1])

    @property
    def H(self) -> float:
        return float(2.0 * self.z[-1])

    def _inside(self, rho, z):
        return (rho <= self.R) & (np.abs(z) <= 0.5 * self.H)

    def density(self, rho, z):
        rho, z = np.broadcast_arrays(np.asarray(rho, dtype=float), np.asarray(z, dtype=float))
        v = self._spline.ev(np.clip(rho, 0, self.R), np.clip(z, -0.5 * self.H, 0.5 * self.H))
        return np.where(self._inside(rho, z), self.norm * np.clip(v, 0.0, None), 0.0)

    def gradient(self, rho, z):
        rho, z = np.broadcast_arrays(np.asarray(rho, dtype=float), np.asarray(z, dtype=float))
        rc = np.clip(rho, 0, self.R)
        zc = np.clip(z, -0.5 * self.H, 0.5 * self.H)
        inside = self._inside(rho, z)
        g_rho = self.norm * self._spline.ev(rc, zc, dx=1)
        g_z = self.norm * self._spline.ev(rc, zc, dy=1)
        return np.where(inside, g_rho, 0.0), np.where(inside, g_z, 0.0)


Profile = Union[SphericalBessel, CustomRadial, CylindricalBesselCosine, CustomCylindrical]


# ---------------------------------------------------------------------------
# normalization and moments
# ---------------------------------------------------------------------------


def _raw_integral(profile) -> float:
    if isinstance(profile, SphericalBessel):
        R = profile.R
        val, _ = integrate.quad(lambda u: float(profile.density(u * R)) * u * u, 0.0, 1.0,
                                epsabs=0.0, epsrel=1e-13, limit=200)
        return 4.0 * math.pi * val * R**3
    if isinstance(profile, CustomRadial):
        return 4.0 * math.pi * float(profile.enclosed(profile.support_radius))
    if isinstance(profile, CylindricalBesselCosine):
        R, H = profile.R, profile.H
        rad, _ = integrate.quad(lambda u: special.j0(BESSEL_J0_ZERO * u) ** 2 * u, 0.0, 1.0,
                                epsabs=0.0, epsrel=1e-13)
        ax, _ = integrate.quad(lambda v: math.cos(math.pi * v) ** 2, -0.5, 0.5, epsabs=0.0, epsrel=1e-13)
        return profile.norm * 2.0 * math.pi * rad * R**2 * ax * H
    if isinstance(profile, CustomCylindrical):
        # bicubic spline times rho is a polynomial of degree <= 4 per cell
        rho, z = profile.rho, profile.z
        pr = (rho[:-1, None] + np.diff(rho)[:, None] * _GL3_X).ravel()
        wr = (np.diff(rho)[:, None] * _GL3_W).ravel()
        pz = (z[:-1, None] + np.diff(z)[:, None] * _GL3_X).ravel()
        wz = (np.diff(z)[:, None] * _GL3_W).ravel()
        vals = profile._spline(pr, pz)
        return float(profile.norm * 2.0 * math.pi * np.einsum("i,ij,j->", wr * pr, vals, wz))
    raise InvalidProfileError(f"unsupported profile type {type(profile).__name__}")


def profile_integral(profile) -> float:
    """Integral of P over all space."""
    return _raw_integral(profile)


def normalize_profile(profile):
    """Return a copy of ``profile`` whose density integrates to one."""
    total = _raw_integral(profile)
    if not math.isfinite(total) or total <= 0.0:
        raise InvalidProfileError(f"profile integral is {total!r}; cannot normalize")
    return dataclasses.replace(profile, norm=profile.norm / total)


def profile_moment(profile, k: int, settings: QuadratureSettings = DEFAULT_QUADRATURE) -> QuadResult:
    """Integral of P(r) r**k over the radial support of a spherical profile."""
    if not isinstance(profile, SphericalProfile):
        raise WrongProfileKindError("profile_moment needs a spherical profile")
    if k < 0 or int(k) != k:
        raise ValueError("k must be a non-negative integer")
    R = profile.support_radius
    points = None
    if isinstance(profile, CustomRadial):
        points = profile.r[1:-1] / R
    val, err = integrate.quad(
        lambda u: float(profile.density(u * R)) * u**k,
        0.0,
        1.0,
        epsabs=settings.epsabs,
        epsrel=settings.epsrel,
        limit=max(settings.limit, 0 if points is None else 4 * len(points)),
        points=points,
    )
    scale = R ** (k + 1)
    return QuadResult(val * scale, err * scale)


# ---------------------------------------------------------------------------
# JSON configuration
# ---------------------------------------------------------------------------

PROFILE_KINDS = ("spherical_bessel", "custom_radial", "cylindrical_bessel_cosine", "custom_cylindrical")


def geometry_to_config(geom: ProbeGeometry) -> dict:
    return {"mu_r_I": geom.mu_r1, "mu_r_II": geom.mu_r2, "d_m": geom.d, "J": geom.J, "eta_rad": geom.eta}


def geometry_from_config(cfg: dict) -> ProbeGeometry:
    return ProbeGeometry(
        d=float(cfg["d_m"]),
        mu_r1=float(cfg.get("mu_r_I", 1.0)),
        mu_r2=float(cfg.get("mu_r_II", 1.0)),
        J=float(cfg.get("J", 1.0)),
        eta=float(cfg.get("eta_rad", 0.0)),
    )


def profile_to_config(profile) -> dict:
    out = {"kind": profile.kind}
    if isinstance(profile, SphericalBessel):
        out["R_m"] = profile.R
    elif isinstance(profile, CylindricalBesselCosine):
        out.update(R_m=profile.R, H_m=profile.H)
    elif isinstance(profile, CustomRadial):
        out.update(R_m=profile.support_radius, r_m=profile.r.tolist(), values=profile.values.tolist())
    elif isinstance(profile, CustomCylindrical):
        out.update(R_m=profile.R, H_m=profile.H, rho_m=profile.rho.tolist(), z_m=profile.z.tolist(),
                   values=profile.values.tolist())
    return out


def profile_from_config(cfg: dict):
    """Build a *normalized* profile from its JSON description."""
    kind = cfg.get("kind")
    if kind == "spherical_bessel":
        return SphericalBessel.normalized(float(cfg["R_m"]))
    if kind == "cylindrical_bessel_cosine":
        return CylindricalBesselCosine.normalized(float(cfg["R_m"]), float(cfg["H_m"]))
    if kind == "custom_radial":
        return normalize_profile(CustomRadial(np.asarray(cfg["r_m"]), np.asarray(cfg["values"])))
    if kind == "custom_cylindrical":
        return normalize_profile(
            CustomCylindrical(np.asarray(cfg["rho_m"]), np.asarray(cfg["z_m"]), np.asarray(cfg["values"]))
        )
    raise InvalidProfileError(f"unknown profile kind {kind!r}; expected one of {PROFILE_KINDS}")


def require_inside_region_one(profile, geom: ProbeGeometry) -> None:
    """The whole support must lie on the z < d side of the interface."""
    if geom.d <= profile.z_extent:
        raise InvalidGeometryError(
            f"d = {geom.d:g} m does not exceed the profile support ({profile.z_extent:g} m)"
        )
