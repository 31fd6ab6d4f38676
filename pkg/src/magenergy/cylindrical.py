"""D_mag for axially symmetric spin densities via an image multipole series.

The region-II potential felt by the spin is expanded in axial harmonics about
the spin.  For harmonic order ``l`` the image moment is

    Q_l = int P(x') Y_l^0(theta'_n) / r'_n^(l+1) d^3x'

where (r'_n, theta'_n) are the spherical coordinates of the mirrored source
point (rho', 2d - z').  The radial moment factorizes as R_l^0(r) = Q_l r^l, so
the potential term is Q_l N_l r^l P_l(cos theta), a solid harmonic.  Its
overlap with the density gradient

    M_l = iint d/drho[Q_l N_l r^l P_l] dP/drho rho drho dz
        = -iint d/dz[Q_l N_l r^l P_l] dP/dz rho drho dz

feeds the J_z^2 coefficient 2 pi mu0 mu_r1 muB^2 contrast sum_l M_l / (2l+1).
Both forms are computed; their agreement is the quadrature convergence test.

Series terms are reported as the dimensionless numbers
f_l = 32 pi^2 H R^2 M_l / (2l + 1), indexed by the harmonic order l = 2, 4, ...
so that D_cyl = mu0 mu_r1 muB^2 contrast sum_l f_l / (16 pi H R^2 h).

All integrals are evaluated with lengths in units of d, which keeps
r^l and r_n^-(l+1) representable up to high order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .constants import CODATA, PhysicalConstants
from .energy import METHOD_CYLINDRICAL, EffectiveD, d_mag_spherical
from .errors import InvalidGeometryError, QuadratureFailure, WrongProfileKindError
from .model import (
    CustomCylindrical,
    CylindricalBesselCosine,
    CylindricalProfile,
    ProbeGeometry,
    SphericalProfile,
)

GL_ORDER = 16
DUAL_FORM_TOL = 1e-6


def harmonic_norm(l):
    """N_l = sqrt((2l+1)/(4 pi)) so that Y_l^0 = N_l P_l(cos theta)."""
    return np.sqrt((2.0 * np.asarray(l, dtype=float) + 1.0) / (4.0 * math.pi))


# ---------------------------------------------------------------------------
# quadrature nodes over the (rho, z) half plane
# ---------------------------------------------------------------------------


def _composite_gl(a: float, b: float, panels: int, order: int = GL_ORDER, breaks=None):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    if breaks is not None:
        edges = np.unique(np.concatenate([edges, [t for t in breaks if a < t < b]]))
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    weights = 0.5 * (hi - lo) * w
    return nodes.ravel(), np.broadcast_to(weights, nodes.shape).ravel()


@dataclass(frozen=True)
class AxialNodes:
    """Quadrature nodes for iint f(rho, z) rho drho dz over the support."""

    rho: np.ndarray
    z: np.ndarray
    weight: np.ndarray
    density: np.ndarray
    d_rho: np.ndarray
    d_z: np.ndarray


def axial_nodes(profile, panels: int, order: int = GL_ORDER) -> AxialNodes:
    if isinstance(profile, SphericalProfile):
        R = profile.support_radius
        breaks = getattr(profile, "r", None)
        r, wr = _composite_gl(0.0, R, panels, order, breaks)
        u, wu = _composite_gl(-1.0, 1.0, panels, order)
        rr, uu = np.meshgrid(r, u, indexing="ij")
        rho = rr * np.sqrt(1.0 - uu * uu)
        z = rr * uu
        w = np.outer(wr * r * r, wu)
    elif isinstance(profile, CylindricalProfile):
        R, H = profile.R, profile.H
        rbreaks = profile.rho if isinstance(profile, CustomCylindrical) else None
        zbreaks = profile.z if isinstance(profile, CustomCylindrical) else None
        pr, wr = _composite_gl(0.0, R, panels, order, rbreaks)
        pz, wz = _composite_gl(-0.5 * H, 0.5 * H, panels, order, zbreaks)
        rho, z = np.meshgrid(pr, pz, indexing="ij")
        w = np.outer(wr * pr, wz)
    else:
        raise WrongProfileKindError(f"unsupported profile {type(profile).__name__}")
    rho, z, w = rho.ravel(), z.ravel(), w.ravel()
    gr, gz = profile.axial_gradient(rho, z)
    return AxialNodes(rho, z, w, profile.axial_density(rho, z), gr, gz)


# ---------------------------------------------------------------------------
# harmonic recurrences (lengths already scaled)
# ---------------------------------------------------------------------------


def exterior_harmonics(rho, zeta, lmax: int) -> np.ndarray:
    """E_l = P_l(cos t) / s^(l+1) for the point (rho, zeta), l = 0..lmax."""
    s2 = rho * rho + zeta * zeta
    out = np.empty((lmax + 1,) + np.shape(rho))
    out[0] = 1.0 / np.sqrt(s2)
    if lmax >= 1:
        out[1] = zeta * out[0] / s2
    for l in range(1, lmax):
        out[l + 1] = ((2 * l + 1) * zeta * out[l] - l * out[l - 1]) / ((l + 1) * s2)
    return out


def solid_harmonics(rho, z, lmax: int):
    """S_l = r^l P_l(cos t) and T_l = r^(l-1) P_l'(cos t), l = 0..lmax.

    d S_l / dz = l S_(l-1) and d S_l / drho = -rho T_(l-1).
    """
    r2 = rho * rho + z * z
    S = np.empty((lmax + 1,) + np.shape(rho))
    T = np.empty_like(S)
    S[0] = 1.0
    T[0] = 0.0
    if lmax >= 1:
        S[1] = z
        T[1] = 1.0
    for l in range(1, lmax):
        S[l + 1] = ((2 * l + 1) * z * S[l] - l * r2 * S[l - 1]) / (l + 1)
        T[l + 1] = r2 * T[l - 1] + (2 * l + 1) * S[l]
    return S, T


# ---------------------------------------------------------------------------
# image moments and overlaps
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MomentSet:
    """Image moments Q_l and overlaps M_l for even l = 2 .. l_max.

    ``Q_scaled[l] = Q_l d^(l+1)`` and ``M_rho_scaled[l] = M_l d^3`` are
    dimensionless; ``M_z_scaled`` holds the z-form, equal to ``-M_rho_scaled``
    at convergence.  Odd orders are never stored.
    """

    l_values: np.ndarray
    Q_scaled: np.ndarray
    M_rho_scaled: np.ndarray
    M_z_scaled: np.ndarray
    length_unit: float
    panels: int
    quadrature_error: np.ndarray

    @property
    def l_max(self) -> int:
        return int(self.l_values[-1])

    def Q(self, l: int) -> float:
        i = self._index(l)
        return float(self.Q_scaled[i]) / self.length_unit ** (l + 1)

    def M(self, l: int) -> float:
        return float(self.M_rho_scaled[self._index(l)]) / self.length_unit**3

    def _index(self, l):
        idx = np.flatnonzero(self.l_values == l)
        if idx.size == 0:
            raise KeyError(f"order {l} not in moment set")
        return int(idx[0])


def _check_axial_geometry(profile, geom):
    if not isinstance(profile, (SphericalProfile, CylindricalProfile)):
        raise WrongProfileKindError(f"unsupported profile {type(profile).__name__}")
    # every mirrored source point must lie farther from the origin than every source point
    if 2.0 * geom.d - profile.z_extent <= profile.extent:
        raise InvalidGeometryError(
            "interface too close: image support overlaps the sphere enclosing the spin density"
        )


def _raw_moments(profile, geom, lmax: int, panels: int, order: int = GL_ORDER):
    """(Q, M_rho, M_z) for l = 0..lmax, scaled by d."""
    L = geom.d
    nodes = axial_nodes(profile, panels, order)
    rho, z = nodes.rho / L, nodes.z / L
    w = nodes.weight / L**3
    P = nodes.density * L**3
    gr, gz = nodes.d_rho * L**4, nodes.d_z * L**4
    ls = np.arange(lmax + 1)
    Nl = harmonic_norm(ls)
    E = exterior_harmonics(rho, 2.0 - z, lmax)
    Q = 2.0 * math.pi * Nl * (E @ (w * P))
    S, T = solid_harmonics(rho, z, lmax)
    dS_rho = np.zeros_like(S)
    dS_z = np.zeros_like(S)
    dS_rho[1:] = -rho * T[:-1]
    dS_z[1:] = ls[1:, None] * S[:-1]
    M_rho = Nl * Q * (dS_rho @ (w * gr))
    M_z = Nl * Q * (dS_z @ (w * gz))
    return Q, M_rho, M_z


def compute_moments(profile, geom: ProbeGeometry, lmax: int = 40, rtol: float = 1e-9,
                    max_panels: int = 64, start_panels: int = 2) -> MomentSet:
    """Even-order image moments with panel doubling until successive refinements agree."""
    _check_axial_geometry(profile, geom)
    if lmax < 2 or lmax % 2:
        raise ValueError("lmax must be an even integer >= 2")
    panels = start_panels
    prev = _raw_moments(profile, geom, lmax, panels)
    while True:
        panels *= 2
        cur = _raw_moments(profile, geom, lmax, panels)
        scale = np.abs(cur[1][2])
        diff = np.abs(cur[1] - prev[1])
        dual = np.abs(cur[1] + cur[2])
        if np.all(diff[2::2] <= rtol * scale) and np.all(dual[2::2] <= max(rtol, 1e-13) * scale * 10):
            break
        if panels >= max_panels:
            break
        prev = cur
    Q, M_rho, M_z = cur
    even = np.arange(2, lmax + 1, 2)
    err = np.maximum(np.abs(cur[1] - prev[1]), np.abs(M_rho + M_z))[even]
    return MomentSet(even, Q[even], M_rho[even], M_z[even], geom.d, panels, err)


def image_moment_Q(profile, geom: ProbeGeometry, l: int, panels: Optional[int] = None) -> float:
    """Image moment Q_l in SI units (m^-(l+1))."""
    _check_axial_geometry(profile, geom)
    if l < 0 or int(l) != l:
        raise ValueError("l must be a non-negative integer")
    lmax = max(int(l), 1)
    if panels is None:
        Q = _converged_Q(profile, geom, lmax)
    else:
        Q = _raw_moments(profile, geom, lmax, panels)[0]
    return float(Q[l]) / geom.d ** (l + 1)


def _converged_Q(profile, geom, lmax, rtol=1e-12, max_panels=64):
    panels = 2
    prev = _raw_moments(profile, geom, lmax, panels)[0]
    while panels < max_panels:
        panels *= 2
        cur = _raw_moments(profile, geom, lmax, panels)[0]
        if np.all(np.abs(cur - prev) <= rtol * np.abs(cur).max()):
            return cur
        prev = cur
    return prev


def overlap_M(profile, geom: ProbeGeometry, l: int, n: str = "interface", tol: float = DUAL_FORM_TOL,
              max_panels: int = 64) -> float:
    """Overlap M_l (m^-3) of order ``l`` for the interface image or the free spin.

    ``n="interface"`` evaluates both the rho-form and the z-form and raises
    :class:`QuadratureFailure` if they do not agree to ``tol``.  ``n="zero"``
    returns the rho-form built on the spin's own Coulomb multipoles; the
    rho/z duality does not hold there because that potential is not harmonic
    inside the support.
    """
    if l % 2:
        raise ValueError("only even orders contribute for a density even in z")
    if n == "zero":
        M_rho, _ = free_overlaps(profile, l_max=max(l, 2))
        return float(M_rho[l // 2])
    if n != "interface":
        raise ValueError("n must be 'interface' or 'zero'")
    _check_axial_geometry(profile, geom)
    lmax = max(l, 2)
    panels = 4
    while True:
        _, M_rho, M_z = _raw_moments(profile, geom, lmax, panels)
        a, b = M_rho[l], -M_z[l]
        if abs(a - b) <= tol * max(abs(a), abs(b), 1e-300):
            return 0.5 * (a + b) / geom.d**3
        if panels >= max_panels:
            raise QuadratureFailure(f"rho- and z-forms of M_{l} disagree: {a!r} vs {b!r}")
        panels *= 2


# ---------------------------------------------------------------------------
# spin's own multipoles (region-II independent term)
# ---------------------------------------------------------------------------


def _angular_projection(profile, r, lmax, order=24):
    """q_l(r) = 2 pi int P(r, u) P_l(u) du for l = 0..lmax, at radii ``r``."""
    r = np.asarray(r, dtype=float)
    x, w = np.polynomial.legendre.leggauss(order)
    if isinstance(profile, SphericalProfile):
        u_lo = np.zeros_like(r)
        u_hi = np.ones_like(r)
    else:
        R, H = profile.R, profile.H
        safe = np.where(r > 0, r, 1.0)
        u_hi = np.where(r > 0, np.minimum(1.0, 0.5 * H / safe), 1.0)
        u_lo = np.where(r > R, np.sqrt(np.clip(1.0 - (R / safe) ** 2, 0.0, 1.0)), 0.0)
    valid = u_hi > u_lo
    half = 0.5 * np.where(valid, u_hi - u_lo, 0.0)
    mid = 0.5 * (u_hi + u_lo)
    u = mid[..., None] + half[..., None] * x
    rho = r[..., None] * np.sqrt(np.clip(1.0 - u * u, 0.0, 1.0))
    dens = profile.axial_density(rho, r[..., None] * u)
    Pl = np.empty((lmax + 1,) + u.shape)
    Pl[0] = 1.0
    if lmax >= 1:
        Pl[1] = u
    for l in range(1, lmax):
        Pl[l + 1] = ((2 * l + 1) * u * Pl[l] - l * Pl[l - 1]) / (l + 1)
    # even density: the negative-u half doubles even orders and cancels odd ones
    parity = np.where(np.arange(lmax + 1) % 2 == 0, 2.0, 0.0).reshape((-1,) + (1,) * r.ndim)
    return 2.0 * math.pi * parity * np.einsum("l...k,...k,k->l...", Pl, dens, w) * half


def _radial_breaks(profile):
    if isinstance(profile, SphericalProfile):
        return [0.0, profile.support_radius]
    R, H = profile.R, profile.H
    return sorted({0.0, min(R, 0.5 * H), max(R, 0.5 * H), profile.extent})


def free_overlaps(profile, l_max: int = 40, panels: int = 2, order: int = GL_ORDER):
    """rho- and z-form overlaps with the spin's own multipoles, l = 0, 2, .., l_max.

    Returns (M_rho, M_z), each in m^-3, without the harmonic-duality sign.
    """
    L = profile.extent
    nodes = axial_nodes(profile, panels, order)
    rho, z = nodes.rho, nodes.z
    r = np.hypot(rho, z)
    c = z / r
    s = rho / r
    breaks = np.array(_radial_breaks(profile))
    xg, wg = np.polynomial.legendre.leggauss(order)

    def cumulative(lo, hi, power_fn):
        # integral over [lo, hi] of q_l(r') * power_fn(l, r') dr', split at the breaks
        total = np.zeros((l_max + 1, r.size))
        for s0 in range(0, r.size, 128):
            sl = slice(s0, s0 + 128)
            for a, b in zip(breaks[:-1], breaks[1:]):
                A = np.clip(a, lo[sl], hi[sl])
                B = np.clip(b, lo[sl], hi[sl])
                half = 0.5 * (B - A)
                rr = 0.5 * (A + B)[..., None] + half[..., None] * xg
                q = _angular_projection(profile, rr, l_max)
                total[:, sl] += np.einsum("lnk,lnk,k->ln", q, power_fn(rr), wg) * half
        return total

    ls = np.arange(l_max + 1)[:, None, None]
    # F_l(r) = r^-(l+1) int_0^r q_l r'^(l+2) dr' + r^l int_r q_l r'^(1-l) dr', lengths scaled by L
    inner = cumulative(np.zeros_like(r), r, lambda rr: (rr / L) ** (ls + 2))
    outer = cumulative(r, np.full_like(r, breaks[-1]), lambda rr: (rr / L) ** (1 - ls))
    lcol = np.arange(l_max + 1)[:, None]
    rs = r / L
    F = L * (rs ** (-(lcol + 1)) * inner + rs**lcol * outer)
    dF = -(lcol + 1) * rs ** (-(lcol + 2)) * inner + lcol * rs ** (lcol - 1) * outer
    Pl = np.empty((l_max + 1, r.size))
    dPl = np.empty_like(Pl)
    Pl[0], dPl[0] = 1.0, 0.0
    if l_max >= 1:
        Pl[1], dPl[1] = c, 1.0
    for l in range(1, l_max):
        Pl[l + 1] = ((2 * l + 1) * c * Pl[l] - l * Pl[l - 1]) / (l + 1)
        dPl[l + 1] = dPl[l - 1] + (2 * l + 1) * Pl[l]
    d_rho = s * dF * Pl - (c * s / r) * F * dPl
    d_z = c * dF * Pl + (s * s / r) * F * dPl
    Nl2 = (2.0 * lcol + 1.0) / (4.0 * math.pi)
    w = nodes.weight
    M_rho = Nl2[:, 0] * (d_rho @ (w * nodes.d_rho))
    M_z = Nl2[:, 0] * (d_z @ (w * nodes.d_z))
    return M_rho[::2], M_z[::2]


def intrinsic_jz2_hz(profile, geom: ProbeGeometry, constants: PhysicalConstants = CODATA,
                     l_max: int = 40) -> float:
    """Region-II independent J_z^2 coefficient from the density's own anisotropy (Hz).

    Built from the angular structure of [grad zeta_0 x J].[grad P x J]; zero
    for a spherical density.  Unobservable against the crystal-field D and
    therefore never added to D_mag.
    """
    M_rho, M_z = free_overlaps(profile, l_max)
    ls = np.arange(0, l_max + 1, 2)
    weight = 4.0 * math.pi / (2.0 * ls + 1.0)
    I_rho = 2.0 * math.pi * np.sum(weight * M_rho)
    I_z = 2.0 * math.pi * np.sum(weight * M_z)
    coeff = constants.energy_scale * geom.mu_r1 / (2.0 * math.pi) * (0.5 * I_rho - I_z)
    return coeff / constants.h


# ---------------------------------------------------------------------------
# D_mag series
# ---------------------------------------------------------------------------


def _require_cylindrical(profile):
    if not isinstance(profile, CylindricalProfile):
        raise WrongProfileKindError("cylindrical D_mag needs a cylindrical profile")


def f_terms(moments: MomentSet, profile) -> np.ndarray:
    """Dimensionless series terms f_l for l in ``moments.l_values``."""
    HR2 = profile.H * profile.R**2 / moments.length_unit**3
    return 32.0 * math.pi**2 * HR2 * moments.M_rho_scaled / (2.0 * moments.l_values + 1.0)


def decay_rate(profile, geom: ProbeGeometry) -> float:
    """Per-order geometric rate rho with |f_l| <~ C rho^l: support extent over image distance."""
    return profile.extent / (2.0 * geom.d - profile.z_extent)


def _tail_bounds(terms: np.ndarray, l_values: np.ndarray, rate: float) -> np.ndarray:
    """Envelope bound on sum_{k > i} |f_k| for every i.

    The envelope constant is fitted to the largest of the last four terms
    so that a term that happens to sit near a sign change cannot
    underestimate it.
    """
    out = np.empty(len(terms))
    scaled = np.abs(terms) / rate ** l_values.astype(float)
    for i in range(len(terms)):
        C = scaled[max(0, i - 3): i + 1].max()
        out[i] = C * rate ** (l_values[i] + 2.0) / (1.0 - rate * rate)
    return out


def d_mag_cylindrical(profile, geom: ProbeGeometry, l_max: int = 80, tol: float = 1e-9,
                      constants: PhysicalConstants = CODATA, with_intrinsic: bool = False) -> EffectiveD:
    """Cylindrical-density D_mag (Hz) from the even-l image series.

    Terms are summed until the geometric envelope of the remaining terms
    falls below ``tol`` of the running total.  If that does not happen by
    ``l_max`` the result is returned with ``converged=False``.
    """
    _require_cylindrical(profile)
    moments = compute_moments(profile, geom, l_max)
    f = f_terms(moments, profile)
    total = np.cumsum(f)
    tails = _tail_bounds(f, moments.l_values, decay_rate(profile, geom))
    small = np.flatnonzero(tails < tol * np.abs(total))
    stop = int(small[0]) if small.size else len(f) - 1
    converged = bool(small.size)
    s = float(total[stop])
    HR2 = profile.H * profile.R**2
    pref = constants.energy_scale * geom.mu_r1 * geom.contrast / (16.0 * math.pi * HR2 * constants.h)
    tail = float(tails[stop])
    quad = float(np.sum(moments.quadrature_error[: stop + 1] * 32.0 * math.pi**2 * HR2
                        / geom.d**3 / (2.0 * moments.l_values[: stop + 1] + 1.0)))
    err = abs(pref) * (tail + quad)
    intrinsic = intrinsic_jz2_hz(profile, geom, constants) if with_intrinsic else None
    terms = tuple(zip(moments.l_values[: stop + 1].tolist(), f[: stop + 1].tolist()))
    return EffectiveD(pref * s, METHOD_CYLINDRICAL, err, geom, converged, terms, intrinsic)


# ---------------------------------------------------------------------------
# comparison with the spherical closed form
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CylSphComparison:
    delta: float
    lam: float
    d_cyl_hz: float
    d_sph_hz: float
    rel_diff: float
    l2_fraction: float
    converged: bool = True

    HEADER = ("delta", "lambda", "D_cyl_Hz", "D_sph_Hz", "rel_diff", "l2_fraction")

    def row(self):
        return tuple(repr(float(v)) for v in (self.delta, self.lam, self.d_cyl_hz, self.d_sph_hz, self.rel_diff,
                                              self.l2_fraction))


# reference lengths for maps; results depend only on (delta, lambda)
_MAP_H = 2.0e-10


def compare_point(delta: float, lam: float, mu_r2: float = 0.0, H: float = _MAP_H, l_max: int = 80,
                  tol: float = 1e-9, constants: PhysicalConstants = CODATA) -> CylSphComparison:
    if not (delta > 0 and lam > 0):
        raise ValueError("delta and lambda must be positive")
    profile = CylindricalBesselCosine.normalized(H / lam, H)
    geom = ProbeGeometry(d=delta * H, mu_r1=1.0, mu_r2=mu_r2)
    cyl = d_mag_cylindrical(profile, geom, l_max, tol, constants)
    sph = d_mag_spherical(geom, constants).value_hz
    # share of the l = 2 term in the absolute term sum, so it stays in (0, 1]
    weights = np.abs([t for _, t in cyl.terms])
    return CylSphComparison(delta, lam, cyl.value_hz, sph, (cyl.value_hz - sph) / (cyl.value_hz + sph),
                            float(weights[0] / weights.sum()), cyl.converged)


def compare_map(lambda_range, delta_range, resolution, l_max: int = 80, tol: float = 1e-9, threads: int = 1):
    """Grid of cylindrical-vs-spherical comparisons, lambda-major then delta.

    ``resolution`` is an int or a (n_lambda, n_delta) pair; axes are linear.
    """
    (l0, l1), (d0, d1) = lambda_range, delta_range
    nl, nd = (resolution, resolution) if np.isscalar(resolution) else resolution
    if nl < 1 or nd < 1:
        raise ValueError("resolution must be positive")
    if not (0 < l0 <= l1 and 0 < d0 <= d1):
        raise ValueError("ranges must be positive and ordered")
    cells = [(float(dl), float(lm)) for lm in np.linspace(l0, l1, nl) for dl in np.linspace(d0, d1, nd)]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        return list(pool.map(lambda c: compare_point(c[0], c[1], l_max=l_max, tol=tol), cells))


def c3v_correction_bound(delta: float, calibration: float = 1.0) -> float:
    """Upper bound on the l = 3 correction relative to l = 2 for C3v densities.

    The bound scales as 1/delta and is calibrated to 20 % at delta = 5; it is
    an estimate, not a computed correction.
    """
    if not delta > 1:
        raise InvalidGeometryError("the 1/delta bound is only meaningful for delta > 1")
    return calibration / delta


def delta_of(profile, geom: ProbeGeometry) -> float:
    _require_cylindrical(profile)
    return geom.d / profile.H
