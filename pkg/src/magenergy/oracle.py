"""Brute-force reference integrals used to certify the closed forms.

Nothing here relies on the multipole machinery or the closed forms it checks:
currents are built pointwise from the density gradient, the image is the
explicitly mirrored current, and every Green's integral is summed directly.

Singular Green's integrals are evaluated in spherical coordinates centered
on the field point, x' = x + s w, where the Jacobian s^2 cancels the 1/s
(potential) or 1/s^2 (Biot-Savart) kernel.  The integrands become bounded
and plain Gauss-Legendre rules apply, so no exclusion ball is needed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .constants import CODATA, PhysicalConstants
from .energy import METHOD_ORACLE, EffectiveD
from .errors import InvalidGeometryError, RegionError, WrongProfileKindError
from .model import CylindricalProfile, ProbeGeometry, SphericalProfile, moment_direction

SCHEME_TGL = "tensorGaussLegendre"
SCHEME_NESTED = "adaptiveNested"
SCHEME_MC = "monteCarlo"
SCHEMES = (SCHEME_TGL, SCHEME_NESTED, SCHEME_MC)

MIRROR = np.array([1.0, 1.0, -1.0])
_CHUNK = 256


@dataclass(frozen=True)
class QuadratureSpec:
    """How an oracle integral is evaluated.

    ``points`` is the per-axis node count for the deterministic schemes and
    the starting count for ``adaptiveNested``; ``samples`` and ``seed`` drive
    Monte Carlo.
    """

    scheme: str = SCHEME_TGL
    points: int = 16
    samples: int = 200_000
    seed: int = 0
    tolerance: float = 1e-6
    block_size: int = 1 << 15
    max_points: int = 64

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.points < 2 or self.samples < 2 or self.block_size < 2:
            raise ValueError("points, samples and block_size must be >= 2")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")


@dataclass(frozen=True)
class OracleResult:
    value: float
    error: float
    scheme: str
    converged: bool = True
    evaluations: int = 0


@dataclass(frozen=True)
class OracleEnergy:
    """Self and image parts of the magnetic energy (J)."""

    self_energy: OracleResult
    image_energy: OracleResult

    @property
    def total(self) -> float:
        return self.self_energy.value + self.image_energy.value

    @property
    def error(self) -> float:
        return math.hypot(self.self_energy.error, self.image_energy.error)


# ---------------------------------------------------------------------------
# nodes and currents
# ---------------------------------------------------------------------------


def gauss_legendre(a: float, b: float, n: int, panel_order: int = 16):
    """n-point rule on [a, b]; composite 16-point panels beyond 24 nodes."""
    if n <= 24:
        x, w = np.polynomial.legendre.leggauss(n)
        return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w
    panels = math.ceil(n / panel_order)
    x, w = np.polynomial.legendre.leggauss(panel_order)
    edges = np.linspace(a, b, panels + 1)
    lo, hi = edges[:-1, None], edges[1:, None]
    return (0.5 * (hi - lo) * x + 0.5 * (hi + lo)).ravel(), (0.5 * (hi - lo) * w + 0 * lo).ravel()


def volume_nodes(profile, n: int):
    """Cartesian nodes and weights covering the support of ``profile``."""
    nphi = 2 * n
    phi = 2.0 * math.pi * np.arange(nphi) / nphi
    wphi = 2.0 * math.pi / nphi
    if isinstance(profile, SphericalProfile):
        r, wr = gauss_legendre(0.0, profile.support_radius, n)
        u, wu = gauss_legendre(-1.0, 1.0, n)
        R, U, PHI = np.meshgrid(r, u, phi, indexing="ij")
        S = np.sqrt(1.0 - U * U)
        x = np.stack([R * S * np.cos(PHI), R * S * np.sin(PHI), R * U], axis=-1)
        w = (wr * r * r)[:, None, None] * wu[None, :, None] * wphi + 0 * PHI
    elif isinstance(profile, CylindricalProfile):
        rho, wrho = gauss_legendre(0.0, profile.R, n)
        z, wz = gauss_legendre(-0.5 * profile.H, 0.5 * profile.H, n)
        RHO, Z, PHI = np.meshgrid(rho, z, phi, indexing="ij")
        x = np.stack([RHO * np.cos(PHI), RHO * np.sin(PHI), Z], axis=-1)
        w = (wrho * rho)[:, None, None] * wz[None, :, None] * wphi + 0 * PHI
    else:
        raise WrongProfileKindError(f"unsupported profile {type(profile).__name__}")
    return x.reshape(-1, 3), w.ravel()


def spin_current(profile, m, x):
    """j = grad P x m at Cartesian points ``x`` (A/m^2)."""
    return np.cross(profile.gradient_at(x), m)


def mirror_point(x, d):
    """Reflection through the plane z = d."""
    x = np.array(x, dtype=float, copy=True)
    x[..., 2] = 2.0 * d - x[..., 2]
    return x


def _moment(geom, constants, eta=None):
    eta = geom.eta if eta is None else eta
    return constants.g_factor * constants.muB * geom.J * moment_direction(eta)


def _check_geometry(profile, geom):
    if geom.d <= profile.z_extent:
        raise InvalidGeometryError("the density must lie entirely in region I")


# ---------------------------------------------------------------------------
# energies
# ---------------------------------------------------------------------------


def _pair_sum(xa, ja, xb, jb):
    """sum_ik ja_i . jb_k / |xa_i - xb_k| with weights already folded in."""
    total = 0.0
    for s in range(0, len(xa), _CHUNK):
        diff = xa[s:s + _CHUNK, None, :] - xb[None, :, :]
        dist = np.sqrt(np.einsum("ikc,ikc->ik", diff, diff))
        total += float(np.sum((ja[s:s + _CHUNK] @ jb.T) / dist))
    return total


def image_energy_tgl(profile, geom: ProbeGeometry, n: int, eta=None, m=None,
                     constants: PhysicalConstants = CODATA) -> float:
    """Tensor Gauss-Legendre value of (1/2) int j . A_image (J)."""
    _check_geometry(profile, geom)
    m = _moment(geom, constants, eta) if m is None else np.asarray(m, dtype=float)
    x, w = volume_nodes(profile, n)
    j = spin_current(profile, m, x) * w[:, None]
    # mirrored current: image point R x', components M j(x'), scaled by the contrast
    pair = _pair_sum(x, j, mirror_point(x, geom.d), j * MIRROR)
    return constants.mu0 * geom.mu_r1 * geom.contrast / (8.0 * math.pi) * pair


def _philox(seed: int, block: int) -> np.random.Generator:
    # key = seed and a per-block counter word: blocks never share a stream
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[0, 0, int(block), 0]))


def _uniform_ball(gen, n, radius, center=(0.0, 0.0, 0.0)):
    v = gen.standard_normal((n, 3))
    v /= np.linalg.norm(v, axis=1)[:, None]
    r = radius * gen.random(n) ** (1.0 / 3.0)
    return np.asarray(center) + v * r[:, None]


def _mc_blocks(spec: QuadratureSpec, sampler: Callable):
    """Mean and standard error of ``sampler(gen, n)`` over counter-keyed blocks.

    Block sums are reduced in block order, so the result depends only on the
    seed, the sample count and the block size.
    """
    nblocks = math.ceil(spec.samples / spec.block_size)
    s1 = np.empty(nblocks)
    s2 = np.empty(nblocks)
    counts = np.empty(nblocks)
    for b in range(nblocks):
        n = min(spec.block_size, spec.samples - b * spec.block_size)
        f = sampler(_philox(spec.seed, b), n)
        s1[b], s2[b], counts[b] = np.sum(f), np.sum(f * f), n
    N = float(counts.sum())
    mean = float(s1.sum()) / N
    var = max(float(s2.sum()) / N - mean * mean, 0.0)
    return mean, math.sqrt(var / N)


def _bounding_radius(profile):
    return profile.extent


def image_energy_mc(profile, geom: ProbeGeometry, spec: QuadratureSpec, eta=None,
                    constants: PhysicalConstants = CODATA) -> OracleResult:
    _check_geometry(profile, geom)
    m = _moment(geom, constants, eta)
    R = _bounding_radius(profile)
    vol = 4.0 / 3.0 * math.pi * R**3

    def sample(gen, n):
        x = _uniform_ball(gen, n, R)
        y = _uniform_ball(gen, n, R)
        ja = spin_current(profile, m, x)
        jb = spin_current(profile, m, y) * MIRROR
        dist = np.linalg.norm(x - mirror_point(y, geom.d), axis=1)
        # the kernel's constant and linear Taylor terms about the origin have zero mean
        # against currents with vanishing integral; subtracting them is an exact control variate
        linear = 1.0 / (2.0 * geom.d) + (x[:, 2] + y[:, 2]) / (4.0 * geom.d**2)
        return np.einsum("ic,ic->i", ja, jb) * (1.0 / dist - linear)

    mean, err = _mc_blocks(spec, sample)
    mean, err = float(mean), float(err)
    pref = constants.mu0 * geom.mu_r1 * geom.contrast / (8.0 * math.pi) * vol * vol
    return OracleResult(pref * mean, abs(pref) * err, SCHEME_MC, True, spec.samples)


def self_energy_mc(profile, geom: ProbeGeometry, spec: QuadratureSpec, eta=None,
                   constants: PhysicalConstants = CODATA) -> OracleResult:
    m = _moment(geom, constants, eta)
    R = _bounding_radius(profile)
    vol = 4.0 / 3.0 * math.pi * R**3

    def sample(gen, n):
        x = _uniform_ball(gen, n, R)
        y = _uniform_ball(gen, n, R)
        ja = spin_current(profile, m, x)
        jb = spin_current(profile, m, y)
        return np.einsum("ic,ic->i", ja, jb) / np.linalg.norm(x - y, axis=1)

    mean, err = _mc_blocks(spec, sample)
    pref = constants.mu0 * geom.mu_r1 / (8.0 * math.pi) * vol * vol
    return OracleResult(pref * mean, pref * err, SCHEME_MC, True, spec.samples)


def self_energy_tgl(profile, geom: ProbeGeometry, n: int, eta=None,
                    constants: PhysicalConstants = CODATA) -> float:
    """(1/2) int j . A_direct with A from the field-centered Green's integral."""
    m = _moment(geom, constants, eta)
    x, w = volume_nodes(profile, n)
    j = spin_current(profile, m, x)
    A = green_vector_potential(profile, m, x, n=n, mu_r1=geom.mu_r1, constants=constants)
    return 0.5 * float(np.sum(w * np.einsum("ic,ic->i", j, A)))


def _nested(fn, spec: QuadratureSpec):
    """Refine ``fn(n)`` by factors of 3/2 until successive values agree to the tolerance."""
    n = spec.points
    prev = fn(n)
    evaluations = 1
    while True:
        n_next = min(spec.max_points, max(n + 2, (3 * n) // 2))
        cur = fn(n_next)
        evaluations += 1
        err = abs(cur - prev)
        if err <= spec.tolerance * abs(cur) or err == 0.0:
            return OracleResult(cur, err, SCHEME_NESTED, True, evaluations)
        if n_next >= spec.max_points:
            return OracleResult(cur, err, SCHEME_NESTED, False, evaluations)
        n, prev = n_next, cur


def _deterministic(fn, spec: QuadratureSpec):
    if spec.scheme == SCHEME_NESTED:
        return _nested(fn, spec)
    n = spec.points
    value = fn(n)
    # error from a coarser companion rule
    err = abs(value - fn(max(2, (2 * n) // 3)))
    return OracleResult(value, err, SCHEME_TGL, err < abs(value) or value == 0.0, 2)


def oracle_energy(profile, geom: ProbeGeometry, eta: Optional[float] = None,
                  spec: QuadratureSpec = QuadratureSpec(), include_self: bool = True,
                  constants: PhysicalConstants = CODATA) -> OracleEnergy:
    """(1/2) int j . (A + A_image) d^3x by brute-force quadrature."""
    _check_geometry(profile, geom)
    if spec.scheme == SCHEME_MC:
        img = image_energy_mc(profile, geom, spec, eta, constants)
        slf = self_energy_mc(profile, geom, spec, eta, constants) if include_self else OracleResult(0.0, 0.0, SCHEME_MC)
        return OracleEnergy(slf, img)
    if geom.contrast == 0.0:
        img = OracleResult(0.0, 0.0, spec.scheme)
    else:
        img = _deterministic(lambda n: image_energy_tgl(profile, geom, n, eta, constants=constants), spec)
    if include_self:
        slf = _deterministic(lambda n: self_energy_tgl(profile, geom, n, eta, constants), spec)
    else:
        slf = OracleResult(0.0, 0.0, spec.scheme)
    return OracleEnergy(slf, img)


# ---------------------------------------------------------------------------
# Green's integrals at field points
# ---------------------------------------------------------------------------


def _direction_rule(n):
    """Unit vectors and solid-angle weights: GL in cos(alpha), trapezoid in beta."""
    u, wu = gauss_legendre(-1.0, 1.0, n)
    nb = 2 * n
    beta = 2.0 * math.pi * np.arange(nb) / nb
    U, B = np.meshgrid(u, beta, indexing="ij")
    S = np.sqrt(1.0 - U * U)
    omega = np.stack([S * np.cos(B), S * np.sin(B), U], axis=-1).reshape(-1, 3)
    return omega, np.repeat(wu * (2.0 * math.pi / nb), nb)


def _cone_rule(axis, cos_max, n):
    """Directions within the cone of half-angle acos(cos_max) about ``axis``.

    The chord length vanishes like sqrt(cos(alpha) - cos_max) at the cone
    edge; cos(alpha) = cos_max + (1 - cos_max) v^2 makes it linear in v there.
    """
    v, wv = gauss_legendre(0.0, 1.0, n)
    c = cos_max + (1.0 - cos_max) * v * v
    wc = 2.0 * (1.0 - cos_max) * v * wv
    nb = 2 * n
    beta = 2.0 * math.pi * np.arange(nb) / nb
    C, B = np.meshgrid(c, beta, indexing="ij")
    S = np.sqrt(np.clip(1.0 - C * C, 0.0, None))
    local = np.stack([S * np.cos(B), S * np.sin(B), C], axis=-1).reshape(-1, 3)
    # rotate local z onto axis
    a = axis / np.linalg.norm(axis)
    helper = np.array([1.0, 0.0, 0.0]) if abs(a[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(a, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(a, e1)
    omega = local[:, :1] * e1 + local[:, 1:2] * e2 + local[:, 2:] * a
    return omega, np.repeat(wc * (2.0 * math.pi / nb), nb)


def _ray_segments(x, omega, center, radius):
    """Entry and exit distances of rays x + s omega through a ball (NaN if missed)."""
    rel = x - center
    b = omega @ rel
    c = rel @ rel - radius * radius
    disc = b * b - c
    root = np.sqrt(np.clip(disc, 0.0, None))
    s0 = np.maximum(-b - root, 0.0)
    s1 = -b + root
    hit = (disc > 0) & (s1 > 0)
    return np.where(hit, s0, np.nan), np.where(hit, s1, np.nan)


def _green_at_point(current, x, center, radius, n, kernel):
    rel = x - center
    dist = float(np.linalg.norm(rel))
    if dist < radius:
        omega, wo = _direction_rule(n)
    else:
        cos_max = math.sqrt(max(0.0, 1.0 - (radius / dist) ** 2))
        omega, wo = _cone_rule(-rel, cos_max, n)
    s0, s1 = _ray_segments(x, omega, center, radius)
    ok = np.isfinite(s0)
    omega, wo, s0, s1 = omega[ok], wo[ok], s0[ok], s1[ok]
    t, wt = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (s1 - s0)
    s = 0.5 * (s1 + s0)[:, None] + half[:, None] * t
    pts = x + s[..., None] * omega[:, None, :]
    j = current(pts.reshape(-1, 3)).reshape(pts.shape)
    vals = kernel(j, s, omega)
    return np.einsum("dkc,k,d->c", vals, wt, wo * half)


def _kernel_potential(j, s, omega):
    # 1/s Green's function times the s^2 Jacobian
    return j * s[..., None]


def _kernel_biot_savart(j, s, omega):
    # j x (x - x') / |x - x'|^3 with x - x' = -s omega, times s^2
    return -np.cross(j, omega[:, None, :])


def _green_field(current, x, center, radius, n, kernel):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.stack([_green_at_point(current, xi, center, radius, n, kernel) for xi in x])
    return out


def green_vector_potential(profile, m, x, n: int = 24, mu_r1: float = 1.0,
                           constants: PhysicalConstants = CODATA) -> np.ndarray:
    """(mu0 mu_r1 / 4 pi) int j(x') / |x - x'| d^3x' for the spin's own current."""
    current = lambda p: spin_current(profile, m, p)
    pref = constants.mu0 * mu_r1 / (4.0 * math.pi)
    return pref * _green_field(current, x, np.zeros(3), profile.extent, n, _kernel_potential)


def _image_current(profile, geom, m):
    # current of the mirrored density at x', scaled by the contrast
    return lambda p: geom.contrast * spin_current(profile, m, mirror_point(p, geom.d)) * MIRROR


def oracle_vector_potential(profile, geom: ProbeGeometry, x, spec: QuadratureSpec = QuadratureSpec(points=24),
                            part: str = "direct", constants: PhysicalConstants = CODATA) -> np.ndarray:
    """Green's-integral vector potential (T m) at Cartesian points ``x``.

    ``part`` selects the spin's own current (``"direct"``), the mirrored
    image current (``"image"``), or their sum (``"total"``).
    """
    m = _moment(geom, constants)
    pref = constants.mu0 * geom.mu_r1 / (4.0 * math.pi)
    out = 0.0
    if part in ("direct", "total"):
        out = out + pref * _green_field(lambda p: spin_current(profile, m, p), x, np.zeros(3), profile.extent,
                                        spec.points, _kernel_potential)
    if part in ("image", "total"):
        out = out + pref * _green_field(_image_current(profile, geom, m), x, np.array([0.0, 0.0, 2.0 * geom.d]),
                                        profile.extent, spec.points, _kernel_potential)
    if part not in ("direct", "image", "total"):
        raise ValueError("part must be 'direct', 'image' or 'total'")
    return out


def oracle_induction(profile, geom: ProbeGeometry, x, spec: QuadratureSpec = QuadratureSpec(points=24),
                     part: str = "total", constants: PhysicalConstants = CODATA) -> np.ndarray:
    """Biot-Savart induction (T) of the direct and/or mirrored currents."""
    m = _moment(geom, constants)
    pref = constants.mu0 * geom.mu_r1 / (4.0 * math.pi)
    out = 0.0
    if part in ("direct", "total"):
        out = out + pref * _green_field(lambda p: spin_current(profile, m, p), x, np.zeros(3), profile.extent,
                                        spec.points, _kernel_biot_savart)
    if part in ("image", "total"):
        out = out + pref * _green_field(_image_current(profile, geom, m), x, np.array([0.0, 0.0, 2.0 * geom.d]),
                                        profile.extent, spec.points, _kernel_biot_savart)
    if part not in ("direct", "image", "total"):
        raise ValueError("part must be 'direct', 'image' or 'total'")
    return out


# ---------------------------------------------------------------------------
# axisymmetric D_mag references
# ---------------------------------------------------------------------------


def spin_tensor(profile, geom: ProbeGeometry, n: int = 16, constants: PhysicalConstants = CODATA) -> np.ndarray:
    """Symmetric K with image energy = n^T K n for a unit-length spin direction n (J).

    Built from six image-energy evaluations with m along axes and diagonals.
    """
    scale = constants.g_factor * constants.muB * geom.J
    E = lambda v: image_energy_tgl(profile, geom, n, m=scale * np.asarray(v, dtype=float), constants=constants)
    eye = np.eye(3)
    K = np.diag([E(eye[a]) for a in range(3)])
    for a, b in ((0, 1), (0, 2), (1, 2)):
        K[a, b] = K[b, a] = 0.5 * (E(eye[a] + eye[b]) - K[a, a] - K[b, b])
    return K


def oracle_d_mag_tensor(profile, geom: ProbeGeometry, n: int = 16,
                        constants: PhysicalConstants = CODATA) -> EffectiveD:
    """D_mag (Hz) from the J_z^2 part of the image-energy tensor, with J = 1."""
    g = geom.replace(J=1.0)
    K = spin_tensor(profile, g, n, constants)
    K2 = spin_tensor(profile, g, max(2, (2 * n) // 3), constants)
    val = float(K[2, 2] - K[0, 0]) / constants.h
    err = abs(val - float(K2[2, 2] - K2[0, 0]) / constants.h)
    return EffectiveD(val, METHOD_ORACLE, err, geom)


def oracle_d_mag_zeta(profile, geom: ProbeGeometry, n: int = 48, constants: PhysicalConstants = CODATA) -> EffectiveD:
    """D_mag (Hz) from the image Coulomb potential zeta of the density.

    zeta(x) = int P(x') / |x - x'_n| d^3x' is summed directly over mirrored
    source nodes; D = mu0 mu_r1 muB^2 contrast / (2h) iint dzeta/drho dP/drho rho drho dz.
    The error estimate compares against a rule with two thirds the nodes.
    """
    val = _zeta_route(profile, geom, n, constants)
    err = abs(val - _zeta_route(profile, geom, max(4, (2 * n) // 3), constants))
    return EffectiveD(val, METHOD_ORACLE, err, geom)


def _axial_rule(profile, n):
    if isinstance(profile, CylindricalProfile):
        rho, wr = gauss_legendre(0.0, profile.R, n)
        z, wz = gauss_legendre(-0.5 * profile.H, 0.5 * profile.H, n)
        RHO, Z = np.meshgrid(rho, z, indexing="ij")
        return RHO.ravel(), Z.ravel(), np.outer(wr, wz).ravel()
    if isinstance(profile, SphericalProfile):
        # polar rule mapped to (rho, z); weight includes the rho dz drho -> r dr dtheta Jacobian
        r, wr = gauss_legendre(0.0, profile.support_radius, n)
        t, wt = gauss_legendre(0.0, math.pi, n)
        Rr, T = np.meshgrid(r, t, indexing="ij")
        return (Rr * np.sin(T)).ravel(), (Rr * np.cos(T)).ravel(), np.outer(wr * r, wt).ravel()
    raise WrongProfileKindError(f"unsupported profile {type(profile).__name__}")


def _zeta_route(profile, geom, n, constants):
    _check_geometry(profile, geom)
    rho, z, w = _axial_rule(profile, n)
    dens = profile.axial_density(rho, z)
    g_rho, _ = profile.axial_gradient(rho, z)
    src_rho, src_z, src_w = rho, z, w * rho * dens
    nphi = 2 * n
    cphi = np.cos(2.0 * math.pi * (np.arange(nphi) + 0.5) / nphi)
    wphi = 2.0 * math.pi / nphi
    keep = src_w != 0.0
    src_rho, src_z, src_w = src_rho[keep], src_z[keep], src_w[keep]
    d_zeta = np.empty(rho.size)
    for s in range(0, rho.size, 64):
        r = rho[s:s + 64, None, None]
        dz = z[s:s + 64, None, None] - (2.0 * geom.d - src_z[None, :, None])
        rr = src_rho[None, :, None]
        planar = r - rr * cphi
        D2 = r * r + rr * rr - 2.0 * r * rr * cphi + dz * dz
        kern = -planar / (D2 * np.sqrt(D2))
        d_zeta[s:s + 64] = wphi * np.einsum("ikp,k->i", kern, src_w)
    overlap = float(np.sum(w * rho * d_zeta * g_rho))
    return constants.energy_scale * geom.mu_r1 * geom.contrast / (2.0 * constants.h) * overlap


def oracle_image_moment_mc(profile, geom: ProbeGeometry, l: int, spec: QuadratureSpec) -> OracleResult:
    """Monte Carlo Q_l = int P Y_l^0(theta_n) / r_n^(l+1) over a cylindrical support."""
    from scipy import special

    if not isinstance(profile, CylindricalProfile):
        raise WrongProfileKindError("Monte Carlo image moments sample a cylindrical support")
    R, H, d = profile.R, profile.H, geom.d
    vol = math.pi * R * R * H
    Nl = math.sqrt((2 * l + 1) / (4.0 * math.pi))

    def sample(gen, n):
        rho = R * np.sqrt(gen.random(n))
        z = H * (gen.random(n) - 0.5)
        zeta = 2.0 * d - z
        rn = np.hypot(rho, zeta)
        return profile.density(rho, z) * Nl * special.eval_legendre(l, zeta / rn) / rn ** (l + 1)

    mean, err = _mc_blocks(spec, sample)
    return OracleResult(vol * mean, vol * err, SCHEME_MC, True, spec.samples)


# ---------------------------------------------------------------------------
# finite-difference vector calculus
# ---------------------------------------------------------------------------


class StencilShiftWarning(UserWarning):
    """A one-sided stencil replaced the central one near a boundary."""


@dataclass(frozen=True)
class FDResult:
    curl: np.ndarray
    divergence: float
    curl_error: np.ndarray
    divergence_error: float
    shifted_axes: tuple = field(default_factory=tuple)


def _stencil_ok(field_fn, x, pts, region):
    if region is not None:
        here = region(x)
        if any(region(p) != here for p in pts):
            return None
    try:
        return [np.asarray(field_fn(p), dtype=float) for p in pts]
    except RegionError:
        return None


def _axis_derivative(field_fn, x, axis, h, region):
    """Derivative of the field along ``axis`` with step h, Richardson-extrapolated."""
    e = np.zeros(3)
    e[axis] = 1.0

    def central(step):
        vals = _stencil_ok(field_fn, x, [x + step * e, x - step * e], region)
        return None if vals is None else (vals[0] - vals[1]) / (2.0 * step)

    def one_sided(step, sign):
        pts = [x, x + sign * step * e, x + 2 * sign * step * e]
        vals = _stencil_ok(field_fn, x, pts, region)
        if vals is None:
            return None
        return sign * (-3.0 * vals[0] + 4.0 * vals[1] - vals[2]) / (2.0 * step)

    coarse, fine = central(h), central(0.5 * h)
    shifted = False
    if coarse is None or fine is None:
        shifted = True
        for sign in (1.0, -1.0):
            coarse, fine = one_sided(h, sign), one_sided(0.5 * h, sign)
            if coarse is not None and fine is not None:
                break
        else:
            raise RegionError("no admissible stencil along axis %d" % axis)
    # both stencils are second order
    value = (4.0 * fine - coarse) / 3.0
    error = np.abs(fine - coarse) / 3.0
    return value, error, shifted


def fd_vector_calculus(field_fn: Callable, x, h: float, region: Optional[Callable] = None) -> FDResult:
    """Curl and divergence of ``field_fn`` at ``x`` by Richardson-extrapolated differences.

    ``region`` (optional) labels points; a stencil whose points leave the
    center's region, or on which the field raises :class:`RegionError`, is
    replaced by a one-sided stencil and a :class:`StencilShiftWarning` is issued.
    """
    x = np.asarray(x, dtype=float)
    if not h > 0:
        raise ValueError("h must be positive")
    jac = np.empty((3, 3))
    err = np.empty((3, 3))
    shifted = []
    for b in range(3):
        val, e, s = _axis_derivative(field_fn, x, b, h, region)
        jac[:, b], err[:, b] = val, e
        if s:
            shifted.append(b)
    if shifted:
        warnings.warn(f"one-sided stencil used along axes {shifted}", StencilShiftWarning, stacklevel=2)
    curl = np.array([jac[2, 1] - jac[1, 2], jac[0, 2] - jac[2, 0], jac[1, 0] - jac[0, 1]])
    curl_err = np.array([err[2, 1] + err[1, 2], err[0, 2] + err[2, 0], err[1, 0] + err[0, 1]])
    return FDResult(curl, float(np.trace(jac)), curl_err, float(np.trace(err)), tuple(shifted))
