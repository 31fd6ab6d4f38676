"""Oracle regression checks and the frozen regression manifest.

Each check pairs a fast package value (closed form or series) with an
independent oracle evaluation.  ``build_manifest`` freezes the oracle side
so tests can compare against it without recomputing.
"""

from __future__ import annotations

import math

import numpy as np

from . import magnetostatics as ms
from .cylindrical import d_mag_cylindrical, image_moment_Q
from .energy import d_mag_spherical, image_energy
from .model import (
    CylindricalBesselCosine,
    ProbeGeometry,
    SphericalBessel,
    geometry_to_config,
    profile_to_config,
)
from .oracle import (
    SCHEME_MC,
    SCHEME_TGL,
    QuadratureSpec,
    image_energy_mc,
    image_energy_tgl,
    oracle_d_mag_tensor,
    oracle_image_moment_mc,
    oracle_vector_potential,
)

REFERENCE_R = 0.25e-9
REFERENCE_H = 0.2e-9


def _row(name, expected, value, tol):
    rel = abs(value - expected) / abs(expected) if expected != 0 else abs(value)
    return (name, float(expected), float(value), float(rel), float(tol), bool(rel <= tol))


def energy_geometries():
    """Fixed spherical cases spanning d/R, contrast and tilt."""
    return [
        ProbeGeometry(d=2.0 * REFERENCE_R, mu_r2=0.0, eta=0.0),
        ProbeGeometry(d=4.0 * REFERENCE_R, mu_r2=1e6, eta=math.pi / 4),
        ProbeGeometry(d=1e-9, mu_r2=0.0, eta=math.pi / 2),
        ProbeGeometry(d=20.0 * REFERENCE_R, mu_r2=0.5, eta=2.0),
    ]


def run_checks(points: int = 12, samples: int = 200_000, seed: int = 0, tolerance: float = 1e-4):
    """Rows (check, expected, oracle, rel_err, tolerance, passed)."""
    rows = []
    sph = SphericalBessel.normalized(REFERENCE_R)
    for i, g in enumerate(energy_geometries()):
        rows.append(_row(f"image_energy_tgl[{i}]", float(image_energy(g)), image_energy_tgl(sph, g, points), tolerance))
    g = ProbeGeometry(d=1e-9, mu_r2=0.0, eta=0.7)
    mc = image_energy_mc(sph, g, QuadratureSpec(SCHEME_MC, samples=samples, seed=seed))
    exact = float(image_energy(g))
    # Monte Carlo passes if within 4 standard errors
    rows.append(("image_energy_mc", exact, float(mc.value), float(abs(mc.value - exact) / abs(exact)),
                 float(4.0 * mc.error / abs(exact)), bool(abs(mc.value - exact) <= 4.0 * mc.error)))
    x = np.array([[0.1e-9, 0.1e-9, 0.1e-9]])
    geom = ProbeGeometry(d=1e-9, mu_r2=0.0, eta=math.pi / 4)
    for part, closed in (("direct", ms.vector_potential_cartesian), ("image", ms.image_vector_potential_cartesian)):
        a = oracle_vector_potential(sph, geom, x, QuadratureSpec(points=max(points, 16)), part=part)[0]
        b = closed(sph, geom, x)[0]
        rows.append(_row(f"vector_potential_{part}", float(np.linalg.norm(b)), float(np.linalg.norm(a)), 1e-5))
    cyl = CylindricalBesselCosine.normalized(REFERENCE_H / 0.8, REFERENCE_H)
    gc = ProbeGeometry(d=5.0 * REFERENCE_H, mu_r2=0.0)
    rows.append(_row("d_mag_cylindrical_vs_tensor", oracle_d_mag_tensor(cyl, gc, points).value_hz,
                     d_mag_cylindrical(cyl, gc).value_hz, tolerance))
    rows.append(_row("d_mag_spherical_vs_tensor", oracle_d_mag_tensor(sph, ProbeGeometry(d=1e-9, mu_r2=0.0), points).value_hz,
                     d_mag_spherical(ProbeGeometry(d=1e-9, mu_r2=0.0)).value_hz, tolerance))
    return rows


def build_manifest(points: int = 14, mc_samples: int = 400_000, q_samples: int = 10_000_000, seed: int = 12345):
    """Frozen oracle values for the regression suite."""
    entries = []
    sph = SphericalBessel.normalized(REFERENCE_R)
    for i, g in enumerate(energy_geometries()):
        val = image_energy_tgl(sph, g, points)
        coarse = image_energy_tgl(sph, g, (2 * points) // 3)
        entries.append({
            "name": f"image_energy[{i}]", "kind": "image_energy", "scheme": SCHEME_TGL, "points": points,
            "seed": None, "geometry": geometry_to_config(g), "profile": profile_to_config(sph),
            "expected": val, "oracle_error": abs(val - coarse), "tolerance": 1e-4,
        })
    g = ProbeGeometry(d=1e-9, mu_r2=0.0, eta=0.7)
    spec = QuadratureSpec(SCHEME_MC, samples=mc_samples, seed=seed)
    mc = image_energy_mc(sph, g, spec)
    entries.append({
        "name": "image_energy_mc", "kind": "image_energy", "scheme": SCHEME_MC, "samples": mc_samples,
        "block_size": spec.block_size, "seed": seed, "geometry": geometry_to_config(g),
        "profile": profile_to_config(sph), "expected": mc.value, "oracle_error": mc.error,
        "tolerance": 4.0 * mc.error / abs(mc.value),
    })
    cyl = CylindricalBesselCosine.normalized(REFERENCE_H / 0.8, REFERENCE_H)
    gc = ProbeGeometry(d=5.0 * REFERENCE_H, mu_r2=0.0)
    t = oracle_d_mag_tensor(cyl, gc, points)
    entries.append({
        "name": "d_mag_cylindrical_lambda0.8_delta5", "kind": "d_mag_cylindrical", "scheme": SCHEME_TGL,
        "points": points, "seed": None, "geometry": geometry_to_config(gc), "profile": profile_to_config(cyl),
        "expected": t.value_hz, "oracle_error": t.error_estimate_hz, "tolerance": 1e-6,
    })
    q_spec = QuadratureSpec(SCHEME_MC, samples=q_samples, seed=seed, block_size=1 << 18)
    q = oracle_image_moment_mc(cyl, gc, 2, q_spec)
    entries.append({
        "name": "Q2_lambda0.8_delta5", "kind": "image_moment_Q", "l": 2, "scheme": SCHEME_MC,
        "samples": q_samples, "block_size": q_spec.block_size, "seed": seed, "geometry": geometry_to_config(gc),
        "profile": profile_to_config(cyl), "expected": q.value, "oracle_error": q.error,
        "tolerance": 3.0 * q.error / abs(q.value),
    })
    return {"description": "oracle regression values; deterministic entries use tensor Gauss-Legendre",
            "entries": entries}


def package_value(entry) -> float:
    """The fast package value that a manifest entry certifies."""
    from .model import geometry_from_config, profile_from_config

    g = geometry_from_config(entry["geometry"])
    p = profile_from_config(entry["profile"])
    if entry["kind"] == "image_energy":
        return float(image_energy(g))
    if entry["kind"] == "d_mag_cylindrical":
        return d_mag_cylindrical(p, g).value_hz
    if entry["kind"] == "image_moment_Q":
        return image_moment_Q(p, g, entry["l"])
    raise KeyError(entry["kind"])
