"""Regenerate the frozen oracle data used by the test suite.

Every number written here comes from the brute-force oracle module, never
from the closed forms or series under test.

    python3 tests/data/generate.py [--only manifest|compare|field]
"""

from __future__ import annotations

import argparse
import csv
import json
import os

import numpy as np

from magenergy import magnetostatics as ms
from magenergy.cylindrical import d_mag_cylindrical
from magenergy.energy import d_mag_spherical
from magenergy.model import CylindricalBesselCosine, ProbeGeometry, SphericalBessel
from magenergy.oracle import QuadratureSpec, oracle_d_mag_tensor, oracle_induction
from magenergy.verification import build_manifest

HERE = os.path.dirname(os.path.abspath(__file__))

COMPARE_LAMBDA = (0.3, 3.0)
COMPARE_DELTA = (2.0, 20.0)
COMPARE_N = 8
COMPARE_H = 2e-10
COMPARE_POINTS = 14

FIELD_R = 0.25e-9
FIELD_D = 1e-9
FIELD_RES = 64
FIELD_POINTS = 16
FIELD_CASES = {"field_panel_mu0.csv": 0.0, "field_panel_mu1e6.csv": 1e6}


def write_manifest():
    doc = build_manifest()
    with open(os.path.join(HERE, "oracle_manifest.json"), "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def write_compare_map():
    """D_cyl from the image-energy tensor oracle; l2_fraction from a long series."""
    rows = []
    for lam in np.linspace(*COMPARE_LAMBDA, COMPARE_N):
        for delta in np.linspace(*COMPARE_DELTA, COMPARE_N):
            profile = CylindricalBesselCosine.normalized(COMPARE_H / lam, COMPARE_H)
            geom = ProbeGeometry(d=delta * COMPARE_H, mu_r2=0.0)
            t = oracle_d_mag_tensor(profile, geom, COMPARE_POINTS)
            sph = d_mag_spherical(geom).value_hz
            series = d_mag_cylindrical(profile, geom, l_max=160, tol=1e-12)
            w = np.abs([f for _, f in series.terms])
            rows.append((float(delta), float(lam), t.value_hz, sph, (t.value_hz - sph) / (t.value_hz + sph),
                         float(w[0] / w.sum()), t.error_estimate_hz))
    with open(os.path.join(HERE, "compare_map_8x8.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("delta", "lambda", "D_cyl_Hz", "D_sph_Hz", "rel_diff", "l2_fraction", "oracle_error_Hz"))
        w.writerows([tuple(repr(v) for v in r) for r in rows])


def write_field_panels():
    """|B| on the xz panel by Biot-Savart over direct and mirrored currents; region II is omitted."""
    profile = SphericalBessel.normalized(FIELD_R)
    for name, mu in FIELD_CASES.items():
        geom = ProbeGeometry(d=FIELD_D, mu_r2=mu)
        pos = ms.grid_positions(ms.figure_panel_extent(geom), (FIELD_RES, 1, FIELD_RES))
        region = ms.classify_regions(profile, geom, pos)
        keep = region != ms.REGION_II
        B = oracle_induction(profile, geom, pos[keep], QuadratureSpec(points=FIELD_POINTS))
        mag = np.linalg.norm(B, axis=1)
        with open(os.path.join(HERE, name), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("x_m", "z_m", "region", "absB_T"))
            for p, reg, b in zip(pos[keep], region[keep], mag):
                w.writerow((repr(float(p[0])), repr(float(p[2])), reg, repr(float(b))))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--only", choices=("manifest", "compare", "field"))
    args = ap.parse_args()
    if args.only in (None, "manifest"):
        write_manifest()
    if args.only in (None, "compare"):
        write_compare_map()
    if args.only in (None, "field"):
        write_field_panels()


if __name__ == "__main__":
    main()
