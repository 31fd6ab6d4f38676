"""Command-line front end.

Every command takes its parameters from an optional JSON config file and
from flags that mirror the config keys one to one (``d_m`` <-> ``--d-m``);
flags win.  Outputs and a manifest are written atomically after the whole
computation has succeeded.

Exit codes: 0 ok, 2 configuration error, 3 convergence failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
import warnings
from dataclasses import dataclass
from typing import Any, Callable, Optional

import numpy as np

from . import __version__
from .errors import FitFailure, MagEnergyError, QuadratureFailure

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNCONVERGED = 3
EXIT_IO = 4

THREADS_ENV = "MAGENERGY_THREADS"


class ConfigError(Exception):
    pass


class ConvergenceError(Exception):
    pass


@dataclass(frozen=True)
class Param:
    key: str
    kind: str  # float, int, bool, str, json
    default: Any
    help: str = ""


def _geometry_params(d=1e-9, mu_r2=0.0):
    return [
        Param("d_m", "float", d, "spin-to-interface distance (m)"),
        Param("mu_r_I", "float", 1.0, "relative permeability of region I"),
        Param("mu_r_II", "float", mu_r2, "relative permeability of region II"),
        Param("J", "float", 1.0, "spin quantum number"),
        Param("eta_rad", "float", 0.0, "tilt of the spin from the interface normal (rad)"),
    ]


SWEEP = [
    Param("d_min_m", "float", 1e-9, "smallest distance (m)"),
    Param("d_max_m", "float", 100e-9, "largest distance (m)"),
    Param("n_points", "int", 100, "number of log-spaced distances"),
]

COMMON = [
    Param("output", "str", None, "output file"),
    Param("format", "str", "csv", "csv or json"),
    Param("manifest", "str", None, "manifest path (default: <output>.manifest.json)"),
]

MATERIALS = Param("materials", "json", None, "JSON object name -> mu_r_II (default: four reference materials)")


def _params(command):
    from .protocol import D_GS_HZ
    from .sensing import DEFAULT_DMIN_HZ

    table = {
        "field-map": _geometry_params() + [
            Param("R_m", "float", 0.25e-9, "support radius of the spherical density (m)"),
            Param("resolution", "int", 64, "samples per in-plane axis"),
            Param("half_width_factor", "float", 1.0, "panel half width in units of d"),
            Param("include_region_two", "bool", True, "fill region II with the illustrative field"),
        ],
        "dmag-curve": [MATERIALS, Param("mu_r_I", "float", 1.0, "")] + SWEEP + [
            Param("profile", "json", None, "cylindrical profile object; default spherical closed form"),
            Param("l_max", "int", 80, "largest harmonic order for cylindrical profiles"),
        ],
        "cyl-compare": [
            Param("lambda_min", "float", 0.3, ""), Param("lambda_max", "float", 3.0, ""),
            Param("delta_min", "float", 2.0, ""), Param("delta_max", "float", 20.0, ""),
            Param("resolution", "int", 8, "cells per axis"),
            Param("l_max", "int", 80, ""), Param("tol", "float", 1e-9, "series truncation tolerance"),
            Param("allow_unconverged", "bool", False, "write flagged results instead of failing"),
        ],
        "dead-layer": SWEEP[:1] + [Param("d_max_m", "float", 10e-9, ""), Param("n_points", "int", 50, "")] + [
            Param("d_min_hz", "float", DEFAULT_DMIN_HZ, "minimal detectable D change (Hz)"),
            Param("mu_r_active", "float", None, "permeability of the active film; omit for contrast 1"),
        ],
        "detectability": [MATERIALS, Param("mu_r_I", "float", 1.0, "")] + SWEEP + [
            Param("d_min_hz", "float", DEFAULT_DMIN_HZ, "bulk minimal detectable D change (Hz)"),
            Param("surface_t2_table", "json", None, "[[d_m, factor], ...] surface degradation table"),
        ],
        "protocol-sim": _geometry_params(d=2e-9) + [
            Param("reference_hz", "float", D_GS_HZ - 1e6, "reference oscillator frequency (Hz)"),
            Param("tau_max_s", "float", 10e-6, ""), Param("n_tau", "int", 200, ""),
            Param("shots", "int", 10000, "shots per point; 0 disables shot noise"),
            Param("seed", "int", 0, ""), Param("t2_s", "float", None, "optional coherence time (s)"),
        ],
        "oracle-verify": [
            Param("points", "int", 12, "tensor Gauss-Legendre nodes per axis"),
            Param("samples", "int", 200000, "Monte Carlo samples"),
            Param("seed", "int", 0, ""),
            Param("tolerance", "float", 1e-4, "relative tolerance for deterministic checks"),
        ],
    }
    return table[command] + COMMON


COMMANDS = ("field-map", "dmag-curve", "cyl-compare", "dead-layer", "detectability", "protocol-sim", "oracle-verify")


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------


def _coerce(p: Param, value):
    if value is None:
        return None
    try:
        if p.kind == "float":
            if isinstance(value, bool):
                raise TypeError
            v = float(value)
            if math.isnan(v):
                raise ValueError
            return v
        if p.kind == "int":
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise TypeError
            return int(value)
        if p.kind == "bool":
            if isinstance(value, bool):
                return value
            if isinstance(value, str) and value.lower() in ("true", "false", "1", "0"):
                return value.lower() in ("true", "1")
            raise TypeError
        if p.kind == "str":
            if not isinstance(value, str):
                raise TypeError
            return value
        if p.kind == "json":
            return json.loads(value) if isinstance(value, str) else value
    except (TypeError, ValueError, json.JSONDecodeError):
        raise ConfigError(f"field {p.key!r}: expected {p.kind}, got {value!r}") from None
    raise AssertionError(p.kind)


def _load_config_file(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return data


def resolve_config(command: str, file_cfg: dict, flags: dict) -> dict:
    params = {p.key: p for p in _params(command)}
    file_cfg = dict(file_cfg)
    file_cmd = file_cfg.pop("command", command)
    if file_cmd != command:
        raise ConfigError(f"field 'command': config is for {file_cmd!r}, not {command!r}")
    unknown = sorted(set(file_cfg) - set(params))
    if unknown:
        raise ConfigError(f"unknown field(s) {unknown} for {command}; allowed: {sorted(params)}")
    cfg = {}
    for key, p in params.items():
        value = p.default
        if key in file_cfg:
            value = _coerce(p, file_cfg[key])
        if flags.get(key) is not None:
            value = _coerce(p, flags[key])
        cfg[key] = value
    if cfg["output"] is None:
        raise ConfigError("field 'output': an output path is required")
    if cfg["format"] not in ("csv", "json"):
        raise ConfigError("field 'format': must be 'csv' or 'json'")
    return cfg


def _flag(key):
    return "--" + key.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="magenergy", description="Magnetic-energy magnetometry calculations.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON config file; flags override its values")
        for p in _params(name):
            sp.add_argument(_flag(p.key), dest=p.key, default=None, help=p.help or None)
    return parser


# ---------------------------------------------------------------------------
# command implementations: each returns (payload, results-for-manifest)
# ---------------------------------------------------------------------------


def _geometry(cfg):
    from .model import ProbeGeometry

    return ProbeGeometry(d=cfg["d_m"], mu_r1=cfg["mu_r_I"], mu_r2=cfg["mu_r_II"], J=cfg["J"], eta=cfg["eta_rad"])


def _distances(cfg):
    if not (0 < cfg["d_min_m"] <= cfg["d_max_m"]) or cfg["n_points"] < 1:
        raise ConfigError("fields 'd_min_m', 'd_max_m', 'n_points': need 0 < d_min_m <= d_max_m and n_points >= 1")
    return np.geomspace(cfg["d_min_m"], cfg["d_max_m"], cfg["n_points"])


def _materials(cfg):
    from .sensing import DEFAULT_MATERIALS

    mats = cfg["materials"]
    if mats is None:
        return dict(DEFAULT_MATERIALS)
    if not isinstance(mats, dict) or not mats:
        raise ConfigError("field 'materials': expected a non-empty object name -> mu_r_II")
    try:
        return {str(k): float(v) for k, v in mats.items()}
    except (TypeError, ValueError):
        raise ConfigError("field 'materials': values must be numbers") from None


def _table_payload(header, rows, fmt):
    if fmt == "json":
        return json.dumps([dict(zip(header, r)) for r in rows], indent=1) + "\n"
    lines = [",".join(header)] + [",".join(_cell(v) for v in r) for r in rows]
    return "\n".join(lines) + "\n"


def _cell(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def cmd_field_map(cfg):
    from .magnetostatics import figure_panel_extent, render_field_grid
    from .model import SphericalBessel

    geom = _geometry(cfg)
    n = cfg["resolution"]
    if n < 1:
        raise ConfigError("field 'resolution': must be >= 1")
    grid = render_field_grid(SphericalBessel.normalized(cfg["R_m"]), geom,
                             figure_panel_extent(geom, cfg["half_width_factor"]), (n, 1, n),
                             include_region_two=cfg["include_region_two"])
    payload = grid.to_json() if cfg["format"] == "json" else grid.to_csv()
    return payload, {"max_abs_B_T": float(grid.magnitude.max())}


def cmd_dmag_curve(cfg):
    from .cylindrical import d_mag_cylindrical
    from .energy import d_mag_spherical
    from .model import CylindricalProfile, ProbeGeometry, profile_from_config

    ds = _distances(cfg)
    profile = None
    if cfg["profile"] is not None:
        profile = profile_from_config(cfg["profile"])
        if not isinstance(profile, CylindricalProfile):
            profile = None  # spherical densities all share the closed form
    rows, unconverged = [], []
    for name, mu in _materials(cfg).items():
        for d in ds:
            geom = ProbeGeometry(d=float(d), mu_r1=cfg["mu_r_I"], mu_r2=mu)
            if profile is None:
                res = d_mag_spherical(geom)
            else:
                res = d_mag_cylindrical(profile, geom, cfg["l_max"])
                if not res.converged:
                    unconverged.append((name, float(d)))
            rows.append((name, mu, float(d), float(res.value_hz), res.method))
    if unconverged:
        raise ConvergenceError(f"series unconverged at {unconverged[:3]}")
    header = ("material", "mu_r_II", "d_m", "D_mag_Hz", "method")
    return _table_payload(header, rows, cfg["format"]), {"rows": len(rows)}


def _threads():
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"environment {THREADS_ENV}={raw!r} is not an integer") from None
    if n < 1:
        raise ConfigError(f"environment {THREADS_ENV} must be >= 1")
    return n


def cmd_cyl_compare(cfg):
    from .cylindrical import CylSphComparison, compare_map

    try:
        cells = compare_map((cfg["lambda_min"], cfg["lambda_max"]), (cfg["delta_min"], cfg["delta_max"]),
                            cfg["resolution"], cfg["l_max"], cfg["tol"], threads=_threads())
    except ValueError as exc:
        raise ConfigError(f"cyl-compare ranges: {exc}") from None
    bad = [(c.lam, c.delta) for c in cells if not c.converged]
    if bad and not cfg["allow_unconverged"]:
        raise ConvergenceError(f"{len(bad)} cell(s) unconverged, e.g. lambda, delta = {bad[0]}")
    header = CylSphComparison.HEADER
    rows = [tuple(float(v) for v in c.row()) for c in cells]
    results = {"unconverged_cells": [list(b) for b in bad],
               "max_abs_rel_diff": max(abs(c.rel_diff) for c in cells)}
    return _table_payload(header, rows, cfg["format"]), results


def cmd_dead_layer(cfg):
    from .sensing import DEAD_LAYER_HEADER, dead_layer_curve

    mu = math.inf if cfg["mu_r_active"] is None else cfg["mu_r_active"]
    rows = dead_layer_curve(_distances(cfg), cfg["d_min_hz"], mu)
    return _table_payload(DEAD_LAYER_HEADER, rows, cfg["format"]), {"max_delta_t_m": max(r[2] for r in rows)}


def cmd_detectability(cfg):
    from .sensing import DetectabilityRow, SensitivityModel, crossing_distance, detectability_curve

    table = cfg["surface_t2_table"]
    try:
        if table is None:
            model = SensitivityModel.bulk(cfg["d_min_hz"])
        else:
            model = SensitivityModel.surface(table, cfg["d_min_hz"])
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"field 'surface_t2_table': {exc}") from None
    mats = _materials(cfg)
    rows = detectability_curve(mats, _distances(cfg), model, cfg["mu_r_I"])
    crossings = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for name, mu in mats.items():
            if mu != cfg["mu_r_I"]:
                crossings[name] = crossing_distance(mu, model, cfg["mu_r_I"])
    payload = _table_payload(DetectabilityRow.HEADER, [
        (r.material, r.mu_r2, r.d, r.d_mag_hz, r.d_min_hz, r.detectable) for r in rows], cfg["format"])
    return payload, {"crossing_distance_m": crossings}


def cmd_protocol_sim(cfg):
    from .energy import d_mag_spherical
    from .protocol import D_GS_HZ, estimate_D, ramsey_fringe

    geom = _geometry(cfg)
    D_true = D_GS_HZ + d_mag_spherical(geom).value_hz
    if cfg["n_tau"] < 8 or not cfg["tau_max_s"] > 0:
        raise ConfigError("fields 'n_tau', 'tau_max_s': need n_tau >= 8 and tau_max_s > 0")
    taus = np.linspace(0.0, cfg["tau_max_s"], cfg["n_tau"])
    shots = cfg["shots"] or None
    fringe = ramsey_fringe(D_true, taus, cfg["reference_hz"], shots=shots, seed=cfg["seed"], t2=cfg["t2_s"])
    est = estimate_D(fringe, cfg["reference_hz"])
    results = {"D_true_Hz": D_true, "D_estimate_Hz": est.D_hz, "standard_error_Hz": est.standard_error_hz,
               "within_3_sigma": bool(abs(est.D_hz - D_true) <= 3 * est.standard_error_hz)}
    if cfg["format"] == "json":
        header = ("tau_s", "p0") if shots is None else ("tau_s", "p0", "shots", "counts")
        cols = [fringe.tau, fringe.p0] if shots is None else [fringe.tau, fringe.p0, [shots] * len(taus),
                                                               fringe.counts]
        rows = [tuple(float(c[i]) if k < 2 else int(c[i]) for k, c in enumerate(cols)) for i in range(len(taus))]
        return _table_payload(header, rows, "json"), results
    return fringe.to_csv(), results


def cmd_oracle_verify(cfg):
    from .verification import run_checks

    rows = run_checks(points=cfg["points"], samples=cfg["samples"], seed=cfg["seed"], tolerance=cfg["tolerance"])
    header = ("check", "expected", "oracle", "rel_err", "tolerance", "passed")
    failed = [r[0] for r in rows if not r[5]]
    payload = _table_payload(header, rows, cfg["format"])
    if failed:
        raise ConvergenceError(f"oracle checks failed: {failed}")
    return payload, {"checks": len(rows), "failed": failed}


HANDLERS: dict[str, Callable] = {
    "field-map": cmd_field_map,
    "dmag-curve": cmd_dmag_curve,
    "cyl-compare": cmd_cyl_compare,
    "dead-layer": cmd_dead_layer,
    "detectability": cmd_detectability,
    "protocol-sim": cmd_protocol_sim,
    "oracle-verify": cmd_oracle_verify,
}


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _atomic_write_all(files: dict):
    """Write every (path -> text) pair via temp files, renaming only once all are on disk."""
    temps = []
    try:
        for path, text in files.items():
            directory = os.path.dirname(os.path.abspath(path))
            fd, tmp = tempfile.mkstemp(dir=directory, prefix=".magenergy-", suffix=".tmp")
            temps.append((tmp, path))
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        for tmp, path in temps:
            os.replace(tmp, path)
    except OSError:
        for tmp, _ in temps:
            if os.path.exists(tmp):
                os.unlink(tmp)
        raise


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def run(command: str, cfg: dict) -> int:
    payload, results = HANDLERS[command](cfg)
    out = cfg["output"]
    manifest_path = cfg["manifest"] or out + ".manifest.json"
    manifest = {
        "command": command,
        "version": __version__,
        "config": {k: v for k, v in cfg.items() if k not in ("output", "manifest")},
        "seeds": {"seed": cfg["seed"]} if "seed" in cfg else {},
        "outputs": [{"path": os.path.basename(out), "sha256": hashlib.sha256(payload.encode()).hexdigest()}],
        "results": results,
    }
    text = json.dumps(_jsonable(manifest), indent=1, sort_keys=True) + "\n"
    _atomic_write_all({out: payload, manifest_path: text})
    return EXIT_OK


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        file_cfg = _load_config_file(args.config) if args.config else {}
        cfg = resolve_config(args.command, file_cfg, flags)
        return run(args.command, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, QuadratureFailure, FitFailure) as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_UNCONVERGED
    except (MagEnergyError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
