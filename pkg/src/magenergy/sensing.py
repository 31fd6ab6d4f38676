"""Detection thresholds for D_mag and dead-layer thickness accuracy.

All D values use the spherical closed form, |D_mag| = |contrast| mu0 mu_r1
muB^2 / (16 pi h d^3), which holds for any spherical spin density.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import interpolate, optimize

from .constants import CODATA, PhysicalConstants
from .energy import d_mag_spherical
from .errors import InvalidGeometryError
from .model import ProbeGeometry, contrast_factor

BULK_KIND = "bulkConstant"
SURFACE_KIND = "surfaceTable"

# shot-noise limited sensitivity of a bulk NV center and the averaging time
BULK_SENSITIVITY_HZ_PER_RT_HZ = 1850.0
BULK_MEASUREMENT_TIME_S = 100.0
DEFAULT_DMIN_HZ = 200.0

DEFAULT_MATERIALS = {
    "superconductor": 0.0,
    "pyrolytic_carbon": 0.999590,
    "bismuth": 0.999834,
    "water": 0.999992,
}

# illustrative only: a surface-T2 degradation that fades out by 50 nm
EXAMPLE_SURFACE_TABLE = ((2e-9, 10.0), (5e-9, 4.0), (10e-9, 2.0), (20e-9, 1.5), (50e-9, 1.0))

CONTACT_DISTANCE_M = 1e-9


class BelowContactWarning(UserWarning):
    """A crossing distance is smaller than any realistic probe standoff."""


def dmin_from_sensitivity(sensitivity_hz_per_rt_hz: float = BULK_SENSITIVITY_HZ_PER_RT_HZ,
                          measurement_time_s: float = BULK_MEASUREMENT_TIME_S) -> float:
    """Minimal detectable D change for a given sensitivity and averaging time (Hz)."""
    if not (sensitivity_hz_per_rt_hz > 0 and measurement_time_s > 0):
        raise ValueError("sensitivity and measurement time must be positive")
    return sensitivity_hz_per_rt_hz / math.sqrt(measurement_time_s)


@dataclass(frozen=True)
class SensitivityModel:
    """D_min as a function of distance.

    ``surface_table`` holds (distance m, factor) pairs, factors >= 1 and
    non-increasing in distance.  Between entries the factor is interpolated
    monotonically; below the first entry it is clamped; beyond the last entry
    the probe is treated as bulk-like (factor 1).
    """

    kind: str = BULK_KIND
    d_min_bulk_hz: float = DEFAULT_DMIN_HZ
    surface_table: tuple = ()
    _interp: object = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        if self.kind not in (BULK_KIND, SURFACE_KIND):
            raise ValueError(f"kind must be {BULK_KIND!r} or {SURFACE_KIND!r}")
        if not (math.isfinite(self.d_min_bulk_hz) and self.d_min_bulk_hz > 0):
            raise ValueError("d_min_bulk_hz must be positive")
        table = tuple((float(d), float(f)) for d, f in self.surface_table)
        object.__setattr__(self, "surface_table", table)
        if self.kind == SURFACE_KIND:
            if len(table) < 2:
                raise ValueError("a surface table needs at least 2 entries")
            d, f = np.array(table).T
            if np.any(np.diff(d) <= 0) or d[0] <= 0:
                raise ValueError("table distances must be positive and strictly increasing")
            if np.any(f < 1.0) or np.any(np.diff(f) > 0):
                raise ValueError("table factors must be >= 1 and non-increasing in distance")
            object.__setattr__(self, "_interp", interpolate.PchipInterpolator(d, f, extrapolate=False))

    @classmethod
    def bulk(cls, d_min_hz: float = DEFAULT_DMIN_HZ) -> "SensitivityModel":
        return cls(BULK_KIND, d_min_hz)

    @classmethod
    def surface(cls, table, d_min_hz: float = DEFAULT_DMIN_HZ) -> "SensitivityModel":
        return cls(SURFACE_KIND, d_min_hz, tuple(table))

    def factor(self, d):
        d = np.asarray(d, dtype=float)
        if self.kind == BULK_KIND:
            return np.ones_like(d)
        first_d, first_f = self.surface_table[0]
        last_d = self.surface_table[-1][0]
        inner = self._interp(np.clip(d, first_d, last_d))
        return np.where(d < first_d, first_f, np.where(d > last_d, 1.0, inner))


def surface_dmin(model: SensitivityModel, d):
    """D_min (Hz) at distance(s) ``d``."""
    out = model.d_min_bulk_hz * model.factor(d)
    return float(out) if np.ndim(out) == 0 else out


def _abs_contrast(mu_r1: float, mu_r2: float) -> float:
    if math.isinf(mu_r2):
        return 1.0
    return abs(contrast_factor(mu_r1, mu_r2))


def d_mag_magnitude(d, mu_r2: float, mu_r1: float = 1.0, constants: PhysicalConstants = CODATA):
    """|D_mag| (Hz) of a spherical density at distance(s) ``d``."""
    d = np.asarray(d, dtype=float)
    unit = abs(d_mag_spherical(ProbeGeometry(d=1.0, mu_r1=mu_r1, mu_r2=0.0), constants).value_hz)
    out = _abs_contrast(mu_r1, mu_r2) * unit / d**3
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class DetectabilityRow:
    material: str
    mu_r2: float
    d: float
    d_mag_hz: float
    d_min_hz: float
    detectable: bool

    HEADER = ("material", "mu_r_II", "d_m", "D_mag_Hz", "D_min_Hz", "detectable")

    def row(self):
        return (self.material, repr(self.mu_r2), repr(self.d), repr(self.d_mag_hz), repr(self.d_min_hz),
                str(self.detectable).lower())


def _materials(mu_r2_list):
    if isinstance(mu_r2_list, dict):
        return list(mu_r2_list.items())
    return [(f"mu_r_II={m!r}", float(m)) for m in mu_r2_list]


def detectability_curve(mu_r2_list, d_values: Sequence[float], model: SensitivityModel = SensitivityModel(),
                        mu_r1: float = 1.0, constants: PhysicalConstants = CODATA) -> list:
    """|D_mag| against D_min per material and distance.

    ``mu_r2_list`` is a mapping name -> mu_r_II or a plain sequence of values
    (D_mag is taken as a magnitude: the sign only encodes dia- versus
    paramagnetic contrast).
    """
    mats = _materials(mu_r2_list)
    d_values = np.asarray(d_values, dtype=float)
    if not mats or d_values.size == 0:
        raise ValueError("material list and distance range must be non-empty")
    if np.any(d_values <= 0):
        raise InvalidGeometryError("distances must be positive")
    dmin = np.atleast_1d(surface_dmin(model, d_values))
    rows = []
    for name, mu in mats:
        D = np.atleast_1d(d_mag_magnitude(d_values, mu, mu_r1, constants))
        for d, Dv, m in zip(d_values, D, dmin):
            rows.append(DetectabilityRow(name, float(mu), float(d), float(Dv), float(m), bool(Dv >= m)))
    return rows


def crossing_distance_closed_form(mu_r2: float, d_min_hz: float, mu_r1: float = 1.0,
                                  constants: PhysicalConstants = CODATA) -> float:
    """d* = (|contrast| mu0 mu_r1 muB^2 / (16 pi h D_min))^(1/3) for a constant D_min."""
    c = _abs_contrast(mu_r1, mu_r2)
    return (c * constants.energy_scale * mu_r1 / (16.0 * math.pi * constants.h * d_min_hz)) ** (1.0 / 3.0)


def crossing_distance(mu_r2: float, model: SensitivityModel = SensitivityModel(), mu_r1: float = 1.0,
                      d_range=(1e-11, 1e-5), constants: PhysicalConstants = CODATA,
                      contact_distance: float = CONTACT_DISTANCE_M) -> Optional[float]:
    """Largest distance in ``d_range`` at which |D_mag| still reaches D_min, or None.

    The sign of log|D_mag| - log D_min is scanned from the far end of a
    logarithmic grid; the outermost sign change is refined with Brent's method.
    """
    if _abs_contrast(mu_r1, mu_r2) == 0.0:
        raise InvalidGeometryError("zero permeability contrast: D_mag vanishes identically")
    lo, hi = map(float, d_range)
    if not 0 < lo < hi:
        raise ValueError("d_range must be positive and increasing")

    def g(d):
        return math.log(d_mag_magnitude(d, mu_r2, mu_r1, constants)) - math.log(surface_dmin(model, d))

    grid = np.geomspace(lo, hi, 241)
    if model.kind == SURFACE_KIND:
        # the factor steps down to 1 past the table, raising g; keep that edge on the grid
        last = model.surface_table[-1][0]
        grid = np.unique(np.concatenate([grid, [t for t in (last, np.nextafter(last, np.inf)) if lo < t < hi]]))
    vals = np.array([g(d) for d in grid])
    if vals[-1] >= 0:
        return None
    above = np.flatnonzero(vals >= 0)
    if above.size == 0:
        return None
    i = int(above[-1])
    a, b = grid[i], grid[i + 1]
    d_star = a if vals[i] == 0 else optimize.brentq(g, a, b, xtol=1e-24, rtol=1e-14)
    if d_star < contact_distance:
        warnings.warn(f"crossing distance {d_star:.3g} m is below contact distance {contact_distance:.3g} m",
                      BelowContactWarning, stacklevel=2)
    return float(d_star)


@dataclass(frozen=True)
class DeadLayerScenario:
    """A magnetic film whose top ``t`` meters are magnetically dead.

    ``d`` is the distance from the probe to the active boundary; the dead
    layer has the permeability of region I, so only the active boundary
    produces an image.  ``mu_r_active = inf`` gives contrast 1.
    """

    t: float
    d: float
    mu_r_active: float = math.inf
    mu_r_dead: float = 1.0

    def __post_init__(self):
        if not (self.t >= 0 and math.isfinite(self.t)):
            raise InvalidGeometryError("dead-layer thickness must be non-negative")
        if not (self.d > 0 and math.isfinite(self.d)):
            raise InvalidGeometryError("d must be positive")
        if self.t > self.d:
            raise InvalidGeometryError("the dead layer cannot be thicker than the distance to the active boundary")

    @property
    def contrast(self) -> float:
        return _abs_contrast(self.mu_r_dead, self.mu_r_active)


def dead_layer_accuracy(scenario: DeadLayerScenario, d_min_hz: float = DEFAULT_DMIN_HZ,
                        constants: PhysicalConstants = CODATA) -> float:
    """Thickness resolution (m): D_min / |dD_mag/dd| with |dD_mag/dd| = 3 |D_mag| / d."""
    if scenario.contrast == 0.0:
        raise InvalidGeometryError("zero contrast at the active boundary: thickness is unmeasurable")
    if not d_min_hz > 0:
        raise ValueError("d_min_hz must be positive")
    D = scenario.contrast * abs(d_mag_spherical(ProbeGeometry(d=scenario.d, mu_r1=scenario.mu_r_dead, mu_r2=0.0),
                                                constants).value_hz)
    return d_min_hz * scenario.d / (3.0 * D)


def dead_layer_curve(d_values: Iterable[float], d_min_hz: float = DEFAULT_DMIN_HZ, mu_r_active: float = math.inf,
                     constants: PhysicalConstants = CODATA) -> list:
    """Rows (d, D_min, delta_t) for a thin dead layer at each distance."""
    rows = []
    for d in d_values:
        dt = dead_layer_accuracy(DeadLayerScenario(0.0, float(d), mu_r_active), d_min_hz, constants)
        rows.append((float(d), float(d_min_hz), dt))
    return rows


DEAD_LAYER_HEADER = ("d_m", "D_min_Hz", "delta_t_m")


def rows_to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(r.row() if hasattr(r, "row") else [repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()
