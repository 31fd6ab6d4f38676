"""CODATA physical constants used throughout the package (strict SI)."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import scipy.constants as _sc


@dataclass(frozen=True)
class PhysicalConstants:
    """Immutable bundle of the constants entering the magnetic energy.

    Values default to the CODATA set shipped with :mod:`scipy.constants`.
    ``g_factor`` is exposed but validated to be exactly 2.
    """

    mu0: float = _sc.mu_0
    muB: float = _sc.physical_constants["Bohr magneton"][0]
    hbar: float = _sc.hbar
    h: float = _sc.h
    g_factor: float = 2.0

    def __post_init__(self):
        if self.g_factor != 2.0:
            raise ValueError("only g = 2 is supported")
        if not math.isclose(self.h, 2.0 * math.pi * self.hbar, rel_tol=1e-12):
            raise ValueError("h and hbar are inconsistent")
        for name in ("mu0", "muB", "hbar", "h"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def energy_scale(self) -> float:
        """mu0 * muB**2 in J*m**3, the common prefactor of every energy."""
        return self.mu0 * self.muB**2

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PhysicalConstants":
        return cls(**{k: float(v) for k, v in data.items()})


CODATA = PhysicalConstants()
