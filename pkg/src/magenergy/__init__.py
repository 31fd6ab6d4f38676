"""Magnetic-energy magnetometry: image-method fields, D_mag and sensing analysis."""

__version__ = "0.1.0"
