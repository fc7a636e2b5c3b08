"""maxlab: local fractional maximal operators on planar domains."""

__version__ = "0.1.0"
