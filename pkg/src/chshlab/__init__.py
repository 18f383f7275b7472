"""Operator-level CHSH bounds, EPR coincidence simulation and evolution toys."""

__version__ = "0.1.0"
