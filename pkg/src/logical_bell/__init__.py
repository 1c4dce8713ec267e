"""Logical Bell-pair generation with lattice surgery over memory-assisted links."""

__version__ = "0.1.0"
