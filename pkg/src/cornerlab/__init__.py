"""Simulation and verification laboratory for edge statistics of
time-dependent Wigner corner processes."""

__version__ = "0.1.0"
