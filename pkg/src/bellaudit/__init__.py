"""Simulation and audit harness for Bell-type experiments."""

__version__ = "0.1.0"
