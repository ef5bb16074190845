"""Simulation and verification of two-way entanglement purification."""

__version__ = "0.1.0"
