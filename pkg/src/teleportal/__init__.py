"""Simulation and exact verification of gate teleportation constructions."""

__version__ = "0.1.0"
