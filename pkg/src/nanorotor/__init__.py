"""Simulation and analysis of a spinning dielectric nanorod crossing a
standing-wave optical cavity."""

__version__ = "0.1.0"
