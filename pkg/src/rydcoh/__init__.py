"""Simulation and analysis of ground-Rydberg coherence in Rydberg-blockade gates."""

__version__ = "0.1.0"
