"""Discrete-time simulator for synchronizing a distributed generator to the grid,
with time-of-use source scheduling."""

__version__ = "0.1.0"
