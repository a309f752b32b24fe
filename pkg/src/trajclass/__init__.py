"""Classify planar particle trajectories as sub-, free or superdiffusive."""

__version__ = "0.1.0"
