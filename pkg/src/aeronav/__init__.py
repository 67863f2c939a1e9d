"""Aerial object-goal navigation in a deterministic voxel world."""

__version__ = "0.1.0"
