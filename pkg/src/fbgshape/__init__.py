"""Planar shape reconstruction for an FBG-instrumented continuum manipulator."""

__version__ = "0.1.0"
