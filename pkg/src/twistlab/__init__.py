"""Geodesic flows on the 2-torus as compositions of monotone twist maps."""

__version__ = "0.1.0"
