"""Dense light field reconstruction from sparse sub-aperture views."""

__version__ = "0.1.0"
