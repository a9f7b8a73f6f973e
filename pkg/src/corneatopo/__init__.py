"""Placido-disc corneal topography from mire images."""

__version__ = "0.1.0"
