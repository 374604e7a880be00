"""Kick-behavior prediction from noisy soccer-simulation observations."""

__version__ = "0.1.0"
