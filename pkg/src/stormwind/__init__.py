"""Stochastic-regeneration wind-noise reduction at desk scale."""

__version__ = "0.1.0"
