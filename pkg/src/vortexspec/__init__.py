"""Numerical verification of the spectral property for NLS vortex solitons."""
