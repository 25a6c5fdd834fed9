"""Sensitivity, signal and lineshape models for spin-defect NMR sensors."""
__version__ = "0.1.0"
