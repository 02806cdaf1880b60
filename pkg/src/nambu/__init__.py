"""Lie-Poisson brackets with their canonical lifts, applied to rigid bodies and fluids."""

__version__ = "0.1.0"
