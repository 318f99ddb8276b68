"""Numerical free probability: multiplicative powers, subordination and free perpetuities."""

__version__ = "0.1.0"
