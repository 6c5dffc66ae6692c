"""Numerical laboratory for the multi-particle Anderson model with alloy disorder."""

__version__ = "0.1.0"
