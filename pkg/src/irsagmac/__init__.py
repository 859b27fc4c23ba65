"""Asymptotic and finite-frame analysis of IRSA random access over the Gaussian MAC."""

__version__ = "0.1.0"
