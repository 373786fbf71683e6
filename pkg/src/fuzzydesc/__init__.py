"""Decentralized non-PDC H-infinity synthesis for interconnected T-S fuzzy descriptor systems."""

__version__ = "0.1.0"
