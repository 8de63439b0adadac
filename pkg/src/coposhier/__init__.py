"""Copositivity certificates through sum-of-squares hierarchies."""

__version__ = "0.1.0"
