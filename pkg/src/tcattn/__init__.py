"""Temporal contextual attention for sequence learning, written on numpy."""

__version__ = "0.1.0"
