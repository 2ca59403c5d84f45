"""Symmetric tensor fields, momentum ray transforms and polyharmonic coefficient experiments."""

__version__ = "0.1.0"
