"""Dimension certification from preparation-and-measurement contextuality tests."""

__version__ = "0.1.0"
