"""Approximate message passing: universality checks, state evolution and l1 recovery."""

__version__ = "0.1.0"
