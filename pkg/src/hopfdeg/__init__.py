"""Degrees, Hopf invariants and fractional Sobolev seminorms of sphere maps."""

__version__ = "0.1.0"
