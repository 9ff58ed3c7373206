"""Boundary transport operators on tensor powers, their commuting
differential operators, exact certification of the identities relating
them, and numerical evaluation of the contour-integral solutions."""

__version__ = "0.1.0"
