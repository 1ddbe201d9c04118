"""Stacked ensembles for route-free trip-duration prediction and their joint explanations."""

__version__ = "0.1.0"
