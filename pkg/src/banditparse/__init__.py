"""Counterfactual learning for neural semantic parsing from error markings."""

__version__ = "0.1.0"
