"""Pointwise reliability checks for black-box binary classifiers."""

__version__ = "0.1.0"
