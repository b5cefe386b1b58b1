"""Transferability lab for word-substitution attacks on text classifiers."""

__version__ = "0.1.0"
