"""Generalization-based clustering, control charting and RUL forecasting."""

__version__ = "0.1.0"
