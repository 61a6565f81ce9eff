"""Wearable-health feature engineering, prompt assembly, PRO modelling and evaluation."""

__version__ = "0.1.0"
