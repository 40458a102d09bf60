"""Smartphone sensing features and ULS-8 loneliness prediction."""

__version__ = "0.1.0"
