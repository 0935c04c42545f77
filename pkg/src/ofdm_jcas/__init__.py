"""OFDM joint communication and radar sensing toolkit."""

__version__ = "0.1.0"
