"""Pit-bot lava-tube exploration simulator."""

__version__ = "0.1.0"
