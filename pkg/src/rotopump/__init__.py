"""Optically pumped spin-to-rotation transfer in NV-P1 diamond."""

__version__ = "0.1.0"
