"""Lightweight image inpainting: stripe-window transformer + dense conv branch."""

__version__ = "0.1.0"
