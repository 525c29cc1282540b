"""Numerical construction and verification of special Killing forms on toric Sasaki-Einstein charts."""

__version__ = "0.1.0"

from . import autodiff, exprlang, exterior, geometry, killing, toric, ypq  # noqa: E402

__all__ = ["autodiff", "exprlang", "exterior", "geometry", "killing", "toric", "ypq", "__version__"]
