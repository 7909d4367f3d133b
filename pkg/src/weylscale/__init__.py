"""Numerics for the Weyl algebra of the 2d free scalar field and its scaling limit."""

__version__ = "0.1.0"
