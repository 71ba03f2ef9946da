"""Generalized ODEs with bounded-variation integrators."""
__version__ = "0.1.0"
