"""Moran process on graphs: exact oracle, potential calculus, samplers and an FPRAS."""

__version__ = "0.1.0"
