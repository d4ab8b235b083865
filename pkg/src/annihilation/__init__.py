"""Numerical workbench for the reaction A + A -> 0 and single-species chains jA -> lA."""

__version__ = "0.1.0"
