"""Stochastic planar pursuit-evasion endgame simulator."""

__version__ = "0.1.0"
