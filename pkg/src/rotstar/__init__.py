"""Equilibria of uniformly and differentially rotating self-gravitating gas."""

__version__ = "0.1.0"
