"""Stationary directed-polymer models on the lattice: exact identities and
scaling experiments for the four beta-gamma weight families."""

__version__ = "0.1.0"
