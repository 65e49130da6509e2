"""Differentially private gossip computation over public and private networks."""

__version__ = "0.1.0"
