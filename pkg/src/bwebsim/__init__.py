"""Coalescing random walks, coalescing Brownian skeletons and Brownian-web diagnostics."""

__version__ = "0.1.0"
