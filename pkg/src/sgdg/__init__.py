"""Sparse-grid discontinuous Galerkin solver for elliptic problems on [0,1]^d."""

__version__ = "0.1.0"
