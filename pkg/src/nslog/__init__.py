"""Pseudo-spectral laboratory for Navier-Stokes mild, perturbed and Galerkin solutions."""

__version__ = "0.1.0"
