"""Rockafellian relaxation for stochastic and chance-constrained problems under distributional perturbation."""

__version__ = "0.1.0"
