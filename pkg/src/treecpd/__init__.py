"""Exact Bayesian change-point detection in the dependence structure of multivariate series."""

__version__ = "0.1.0"
