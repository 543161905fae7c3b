"""Numerical laboratory for random closed sets, epi-convergence in distribution and eps-optimal solution sets."""

__version__ = "0.1.0"
