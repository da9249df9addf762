"""Traveling waves of 1-d nonlocal bistable equations.

Wave solver, spectral-gap certification, small-speed perturbation constants,
and stochastic neural-field stability runs.
"""

__version__ = "0.1.0"
