"""Traveling pulses of the FitzHugh-Nagumo system under additive noise.

Numerical library for the deterministic fast pulse, its frozen-wave
linearization and spectral projections, trace-class noise sampling, and
stochastic phase tracking with multiscale decomposition diagnostics.
"""

__version__ = "0.1.0"
