"""Trajectory simulation of continuously measured quantum systems under PI feedback.

Modules
-------
quantum     density-matrix algebra, concurrence, triplet basis
stochastic  Wiener increments, history buffers, integral filters
feedback    PI controller configuration
twoqubit    two-qubit entanglement generation by half-parity measurement
oscillator  Gaussian-moment oscillator stabilisation
ensemble    seeded ensembles and their statistics
cli         configuration-driven front end
"""

__version__ = "0.1.0"
