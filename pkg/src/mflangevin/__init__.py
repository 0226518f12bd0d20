"""Numerics for mean-field Langevin systems.

Subpackages:
    quad1d        one-dimensional measures exp(-V) and their exponential tilts
    renormalized  effective potential of the auxiliary field, critical
                  temperature, coarse-grained free energy, PL constants
    modes         Fourier mode decompositions of periodic interactions and
                  the multi-mode effective potential with convexity scans
    graphs        random regular / Erdos-Renyi graphs and spectral deviation
    dynamics      Euler-Maruyama simulation and gap/susceptibility estimators
    cli           batch front-end exposing every operation as a subcommand
"""

__version__ = "0.1.0"
