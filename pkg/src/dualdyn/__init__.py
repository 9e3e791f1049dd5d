"""Dual forward/backward Kolmogorov dynamics and chameleon measurement models.

Modules
-------
statespace
    State spaces, physical variables, statistical states and averages.
kolmogorov
    Fokker-Planck and backward Kolmogorov solvers, path simulation.
chameleon
    Setting-dependent dual dynamics with classical and observational averages.
eprbohm
    EPR-Bohm correlation models and CHSH evaluation.
sampling
    Detection-loophole models and sub-ensemble comparisons.
"""
__version__ = "0.1.0"
