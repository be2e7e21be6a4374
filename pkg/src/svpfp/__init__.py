"""Numerical laboratory for randomly forced kinetic equations.

Spectral grid solver, stochastic-characteristics particle backend, frozen-
field iteration diagnostics, hypocoercive energy functionals, and Monte
Carlo ensemble orchestration, all on the periodic phase-space box.
"""

from .phase_space import (  # noqa: F401
    CutoffSpec,
    DistributionField,
    GridSpec,
    WeightedNormSpec,
)

__version__ = "0.1.0"
