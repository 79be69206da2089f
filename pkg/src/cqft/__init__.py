"""Desk-scale toolkit for multiscale Gaussian field machinery.

Modules: scales (M-adic spectral decomposition), forests (interpolation
formulas), wick (Gaussian moments and bounds), powercount (divergence
degrees), cluster (expansion identities on cube lattices), rgflow (discrete
flows), levyarea (path sampling and iterated integrals), cli (entry point).
"""

__version__ = "0.1.0"

from . import (acceptance, cluster, config, forests, levyarea, powercount,
               rational, reporting, rgflow, scales, wick)

__all__ = ["acceptance", "cluster", "config", "forests", "levyarea",
           "powercount", "rational", "reporting", "rgflow", "scales", "wick",
           "__version__"]
