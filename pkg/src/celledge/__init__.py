"""celledge: percentile-throughput optimization for multi-cell downlinks.

Library layout:

  numerics      small dense complex linear algebra (Cholesky solves)
  netmodel      hexagonal wrap-around geometry, fading, rate evaluation
  utility       percentile utilities, hybrid composition trees, supergradients
  innersolver   projected supergradient ascent over the feasible sets
  beamforming   quadratic-transform and weighted-MSE MM beamforming solvers
  powercontrol  scalar-power transforms, short-term and ergodic scheduling
  baselines     WMMSE weighted sum rate, zero-forcing-with-nulling, power policies
  harness       seeded Monte Carlo experiments, presets, CSV/JSON outputs
  kernels       hot numeric kernels (numba by default, CELLEDGE_BACKEND=numpy
                selects the pure-numpy fallback)
"""

from . import (baselines, beamforming, harness, innersolver, kernels, netmodel,
               numerics, powercontrol, utility)

__version__ = "0.1.0"

__all__ = ["baselines", "beamforming", "harness", "innersolver", "kernels",
           "netmodel", "numerics", "powercontrol", "utility", "__version__"]
