"""Numerical experiments on Anosov flows: toral suspensions, fiberwise
obstructions, geodesic-flow charts, DA surgery and cone certificates."""

import os

from numba import config as _numba_config

# prefer the OpenMP layer; the TBB shipped in some images is too old and only warns
if "NUMBA_THREADING_LAYER" not in os.environ:
    _numba_config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

__version__ = "0.1.0"
