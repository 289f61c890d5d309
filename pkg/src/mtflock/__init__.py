"""Kinetic Cucker-Smale flocking with Motsch-Tadmor alignment in the r -> 0 limit."""

import os

import numba

# TBB in common wheels is often too old and warns on first use
if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER = "workqueue"
if os.environ.get("MTFLOCK_NUM_THREADS"):
    numba.set_num_threads(int(os.environ["MTFLOCK_NUM_THREADS"]))

__version__ = "0.1.0"
