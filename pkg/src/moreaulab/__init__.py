"""Bregman-Moreau proximal machinery for weakly convex stochastic problems."""

from . import bregman, bounds, losses, prox  # noqa: F401
from .bregman import Euclidean, LpSquared, NormTag, PolyGrowth, l1_setup  # noqa: F401
from .losses import Dataset, Regularizer, RiskObjective, WeaklyConvexLoss, sample_dataset  # noqa: F401
from .prox import ProxResult, prox_point  # noqa: F401

__version__ = "0.1.0"
