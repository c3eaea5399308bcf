"""Age-of-information scheduling for power-constrained sensors.

Lagrangian decomposition into per-sensor constrained MDPs solved as
occupancy-measure LPs, a dual search over the bandwidth multiplier, and a
slotted Monte-Carlo simulator for the truncated hard-bandwidth policy.
"""
from ._backend import NAME as BACKEND

__version__ = "0.1.0"
