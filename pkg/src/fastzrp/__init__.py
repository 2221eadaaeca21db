"""Exact computation and stochastic simulation of zero-range processes with a
fast jump rate: condensation transition, condensate cluster statistics, and
fixed-volume limits at desk scale."""

__version__ = "0.1.0"
