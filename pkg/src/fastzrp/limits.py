"""Reference limit laws, asymptotic partition formulas, and distances.

Pure functions of floats and arrays; everything here is the *predicted* side
of a comparison, kept strictly independent of the exact tables and samplers
it is checked against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import comb, lgamma

import numpy as np

from .ensemble import critical_density, site_norm_limit
from .model import ModelSpec


@dataclass
class TailCurve:
    """Survival probabilities sampled on an ascending grid of scaled sizes."""

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.ndim != 1 or self.grid.shape != self.values.shape:
            raise ValueError("grid and values must be 1-d arrays of equal length")
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly ascending")
        if np.any((self.values < -1e-12) | (self.values > 1 + 1e-12)):
            raise ValueError("survival values must lie in [0, 1]")
        if np.any(np.diff(self.values) > 1e-12):
            raise ValueError("survival values must be nonincreasing")

    def cdf_values(self) -> np.ndarray:
        return 1.0 - self.values


# -- limit laws -------------------------------------------------------------------


def gamma21_mixture_cdf(u, rho: float, rho_c: float):
    """Atom rho_c/rho at zero plus a Gamma(2,1) body for the excess fraction.

    The body integrates s*exp(-s), the size-biased transform of a unit
    exponential, which is the limiting rescaled cluster size.
    """
    if not rho > rho_c >= 0:
        raise ValueError(f"need rho > rho_c >= 0, got rho={rho}, rho_c={rho_c}")
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ValueError("scaled sizes must be nonnegative")
    atom = rho_c / rho
    body = 1.0 - np.exp(-u) * (1.0 + u)
    out = atom + (1.0 - atom) * body
    return float(out) if out.ndim == 0 else out


def exponential_cluster_tail(u):
    """Survival exp(-u) of the limiting cluster size on the cluster scale."""
    u = np.asarray(u, dtype=float)
    out = np.exp(-u)
    return float(out) if out.ndim == 0 else out


def simplex_marginal_cdf(u, L: int):
    """Single-coordinate law of a uniform mass split over L sites: 1-(1-u)^(L-1)."""
    if L < 2:
        raise ValueError(f"need at least two sites, got L={L}")
    u = np.asarray(u, dtype=float)
    if np.any((u < 0) | (u > 1)):
        raise ValueError("mass fractions must lie in [0, 1]")
    out = 1.0 - (1.0 - u) ** (L - 1)
    return float(out) if out.ndim == 0 else out


def beta11_tail(u):
    """Survival 1-u of the uniform (Beta(1,1)) law on [0, 1]."""
    u = np.asarray(u, dtype=float)
    out = np.clip(1.0 - u, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


# -- asymptotic partition functions -----------------------------------------------


def thermo_log_partition(spec: ModelSpec, L: int, N: int) -> float:
    """Exponential-order supercritical prediction for log Z(L, N).

    L*log z(1) + (L/sqrt(theta_eff)) * 2*sqrt((rho - rho_c)/z(1)); the
    sub-exponential prefactor is deliberately not modeled.
    """
    rho = N / L
    rc = critical_density(spec)
    if rho <= rc:
        raise ValueError(f"prediction holds for rho > rho_c={rc}, got rho={rho}")
    z1 = site_norm_limit(spec, 1.0)
    f = 2.0 * math.sqrt((rho - rc) / z1)
    return L * math.log(z1) + L / math.sqrt(spec.theta_eff) * f


def fixed_volume_log_partition_sum(spec: ModelSpec, L: int, N: int) -> float:
    """Full phase-separated sum over the number K of cluster sites:

    Z = z(1)^L * sum_K (z(1) theta_eff)^(-K) C(L,K) N^(K-1)/(K-1)!
    """
    if L < 2 or N < 1:
        raise ValueError("need L >= 2 and N >= 1")
    z1 = site_norm_limit(spec, 1.0)
    lz, lt, ln = math.log(z1), math.log(spec.theta_eff), math.log(N)
    terms = [
        (L - K) * lz - K * lt + math.log(comb(L, K)) + (K - 1) * ln - lgamma(K)
        for K in range(1, L + 1)
    ]
    mx = max(terms)
    return mx + math.log(math.fsum(math.exp(t - mx) for t in terms))


def fixed_volume_log_partition(spec: ModelSpec, L: int, N: int) -> float:
    """Leading branch of the fixed-volume asymptotics, selected by theta vs N:
    one cluster site when theta >> N, all sites clustered when theta << N."""
    if L < 2 or N < 1:
        raise ValueError("need L >= 2 and N >= 1")
    z1 = site_norm_limit(spec, 1.0)
    if spec.theta_eff >= N:
        return math.log(L) + (L - 1) * math.log(z1) - math.log(spec.theta_eff)
    return (L - 1) * math.log(N) - L * math.log(spec.theta_eff) - lgamma(L)


# -- distances --------------------------------------------------------------------


def ks_distance(empirical, cdf, weights=None, cdf_left=None) -> float:
    """Sup distance between an empirical distribution and a reference CDF.

    ``empirical`` is either a :class:`TailCurve` (compared pointwise on its
    grid) or an array of samples, optionally weighted; for samples the usual
    two-sided supremum over jump points is taken.  References with atoms need
    ``cdf_left`` (the left limit) so the lower side of an empirical jump is
    compared against the reference value just below it.
    """
    if isinstance(empirical, TailCurve):
        return float(np.max(np.abs(empirical.cdf_values() - cdf(empirical.grid))))
    x = np.asarray(empirical, dtype=float)
    if x.size == 0:
        raise ValueError("need at least one sample")
    if weights is None:
        w = np.full(x.size, 1.0 / x.size)
    else:
        w = np.asarray(weights, dtype=float)
        w = w / w.sum()
    order = np.argsort(x, kind="stable")
    xs, ws = x[order], w[order]
    # merge ties so jump points carry their full weight
    uniq, start = np.unique(xs, return_index=True)
    hi = np.append(np.cumsum(ws)[start[1:] - 1], np.cumsum(ws)[-1])
    lo = np.concatenate([[0.0], hi[:-1]])
    f = np.asarray(cdf(uniq), dtype=float)
    f_left = f if cdf_left is None else np.asarray(cdf_left(uniq), dtype=float)
    return float(max(np.max(np.abs(hi - f)), np.max(np.abs(f_left - lo))))


def total_variation(p, q) -> float:
    """Total variation distance between two pmfs (padded to equal length)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    n = max(p.size, q.size)
    pp = np.zeros(n)
    qq = np.zeros(n)
    pp[: p.size] = p
    qq[: q.size] = q
    return 0.5 * float(np.abs(pp - qq).sum())
