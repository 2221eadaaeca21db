"""Grand-canonical quantities for the fast-rate zero-range process.

The product measure at fugacity ``phi`` has single-site normalization

    z(phi) = sum_n phi^n w(n),

finite for phi in [0, 1) because the tail weights are O(1/theta).  Density,
its theta -> infinity limit, the critical density, fugacity inversion and the
heuristic condensate scales all derive from it.  Everything here is a pure
function of an immutable :class:`~fastzrp.model.ModelSpec`; the lattice size
enters only through the value of ``theta`` the spec carries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import ModelSpec, TailKind


class NonConvergence(RuntimeError):
    """Fugacity inversion failed to reach the requested residual."""


@dataclass(frozen=True)
class EnsembleSolution:
    """Fugacity solving density(phi) = rho, with the achieved residual."""

    phi: float
    rho: float
    residual: float


def _check_phi(phi: float, allow_one: bool = False) -> None:
    ok = (0.0 <= phi <= 1.0) if allow_one else (0.0 <= phi < 1.0)
    if not ok:
        limit = "1]" if allow_one else "1)"
        raise ValueError(f"fugacity must lie in [0, {limit}, got {phi}")


def _bulk_sums(spec: ModelSpec, phi: float) -> tuple[float, float]:
    # sum phi^n w(n) and sum n phi^n w(n) over n = 0..A-1
    s0 = s1 = 0.0
    p = 1.0
    for n in range(spec.A):
        w = math.exp(spec.log_weight(n))
        s0 += p * w
        s1 += n * p * w
        p *= phi
    return s0, s1


def _tail_sums(spec: ModelSpec, phi: float) -> tuple[float, float]:
    # tail contributions (n >= A) to z and to the density numerator
    if phi == 0.0:
        return 0.0, 0.0
    A, te = spec.A, spec.theta_eff
    phiA = phi**A
    if spec.tail is TailKind.CONSTANT_ONE:
        z_tail = phiA / (te * (1.0 - phi))
        num_tail = phiA * (A * (1.0 - phi) + phi) / (te * (1.0 - phi) ** 2)
    else:
        # weights A/(te*n): sum_{n>=A} phi^n/n = -log(1-phi) - sum_{n<A} phi^n/n
        head = sum(phi**n / n for n in range(1, A))
        z_tail = (A / te) * (-math.log1p(-phi) - head)
        num_tail = (A / te) * phiA / (1.0 - phi)
    return z_tail, num_tail


def site_norm(spec: ModelSpec, phi: float) -> float:
    """Single-site normalization z(phi) at finite theta, for phi in [0, 1)."""
    _check_phi(phi)
    s0, _ = _bulk_sums(spec, phi)
    z_tail, _ = _tail_sums(spec, phi)
    return s0 + z_tail


def density_of_fugacity(spec: ModelSpec, phi: float) -> float:
    """Particle density per site, phi z'(phi)/z(phi); strictly increasing."""
    _check_phi(phi)
    s0, s1 = _bulk_sums(spec, phi)
    z_tail, num_tail = _tail_sums(spec, phi)
    return (s1 + num_tail) / (s0 + z_tail)


def site_norm_limit(spec: ModelSpec, phi: float) -> float:
    """theta -> infinity limit of z(phi); extends to phi = 1, where it is z(1)."""
    _check_phi(phi, allow_one=True)
    s0, _ = _bulk_sums(spec, phi)
    return s0


def density_limit(spec: ModelSpec, phi: float) -> float:
    """theta -> infinity limit of the density; at phi = 1 this is rho_c."""
    _check_phi(phi, allow_one=True)
    s0, s1 = _bulk_sums(spec, phi)
    return s1 / s0


def critical_density(spec: ModelSpec) -> float:
    """Maximal bulk density: sum_{n<A} n w(n) / sum_{n<A} w(n)."""
    return density_limit(spec, 1.0)


def solve_fugacity(
    spec: ModelSpec,
    rho: float,
    tol: float = 1e-10,
    max_iter: int = 500,
) -> EnsembleSolution:
    """Invert the density map by bisection.

    The density is strictly increasing and diverges as phi -> 1, so a solution
    exists for every rho >= 0.  Bisection is unconditionally safe even where
    the map is nearly vertical (large theta close to phi = 1).
    """
    if rho < 0:
        raise ValueError(f"density must be nonnegative, got {rho}")
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    if rho == 0.0:
        return EnsembleSolution(phi=0.0, rho=0.0, residual=0.0)
    lo, hi = 0.0, 1.0 - 1e-16
    if density_of_fugacity(spec, hi) < rho:
        raise NonConvergence(f"density {rho} unreachable below the radius of convergence")
    phi = hi
    for _ in range(max_iter):
        phi = 0.5 * (lo + hi)
        r = density_of_fugacity(spec, phi)
        if abs(r - rho) <= tol:
            return EnsembleSolution(phi=phi, rho=rho, residual=abs(r - rho))
        if r < rho:
            lo = phi
        else:
            hi = phi
        if hi - lo <= 1e-18 * max(1.0, lo):
            break
    residual = abs(density_of_fugacity(spec, phi) - rho)
    if residual <= tol:
        return EnsembleSolution(phi=phi, rho=rho, residual=residual)
    raise NonConvergence(
        f"fugacity bisection stalled at residual {residual:.3e} (tol {tol:.1e})"
    )


def cluster_scale(spec: ModelSpec, rho: float) -> float:
    """Typical condensate cluster size sqrt((rho - rho_c) z(1) theta_eff)."""
    rc = critical_density(spec)
    if rho <= rc:
        raise ValueError(f"no condensate scale at rho={rho} <= rho_c={rc}")
    return math.sqrt((rho - rc) * site_norm_limit(spec, 1.0) * spec.theta_eff)


def asymptotic_fugacity(spec: ModelSpec, rho: float) -> float:
    """Leading-order supercritical fugacity 1 - 1/cluster_scale."""
    return 1.0 - 1.0 / cluster_scale(spec, rho)
