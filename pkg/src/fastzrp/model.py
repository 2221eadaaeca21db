"""Jump-rate families and their stationary weight families.

A site holding ``n`` particles loses one at rate ``rate(n)``: a free choice of
positive bulk rates ``g(1), ..., g(A-1)``, a fast rate ``theta`` at the
unstable occupation ``A``, and one of two tails above ``A`` (constant rate 1,
or the ratio ``n/(n-1)`` whose size-biased weights are flat).  Stationary
single-site weights are always the exact inverse rate product
``w(n) = prod_{k<=n} 1/rate(k)``, never a simplified form, so arbitrary bulk
rates stay exact.  Scale formulas elsewhere use ``theta_eff = theta/w(A-1)``,
which absorbs the bulk weight at the threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np


class TailKind(Enum):
    """Jump rates for occupations above the unstable threshold."""

    CONSTANT_ONE = "const"
    PD_RATIO = "pd"


@dataclass(frozen=True)
class ModelSpec:
    """Rate family of a fast-rate zero-range process.

    ``A >= 2`` is the unstable occupation, ``bulk_rates`` the rates
    ``g(1), ..., g(A-1)`` (defaults to all ones), ``theta > 0`` the fast rate
    at occupation ``A``, and ``tail`` the rate rule above ``A``.
    """

    A: int
    theta: float
    bulk_rates: tuple[float, ...] = field(default=())
    tail: TailKind = TailKind.CONSTANT_ONE

    def __post_init__(self) -> None:
        if self.A < 2:
            raise ValueError(f"threshold occupation A must be >= 2, got {self.A}")
        if not self.theta > 0:
            raise ValueError(f"fast rate theta must be positive, got {self.theta}")
        if not self.bulk_rates:
            object.__setattr__(self, "bulk_rates", (1.0,) * (self.A - 1))
        else:
            object.__setattr__(self, "bulk_rates", tuple(float(g) for g in self.bulk_rates))
        if len(self.bulk_rates) != self.A - 1:
            raise ValueError(
                f"need {self.A - 1} bulk rates g(1)..g(A-1), got {len(self.bulk_rates)}"
            )
        if any(not g > 0 for g in self.bulk_rates):
            raise ValueError("all bulk rates must be strictly positive")

    # -- rates ---------------------------------------------------------------

    def rate(self, n: int) -> float:
        """Jump rate out of a site with occupation ``n`` (0 when empty)."""
        if n < 0:
            raise ValueError(f"occupation must be nonnegative, got {n}")
        if n == 0:
            return 0.0
        if n < self.A:
            return self.bulk_rates[n - 1]
        if n == self.A:
            return float(self.theta)
        if self.tail is TailKind.CONSTANT_ONE:
            return 1.0
        return n / (n - 1)

    # -- stationary weights ----------------------------------------------------

    @cached_property
    def _bulk_log_weights(self) -> tuple[float, ...]:
        # log w(n) = -sum_{k<=n} log g(k) for n = 0..A-1
        acc, out = 0.0, [0.0]
        for g in self.bulk_rates:
            acc -= math.log(g)
            out.append(acc)
        return tuple(out)

    @cached_property
    def theta_eff(self) -> float:
        """Fast rate with the bulk weight at A-1 absorbed: theta / w(A-1)."""
        return self.theta * math.exp(-self._bulk_log_weights[self.A - 1])

    def log_weight(self, n: int) -> float:
        """log of the stationary weight w(n), the inverse rate product."""
        if n < 0:
            raise ValueError(f"occupation must be nonnegative, got {n}")
        if n < self.A:
            return self._bulk_log_weights[n]
        base = self._bulk_log_weights[self.A - 1] - math.log(self.theta)
        if self.tail is TailKind.CONSTANT_ONE:
            return base
        return base + math.log(self.A) - math.log(n)

    def log_weights(self, n_max: int) -> np.ndarray:
        """Vector of log w(n) for n = 0..n_max."""
        lw = np.zeros(n_max + 1)
        k = min(self.A - 1, n_max)
        if k >= 1:
            lw[1 : k + 1] = -np.cumsum(np.log(self.bulk_rates[:k]))
        if n_max >= self.A:
            base = self._bulk_log_weights[self.A - 1] - math.log(self.theta)
            if self.tail is TailKind.CONSTANT_ONE:
                lw[self.A :] = base
            else:
                lw[self.A :] = base + math.log(self.A) - np.log(np.arange(self.A, n_max + 1))
        return lw

    def weight(self, n: int) -> float:
        return math.exp(self.log_weight(n))


@dataclass(frozen=True)
class ThetaScaling:
    """Fast-rate growth law ``theta(m) = prefactor * m**gamma``.

    ``base`` records which system size drives the scaling: the lattice volume
    (thermodynamic runs) or the particle number (fixed-volume runs).
    """

    prefactor: float
    gamma: float
    base: str = "volume"  # "volume" or "particles"

    def __post_init__(self) -> None:
        if not self.prefactor > 0:
            raise ValueError(f"prefactor must be positive, got {self.prefactor}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.base not in ("volume", "particles"):
            raise ValueError(f"base must be 'volume' or 'particles', got {self.base!r}")

    def theta_of(self, m: int) -> float:
        if m < 1:
            raise ValueError(f"system size must be >= 1, got {m}")
        return self.prefactor * float(m) ** self.gamma


def simple_spec(A: int, theta: float, tail: TailKind = TailKind.CONSTANT_ONE) -> ModelSpec:
    """Unit-bulk-rate model: w(n) = 1 below A, critical density (A-1)/2."""
    return ModelSpec(A=A, theta=theta, tail=tail)
