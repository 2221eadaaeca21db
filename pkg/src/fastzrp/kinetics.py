"""Continuous-time stochastic dynamics with rejection-free event selection.

A single particle leaves site x at rate ``rate(occ[x])`` and lands on a
neighbour drawn from a doubly stochastic kernel (complete graph or ring).
The fast rate at the threshold occupation dominates the total rate, so naive
uniform proposals would be rejected almost always; instead sites are grouped
into occupation classes with equal per-site rates and an event costs O(A):
pick a class proportionally to (count * class rate), then a site uniformly
inside it.  The ratio-tail family has per-site rates in (1, (A+1)/A] above the
threshold, resolved by bounded-ratio rejection inside that one class, with the
class total maintained by compensated summation and recomputed exactly at
checkpoints.

One simulation replica is strictly single-threaded; run replicas on
independent RNG streams and aggregate their observables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .limits import TailCurve
from .model import ModelSpec, TailKind

_BUF = 8192


@dataclass(frozen=True)
class Geometry:
    """Spatial jump kernel: complete graph (uniform over other sites) or ring."""

    kind: str  # "complete" | "ring"
    L: int

    def __post_init__(self) -> None:
        if self.kind not in ("complete", "ring"):
            raise ValueError(f"geometry kind must be 'complete' or 'ring', got {self.kind!r}")
        if self.L < 2:
            raise ValueError(f"need at least two sites for any jump to exist, got L={self.L}")


def uniform_configuration(L: int, N: int) -> np.ndarray:
    """Round-robin initial placement of N particles on L sites."""
    occ = np.full(L, N // L, dtype=np.int64)
    occ[: N % L] += 1
    return occ


class _Uniforms:
    """Buffered uniforms from a numpy Generator (python floats, cheap next())."""

    __slots__ = ("rng", "buf", "i")

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.buf = rng.random(_BUF).tolist()
        self.i = 0

    def __call__(self) -> float:
        i = self.i
        if i == _BUF:
            self.buf = self.rng.random(_BUF).tolist()
            i = 0
        self.i = i + 1
        return self.buf[i]


class SimState:
    """Mutable simulation state: configuration plus per-class site registries.

    Classes are occupations 1..A (each with a single per-site rate) and one
    class for everything above A.  ``total_rate`` is assembled from class
    counts at every event; only the ratio-tail class total is incremental.
    """

    def __init__(self, spec: ModelSpec, geometry: Geometry, init: np.ndarray):
        occ = np.asarray(init, dtype=np.int64)
        if occ.ndim != 1 or len(occ) != geometry.L:
            raise ValueError(f"initial configuration must have length {geometry.L}")
        if (occ < 0).any():
            raise ValueError("occupations must be nonnegative")
        if occ.sum() == 0:
            raise ValueError("need at least one particle for any dynamics")
        self.spec = spec
        self.geometry = geometry
        self.occ = occ.tolist()
        self.N = int(occ.sum())
        self.time = 0.0
        self.events = 0
        A = spec.A
        # class index: occupation n for 1 <= n <= A, A+1 for n > A
        self.buckets: list[list[int]] = [[] for _ in range(A + 2)]
        self.pos = [0] * geometry.L
        for x, n in enumerate(self.occ):
            if n > 0:
                c = n if n <= A else A + 1
                self.pos[x] = len(self.buckets[c])
                self.buckets[c].append(x)
        self.tail_sum = 0.0
        self._tail_comp = 0.0
        if spec.tail is TailKind.PD_RATIO:
            self.tail_sum = math.fsum(n / (n - 1) for n in self.occ if n > A)

    @property
    def configuration(self) -> np.ndarray:
        return np.asarray(self.occ, dtype=np.int64)

    def total_rate(self) -> float:
        spec = self.spec
        tot = 0.0
        for c in range(1, spec.A):
            tot += len(self.buckets[c]) * spec.bulk_rates[c - 1]
        tot += len(self.buckets[spec.A]) * spec.theta
        if spec.tail is TailKind.PD_RATIO:
            tot += self.tail_sum
        else:
            tot += len(self.buckets[spec.A + 1])
        return tot

    def fresh_total_rate(self) -> float:
        """Total rate recomputed from scratch (bookkeeping cross-check)."""
        return math.fsum(self.spec.rate(n) for n in self.occ)

    def check_rates(self, rel_tol: float = 1e-9) -> float:
        """Compare incremental and fresh totals; raise on drift beyond rel_tol."""
        inc, fresh = self.total_rate(), self.fresh_total_rate()
        drift = abs(inc - fresh) / max(fresh, 1e-300)
        if drift > rel_tol:
            raise RuntimeError(f"rate bookkeeping drifted by {drift:.3e} relative")
        if self.spec.tail is TailKind.PD_RATIO:
            A = self.spec.A
            self.tail_sum = math.fsum(n / (n - 1) for n in self.occ if n > A)
            self._tail_comp = 0.0
        return drift


def _advance(
    state: SimState,
    u: _Uniforms,
    max_events: int | None,
    max_time: float | None,
    check_every: int,
) -> None:
    spec, geom = state.spec, state.geometry
    A, theta = spec.A, spec.theta
    brate = spec.bulk_rates
    pd = spec.tail is TailKind.PD_RATIO
    rmax = (A + 1) / A
    complete = geom.kind == "complete"
    L = geom.L
    occ, buckets, pos = state.occ, state.buckets, state.pos
    fast, tail = buckets[A], buckets[A + 1]
    t, events = state.time, state.events
    tail_sum, comp = state.tail_sum, state._tail_comp
    event_cap = math.inf if max_events is None else max_events
    time_cap = math.inf if max_time is None else max_time
    next_check = events + check_every

    while events < event_cap and t < time_cap:
        # total rate from class counts; only the ratio tail is incremental
        tot = 0.0
        for c in range(1, A):
            tot += len(buckets[c]) * brate[c - 1]
        tot += len(fast) * theta
        tot += tail_sum if pd else len(tail)

        # departure site: class proportional to count * rate, site uniform in class
        r = u() * tot
        x = -1
        for c in range(1, A):
            b = buckets[c]
            w = len(b) * brate[c - 1]
            if r < w:
                x = b[min(int(r / brate[c - 1]), len(b) - 1)]
                break
            r -= w
        if x < 0:
            w = len(fast) * theta
            if r < w:
                x = fast[min(int(r / theta), len(fast) - 1)]
            elif tail:
                if pd:
                    # per-site rates n/(n-1) <= (A+1)/A: bounded-ratio rejection
                    while True:
                        cand = tail[min(int(u() * len(tail)), len(tail) - 1)]
                        n = occ[cand]
                        if u() * rmax * (n - 1) <= n:
                            x = cand
                            break
                else:
                    x = tail[min(int(r), len(tail) - 1)]
            else:  # float fallthrough: put the event in the last nonempty class
                for c in range(A, 0, -1):
                    if buckets[c]:
                        x = buckets[c][0]
                        break

        if complete:
            y = int(u() * (L - 1))
            if y >= x:
                y += 1
        else:
            y = (x + 1) % L if u() < 0.5 else (x - 1) % L

        t += -math.log1p(-u()) / tot
        events += 1

        # move one particle x -> y, updating class registries
        n = occ[x]
        m = occ[y]
        occ[x] = n - 1
        occ[y] = m + 1

        cx = n if n <= A else A + 1
        b = buckets[cx]
        i = pos[x]
        last = b[-1]
        b[i] = last
        pos[last] = i
        b.pop()
        if n > 1:
            c2 = n - 1 if n - 1 <= A else A + 1
            b2 = buckets[c2]
            pos[x] = len(b2)
            b2.append(x)

        if m > 0:
            cy = m if m <= A else A + 1
            b = buckets[cy]
            i = pos[y]
            last = b[-1]
            b[i] = last
            pos[last] = i
            b.pop()
        c2 = m + 1 if m + 1 <= A else A + 1
        b2 = buckets[c2]
        pos[y] = len(b2)
        b2.append(y)

        if pd:
            # compensated updates of the tail-class rate total
            d = 0.0
            if n > A:
                d -= n / (n - 1)
            if n - 1 > A:
                d += (n - 1) / (n - 2)
            if m > A:
                d -= m / (m - 1)
            if m + 1 > A:
                d += (m + 1) / m
            if d != 0.0:
                yv = d - comp
                tv = tail_sum + yv
                comp = (tv - tail_sum) - yv
                tail_sum = tv

        if events >= next_check:
            state.time, state.events = t, events
            state.tail_sum, state._tail_comp = tail_sum, comp
            state.check_rates()
            tail_sum, comp = state.tail_sum, state._tail_comp
            next_check = events + check_every

    state.time, state.events = t, events
    state.tail_sum, state._tail_comp = tail_sum, comp


def run(
    spec: ModelSpec,
    geometry: Geometry,
    init: np.ndarray,
    *,
    rng: np.random.Generator,
    max_events: int | None = None,
    max_time: float | None = None,
    check_every: int = 1_000_000,
    state: SimState | None = None,
) -> SimState:
    """Advance the dynamics until an event or time budget is exhausted.

    Pass ``state`` to continue a previous run (``init`` is then ignored).
    """
    if max_events is None and max_time is None:
        raise ValueError("need an event or time budget")
    if max_events is not None and max_events < 0:
        raise ValueError("event budget must be nonnegative")
    if state is None:
        state = SimState(spec, geometry, init)
    cap = None if max_events is None else state.events + max_events
    tcap = None if max_time is None else state.time + max_time
    _advance(state, _Uniforms(rng), cap, tcap, check_every)
    return state


@dataclass
class SampleRun:
    """Stationary snapshots plus the (time, events) trace used to take them."""

    samples: list[np.ndarray]
    times: np.ndarray
    events: np.ndarray
    state: SimState


def sample_stationary(
    spec: ModelSpec,
    geometry: Geometry,
    N: int,
    *,
    rng: np.random.Generator,
    n_samples: int,
    burnin_events: int | None = None,
    interval_events: int | None = None,
    init: np.ndarray | None = None,
    check_every: int = 1_000_000,
) -> SampleRun:
    """Burn in, then record configurations every ``interval_events`` events.

    Defaults: burn-in of 100*L events (every site departs ~100 times on
    average), snapshots every L events.  These are engineering choices; the
    exact sampler is the authoritative stationary source and the tests compare
    against it.
    """
    L = geometry.L
    if init is None:
        init = uniform_configuration(L, N)
    burnin = 100 * L if burnin_events is None else burnin_events
    interval = L if interval_events is None else interval_events
    u = _Uniforms(rng)
    state = SimState(spec, geometry, init)
    _advance(state, u, burnin, None, check_every)
    samples: list[np.ndarray] = []
    times = np.empty(n_samples)
    events = np.empty(n_samples, dtype=np.int64)
    for i in range(n_samples):
        _advance(state, u, state.events + interval, None, check_every)
        samples.append(state.configuration)
        times[i] = state.time
        events[i] = state.events
    return SampleRun(samples=samples, times=times, events=events, state=state)


# -- observables -----------------------------------------------------------------


def integrated_profile(config: np.ndarray) -> np.ndarray:
    """Running occupation total along the lattice; last entry equals N."""
    return np.cumsum(np.asarray(config))


def cluster_count(config: np.ndarray, A: int) -> int:
    """Number of sites at or above the threshold occupation."""
    return int((np.asarray(config) >= A).sum())


def max_site(config: np.ndarray) -> tuple[int, frozenset[int]]:
    """Size and location set of the maximal occupation."""
    occ = np.asarray(config)
    M = int(occ.max())
    return M, frozenset(int(x) for x in np.flatnonzero(occ == M))


def empirical_sb_tail(samples: list[np.ndarray], C: float, grid: np.ndarray) -> TailCurve:
    """Mass-weighted survival of occupations on scale C, pooled over samples.

    At u the value is (total mass on sites with occupation > u*C) / (total
    mass), i.e. the size-biased empirical tail; it equals 1 at u = 0.
    """
    if C <= 0:
        raise ValueError("scale must be positive")
    vals = np.concatenate([np.asarray(s)[np.asarray(s) > 0] for s in samples])
    total = vals.sum()
    order = np.argsort(vals)
    vs = vals[order].astype(float)
    suffix = np.concatenate([np.cumsum(vs[::-1])[::-1], [0.0]]) / total
    idx = np.searchsorted(vs, np.asarray(grid, dtype=float) * C, side="right")
    return TailCurve(grid=np.asarray(grid, dtype=float), values=suffix[idx])


def cluster_tail(samples: list[np.ndarray], A: int, C: float, grid: np.ndarray) -> TailCurve:
    """Site-counted survival of cluster occupations (>= A) on scale C."""
    if C <= 0:
        raise ValueError("scale must be positive")
    vals = np.concatenate([np.asarray(s)[np.asarray(s) >= A] for s in samples])
    if vals.size == 0:
        raise ValueError("no cluster sites in any sample")
    vs = np.sort(vals).astype(float)
    idx = np.searchsorted(vs, np.asarray(grid, dtype=float) * C, side="right")
    values = (vs.size - idx) / vs.size
    return TailCurve(grid=np.asarray(grid, dtype=float), values=values)
