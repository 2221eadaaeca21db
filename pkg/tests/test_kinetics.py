import math

import numpy as np
import pytest

from fastzrp import kinetics as kin
from fastzrp import limits as lim
from fastzrp import partition as pt
from fastzrp.model import ModelSpec, TailKind, simple_spec
from fastzrp.rng import generator, replica_generator


def test_geometry_validation():
    with pytest.raises(ValueError):
        kin.Geometry("complete", 1)
    with pytest.raises(ValueError):
        kin.Geometry("torus", 8)


def test_uniform_configuration():
    occ = kin.uniform_configuration(5, 12)
    assert occ.tolist() == [3, 3, 2, 2, 2]
    assert occ.sum() == 12


def test_state_validation():
    spec = simple_spec(2, 10.0)
    geo = kin.Geometry("ring", 4)
    with pytest.raises(ValueError):
        kin.SimState(spec, geo, np.array([0, 0, 0, 0]))
    with pytest.raises(ValueError):
        kin.SimState(spec, geo, np.array([1, -1, 1, 1]))
    with pytest.raises(ValueError):
        kin.SimState(spec, geo, np.array([1, 1]))


def test_run_requires_budget():
    spec = simple_spec(2, 10.0)
    geo = kin.Geometry("ring", 4)
    with pytest.raises(ValueError):
        kin.run(spec, geo, kin.uniform_configuration(4, 4), rng=generator(0))


def test_conservation_and_time():
    spec = simple_spec(2, 50.0)
    geo = kin.Geometry("complete", 8)
    state = kin.run(spec, geo, kin.uniform_configuration(8, 8), rng=generator(1),
                    max_events=50_000, check_every=10_000)
    assert sum(state.occ) == 8
    assert state.time > 0
    assert state.events == 50_000


def test_two_site_time_split():
    # one particle on two sites with unit rates spends half its time on each
    spec = simple_spec(2, 100.0)
    geo = kin.Geometry("complete", 2)
    out = kin.sample_stationary(spec, geo, 1, rng=generator(3), n_samples=20_000,
                                burnin_events=10, interval_events=1)
    occ0 = np.array([s[0] for s in out.samples], dtype=float)
    dt = np.diff(out.times)
    frac = float((occ0[:-1] * dt).sum() / dt.sum())
    sigma = 0.5 / math.sqrt(len(dt) / 2)
    assert frac == pytest.approx(0.5, abs=3.5 * sigma)


def test_histogram_matches_exact_small():
    L = N = 16
    spec = simple_spec(2, 50.0)
    table = pt.build_table(spec, L, N)
    marg = pt.occupation_marginals(table, L, N)
    geo = kin.Geometry("ring", L)
    out = kin.sample_stationary(spec, geo, N, rng=generator(9), n_samples=4000,
                                burnin_events=50_000, interval_events=800)
    hist = np.bincount(np.concatenate(out.samples), minlength=N + 1) / (4000 * L)
    assert lim.total_variation(hist, marg) < 0.03


def test_geometry_independence():
    L = N = 16
    spec = simple_spec(2, 20.0)
    hists = {}
    for gi, kind in enumerate(("ring", "complete")):
        geo = kin.Geometry(kind, L)
        out = kin.sample_stationary(spec, geo, N, rng=replica_generator(205, gi),
                                    n_samples=4000, burnin_events=50_000,
                                    interval_events=800)
        hists[kind] = np.bincount(np.concatenate(out.samples), minlength=N + 1) / (4000 * L)
    assert lim.total_variation(hists["ring"], hists["complete"]) < 0.02


def test_pd_bookkeeping_invariant():
    spec = simple_spec(2, 30.0, TailKind.PD_RATIO)
    geo = kin.Geometry("ring", 16)
    state = kin.run(spec, geo, kin.uniform_configuration(16, 16), rng=generator(5),
                    max_events=200_000, check_every=25_000)
    assert state.check_rates() <= 1e-9
    assert state.total_rate() == pytest.approx(state.fresh_total_rate(), rel=1e-9)


def test_run_determinism():
    spec = simple_spec(3, 40.0)
    geo = kin.Geometry("complete", 8)
    states = [
        kin.run(spec, geo, kin.uniform_configuration(8, 12), rng=generator(77), max_events=5000)
        for _ in range(2)
    ]
    assert states[0].occ == states[1].occ
    assert states[0].time == states[1].time


def test_time_budget():
    spec = simple_spec(2, 10.0)
    geo = kin.Geometry("ring", 6)
    state = kin.run(spec, geo, kin.uniform_configuration(6, 6), rng=generator(2), max_time=5.0)
    assert state.time >= 5.0
    assert state.events > 0


def test_integrated_profile():
    assert kin.integrated_profile(np.array([0, 0, 7])).tolist() == [0, 0, 7]
    assert kin.integrated_profile(np.array([1, 1, 1])).tolist() == [1, 2, 3]


def test_cluster_count_and_max_site():
    assert kin.cluster_count(np.array([1, 1, 1]), 2) == 0
    assert kin.cluster_count(np.array([9, 0, 0]), 2) == 1
    M, xs = kin.max_site(np.array([3, 1, 3]))
    assert M == 3 and xs == frozenset({0, 2})
    M, xs = kin.max_site(np.array([2, 2, 2]))
    assert xs == frozenset({0, 1, 2})


def test_empirical_sb_tail_cases():
    grid = np.linspace(0.0, 3.0, 13)
    # single condensate: all mass above u C until u C reaches N
    tc = kin.empirical_sb_tail([np.array([12, 0, 0])], 2.0, grid)
    assert tc.values[0] == 1.0
    assert tc.values[grid * 2.0 < 12].min() == 1.0
    assert tc.values[grid * 2.0 >= 12].max() == 0.0
    # bulk-only configuration: nothing above the threshold scale
    tc = kin.empirical_sb_tail([np.array([1, 1, 1, 1])], 2.0, grid)
    assert tc.values[grid * 2.0 >= 2].max() == 0.0


def test_cluster_tail_cases():
    grid = np.linspace(0.0, 2.0, 9)
    tc = kin.cluster_tail([np.array([2, 1, 0])], 2, 4.0, grid)
    assert tc.values[0] == 1.0  # the single cluster of size exactly A
    with pytest.raises(ValueError):
        kin.cluster_tail([np.array([1, 1, 0])], 2, 4.0, grid)


def test_dynamics_stationary_current():
    # events per site per unit time estimates the canonical current
    L = N = 16
    spec = simple_spec(2, 50.0)
    table = pt.build_table(spec, L, N)
    cur = pt.canonical_current(table, N)
    geo = kin.Geometry("complete", L)
    out = kin.sample_stationary(spec, geo, N, rng=generator(13), n_samples=3000,
                                burnin_events=50_000, interval_events=800)
    nb = 20
    k = len(out.events) // nb
    rates = [
        (out.events[(i + 1) * k - 1] - out.events[i * k])
        / (L * (out.times[(i + 1) * k - 1] - out.times[i * k]))
        for i in range(nb)
    ]
    m = float(np.mean(rates))
    s = float(np.std(rates, ddof=1) / math.sqrt(nb))
    assert abs(m - cur) < 3 * s + 1e-12
