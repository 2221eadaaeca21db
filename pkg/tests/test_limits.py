import math

import numpy as np
import pytest

from fastzrp import limits as lim
from fastzrp import partition as pt
from fastzrp.model import simple_spec
from fastzrp.rng import generator


def test_gamma21_mixture_examples():
    assert lim.gamma21_mixture_cdf(0.0, 1.0, 0.5) == pytest.approx(0.5)
    assert lim.gamma21_mixture_cdf(50.0, 1.0, 0.5) == pytest.approx(1.0)
    assert lim.gamma21_mixture_cdf(1.0, 1.0, 0.5) == pytest.approx(0.5 + 0.5 * (1 - 2 / math.e))
    with pytest.raises(ValueError):
        lim.gamma21_mixture_cdf(1.0, 0.5, 0.5)
    with pytest.raises(ValueError):
        lim.gamma21_mixture_cdf(-0.1, 1.0, 0.5)


def test_gamma21_monotone_with_atom():
    u = np.linspace(0.0, 10.0, 400)
    v = lim.gamma21_mixture_cdf(u, 1.0, 0.5)
    assert np.all(np.diff(v) >= 0)
    assert v[0] == pytest.approx(0.5)


def test_gamma21_body_is_size_biased_exponential():
    # derivative of the body equals u * exp(-u), the mass-weighted exponential
    u = np.linspace(0.05, 8.0, 200)
    h = 1e-5
    body = lambda x: 1.0 - np.exp(-x) * (1.0 + x)
    deriv = (body(u + h) - body(u - h)) / (2 * h)
    assert np.allclose(deriv, u * np.exp(-u), atol=1e-6)


def test_exponential_cluster_tail():
    assert lim.exponential_cluster_tail(0.0) == 1.0
    assert lim.exponential_cluster_tail(1.0) == pytest.approx(1 / math.e)
    assert lim.exponential_cluster_tail(math.log(2.0)) == pytest.approx(0.5)


def test_simplex_marginal_cdf():
    assert lim.simplex_marginal_cdf(0.0, 4) == 0.0
    assert lim.simplex_marginal_cdf(1.0, 4) == 1.0
    assert lim.simplex_marginal_cdf(0.5, 2) == pytest.approx(0.5)
    u = np.linspace(0, 1, 50)
    assert np.allclose(lim.simplex_marginal_cdf(u, 2), u)
    with pytest.raises(ValueError):
        lim.simplex_marginal_cdf(1.5, 4)
    with pytest.raises(ValueError):
        lim.simplex_marginal_cdf(0.5, 1)


def test_beta11_tail():
    assert lim.beta11_tail(0.0) == 1.0
    assert lim.beta11_tail(1.0) == 0.0
    assert lim.beta11_tail(0.25) == pytest.approx(0.75)


def test_thermo_log_partition():
    # A=2 unit bulk at rho=1: f = 2 sqrt(0.5/2) = 1
    spec = simple_spec(2, 1024.0)
    expect = 1024 * math.log(2.0) + 1024 / math.sqrt(1024.0)
    assert lim.thermo_log_partition(spec, 1024, 1024) == pytest.approx(expect)
    with pytest.raises(ValueError):
        lim.thermo_log_partition(spec, 1024, 100)


def test_fixed_volume_leading_branches():
    # L=2, theta >> N: Z ~ 2 z(1)/theta
    spec = simple_spec(2, 1e9)
    assert lim.fixed_volume_log_partition(spec, 2, 100) == pytest.approx(
        math.log(2 * 2.0 / 1e9)
    )
    # L=2, theta << N: Z ~ N/theta^2
    spec = simple_spec(2, 10.0)
    assert lim.fixed_volume_log_partition(spec, 2, 10_000) == pytest.approx(
        math.log(10_000 / 100.0)
    )


def test_fixed_volume_sum_tracks_exact():
    N = 2000
    for theta in (float(N) ** 2, math.sqrt(N)):
        spec = simple_spec(2, theta)
        exact = pt.log_partition(spec, 4, N)
        approx = lim.fixed_volume_log_partition_sum(spec, 4, N)
        assert math.exp(exact - approx) == pytest.approx(1.0, abs=0.05)


def test_ks_distance_cases():
    grid = np.linspace(0.0, 5.0, 200)
    curve = lim.TailCurve(grid=grid, values=np.exp(-grid))
    assert lim.ks_distance(curve, lambda u: 1 - np.exp(-u)) == pytest.approx(0.0, abs=1e-15)
    # single sample at the median of a uniform reference
    assert lim.ks_distance(np.array([0.5]), lambda u: np.clip(u, 0, 1)) == pytest.approx(0.5)
    # many exponential variates against their own law
    x = generator(17).exponential(size=10_000)
    assert lim.ks_distance(x, lambda u: 1 - np.exp(-u)) < 0.02


def test_ks_distance_weighted_reduces_to_plain():
    x = generator(1).random(500)
    cdf = lambda u: np.clip(u, 0, 1)
    plain = lim.ks_distance(x, cdf)
    weighted = lim.ks_distance(x, cdf, weights=np.ones_like(x))
    assert weighted == pytest.approx(plain, abs=1e-12)


def test_ks_distance_atom_reference():
    # reference with an atom of 0.5 at zero, handled through the left limit
    cdf = lambda u: np.where(np.asarray(u) < 0, 0.0, 0.5 + 0.5 * np.clip(u, 0, 1))
    cdf_left = lambda u: np.where(np.asarray(u) <= 0, 0.0, 0.5 + 0.5 * np.clip(u, 0, 1))
    rng = generator(4)
    u = rng.random(20_000)
    x = np.where(u < 0.5, 0.0, rng.random(20_000))
    assert lim.ks_distance(x, cdf, cdf_left=cdf_left) < 0.02
    # without the left limit the atom is misread as a 0.5 discrepancy
    assert lim.ks_distance(x, cdf) > 0.4


def test_total_variation():
    assert lim.total_variation([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert lim.total_variation([1.0, 0.0], [0.0, 1.0]) == 1.0
    assert lim.total_variation([0.5, 0.5], [0.5, 0.25, 0.25]) == pytest.approx(0.25)


def test_tail_curve_validation():
    with pytest.raises(ValueError):
        lim.TailCurve(grid=np.array([0.0, 1.0]), values=np.array([0.2, 0.8]))
    with pytest.raises(ValueError):
        lim.TailCurve(grid=np.array([1.0, 0.0]), values=np.array([0.8, 0.2]))
    with pytest.raises(ValueError):
        lim.TailCurve(grid=np.array([0.0, 1.0]), values=np.array([1.5, 0.2]))
    curve = lim.TailCurve(grid=np.array([0.0, 1.0]), values=np.array([0.8, 0.2]))
    assert curve.cdf_values().tolist() == [pytest.approx(0.2), pytest.approx(0.8)]
