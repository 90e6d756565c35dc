import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import circ, ref_moments
from qwtree.coins import c_pi, c_sigma, from_eigenphases, identity, orthogonal_family, random_coin
from qwtree.moments import (
    MemoryBudgetError,
    g_series,
    g_series_array,
    horizon_depth,
    max_feasible_n,
    memory_budget,
    moment_memory_estimate,
    moments,
)
from qwtree.tree_index import TreeKind
from qwtree.walk import uniform

# exact return amplitudes of CO+(pi/2) = circ(2/3, 2/3, -1/3), from the
# reference walk in rational arithmetic
CO_PLUS_HALF_PI = ["1", "0", "2/3", "0", "16/27", "0", "55/243", "0", "-112/2187", "0",
                   "-2366/19683", "0", "-10327/59049", "0", "-34442/531441", "0", "198704/4782969"]


def test_frozen_exact_moments():
    mu = moments(orthogonal_family(math.pi / 2), 16).mu
    want = np.array([float(Fraction(s)) for s in CO_PLUS_HALF_PI])
    assert np.max(np.abs(mu - want)) <= 1e-15


def test_exact_oracle_reproduces_frozen():
    F = Fraction
    mu = ref_moments(circ(F(2, 3), F(2, 3), F(-1, 3)), 12, one=F(1), zero=F(0))
    assert [str(m) for m in mu] == CO_PLUS_HALF_PI[:13]


@pytest.mark.parametrize("kind,prefix,root", [(TreeKind.SubtreeAB, "ab", "a"), (TreeKind.SubtreeAC, "ac", "b")])
def test_against_reference_walk(kind, prefix, root):
    coin = random_coin(np.random.default_rng(21))
    ref = ref_moments(tuple(map(tuple, coin.matrix)), 14, 1 + 0j, 0j, prefix, root)
    assert np.max(np.abs(moments(coin, 14, kind).mu - np.array(ref))) <= 1e-14


def test_first_moments():
    coin = from_eigenphases(0.4, 2.5, 3.3)
    mu = moments(coin, 4).mu
    assert mu[0] == 1 and mu[1] == 0
    assert mu[2] == pytest.approx(coin.gamma)


def test_identity_and_c_pi():
    assert np.all(moments(identity(), 20).mu[1:] == 0)
    mu = moments(c_pi(), 18).mu
    assert np.allclose(mu, [1 if n % 6 == 0 else 0 for n in range(19)])
    mu = moments(c_sigma(), 10).mu
    assert np.allclose(mu, [1 if n % 2 == 0 else 0 for n in range(11)])


def test_horizon_equals_direct():
    coin = random_coin(np.random.default_rng(4))
    a = moments(coin, 15, method="horizon").mu
    b = moments(coin, 15, method="direct").mu
    assert np.max(np.abs(a - b)) <= 1e-14


def test_horizon_depth():
    assert horizon_depth(24) == 12
    assert horizon_depth(1) == 1
    assert horizon_depth(24, "direct") == 26


def test_full_tree_rejected():
    with pytest.raises(ValueError):
        moments(identity(), 4, TreeKind.FullA)


def test_config_route():
    coin = orthogonal_family(1.2)
    assert np.allclose(moments(config=uniform(coin), n_max=8).mu, moments(coin, 8).mu)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_moment_invariants(seed):
    mu = moments(random_coin(np.random.default_rng(seed)), 16).mu
    assert mu[0] == 1
    assert np.all(np.abs(mu) <= 1 + 1e-13)
    assert np.all(mu[1::2] == 0)


def test_g_series():
    assert g_series(moments(orthogonal_family(1.0), 10), 0).g == 1
    ev = g_series(moments(identity(), 10), 0.7j)
    assert ev.g == 1 and ev.F == 1
    ev = g_series(moments(c_pi(), 30), 0.5)
    assert abs(ev.g - 1 / (1 - 0.5**6)) <= ev.tail_bound
    assert ev.g == pytest.approx(1.015873, abs=1e-6)
    with pytest.raises(ValueError):
        g_series(np.ones(3), 1.0)


def test_tail_bound_is_rigorous():
    mu = moments(orthogonal_family(0.7), 30).mu
    for z in (0.3, 0.5j, 0.6 * np.exp(1j)):
        short = g_series(mu[:15], z)
        assert abs(short.g - g_series(mu, z).g) <= short.tail_bound


def test_g_series_array():
    mu = moments(orthogonal_family(0.7), 12).mu
    z = np.array([0.1, 0.3j, -0.4 + 0.1j])
    assert np.allclose(g_series_array(mu, z), [g_series(mu, w).g for w in z])


def test_memory_budget(monkeypatch):
    monkeypatch.setenv("QWTREE_MEM_BUDGET", "1e6")
    assert memory_budget() == 1_000_000
    with pytest.raises(MemoryBudgetError) as e:
        moments(identity(), 40)
    assert e.value.max_n == max_feasible_n(1_000_000)
    assert moment_memory_estimate(e.value.max_n) <= 1_000_000 < moment_memory_estimate(e.value.max_n + 1)
    monkeypatch.delenv("QWTREE_MEM_BUDGET")
    assert memory_budget() == 8 * 1024**3


def test_csv():
    text = moments(c_pi(), 6).to_csv("qwtree test")
    lines = text.splitlines()
    assert lines[0] == "# qwtree test" and lines[1] == "n,re_mu,im_mu"
    assert lines[-1] == "6,1.0,0.0"
