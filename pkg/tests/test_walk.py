import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import ref_step
from qwtree.coins import c_pi, from_eigenphases, identity, orthogonal_family, random_coin
from qwtree.tree_index import FrontierError, Letter, TreeKind, format_word, layout
from qwtree.walk import (
    CoinConfig,
    StateVector,
    WalkOperator,
    apply,
    apply_adjoint,
    basis_state,
    coin_perturbation_bound,
    orbit_trace,
    pi_collar,
    theta_root,
    to_dense,
    uniform,
)


def to_dict(psi: StateVector) -> dict:
    lay = psi.layout
    out = {}
    for i in np.flatnonzero(psi.data):
        v, t = lay.basis_label(int(i))
        out.setdefault(format_word(v.word), {})[t.name] = complex(psi.data[i])
    return out


def from_dict(lay, d) -> np.ndarray:
    from qwtree.tree_index import decode

    data = np.zeros(lay.total_dim, dtype=complex)
    for w, amps in d.items():
        for t, a in amps.items():
            data[lay.index_of(decode(w, lay.kind), Letter[t])] = a
    return data


def random_state(lay, rng, max_depth):
    data = np.zeros(lay.total_dim, dtype=complex)
    n = lay.level_offsets[max_depth + 1]
    data[:n] = rng.normal(size=n) + 1j * rng.normal(size=n)
    return StateVector(lay, data / np.linalg.norm(data))


@pytest.mark.parametrize("kind,prefix", [(TreeKind.SubtreeAB, "ab"), (TreeKind.SubtreeAC, "ac")])
@pytest.mark.parametrize("pi_radius", [1, 3])
def test_matches_reference_walk(kind, prefix, pi_radius):
    rng = np.random.default_rng(7)
    coin = random_coin(rng)
    lay = layout(6, kind)
    U = WalkOperator(lay, CoinConfig(coin.matrix, pi_radius=pi_radius))
    psi = random_state(lay, rng, 5)
    ref, lost = ref_step(to_dict(psi), tuple(map(tuple, coin.matrix)), pi_radius, prefix, 0j)
    assert lost == 0
    got = U.apply(psi).data
    assert np.allclose(got, from_dict(lay, ref), atol=1e-14)


def test_root_step_subtree():
    coin = from_eigenphases(0.1, 1.3, 4.0)
    U = WalkOperator.build(coin, 4)
    out = U.apply(U.root_state())
    assert out.amplitude("ab", "c") == pytest.approx(1)
    assert np.linalg.norm(out.data) == pytest.approx(1)


def test_full_tree_theta_root():
    th = 0.37
    U = WalkOperator(layout(4, TreeKind.FullA), theta_root(orthogonal_family(1.0), th))
    out = U.apply(basis_state(U.layout, "a", "a"))
    assert out.amplitude("ab", "c") == pytest.approx(math.cos(th))
    assert out.amplitude("ac", "a") == pytest.approx(math.sin(th))
    assert out.norm() == pytest.approx(1)


def test_one_step_back_to_root_is_gamma():
    coin = from_eigenphases(0.2, 2.2, 5.0)
    U = WalkOperator.build(coin, 4)
    out = U.apply(basis_state(U.layout, "ab", "c"))
    assert out.amplitude("a", "a") == pytest.approx(coin.gamma)


def test_adjoint_of_root_step():
    U = WalkOperator.build(orthogonal_family(0.4), 4)
    back = apply_adjoint(U, basis_state(U.layout, "ab", "c"))
    assert back.amplitude("a", "a") == pytest.approx(1)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(list(TreeKind)))
def test_unitarity_property(seed, kind):
    rng = np.random.default_rng(seed)
    coin = random_coin(rng)
    cfg = theta_root(coin, rng.uniform(0, 6)) if kind is TreeKind.FullA else uniform(coin)
    U = WalkOperator(layout(6, kind), cfg)
    psi = random_state(U.layout, rng, 4)
    phi = apply(U, psi)
    assert phi.norm() == pytest.approx(1, abs=1e-13)
    assert np.allclose(apply_adjoint(U, phi).data, psi.data, atol=1e-13)
    assert np.allclose(U.apply(apply_adjoint(U, psi)).data, psi.data, atol=1e-13)


def test_dense_is_isometry_above_cap():
    U = WalkOperator.build(random_coin(np.random.default_rng(1)), 5)
    M = to_dense(U)
    assert np.allclose(M.conj().T @ M, np.eye(M.shape[1]), atol=1e-13)


def test_apply_refuses_frontier():
    U = WalkOperator.build(identity(), 3)
    psi = basis_state(U.layout, "abab", "c")
    with pytest.raises(FrontierError):
        U.apply(psi)
    # advance drops what falls off instead
    assert U.advance(psi).norm() <= 1


def test_global_vs_bulk_phase():
    coin = orthogonal_family(0.9)
    base = WalkOperator.build(coin, 5)
    glob = WalkOperator(layout(5), uniform(coin, global_phase=0.3))
    psi = random_state(base.layout, np.random.default_rng(2), 3)
    assert np.allclose(glob.apply(psi).data, cmath.exp(0.3j) * base.apply(psi).data)
    bulk = WalkOperator(layout(5), uniform(coin, bulk_phase=0.3))
    # the root keeps C_pi, so bulk and global phases differ on the root
    r = bulk.apply(bulk.root_state())
    assert r.amplitude("ab", "c") == pytest.approx(1)


def test_orbit_c_pi():
    rep = orbit_trace(uniform(c_pi()))
    assert rep.period == 6 and rep.phase == pytest.approx(1)
    assert rep.words() == ["a⊗a", "ab⊗c", "abc⊗b", "ab⊗a", "aba⊗c", "ab⊗b"]


def test_orbit_identity_open():
    rep = orbit_trace(uniform(identity()), max_steps=20)
    assert rep.period is None
    assert rep.words()[:4] == ["a⊗a", "ab⊗c", "aba⊗c", "abab⊗c"]


def test_orbit_phased_c_pi():
    d = 0.23
    rep = orbit_trace(uniform(c_pi().scaled(d)), max_steps=6)
    # the root keeps the unphased C_pi: five of the six steps carry the phase
    assert rep.phase == pytest.approx(cmath.exp(5j * d))
    # with the global phase every step picks up e^{i d}
    rep_g = orbit_trace(uniform(c_pi(), global_phase=d))
    assert rep_g.period == 6 and rep_g.phase == pytest.approx(cmath.exp(6j * d))
    assert rep.period == 6


def test_orbit_rejects_generic_coin():
    with pytest.raises(ValueError):
        orbit_trace(uniform(orthogonal_family(1.0)))


def test_coin_perturbation_bound():
    C = orthogonal_family(0.5)
    assert coin_perturbation_bound(C, C, 0.3) == (0.0, 0.0)
    lhs, rhs = coin_perturbation_bound(identity(), orthogonal_family(math.pi / 2), 0.7)
    assert lhs <= rhs + 1e-12
    rng = np.random.default_rng(5)
    for _ in range(100):
        lhs, rhs = coin_perturbation_bound(random_coin(rng), random_coin(rng), rng.uniform(0, 6),
                                           depth_cap=3, n_random=2)
        assert lhs <= rhs + 1e-12


def test_pi_collar_coins():
    U = WalkOperator(layout(5), pi_collar(orthogonal_family(1.0)))
    mats = U.coin_matrices()
    for d in range(3):
        assert np.allclose(mats[d], c_pi().matrix)
    assert np.allclose(mats[3], orthogonal_family(1.0).matrix)
