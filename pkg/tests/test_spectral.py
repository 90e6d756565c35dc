import json
import math

import numpy as np
import pytest

from qwtree.coins import c_pi, c_sigma, identity, orthogonal_family
from qwtree.implicit import DegenerateCoinError
from qwtree.moments import moments
from qwtree.spectral import (
    DEFAULT_SCHEDULE,
    NotDegenerateError,
    atom_candidates,
    atoms,
    density,
    point_mass,
    radial_grid,
    richardson,
    special_case_spectrum,
)
from qwtree.tree_index import TreeKind
from qwtree.walk import pi_collar, uniform

SIXTH = np.exp(1j * np.pi * np.arange(6) / 3)


def test_radial_grid_contains_schedule():
    r = radial_grid()
    assert r[0] == 0 and np.all(np.diff(r) > 0)
    for s in DEFAULT_SCHEDULE:
        assert np.min(np.abs(r - s)) == 0
    with pytest.raises(ValueError):
        radial_grid((0.5, 1.0))


def test_richardson_removes_linear_term():
    h = 1 - np.asarray(DEFAULT_SCHEDULE)
    est, err = richardson(3.0 + 5.0 * h, DEFAULT_SCHEDULE)
    assert est == pytest.approx(3.0) and err < 1e-12
    with pytest.raises(ValueError):
        richardson(np.ones(3), (0.5, 0.6, 0.7))


def test_identity_density_is_lebesgue():
    d = density(identity(), 16)
    assert d.route == "orbit"
    assert np.max(np.abs(d.w - 1)) <= 1e-9 and d.ac_mass == 1 and not d.atoms


@pytest.mark.parametrize("coin", [c_pi(), c_sigma().scaled(0.4)])
def test_permutation_coins_rejected(coin):
    with pytest.raises(DegenerateCoinError):
        density(coin, 8)
    with pytest.raises(DegenerateCoinError):
        atoms(coin)


def test_co_plus_density_symmetries():
    d = density(orthogonal_family(math.pi / 2), 256, with_atoms=False)
    assert np.all(d.status == "ok")
    w = d.w
    assert np.max(np.abs(w - np.roll(w, 128))) <= 1e-6  # theta -> theta + pi
    assert np.max(np.abs(w - np.roll(w[::-1], 1))) <= 1e-6  # theta -> -theta
    assert np.min(w) >= -1e-6


def test_generic_coin_density_pi_symmetry():
    from qwtree.coins import from_eigenphases

    d = density(from_eigenphases(0.1, 2.0, 4.0), 128, with_atoms=False)
    ok = (d.status == "ok") & np.roll(d.status == "ok", 64)
    assert np.max(np.abs(d.w - np.roll(d.w, 64))[ok]) <= 1e-6


@pytest.mark.parametrize("t", [0.3, 1.0, math.pi / 2, 2.0])
def test_co_plus_has_no_atoms(t):
    cands = atom_candidates(orthogonal_family(t))
    assert cands
    for c in cands:
        assert c.weight.real < 0 and not c.accepted
        assert c.radial <= 1e-5


def test_co_minus_atom_confirmed_by_moments():
    # independent of the implicit equation: the Cesaro mean of
    # mu_n e^{-i n theta0} converges to the point mass at theta0
    coin = orthogonal_family(0.2, -1)
    found = atoms(coin)
    assert found
    t0, w = max(found, key=lambda a: a[1])
    mu = moments(coin, 36).mu
    n = np.arange(len(mu))
    ces = np.mean(mu * np.exp(-1j * n * t0)).real
    assert abs(ces - w) <= 0.02


def test_point_mass_c_pi():
    for k in range(6):
        pm = point_mass(c_pi(), k * math.pi / 3)
        assert pm.weight == pytest.approx(1 / 6, abs=1e-6)
    assert point_mass(c_pi(), math.pi / 6).weight == pytest.approx(0, abs=1e-6)
    assert point_mass(identity(), 1.234).weight == pytest.approx(0, abs=1e-12)


def test_point_mass_config_and_phase():
    pm = point_mass(uniform(c_pi(), global_phase=0.2), 0.2)
    assert pm.weight == pytest.approx(1 / 6, abs=1e-6)
    pm = point_mass(uniform(c_pi(), global_phase=0.2), 0.0)
    assert abs(pm.weight) <= 1e-5
    with pytest.raises(ValueError):
        point_mass(pi_collar(c_pi()), 0.0)


def test_point_mass_reports_sequence():
    pm = point_mass(c_pi(), 0.0)
    assert len(pm.raw) == len(DEFAULT_SCHEDULE) and pm.conclusive
    assert pm.theta == 0.0
    assert point_mass(c_pi(), -2 * math.pi).theta == 0.0


def test_density_normalization_with_atoms():
    d = density(orthogonal_family(0.2, -1), 256)
    assert d.atoms and abs(d.total_mass - 1) <= 3e-3
    assert np.all(d.status[d.status != "ok"] == "atom")


def test_special_c_pi():
    s = special_case_spectrum(c_pi())
    assert np.allclose(s.eigenvalues, SIXTH)  # sorted by phase
    assert np.allclose(s.weights, 1 / 6)
    assert s.sixth_root_defect() <= 1e-12 and s.essential_matches()
    assert s.block == ["a⊗a", "ab⊗c", "abc⊗b", "ab⊗a", "aba⊗c", "ab⊗b"]


def test_special_identity_open():
    s = special_case_spectrum(identity(), TreeKind.FullA, theta=0.3)
    assert s.open_orbit and len(s.eigenvalues) == 0


def test_special_phased_sigma_essential():
    d = 0.3
    s = special_case_spectrum(c_sigma(), "FullA", theta=0.4, delta=d)
    assert s.essential_matches(d)
    assert np.allclose(np.abs(s.eigenvalues), 1) and s.leakage == 0


def test_special_theta_block():
    s = special_case_spectrum(c_pi(), "FullA", theta=0.0)
    assert len(s.block) == 12 and s.sixth_root_defect() <= 1e-10
    assert sum(s.weights) == pytest.approx(1)


def test_special_rejects_generic():
    with pytest.raises(NotDegenerateError):
        special_case_spectrum(orthogonal_family(1.0))
    with pytest.raises(ValueError):
        special_case_spectrum(c_pi(), TreeKind.SubtreeAB, theta=0.2)


def test_outputs():
    d = density(identity(), 8)
    lines = d.to_csv("qwtree x").splitlines()
    assert lines[0] == "# qwtree x" and lines[1] == "theta,w,r_used,err_estimate"
    assert len(lines) == 10
    assert json.loads(json.dumps(d.to_dict()))["ac_mass"] == 1
    s = special_case_spectrum(c_pi())
    assert len(json.loads(json.dumps(s.to_dict()))["eigenphases"]) == 6


@pytest.mark.slow
def test_normalization_error_is_quadrature():
    # a narrow band with a sharp edge: trapezoid error falls like the grid step
    c = orthogonal_family(2.5)
    e1 = abs(density(c, 512, with_atoms=False).ac_mass - 1)
    e2 = abs(density(c, 2048, with_atoms=False).ac_mass - 1)
    assert e2 < e1 / 2
