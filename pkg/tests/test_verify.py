import json
import math

import numpy as np
import pytest

from qwtree.coins import c_sigma, identity, orthogonal_family, random_coin
from qwtree.verify import (
    CheckReport,
    cyclicity_probe,
    format_table,
    invariant_subspace_checks,
    collared_resolvent_check,
    reports_to_json,
    resolvent_closed_form,
    run_suite,
    subtree_equivalence_check,
)


def test_closed_form_entries():
    z = 0.3 + 0.2j
    G = resolvent_closed_form(z)
    assert G[0, 1] == pytest.approx(1 / (1 - z**6))
    assert G[0, 0] == pytest.approx(z**5 / (1 - z**6))
    # G(0) is U^{-1} on the cycle: a 0/1 pattern
    assert set(np.unique(resolvent_closed_form(0).real)) == {0.0, 1.0}


@pytest.mark.parametrize("coin", [orthogonal_family(math.pi / 2), identity(),
                                  random_coin(np.random.default_rng(0))])
def test_collared_resolvent(coin):
    r = collared_resolvent_check(coin)
    assert r.status == "pass" and r.residual <= 1e-12 and r.detail["leakage"] < 1e-13


def test_subtree_equivalence():
    for c in (orthogonal_family(math.pi / 2), random_coin(np.random.default_rng(1)),
              c_sigma().scaled(math.pi / 7)):
        assert subtree_equivalence_check(c, 16).status == "pass"


def test_cyclicity():
    assert cyclicity_probe(orthogonal_family(math.pi / 2), 4).status == "pass"
    assert cyclicity_probe(random_coin(np.random.default_rng(2)), 4).status == "pass"
    r = cyclicity_probe(c_sigma(), 4)
    assert r.status == "degenerate-skip" and "hypothesis" in r.detail["reason"]


def test_cyclicity_skips_identity():
    assert cyclicity_probe(identity(), 3).status == "degenerate-skip"


def test_invariant_subspaces():
    reps = invariant_subspace_checks()
    assert len(reps) == 3 and all(r.status == "pass" for r in reps)


def test_split_fails_off_theta_zero():
    # negative control: at theta != 0 the two subtrees are coupled
    from qwtree.tree_index import TreeKind, layout
    from qwtree.walk import WalkOperator, basis_state, theta_root

    U = WalkOperator(layout(4, TreeKind.FullA), theta_root(orthogonal_family(1.0), 0.5))
    out = U.apply(basis_state(U.layout, "a", "a"))
    assert abs(out.amplitude("ac", "a")) > 0.1


def test_report_judge():
    assert CheckReport.judge("x", 1e-13, 1e-12, "c").status == "pass"
    assert CheckReport.judge("x", 1e-11, 1e-12, "c").status == "fail"
    assert CheckReport.judge("x", float("nan"), 1.0, "c").status == "fail"


def test_fast_suite_passes_and_is_deterministic():
    a = run_suite("fast", seed=3)
    b = run_suite("fast", seed=3)
    assert [r.check_id for r in a] == sorted(r.check_id for r in a)
    assert not any(r.failed for r in a)
    assert reports_to_json(a, 3) == reports_to_json(b, 3)
    table = format_table(a, 3)
    assert table.startswith("seed = 3")
    payload = json.loads(reports_to_json(a, 3))
    assert payload["seed"] == 3 and len(payload["checks"]) == len(a)
    with pytest.raises(ValueError):
        run_suite("nope")
