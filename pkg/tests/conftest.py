"""Shared fixtures and an independent reference walk.

The reference walk works directly on reduced words and dictionaries, with
no level layout and no vectorization, so it shares no code with the
package.  It accepts any number type (``Fraction`` gives exact moments for
rational coins).
"""
from __future__ import annotations

import math

import numpy as np
import pytest

SIGMA = {"a": "b", "b": "c", "c": "a"}
LETTERS = "abc"
CPI = ((0, 1, 0), (0, 0, 1), (1, 0, 0))  # circ(0, 0, 1)


def circ(c0, c1, c2):
    return ((c0, c2, c1), (c1, c0, c2), (c2, c1, c0))


def sig(letter, k):
    for _ in range(k % 3):
        letter = SIGMA[letter]
    return letter


def times(word, letter):
    """Reduced product ``word * letter`` in the free product of three Z_2."""
    if word and word[-1] == letter:
        return word[:-1]
    return word + letter


def ref_step(state, coin, pi_radius=1, prefix="ab", zero=0):
    """One step of ``U = S (I x C)`` on ``{word: {letter: amp}}``.

    Amplitude that would leave the subtree ``a`` + ``prefix...`` is returned
    separately so callers can assert it vanishes.
    """
    out, lost = {}, zero
    for word, amps in state.items():
        m = CPI if len(word) <= pi_radius else coin
        for i, out_letter in enumerate(LETTERS):
            v = zero
            for j, in_letter in enumerate(LETTERS):
                a = amps.get(in_letter, zero)
                if a != zero and m[i][j] != 0:
                    v = v + m[i][j] * a
            if v == zero:
                continue
            step = sig(out_letter, 1 if len(word) % 2 == 0 else 2)
            nw = times(word, step)
            inside = nw == "a" or nw.startswith(prefix)
            if not inside:
                lost = lost + abs(v)
                continue
            slot = out.setdefault(nw, {})
            slot[out_letter] = slot.get(out_letter, zero) + v
    return out, lost


def ref_moments(coin, n, one=1, zero=0, prefix="ab", root_coin="a"):
    """``mu[0..n]`` by brute force; asserts the subtree is invariant."""
    state = {"a": {root_coin: one}}
    mu = [one]
    for _ in range(n):
        state, lost = ref_step(state, coin, prefix=prefix, zero=zero)
        assert lost == zero
        mu.append(state.get("a", {}).get(root_coin, zero))
    return mu


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def co_plus_half_pi():
    from qwtree.coins import orthogonal_family

    return orthogonal_family(math.pi / 2)


# -- acceptance summary -------------------------------------------------------

N_CRITERIA = 10


@pytest.fixture
def criterion(request):
    """Record ``(number, ok, detail)`` for the acceptance summary and print it."""
    store = request.config.stash.setdefault(_ACCEPT_KEY, {})

    def record(number: int, ok: bool, detail: str, part: str = ""):
        store.setdefault(number, []).append((bool(ok), part, detail))
        tag = f"{number}{part}"
        print(f"criterion {tag:>3}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return record


_ACCEPT_KEY = pytest.StashKey[dict]()


def pytest_terminal_summary(terminalreporter, config):
    store = config.stash.get(_ACCEPT_KEY, None)
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        parts = store.get(n)
        if not parts:
            terminalreporter.write_line(f"criterion {n:>2}: NOT RUN")
            continue
        ok = all(p[0] for p in parts)
        detail = "; ".join(f"{part + ': ' if part else ''}{'ok' if o else 'FAILED'} {d}"
                           for o, part, d in parts)
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
