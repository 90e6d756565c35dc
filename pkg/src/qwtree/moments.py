"""Return amplitudes of the root vector and the power series of ``g``.

``mu[n] = <phi | U^n phi>`` with ``phi = a x a`` on the ``ab`` subtree (``a x b``
on the ``ac`` subtree).  Since ``U (U - z)^{-1} = sum_n z^n U^{-n}``, the
function ``g(z) = <phi | U (U - z)^{-1} phi>`` expands as
``sum_n z^n conj(mu[n])``; the conjugate is easy to get wrong and is fixed by
``g(0) = 1`` together with the closed form ``1 / (1 - z^6)`` for ``C_pi``.

A path from the root that reaches depth ``D + 1`` needs at least ``2D + 2``
steps to come back, so truncating at depth ``D`` and discarding whatever
falls off the frontier leaves ``mu[0..2D+1]`` exact.  ``moments`` uses this
(the default "horizon" method); the "direct" method keeps the whole light
cone and is kept as a cross-check.
"""
from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass

import numpy as np

from .tree_index import TreeKind, layout
from .walk import CoinConfig, WalkOperator, uniform

__all__ = [
    "MemoryBudgetError",
    "MomentSequence",
    "SeriesEval",
    "moments",
    "g_series",
    "g_series_array",
    "memory_budget",
    "horizon_depth",
    "moment_memory_estimate",
    "max_feasible_n",
]

DEFAULT_BUDGET = 8 * 1024**3
_COPIES = 4  # state, post-coin blocks, shifted output, temporaries


class MemoryBudgetError(MemoryError):
    def __init__(self, needed: int, budget: int, max_n: int):
        self.needed, self.budget, self.max_n = needed, budget, max_n
        super().__init__(
            f"needs ~{needed / 2**20:.1f} MiB, budget {budget / 2**20:.1f} MiB; "
            f"largest feasible N is {max_n}"
        )


def memory_budget() -> int:
    raw = os.environ.get("QWTREE_MEM_BUDGET")
    return int(float(raw)) if raw else DEFAULT_BUDGET


def horizon_depth(n_max: int, method: str = "horizon") -> int:
    if method == "direct":
        return n_max + 2
    return max(1, math.ceil((n_max - 1) / 2))


def moment_memory_estimate(n_max: int, kind=TreeKind.SubtreeAB, method: str = "horizon") -> int:
    D = horizon_depth(n_max, method)
    kind = TreeKind(kind)
    if kind is TreeKind.FullA:
        dim = 2 + 3 * ((2 << D) - 2)
    else:
        dim = 1 + 3 * ((1 << D) - 1)
    return 16 * _COPIES * dim


def max_feasible_n(budget: int, kind=TreeKind.SubtreeAB, method: str = "horizon") -> int:
    n = 0
    while moment_memory_estimate(n + 1, kind, method) <= budget:
        n += 1
        if n > 10_000:
            break
    return n


@dataclass
class MomentSequence:
    mu: np.ndarray
    kind: TreeKind
    exact_to: int
    label: str = ""

    @property
    def n_max(self) -> int:
        return len(self.mu) - 1

    def csv_rows(self):
        for n, m in enumerate(self.mu):
            yield n, float(m.real), float(m.imag)

    def to_csv(self, header: str = "") -> str:
        buf = io.StringIO()
        if header:
            for line in header.splitlines():
                buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "re_mu", "im_mu"])
        for n, re, im in self.csv_rows():
            w.writerow([n, repr(re), repr(im)])
        return buf.getvalue()


@dataclass(frozen=True)
class SeriesEval:
    z: complex
    g: complex
    tail_bound: float

    @property
    def F(self) -> complex:
        return 2 * self.g - 1


def moments(coin=None, n_max: int = 20, kind=TreeKind.SubtreeAB, *,
            config: CoinConfig | None = None, method: str = "horizon",
            budget: int | None = None) -> MomentSequence:
    """Exact ``mu[0..n_max]`` for the walk with the given coin or config."""
    kind = TreeKind(kind)
    if kind is TreeKind.FullA:
        raise ValueError("moments are defined for the cyclic root vector of a subtree")
    if config is None:
        if coin is None:
            raise ValueError("need a coin or a config")
        config = uniform(coin)
    budget = memory_budget() if budget is None else budget
    need = moment_memory_estimate(n_max, kind, method)
    if need > budget:
        raise MemoryBudgetError(need, budget, max_feasible_n(budget, kind, method))
    D = horizon_depth(n_max, method)
    U = WalkOperator(layout(D, kind), config)
    psi = U.root_state()
    mu = np.empty(n_max + 1, dtype=complex)
    mu[0] = 1.0
    step = U.advance if method == "horizon" else U.apply
    for n in range(1, n_max + 1):
        psi = step(psi)
        mu[n] = psi.data[0]
    label = getattr(coin, "label", lambda: "")() if coin is not None else ""
    return MomentSequence(mu, kind, n_max, label)


def g_series(ms: MomentSequence | np.ndarray, z: complex) -> SeriesEval:
    mu = ms.mu if isinstance(ms, MomentSequence) else np.asarray(ms)
    z = complex(z)
    r = abs(z)
    if r >= 1:
        raise ValueError("the series route needs |z| < 1")
    n = np.arange(len(mu))
    g = complex(np.sum(z**n * np.conj(mu)))
    tail = r ** len(mu) / (1 - r)
    return SeriesEval(z, g, tail)


def g_series_array(mu: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Vectorized ``sum_n z^n conj(mu_n)`` by Horner's rule."""
    z = np.asarray(z, dtype=complex)
    out = np.zeros_like(z)
    for m in np.conj(mu)[::-1]:
        out = out * z + m
    return out
