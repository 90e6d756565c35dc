"""Matrix-free coined walk ``U = S (I x C(x))`` on truncated rooted trees.

The shift sends the coin component ``sigma'`` at a site ``x`` to the
neighbour ``x * l`` with ``l = sigma(sigma')`` when ``|x|`` is even and
``l = sigma^2(sigma')`` when ``|x|`` is odd (``|a| = 1``).  The shift is a
permutation of basis states, so every output amplitude is gathered from
exactly one input amplitude, living either on the parent level or on the
child level.  One step is therefore a per-level 3x3 coin product followed by
two gathers.

Truncation at ``depth_cap`` is not unitary: amplitude moving below the cap is
lost.  ``apply`` refuses states that touch the cap; ``advance`` (used by the
moment computation) drops such amplitude on purpose.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coins import CirculantCoin, c_pi, theta_root_coin
from .tree_index import (
    EXIT,
    FrontierError,
    LevelLayout,
    Letter,
    TreeKind,
    Vertex,
    last_letters,
    layout,
    move_by_letter,
)

__all__ = [
    "CoinConfig",
    "WalkOperator",
    "StateVector",
    "OrbitReport",
    "apply",
    "apply_adjoint",
    "orbit_trace",
    "coin_perturbation_bound",
    "basis_state",
    "uniform",
    "pi_collar",
    "theta_root",
    "to_dense",
]

_CPI = c_pi().matrix


def _as_matrix(coin) -> np.ndarray:
    if isinstance(coin, CirculantCoin):
        return coin.matrix
    m = np.asarray(coin, dtype=complex)
    if m.shape != (3, 3):
        raise ValueError("coin must be 3x3")
    return m


@dataclass(frozen=True, eq=False)
class CoinConfig:
    """Assignment of a coin matrix to every site.

    Sites with word length ``|x| <= pi_radius`` carry ``C_pi`` (1 for the
    standard walk, 3 for the collared operator used in the resolvent
    expansion).  ``theta`` replaces the root coin by the theta-family
    boundary coin.  ``bulk_phase`` multiplies the bulk coin only, while
    ``global_phase`` multiplies every coin, boundary included.
    """

    bulk: np.ndarray
    pi_radius: int = 1
    theta: float | None = None
    bulk_phase: float = 0.0
    global_phase: float = 0.0

    def __post_init__(self):
        m = _as_matrix(self.bulk)
        m.setflags(write=False)
        object.__setattr__(self, "bulk", m)
        if self.pi_radius < 1:
            raise ValueError("pi_radius must be >= 1")

    def coin_at_depth(self, depth: int) -> np.ndarray:
        """Coin of the vertices at ``depth`` below ``a`` (word length depth+1)."""
        if depth == 0 and self.theta is not None:
            m = theta_root_coin(self.theta)
        elif depth + 1 <= self.pi_radius:
            m = _CPI
        else:
            m = self.bulk * np.exp(1j * self.bulk_phase) if self.bulk_phase else self.bulk
        if self.global_phase:
            m = m * np.exp(1j * self.global_phase)
        return m

    def is_unitary(self, depth_cap: int, tol: float = 1e-10) -> bool:
        for d in range(min(depth_cap, self.pi_radius + 1) + 1):
            m = self.coin_at_depth(d)
            if np.max(np.abs(m @ m.conj().T - np.eye(3))) > tol:
                return False
        return True


def uniform(coin, **kw) -> CoinConfig:
    return CoinConfig(_as_matrix(coin), pi_radius=1, **kw)


def pi_collar(coin, **kw) -> CoinConfig:
    return CoinConfig(_as_matrix(coin), pi_radius=3, **kw)


def theta_root(coin, theta: float, **kw) -> CoinConfig:
    return CoinConfig(_as_matrix(coin), pi_radius=1, theta=theta, **kw)


@dataclass(eq=False)
class StateVector:
    layout: LevelLayout
    data: np.ndarray
    support_depth: int = field(default=-1)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        if self.data.shape != (self.layout.total_dim,):
            raise ValueError("state does not match layout")
        if self.support_depth < 0:
            self.support_depth = self._scan_support()
        if self.support_depth > self.layout.depth_cap:
            raise FrontierError("support deeper than the layout")

    def _scan_support(self) -> int:
        deepest = 0
        for d in range(self.layout.depth_cap + 1):
            if np.any(self.data[self.layout.level_slice(d)]):
                deepest = d
        return deepest

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def amplitude(self, v: Vertex | str, coin) -> complex:
        from .tree_index import decode

        if isinstance(v, str):
            v = decode(v, self.layout.kind)
        return complex(self.data[self.layout.index_of(v, coin)])

    def vdot(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.data, other.data))

    def copy(self) -> "StateVector":
        return StateVector(self.layout, self.data.copy(), self.support_depth)


def basis_state(lay: LevelLayout, v: Vertex | str, coin) -> StateVector:
    from .tree_index import decode

    if isinstance(v, str):
        v = decode(v, lay.kind)
    data = np.zeros(lay.total_dim, dtype=complex)
    data[lay.index_of(v, coin)] = 1.0
    return StateVector(lay, data, v.depth)


def _s_forward(depth: int) -> int:
    # |x| = depth + 1: even sites use sigma (+1), odd sites sigma^2 (+2)
    return 1 if depth % 2 else 2


def _s_inverse(depth: int) -> int:
    return 2 if depth % 2 else 1


class WalkOperator:
    """The walk restricted to a depth-truncated tree."""

    def __init__(self, lay: LevelLayout, config: CoinConfig):
        self.layout = lay
        self.config = config
        kind = lay.kind
        if config.theta is not None and kind is not TreeKind.FullA:
            raise ValueError("the theta boundary coin couples both subtrees; use FullA")
        self._coins = [config.coin_at_depth(d) for d in range(lay.depth_cap + 1)]
        self._last = [last_letters(d, kind) for d in range(lay.depth_cap + 1)]
        self._root_idx = np.array([int(t) for t in kind.root_coins])

    @classmethod
    def build(cls, coin, depth_cap: int, kind=TreeKind.SubtreeAB, config: CoinConfig | None = None):
        cfg = config if config is not None else uniform(coin)
        return cls(layout(depth_cap, kind), cfg)

    @property
    def kind(self) -> TreeKind:
        return self.layout.kind

    @property
    def depth_cap(self) -> int:
        return self.layout.depth_cap

    @property
    def exactness_horizon(self) -> int:
        """Steps from a root-supported state that never touch the cap."""
        return self.layout.depth_cap - 1

    def zeros(self) -> StateVector:
        return StateVector(self.layout, np.zeros(self.layout.total_dim, dtype=complex), 0)

    def root_state(self, coin=None) -> StateVector:
        if coin is None:
            coin = self.kind.root_coins[0]
        return basis_state(self.layout, Vertex(0, 0, self.kind), coin)

    # -- core ----------------------------------------------------------

    def _levels(self, data: np.ndarray) -> list[np.ndarray]:
        lay = self.layout
        out = []
        for d in range(lay.depth_cap + 1):
            sl = data[lay.level_slice(d)]
            if d == 0:
                full = np.zeros(3, dtype=complex)
                full[self._root_idx] = sl
                out.append(full.reshape(1, 3))
            else:
                out.append(sl.reshape(-1, 3))
        return out

    def _shift(self, B: list[np.ndarray], s_of) -> tuple[np.ndarray, np.ndarray]:
        """Apply the shift to post-coin blocks; returns (root 3-vector, levels >= 1)."""
        lay = self.layout
        D = lay.depth_cap
        base = lay.level_offsets[1]
        rest = np.empty(lay.total_dim - base, dtype=complex)
        sig = np.arange(3)

        # the root receives the up-moves of the level-1 vertices
        root = np.zeros(3, dtype=complex)
        up1 = (self._last[1].astype(np.int64) - s_of(1)) % 3
        for k, s in enumerate(up1):
            root[s] = B[1][k, s]

        for d in range(1, D + 1):
            L = self._last[d].astype(np.int64)
            W = L.shape[0]
            letters = (sig + s_of(d - 1)) % 3
            from_parent = letters[None, :] == L[:, None]
            if d == 1:
                parent = np.broadcast_to(B[0], (W, 3))
            else:
                parent = np.repeat(B[d - 1], 2, axis=0)
            if d < D:
                bit = (letters[None, :] - L[:, None] - 1) % 3
                bit[bit == 2] = 0
                kids = B[d + 1].reshape(W, 2, 3)
                child = np.take_along_axis(kids, bit[:, None, :], axis=1)[:, 0, :]
                res = np.where(from_parent, parent, child)
            else:
                res = np.where(from_parent, parent, 0)
            sl = lay.level_slice(d)
            rest[sl.start - base: sl.stop - base] = res.reshape(-1)
        return root, rest

    def _forward(self, data: np.ndarray) -> np.ndarray:
        A = self._levels(data)
        B = [a @ c.T for a, c in zip(A, self._coins)]
        root, rest = self._shift(B, _s_forward)
        return np.concatenate([root[self._root_idx], rest])

    def _backward(self, data: np.ndarray) -> np.ndarray:
        # The inverse shift may park amplitude on a root coin letter outside
        # the tree; the adjoint root coin maps it back.
        root, rest = self._shift(self._levels(data), _s_inverse)
        lay = self.layout
        base = lay.level_offsets[1]
        out = np.empty(lay.total_dim, dtype=complex)
        out[:base] = (root @ self._coins[0].conj())[self._root_idx]
        for d in range(1, lay.depth_cap + 1):
            sl = lay.level_slice(d)
            blk = rest[sl.start - base: sl.stop - base].reshape(-1, 3)
            out[sl] = (blk @ self._coins[d].conj()).reshape(-1)
        return out

    def advance(self, psi: StateVector, adjoint: bool = False) -> StateVector:
        """One step, silently dropping amplitude pushed below the cap."""
        data = self._backward(psi.data) if adjoint else self._forward(psi.data)
        return StateVector(self.layout, data, min(psi.support_depth + 1, self.depth_cap))

    def apply(self, psi: StateVector, adjoint: bool = False) -> StateVector:
        if psi.layout != self.layout:
            raise ValueError("state layout does not match the operator")
        if psi.support_depth >= self.depth_cap:
            raise FrontierError(
                f"state reaches depth {psi.support_depth}; the layout (cap {self.depth_cap}) "
                "must be deepened before stepping"
            )
        return self.advance(psi, adjoint)

    def coin_matrices(self) -> list[np.ndarray]:
        return list(self._coins)


def apply(U: WalkOperator, psi: StateVector) -> StateVector:
    return U.apply(psi)


def apply_adjoint(U: WalkOperator, psi: StateVector) -> StateVector:
    return U.apply(psi, adjoint=True)


def to_dense(U: WalkOperator, max_depth: int | None = None) -> np.ndarray:
    """Columns ``U e_j`` for all basis states ``e_j`` above ``max_depth``.

    Only meant for small layouts.  Rows cover the whole layout.
    """
    lay = U.layout
    if max_depth is None:
        max_depth = lay.depth_cap - 1
    ncols = lay.level_offsets[max_depth + 1]
    cols = np.empty((lay.total_dim, ncols), dtype=complex)
    for j in range(ncols):
        e = np.zeros(lay.total_dim, dtype=complex)
        e[j] = 1.0
        cols[:, j] = U._forward(e)
    return cols


# -- permutation coins: exact orbits ---------------------------------------


@dataclass
class OrbitReport:
    states: list[tuple[Vertex, Letter]]
    phase: complex
    period: int | None

    @property
    def closed(self) -> bool:
        return self.period is not None

    def words(self) -> list[str]:
        return [f"{v}⊗{t.name}" for v, t in self.states]


def _permutation_column(m: np.ndarray, tau: int, tol: float = 1e-12) -> tuple[int, complex]:
    col = m[:, tau]
    nz = np.flatnonzero(np.abs(col) > tol)
    if len(nz) != 1 or abs(abs(col[nz[0]]) - 1) > 1e-10:
        raise ValueError("orbit tracing needs permutation coins (up to phases)")
    return int(nz[0]), complex(col[nz[0]])


def orbit_trace(U: WalkOperator | CoinConfig, start=None, max_steps: int = 64,
                kind: TreeKind = TreeKind.SubtreeAB) -> OrbitReport:
    """Follow a basis state under a walk whose coins are phased permutations.

    The tree is not truncated here: vertices are tracked symbolically, so an
    open orbit can be followed for any number of steps.
    """
    if isinstance(U, WalkOperator):
        config, kind = U.config, U.kind
    else:
        config, kind = U, TreeKind(kind)
    # validate every distinct coin up front
    for d in range(config.pi_radius + 2):
        m = config.coin_at_depth(d)
        for tau in range(3):
            _permutation_column(m, tau)
    if start is None:
        start = (Vertex(0, 0, kind), kind.root_coins[0])
    v, tau = start
    if isinstance(v, str):
        from .tree_index import decode

        v = decode(v, kind)
    tau = Letter.of(tau)
    first = (v, tau)
    states = [first]
    phase = 1.0 + 0j
    for n in range(1, max_steps + 1):
        m = config.coin_at_depth(v.depth)
        s, p = _permutation_column(m, int(tau))
        phase *= p
        letter = Letter((s + _s_forward(v.depth)) % 3)
        nv = move_by_letter(v, letter)
        if nv is EXIT:
            raise FrontierError(f"orbit leaves the tree from {v}")
        v, tau = nv, Letter(s)
        if (v, tau) == first:
            return OrbitReport(states, phase, n)
        states.append((v, tau))
    return OrbitReport(states, phase, None)


def coin_perturbation_bound(C, C2, theta: float, depth_cap: int = 5, n_random: int = 20,
                            seed: int = 0) -> tuple[float, float]:
    """Probe ``||(U^theta(C) - U^theta(C2)) psi||`` against ``||C - C2||``."""
    m1, m2 = _as_matrix(C), _as_matrix(C2)
    lay = layout(depth_cap, TreeKind.FullA)
    U1 = WalkOperator(lay, theta_root(m1, theta))
    U2 = WalkOperator(lay, theta_root(m2, theta))
    rhs = float(np.linalg.norm(m1 - m2, 2))
    ncols = lay.level_offsets[depth_cap - 1]
    lhs = 0.0
    for j in range(ncols):
        e = np.zeros(lay.total_dim, dtype=complex)
        e[j] = 1.0
        lhs = max(lhs, float(np.linalg.norm(U1._forward(e) - U2._forward(e))))
    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        e = np.zeros(lay.total_dim, dtype=complex)
        e[:ncols] = rng.normal(size=ncols) + 1j * rng.normal(size=ncols)
        e /= np.linalg.norm(e)
        lhs = max(lhs, float(np.linalg.norm(U1._forward(e) - U2._forward(e))))
    return lhs, rhs
