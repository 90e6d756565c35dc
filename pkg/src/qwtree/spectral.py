"""Spectral measure of the root vector from boundary values of ``g``.

``F = 2 g - 1`` is the Caratheodory function of the measure; its radial
limits give the absolutely continuous density ``w(theta) = Re F`` and the
point masses ``lim (1 - r) (g - 1/2)``.  Values of ``g`` near the circle come
from continuing the branch of the quintic outward from ``g(0) = 1``; the
limit ``r -> 1`` is estimated from the schedule ``r = 1 - 2^{-k}`` by one step
of Richardson extrapolation in ``1 - r``.

Coins that are a phase times ``I``, ``C_sigma`` or ``C_pi`` are handled by
``special_case_spectrum``, which diagonalizes the finite invariant blocks
through the root instead.
"""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .coins import CirculantCoin, degenerate_kind
from .implicit import (
    DegenerateCoinError,
    canonical_phi,
    c5_circle_roots,
    track_rays,
)
from .tree_index import Letter, TreeKind, Vertex, layout
from .walk import CoinConfig, WalkOperator, orbit_trace

__all__ = [
    "DEFAULT_SCHEDULE",
    "SpectralDensity",
    "AtomCandidate",
    "PointMass",
    "SpecialSpectrum",
    "NotDegenerateError",
    "radial_grid",
    "richardson",
    "density",
    "atom_candidates",
    "atoms",
    "point_mass",
    "special_case_spectrum",
    "closure",
    "restrict",
]

DEFAULT_SCHEDULE = tuple(1 - 2.0**-k for k in range(4, 15))


class NotDegenerateError(ValueError):
    """A generic coin was passed where a permutation coin is required."""


def radial_grid(schedule=DEFAULT_SCHEDULE, n_inner: int = 64, per_octave: int = 16) -> np.ndarray:
    """Radii from 0 to the last schedule point, containing every schedule point.

    Uniform up to the first schedule radius, then uniform in ``-log2(1 - r)``
    so that the step shrinks with the distance to the circle.
    """
    sched = np.sort(np.asarray(schedule, dtype=float))
    if sched[0] <= 0 or sched[-1] >= 1:
        raise ValueError("schedule radii must lie in (0, 1)")
    inner = np.linspace(0.0, sched[0], n_inner + 1)
    s0, s1 = -math.log2(1 - sched[0]), -math.log2(1 - sched[-1])
    n_outer = max(1, int(math.ceil((s1 - s0) * per_octave)))
    outer = 1 - 2.0 ** -np.linspace(s0, s1, n_outer + 1)
    r = np.unique(np.concatenate([inner, outer, sched]))
    # drop near-duplicates introduced by rounding
    keep = np.concatenate([[True], np.diff(r) > 1e-13])
    return r[keep]


def _schedule_index(r: np.ndarray, schedule) -> np.ndarray:
    return np.array([int(np.argmin(np.abs(r - s))) for s in schedule])


def richardson(values: np.ndarray, schedule) -> tuple[np.ndarray, np.ndarray]:
    """First-order extrapolation to ``r = 1`` along the last axis.

    ``values[..., k]`` sits at ``schedule[k]``; consecutive distances to the
    circle must halve.  Returns the final extrapolant and the difference of
    the last two as an error estimate.
    """
    h = 1 - np.asarray(schedule, dtype=float)
    if len(h) < 3:
        raise ValueError("need at least three schedule points")
    ratio = h[:-1] / h[1:]
    if not np.allclose(ratio, 2.0):
        raise ValueError("schedule must halve the distance to the circle")
    ext = 2 * values[..., 1:] - values[..., :-1]
    return ext[..., -1], np.abs(ext[..., -1] - ext[..., -2])


# -- density ------------------------------------------------------------------------


@dataclass
class SpectralDensity:
    theta: np.ndarray
    w: np.ndarray
    r_used: np.ndarray
    err: np.ndarray
    status: np.ndarray
    atoms: list = field(default_factory=list)
    label: str = ""
    route: str = "quintic"

    @property
    def ac_mass(self) -> float:
        ok = self.status == "ok"
        if not ok.any():
            return float("nan")
        # trapezoid on a periodic uniform grid = plain mean
        return float(np.mean(self.w[ok]))

    @property
    def total_mass(self) -> float:
        return self.ac_mass + sum(a[1] for a in self.atoms)

    @property
    def inconclusive(self) -> bool:
        return bool(np.any(self.status != "ok"))

    def to_csv(self, header: str = "") -> str:
        buf = io.StringIO()
        for line in header.splitlines():
            buf.write(f"# {line}\n")
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["theta", "w", "r_used", "err_estimate"])
        for t, w, r, e in zip(self.theta, self.w, self.r_used, self.err):
            wr.writerow([repr(float(t)), repr(float(w)), repr(float(r)), repr(float(e))])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "route": self.route,
            "theta": self.theta.tolist(),
            "w": self.w.tolist(),
            "r_used": self.r_used.tolist(),
            "err_estimate": self.err.tolist(),
            "status": self.status.tolist(),
            "atoms": [{"theta": t, "weight": w} for t, w in self.atoms],
            "ac_mass": self.ac_mass,
        }


def _chunks(n: int, k: int):
    k = max(1, min(k, n))
    bounds = np.linspace(0, n, k + 1).astype(int)
    return [slice(bounds[i], bounds[i + 1]) for i in range(k)]


def _branch_on_grid(phi, thetas, r, workers: int | None, on_break="mark"):
    workers = workers or min(8, os.cpu_count() or 1)
    parts = _chunks(len(thetas), workers)
    if len(parts) == 1:
        return track_rays(phi, thetas, r, on_break=on_break)
    with ThreadPoolExecutor(max_workers=workers) as ex:
        res = list(ex.map(lambda s: track_rays(phi, thetas[s], r, on_break=on_break), parts))
    return tuple(np.concatenate([x[i] for x in res]) for i in range(4))


def density(coin: CirculantCoin, grid_size: int = 1024, r_schedule=DEFAULT_SCHEDULE,
            workers: int | None = None, with_atoms: bool = True) -> SpectralDensity:
    """Density ``w`` on ``grid_size`` equally spaced angles.

    Phase multiples of the identity have ``g = 1`` identically (the root
    orbit never returns), so ``w = 1`` without any root finding.  Phase
    multiples of ``C_sigma`` and ``C_pi`` raise :class:`DegenerateCoinError`;
    their spectrum is pure point and comes from :func:`special_case_spectrum`.
    """
    theta = 2 * np.pi * np.arange(grid_size) / grid_size
    sched = np.asarray(r_schedule, dtype=float)
    perm = degenerate_kind(coin)
    if perm is not None:
        if perm.kind != "identity":
            raise DegenerateCoinError(
                f"{perm.kind} coin: spectrum is pure point, see special_case_spectrum"
            )
        rep = special_case_spectrum(coin)
        if not rep.open_orbit:
            raise RuntimeError("identity-type coin with a closed root orbit")
        ones = np.ones(grid_size)
        return SpectralDensity(theta, ones, np.full(grid_size, sched[-1]), np.zeros(grid_size),
                               np.array(["ok"] * grid_size, dtype=object), [], coin.label(),
                               route="orbit")
    phi = canonical_phi(coin)
    r = radial_grid(sched)
    G, _, _, broken = _branch_on_grid(phi, theta, r, workers)
    idx = _schedule_index(r, sched)
    wk = 2 * G[:, idx].real - 1
    w, err = richardson(wk, sched)
    status = np.where(broken | ~np.isfinite(w), "singular-candidate", "ok").astype(object)
    found = atoms(coin, sched) if with_atoms else []
    # a grid angle sitting on an atom sees the pole, not the density
    near = 4 * (1 - sched[-1])
    for t0, _ in found:
        d = np.abs(np.angle(np.exp(1j * (theta - t0))))
        status[d <= near] = "atom"
    w = np.where(status == "ok", w, np.nan)
    return SpectralDensity(theta, w, np.full(grid_size, sched[-1]), err, status, found,
                           coin.label())


# -- atoms ---------------------------------------------------------------------------


@dataclass
class PointMass:
    theta: float
    weight: float
    err: float
    raw: list[float]
    conclusive: bool


def _coin_and_angle(coin_or_config, theta0: float) -> tuple[CirculantCoin, float]:
    if isinstance(coin_or_config, CirculantCoin):
        return coin_or_config, theta0
    cfg = coin_or_config
    if not isinstance(cfg, CoinConfig):
        raise TypeError("expected a CirculantCoin or a CoinConfig")
    if cfg.pi_radius != 1 or cfg.theta is not None:
        raise ValueError("point masses are available for the standard boundary only")
    m = cfg.bulk
    c = CirculantCoin(complex(m[0, 0]), complex(m[1, 0]), complex(m[2, 0]))
    if np.max(np.abs(c.matrix - m)) > 1e-12:
        raise ValueError("the bulk coin is not circulant")
    if cfg.bulk_phase:
        c = c.scaled(cfg.bulk_phase)
    # e^{i phi} U has g(e^{-i phi} z)
    return c, theta0 - cfg.global_phase


def point_mass(coin_or_config, theta0: float, r_schedule=DEFAULT_SCHEDULE,
               tol: float = 1e-6) -> PointMass:
    """``lim (1 - r) (g(r e^{i theta0}) - 1/2)``, extrapolated along the schedule."""
    theta0 = float(np.mod(theta0, 2 * np.pi))
    coin, th = _coin_and_angle(coin_or_config, theta0)
    sched = np.asarray(r_schedule, dtype=float)
    phi = canonical_phi(coin)
    r = radial_grid(sched)
    G, _, _, _ = track_rays(phi, [th], r)
    idx = _schedule_index(r, sched)
    vals = ((1 - sched) * (G[0, idx] - 0.5)).real
    est, err = richardson(vals, sched)
    return PointMass(theta0, float(est), float(err), [float(v) for v in vals], bool(err <= tol))


@dataclass
class AtomCandidate:
    theta: float
    multiplicity: int
    weight: complex
    radial: float
    accepted: bool


def _candidate_weight(cr) -> complex:
    # Balancing the two leading terms of the quintic near a zero x0 of c_5
    # gives w = c_4(x0) / (2 x0 c_5'(x0)) for a simple zero and
    # w = c_4'(x0) / (x0 c_5''(x0)) for a double zero (derivatives in x).
    if cr.multiplicity == 1:
        return cr.c4 / (2 * cr.x * cr.c5_prime)
    return cr.c4_prime / (cr.x * cr.c5_second)


def atom_candidates(coin: CirculantCoin, r_schedule=DEFAULT_SCHEDULE,
                    real_tol: float = 1e-8, pos_tol: float = 1e-8,
                    radial: bool = True) -> list[AtomCandidate]:
    """Every unit-circle zero of ``c_5(z^2)`` with its algebraic and radial weights."""
    if degenerate_kind(coin) is not None:
        raise DegenerateCoinError("atoms of permutation coins come from special_case_spectrum")
    phi = canonical_phi(coin)
    out = []
    for cr in c5_circle_roots(phi):
        w = complex(_candidate_weight(cr))
        rad = point_mass(coin, cr.theta, r_schedule).weight if radial else float("nan")
        real_pos = abs(w.imag) <= real_tol * max(1.0, abs(w)) and w.real > pos_tol
        confirmed = radial and abs(rad - w.real) <= 1e-4 * max(1.0, abs(w.real)) and rad > 1e-5
        out.append(AtomCandidate(cr.theta, cr.multiplicity, w, rad, bool(real_pos and confirmed)))
    return out


def atoms(coin: CirculantCoin, r_schedule=DEFAULT_SCHEDULE) -> list[tuple[float, float]]:
    """Accepted atoms ``(theta0, weight)``: both tests must agree."""
    return [(c.theta, float(c.weight.real)) for c in atom_candidates(coin, r_schedule)
            if c.accepted]


# -- permutation coins -----------------------------------------------------------------


@dataclass
class SpecialSpectrum:
    coin_kind: str
    kind: TreeKind
    theta: float | None
    delta: float
    block: list[str]
    eigenvalues: np.ndarray
    weights: np.ndarray
    essential: np.ndarray
    open_orbit: bool
    leakage: float

    def eigenphases(self) -> np.ndarray:
        return np.mod(np.angle(self.eigenvalues), 2 * np.pi)

    def sixth_root_defect(self) -> float:
        """Largest distance of a block eigenvalue from the sixth roots of unity."""
        if len(self.eigenvalues) == 0:
            return 0.0
        return float(np.max(np.abs(self.eigenvalues**6 - 1)) / 6)

    def essential_matches(self, delta: float | None = None, tol: float = 1e-10) -> bool:
        d = self.delta if delta is None else delta
        target = np.exp(1j * (d + np.arange(6) * np.pi / 3))
        if len(self.essential) != 6:
            return False
        return all(np.min(np.abs(self.essential - t)) <= tol for t in target)

    def to_dict(self) -> dict:
        return {
            "coin": self.coin_kind,
            "kind": self.kind.value,
            "theta": self.theta,
            "delta": self.delta,
            "block": self.block,
            "eigenvalues": [[float(v.real), float(v.imag)] for v in self.eigenvalues],
            "eigenphases": self.eigenphases().tolist(),
            "weights": self.weights.tolist(),
            "essential": [[float(v.real), float(v.imag)] for v in self.essential],
            "open_orbit": self.open_orbit,
            "leakage": self.leakage,
        }


def closure(U: WalkOperator, seeds: list[int], tol: float = 1e-14) -> list[int] | None:
    """Smallest set of basis states containing ``seeds`` and closed under ``U``.

    Returns ``None`` if the set reaches the truncation depth (the orbit is
    open, or at least longer than the layout can show).
    """
    lay = U.layout
    deep = lay.level_offsets[lay.depth_cap]
    found = list(seeds)
    seen = set(seeds)
    i = 0
    while i < len(found):
        e = np.zeros(lay.total_dim, dtype=complex)
        e[found[i]] = 1.0
        out = U._forward(e)
        for j in np.flatnonzero(np.abs(out) > tol):
            j = int(j)
            if j >= deep:
                return None
            if j not in seen:
                seen.add(j)
                found.append(j)
        i += 1
    return found


def restrict(U: WalkOperator, states: list[int]) -> tuple[np.ndarray, float]:
    """Matrix of ``U`` on the span of ``states`` and the largest amplitude leaking out."""
    lay = U.layout
    n = len(states)
    B = np.zeros((n, n), dtype=complex)
    leak = 0.0
    mask = np.ones(lay.total_dim, dtype=bool)
    mask[states] = False
    for k, s in enumerate(states):
        e = np.zeros(lay.total_dim, dtype=complex)
        e[s] = 1.0
        out = U._forward(e)
        B[:, k] = out[states]
        leak = max(leak, float(np.max(np.abs(out[mask]), initial=0.0)))
    return B, leak


def _spectral_weights(B: np.ndarray, phi: np.ndarray, tol: float = 1e-8):
    """Eigenvalues of the unitary ``B`` and the weight of ``phi`` on each.

    The weight of a degenerate eigenvalue is split evenly over its copies.
    """
    lam, V = np.linalg.eig(B)
    order = np.argsort(np.mod(np.angle(lam), 2 * np.pi))
    lam, V = lam[order], V[:, order]
    weights = np.zeros(len(lam))
    used = np.zeros(len(lam), dtype=bool)
    for i in range(len(lam)):
        if used[i]:
            continue
        grp = np.flatnonzero((np.abs(lam - lam[i]) < tol) & ~used)
        used[grp] = True
        Q, _ = np.linalg.qr(V[:, grp])
        w = float(np.linalg.norm(Q.conj().T @ phi) ** 2)
        weights[grp] = w / len(grp)
    return lam, weights


def special_case_spectrum(coin: CirculantCoin, kind=TreeKind.SubtreeAB, theta: float | None = None,
                          delta: float = 0.0, depth_cap: int = 12) -> SpecialSpectrum:
    """Spectrum of the walk with a permutation coin, from its finite invariant blocks.

    The bulk coin is ``e^{i delta}`` times ``coin``; the root keeps its own
    boundary coin.  The block generated by the root states is found by
    closing the set of basis states under ``U``; it is diagonalized densely.
    The essential part is read off a periodic orbit deep in the bulk.
    """
    kind = TreeKind(kind)
    perm = degenerate_kind(coin)
    if perm is None:
        raise NotDegenerateError("special_case_spectrum needs a phase times I, C_sigma or C_pi")
    if theta is not None and kind is not TreeKind.FullA:
        raise ValueError("theta applies to the full tree only")
    cfg = CoinConfig(coin.matrix, theta=theta, bulk_phase=delta)
    U = WalkOperator(layout(depth_cap, kind), cfg)
    lay = U.layout
    seeds = list(range(lay.level_offsets[1]))
    states = closure(U, seeds)

    # essential part: a bulk orbit that never meets the root
    essential = np.empty(0, dtype=complex)
    rep = None
    if perm.kind != "identity":
        bulk_cfg = CoinConfig(coin.matrix, bulk_phase=delta)
        start = (Vertex(6, 0, TreeKind.SubtreeAB), Letter.a)
        rep = orbit_trace(bulk_cfg, start, max_steps=64, kind=TreeKind.SubtreeAB)
    if rep is not None and rep.closed:
        p = rep.period
        essential = rep.phase ** (1 / p) * np.exp(2j * np.pi * np.arange(p) / p)
        essential = essential[np.argsort(np.mod(np.angle(essential), 2 * np.pi))]

    if states is None:
        return SpecialSpectrum(perm.kind, kind, theta, delta, [], np.empty(0, dtype=complex),
                               np.empty(0), essential, True, 0.0)
    B, leak = restrict(U, states)
    phi = np.zeros(len(states), dtype=complex)
    phi[0] = 1.0
    lam, wts = _spectral_weights(B, phi)
    labels = []
    for s in states:
        v, t = lay.basis_label(s)
        labels.append(f"{v}⊗{t.name}")
    return SpecialSpectrum(perm.kind, kind, theta, delta, labels, lam, wts, essential, False, leak)
