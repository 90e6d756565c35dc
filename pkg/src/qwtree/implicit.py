"""The quintic implicit equation ``Phi(g, z^2) = 0`` satisfied by ``g(z)``.

``Phi(g, x) = sum_j c_j(x) g^j`` with ``x = z^2``; every ``c_j`` has degree at
most 3 in ``x`` and is a polynomial in the coin parameters
``(alpha, beta, gamma)``.  Coefficients are stored as a ``(6, 4)`` complex
array ``c[j, k]`` = coefficient of ``x^k`` in ``c_j``.

Three independent descriptions of the same curve live here:

* the expanded coefficients (``coeffs_general`` for any circulant coin and
  ``coeffs_orthogonal`` for the real orthogonal sheet), available both as
  transcribed (``variant="transcribed"``) and with the two coefficient repairs
  the oracles require (``variant="corrected"``, the default);
* the factored form (``phi_eval(form="factored")``), kept for the audit;
* the linear system tying ``g`` to five neighbouring resolvent entries,
  whose consistency determinant (``elimination_phi``) is the reference
  every transcribed form is measured against.

The transcribed expansion disagrees with the elimination in exactly two
coefficients, for every coin: the constant term of ``c_0`` has the wrong
sign, and the ``x^2`` coefficient of ``c_4`` carries ``alpha beta^3 gamma``
where ``alpha beta^2 gamma`` is needed.  ``transcription_audit`` reproduces
this per coefficient.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .coins import CirculantCoin, orthogonal_family

__all__ = [
    "EPS_LEAD",
    "PhiPolynomial",
    "AuxPolys",
    "RootSet",
    "BranchPoint",
    "BranchPath",
    "CircleRoot",
    "IdenticallyZeroError",
    "BranchError",
    "ResidualNotFoundError",
    "DegenerateCoinError",
    "aux_polys",
    "coeffs_general",
    "coeffs_orthogonal",
    "orthogonal_parameters",
    "canonical_phi",
    "phi_eval",
    "phi_factored",
    "elimination_phi",
    "elimination_coefficients",
    "quintic_roots",
    "batch_roots",
    "continue_branch",
    "track_rays",
    "residual_system",
    "residual_norm",
    "residual_solve",
    "c5_circle_roots",
    "transcription_audit",
    "AuditReport",
]

EPS_LEAD = 1e-12
_P = np.polynomial.polynomial


class IdenticallyZeroError(ValueError):
    """Every coefficient of the quintic vanishes at the requested point."""


class BranchError(RuntimeError):
    """Continuation could not decide which root carries the branch."""

    def __init__(self, msg: str, diagnostics: dict):
        super().__init__(msg)
        self.diagnostics = diagnostics


class ResidualNotFoundError(RuntimeError):
    pass


class DegenerateCoinError(ValueError):
    """The coin is a phase times a permutation; the quintic route does not apply."""


def _params(coin_or_params):
    if isinstance(coin_or_params, CirculantCoin):
        return coin_or_params.params
    a, b, g = coin_or_params
    return complex(a), complex(b), complex(g)


# -- auxiliary quadratics ----------------------------------------------------


@dataclass(frozen=True)
class AuxPolys:
    """``M``, ``P``, ``K`` as ascending coefficient arrays in ``g``."""

    M: np.ndarray
    P: np.ndarray
    K: np.ndarray

    def D(self, g):
        """``beta - K(g)/M(g)``; equals ``P(g)/M(g) - 1``."""
        beta = self.M[1] / 2
        return beta - _P.polyval(g, self.K) / _P.polyval(g, self.M)


def aux_polys(coin_or_params) -> AuxPolys:
    a, b, g = _params(coin_or_params)
    s3 = a**3 + b**3 + g**3 - 3 * a * b * g
    m2 = b**2 - a * g
    M = np.array([1, 2 * b, m2], dtype=complex)
    P = np.array([b + 1, 2 * (b * (b + 1) - a * g), s3 + m2], dtype=complex)
    K = np.array([0, 2 * a * g, 2 * a * b * g - g**3 - a**3], dtype=complex)
    return AuxPolys(M, P, K)


# -- coefficient polynomials -----------------------------------------------


@dataclass(frozen=True, eq=False)
class PhiPolynomial:
    c: np.ndarray
    source: str
    params: tuple[complex, complex, complex] | None = None

    def __post_init__(self):
        c = np.array(self.c, dtype=complex)
        if c.shape != (6, 4):
            raise ValueError("coefficients must have shape (6, 4)")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    def at(self, z) -> np.ndarray:
        """``c_j(z^2)`` for ``j = 0..5``; trailing axis indexes ``j``."""
        x = np.asarray(z, dtype=complex) ** 2
        return np.stack([_P.polyval(x, self.c[j]) for j in range(6)], axis=-1)

    def __call__(self, g, z):
        a = self.at(z)
        g = np.asarray(g, dtype=complex)
        return sum(a[..., j] * g**j for j in range(6))

    def dg(self, g, z):
        a = self.at(z)
        g = np.asarray(g, dtype=complex)
        return sum(j * a[..., j] * g ** (j - 1) for j in range(1, 6))

    def degree(self, tol: float = EPS_LEAD) -> int:
        """Degree in ``g`` of the polynomial as a whole (not at a point)."""
        scale = np.max(np.abs(self.c))
        if scale == 0:
            return -1
        for j in range(5, -1, -1):
            if np.max(np.abs(self.c[j])) > tol * scale:
                return j
        return -1

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "c": [[[float(v.real), float(v.imag)] for v in row] for row in self.c],
        }


def coeffs_general(coin_or_params, variant: str = "corrected") -> tuple[PhiPolynomial, AuxPolys]:
    """Expanded coefficients for an arbitrary circulant coin.

    ``variant="transcribed"`` reproduces the reference expansion term by term;
    ``"corrected"`` applies the two repairs described in the module docstring.
    """
    if variant not in ("transcribed", "corrected"):
        raise ValueError("variant must be 'transcribed' or 'corrected'")
    a, b, g = _params(coin_or_params)
    s3 = a**3 + b**3 + g**3 - 3 * a * b * g
    m2 = b**2 - a * g
    Q = (a + b + g + 1) * (a**2 + b**2 + g**2 - b * g - a * g - a * b - a - g + 2 * b + 1)
    R = g**2 - a * (b + 1)
    c = np.zeros((6, 4), dtype=complex)

    c[5] = [
        Q * (s3 + m2) ** 2,
        (a * b + a - g**2) * (s3 + m2) * (s3 + 3 * m2),
        g * m2 * (2 * s3 + 3 * m2),
        -(m2**2),
    ]
    k18 = b**3 if variant == "transcribed" else b**2
    c[4] = [
        -Q * (s3 - 3 * b**2 + 3 * a * g - 4 * b) * (s3 + m2),
        2 * R * (a * g**4 - g**3 * b**2 - 4 * g**3 * b - 3 * a**2 * g**2 * (b + 1) + a**4 * g
                 + 6 * a * b * g + 4 * a * b**3 * g + 18 * a * b**2 * g - b**5 - a**3 * b**2
                 - 7 * b**4 - 6 * b**3 - 4 * a**3 * b),
        g * (4 * g**3 * b + 7 * b**4 + 4 * a**3 * b - 18 * a * k18 * g - 12 * a * b * g
             + 3 * g**2 * a**2 + 12 * b**3),
        4 * b * (a * g - b**2),
    ]
    c[3] = [
        2 * Q * (a**3 + 4 * b**3 + g**3 - a * g + 3 * b**2 - 6 * a * b * g - b**4 - a**3 * b
                 + 3 * a * b**2 * g - b * g**3 - 2 * b**5 - 2 * a**3 * b**2 + 8 * a * b**3 * g
                 + 2 * a**4 * g - 6 * a**2 * b * g**2 - 2 * g**3 * b**2 + 2 * a * g**4),
        2 * R * (-2 * g**3 + g**3 * b + 3 * a * g * (1 - b**2) + 12 * a * b * g - 9 * b**2
                 + a**3 * b + b**4 - 8 * b**3 - 2 * a**3),
        2 * g * (a**3 + 4 * b**3 + g**3 - 6 * a * b * g + 9 * b**2 - 3 * a * g),
        2 * (a * g - 3 * b**2),
    ]
    c[2] = [
        -2 * Q * (a**3 + 4 * b**3 + g**3 + a * g - b**2 - 2 * b - 6 * a * b * g
                  - 7 * a * b**2 * g + 3 * b**4 + a**3 * b + b * g**3 + 2 * a**2 * g**2),
        2 * R * (a**3 + 4 * b**3 + g**3 + 2 * a * g - 6 * a * b * g - 2 * b**2 - 6 * b),
        2 * g * (6 * b + b**2 - a * g),
        -4 * b,
    ]
    c[1] = [
        (1 + b) * Q * (1 + 4 * a * g - 3 * b - 4 * b**2),
        -R * (3 + 4 * a * g - 4 * b - 7 * b**2),
        g * (3 - 2 * b),
        -1,
    ]
    sign0 = 1 if variant == "transcribed" else -1
    c[0] = [sign0 * (1 + b) ** 2 * Q, 2 * (b + 1) * R, -g, 0]
    return PhiPolynomial(c, f"general-{variant}", (a, b, g)), aux_polys((a, b, g))


def coeffs_orthogonal(beta, gamma) -> PhiPolynomial:
    """Simplified coefficients valid on the ``CO+`` sheet.

    Callers holding a ``CO-`` coin may pass the substituted parameters from
    :func:`orthogonal_parameters`; the audit shows that this shortcut does
    not describe the ``CO-`` walk, whose root coin is not negated.
    """
    b, g = complex(beta), complex(gamma)
    c = np.zeros((6, 4), dtype=complex)
    c[5] = -(b**2) * _P.polymul([-1, 1], [1, 1 - 3 * g, 1])
    c[4] = b**2 * np.array([-1, 6 * g, -9 * g, 4])
    c[3] = 2 * b * np.array([-(b + 1), 3 * g, 3 * g * (b - 1), 1 - 2 * b])
    c[2] = -2 * b * np.array([-(b + 1), g * (3 * b + 4), -5 * g, 2])
    c[1] = [(b + 1) ** 2, -3 * g * (1 - b**2), g * (3 - 2 * b), -1]
    c[0] = [-((b + 1) ** 2), 2 * g * (b + 1), -g, 0]
    return PhiPolynomial(c, "orthogonal", None)


def orthogonal_parameters(coin: CirculantCoin, sign: int) -> tuple[complex, complex]:
    """``(beta, gamma)`` to feed :func:`coeffs_orthogonal` for a coin on the ``sign`` sheet."""
    a, b, g = coin.params
    if sign == 1:
        return b, g
    if sign == -1:
        return -b - 2, -g
    raise ValueError("sign must be +1 or -1")


def canonical_phi(coin_or_params) -> PhiPolynomial:
    """The form every numerical route uses: the corrected general expansion."""
    return coeffs_general(coin_or_params, "corrected")[0]


# -- evaluation ---------------------------------------------------------------


def phi_factored(coin_or_params, g, z):
    """The factored form, evaluated literally."""
    a, b, gm = _params(coin_or_params)
    aux = aux_polys((a, b, gm))
    g = np.asarray(g, dtype=complex)
    z2 = np.asarray(z, dtype=complex) ** 2
    M = _P.polyval(g, aux.M)
    Pg = _P.polyval(g, aux.P)
    A = (b + 1) ** 2 - a * gm
    B = a**2 - (b + 1) * gm
    left = A * Pg + z2 * a * M
    right = B * Pg + z2 * (b + 1) * M
    return (
        Pg * (a * (a * z2 + (g - 1) * A) * left + (b + 1) * ((b + 1) * z2 + (g - 1) * B) * right)
        - ((z2 - gm) * g + gm) * right * left
    )


def phi_eval(form: str, coin_or_params, g, z, variant: str = "corrected"):
    """Evaluate ``Phi`` in the ``expanded`` or ``factored`` form."""
    if form == "expanded":
        phi, _ = coeffs_general(coin_or_params, variant)
        return phi(g, z)
    if form == "factored":
        return phi_factored(coin_or_params, g, z)
    raise ValueError("form must be 'expanded' or 'factored'")


# -- the linear system and its consistency determinant -------------------------


def residual_system(coin_or_params, g: complex, z: complex) -> tuple[np.ndarray, np.ndarray]:
    """Five linear equations for ``(G13, G14, G15, G16)`` given ``G12 = g``.

    ``G11 = (g - 1)/z``.  The two equations involving ``1 + D(g)`` are
    multiplied through by ``M(g)`` so that the system stays polynomial in
    ``g`` (and finite where ``M`` vanishes).
    """
    a, b, gm = _params(coin_or_params)
    aux = aux_polys((a, b, gm))
    M = _P.polyval(g, aux.M)
    Pg = _P.polyval(g, aux.P)
    G11 = (g - 1) / z
    A = np.array(
        [
            [-z * M, Pg, 0, 0],
            [0, 0, -z * M, Pg],
            [gm, -z, b + 1, 0],
            [b + 1, 0, a, 0],
            [a, 0, gm, -z],
        ],
        dtype=complex,
    )
    r = np.array([0, 0, -a * G11, z * g - gm * G11, -(b + 1) * G11], dtype=complex)
    return A, r


def residual_norm(coin_or_params, g: complex, z: complex) -> tuple[float, np.ndarray]:
    """Least-squares misfit of the system and the fitted ``(G13, .., G16)``."""
    A, r = residual_system(coin_or_params, g, z)
    x = np.linalg.lstsq(A, r, rcond=None)[0]
    return float(np.linalg.norm(A @ x - r)), x


def elimination_phi(coin_or_params, g, z) -> complex:
    """``z`` times the determinant of the augmented system.

    It vanishes exactly when the five equations are consistent and, as a
    polynomial in ``(g, z^2)``, coincides with the corrected expansion.
    """
    A, r = residual_system(coin_or_params, complex(g), complex(z))
    return complex(z) * complex(np.linalg.det(np.column_stack([A, -r])))


def elimination_coefficients(coin_or_params) -> PhiPolynomial:
    """Recover ``c[j, k]`` from :func:`elimination_phi` by interpolation.

    The determinant is sampled on 6 x 4 roots of unity in ``(g, x)`` and a
    2-D FFT returns the coefficients exactly (up to rounding).
    """
    p = _params(coin_or_params)
    ng, nx = 6, 4
    wg = np.exp(2j * np.pi * np.arange(ng) / ng)
    wx = np.exp(2j * np.pi * np.arange(nx) / nx)
    vals = np.empty((ng, nx), dtype=complex)
    for i, gv in enumerate(wg):
        for k, xv in enumerate(wx):
            vals[i, k] = elimination_phi(p, gv, np.sqrt(xv))
    # samples at w^i of sum_j c_j w^{ij}: the forward DFT inverts this
    c = np.fft.fft2(vals) / (ng * nx)
    return PhiPolynomial(c, "elimination", p)


# -- roots ---------------------------------------------------------------------


@dataclass(frozen=True)
class RootSet:
    roots: np.ndarray
    degree: int
    degree_dropped: bool


def _companion_roots(a: np.ndarray) -> np.ndarray:
    """Roots of ``sum a[..., j] g^j`` (leading coefficient nonzero), batched."""
    a = np.asarray(a, dtype=complex)
    d = a.shape[-1] - 1
    if d == 0:
        return np.empty(a.shape[:-1] + (0,), dtype=complex)
    monic = a[..., :-1] / a[..., -1:]
    comp = np.zeros(a.shape[:-1] + (d, d), dtype=complex)
    comp[..., 1:, :-1] = np.eye(d - 1)
    comp[..., :, -1] = -monic
    return np.linalg.eigvals(comp)


def _polish(a: np.ndarray, r: np.ndarray, steps: int = 3) -> np.ndarray:
    """A few damped Newton steps; a step is kept only if it lowers ``|p|``."""
    a = np.asarray(a, dtype=complex)
    r = np.array(r, dtype=complex)
    d = a.shape[-1]
    da = a[..., 1:] * np.arange(1, d)

    def pv(c, x):
        out = np.zeros_like(x)
        for j in range(c.shape[-1] - 1, -1, -1):
            out = out * x + c[..., j, None] if c.ndim > 1 else out * x + c[j]
        return out

    for _ in range(steps):
        f = pv(a, r)
        fp = pv(da, r)
        with np.errstate(all="ignore"):
            step = np.where(np.abs(fp) > 0, f / fp, 0)
        trial = r - step
        better = np.abs(pv(a, trial)) < np.abs(f)
        r = np.where(better & np.isfinite(trial), trial, r)
    return r


def quintic_roots(phi: PhiPolynomial, z: complex, eps_lead: float = EPS_LEAD) -> RootSet:
    """All roots in ``g`` of ``Phi(., z^2)``, deflating a vanishing leading coefficient."""
    a = phi.at(complex(z))
    scale = np.max(np.abs(a))
    if scale == 0 or not np.isfinite(scale):
        raise IdenticallyZeroError("every coefficient vanishes; the coin is degenerate")
    deg = 5
    while deg > 0 and abs(a[deg]) < eps_lead * scale:
        deg -= 1
    if deg == 0 and abs(a[0]) < eps_lead * scale:
        raise IdenticallyZeroError("every coefficient vanishes; the coin is degenerate")
    coeffs = a[: deg + 1]
    roots = _polish(coeffs, _companion_roots(coeffs))
    return RootSet(np.asarray(roots), deg, deg < 5)


def batch_roots(phi: PhiPolynomial, z: np.ndarray, degree: int | None = None) -> np.ndarray:
    """Roots at many ``z`` at once, shape ``z.shape + (degree,)``."""
    deg = phi.degree() if degree is None else degree
    if deg < 1:
        raise IdenticallyZeroError("the polynomial has no roots in g")
    a = phi.at(np.asarray(z, dtype=complex))[..., : deg + 1]
    return _polish(a, _companion_roots(a))


# -- continuation ----------------------------------------------------------------


@dataclass
class BranchPoint:
    r: float
    g: complex
    method: str
    confidence: float


@dataclass
class BranchPath:
    theta: float
    points: list[BranchPoint]
    m_zeros: list[float] = field(default_factory=list)

    @property
    def r(self) -> np.ndarray:
        return np.array([p.r for p in self.points])

    @property
    def g(self) -> np.ndarray:
        return np.array([p.g for p in self.points])

    def to_dict(self) -> dict:
        return {
            "theta": self.theta,
            "points": [
                {"r": p.r, "re_g": p.g.real, "im_g": p.g.imag, "method": p.method,
                 "confidence": p.confidence}
                for p in self.points
            ],
            "m_zeros": self.m_zeros,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _nearest_two(roots: np.ndarray, target) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    d = np.abs(roots - np.asarray(target)[..., None])
    order = np.argsort(d, axis=-1)
    i0 = order[..., 0]
    d0 = np.take_along_axis(d, order[..., :1], axis=-1)[..., 0]
    if roots.shape[-1] > 1:
        d1 = np.take_along_axis(d, order[..., 1:2], axis=-1)[..., 0]
    else:
        d1 = np.full(d0.shape, np.inf)
    return i0, d0, d1


def _default_oracle(phi: PhiPolynomial):
    params = phi.params

    def oracle(z: complex, seed: complex) -> tuple[complex, str]:
        g = residual_solve(params, z, seed)
        return g, "residual-refined"

    return oracle if params is not None else None


def _step_scalar(phi, theta, r_a, g_a, slope, r_b, floor, oracle, tag_diag):
    """Advance one branch from ``r_a`` to ``r_b``, halving near root collisions."""
    e = np.exp(1j * theta)
    r, g, s = r_a, g_a, slope
    h = r_b - r_a
    out = []
    while r < r_b - 1e-15:
        h = min(h, r_b - r)
        rn = r + h
        pred = g + s * h
        roots = quintic_roots(phi, rn * e).roots
        i0, d0, d1 = _nearest_two(roots, pred)
        i0, d0, d1 = int(i0), float(d0), float(d1)
        if d1 >= 2 * d0:
            gn, method = roots[i0], "continuation"
        elif h > floor:
            h /= 2
            continue
        else:
            if oracle is None:
                raise BranchError("root collision below the step floor", tag_diag(rn, roots, pred))
            try:
                go, method = oracle(rn * e, pred)
            except ResidualNotFoundError as exc:
                raise BranchError(f"oracle failed: {exc}", tag_diag(rn, roots, pred)) from exc
            j = int(np.argmin(np.abs(roots - go)))
            if abs(roots[j] - go) > 1e-6 * max(1.0, abs(go)):
                raise BranchError("no root near the oracle value", tag_diag(rn, roots, go))
            gn = roots[j]
            d1 = float(np.sort(np.abs(roots - gn))[1]) if len(roots) > 1 else math.inf
        s = (gn - g) / h
        r, g = rn, gn
        out.append(BranchPoint(float(r), complex(g), method, d1))
        h = min(2 * h, r_b - r) if r < r_b else h
    return out, s


def track_rays(phi: PhiPolynomial, thetas, r_grid, floor: float = 1e-6, oracle="default",
               on_break: str = "raise"):
    """Follow the physical branch on many rays at once.

    Returns ``(g, method, confidence, broken)`` with ``g`` of shape
    ``(len(thetas), len(r_grid))``.  Rays whose nearest two roots come within a
    factor 2 of each other are handed to a scalar stepper that halves the
    step down to ``floor`` and then asks ``oracle``.  With
    ``on_break="mark"`` a ray that cannot be resolved is marked in ``broken``
    (its remaining values are NaN) instead of raising.
    """
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    r_grid = np.asarray(r_grid, dtype=float)
    if r_grid[0] != 0 or np.any(np.diff(r_grid) <= 0):
        raise ValueError("r_grid must start at 0 and increase")
    if oracle == "default":
        oracle = _default_oracle(phi)
    deg = phi.degree()
    if deg < 1:
        raise IdenticallyZeroError("the polynomial has no roots in g")
    n, m = len(thetas), len(r_grid)
    e = np.exp(1j * thetas)
    G = np.full((n, m), np.nan + 0j)
    meth = np.empty((n, m), dtype=object)
    conf = np.zeros((n, m))
    broken = np.zeros(n, dtype=bool)
    G[:, 0] = 1.0
    meth[:, 0] = "anchor"
    r0 = quintic_roots(phi, 0.0).roots
    conf[:, 0] = float(np.sort(np.abs(r0 - 1))[1]) if len(r0) > 1 else np.inf
    slope = np.zeros(n, dtype=complex)
    alive = np.ones(n, dtype=bool)

    def diag(theta):
        return lambda rn, roots, pred: {
            "theta": float(theta), "r": float(rn),
            "roots": [[float(v.real), float(v.imag)] for v in roots],
            "target": [float(np.real(pred)), float(np.imag(pred))],
        }

    for k in range(1, m):
        h = r_grid[k] - r_grid[k - 1]
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        pred = G[idx, k - 1] + slope[idx] * h
        roots = batch_roots(phi, r_grid[k] * e[idx], deg)
        i0, d0, d1 = _nearest_two(roots, pred)
        ok = d1 >= 2 * d0
        good = idx[ok]
        gn = np.take_along_axis(roots[ok], i0[ok][:, None], axis=1)[:, 0]
        slope[good] = (gn - G[good, k - 1]) / h
        G[good, k] = gn
        meth[good, k] = "continuation"
        conf[good, k] = d1[ok]
        for t in idx[~ok]:
            try:
                pts, s = _step_scalar(phi, thetas[t], r_grid[k - 1], G[t, k - 1], slope[t],
                                      r_grid[k], floor, oracle, diag(thetas[t]))
            except BranchError:
                if on_break == "raise":
                    raise
                broken[t] = True
                alive[t] = False
                continue
            last = pts[-1]
            G[t, k] = last.g
            slope[t] = s
            used = {p.method for p in pts}
            meth[t, k] = next((mt for mt in ("series-seeded", "residual-refined") if mt in used),
                              "continuation")
            conf[t, k] = min(p.confidence for p in pts)
    return G, meth, conf, broken


def continue_branch(phi: PhiPolynomial, theta: float, r_max: float, steps: int = 512,
                    r_grid=None, floor: float = 1e-6, oracle="default") -> BranchPath:
    """The branch with ``g(0) = 1`` along ``z = r e^{i theta}``, ``0 <= r <= r_max``."""
    if r_grid is None:
        if not 0 < r_max < 1:
            raise ValueError("r_max must lie in (0, 1)")
        r_grid = np.linspace(0.0, r_max, steps + 1)
    G, meth, conf, _ = track_rays(phi, [theta], r_grid, floor, oracle)
    pts = [BranchPoint(float(r), complex(g), str(mt), float(c))
           for r, g, mt, c in zip(r_grid, G[0], meth[0], conf[0])]
    path = BranchPath(float(theta), pts)
    if phi.params is not None:
        aux = aux_polys(phi.params)
        mv = np.abs(_P.polyval(G[0], aux.M))
        path.m_zeros = [float(r) for r, v in zip(r_grid, mv) if v < 1e-8]
    return path


# -- residual oracle ----------------------------------------------------------------


def residual_solve(coin_or_params, z: complex, seed: complex, tol: float = 1e-10,
                   max_iter: int = 60, radius: float = 0.5) -> complex:
    """The ``g`` near ``seed`` where the linear system becomes consistent.

    Damped Newton iteration on the consistency determinant (an analytic
    function of ``g``), with the derivative from a central difference.  The
    answer is accepted when the least-squares misfit of the system drops
    below ``tol`` and lies within ``radius`` (relative) of the seed.
    """
    p = _params(coin_or_params)
    z = complex(z)
    if not 0 < abs(z) < 1:
        raise ValueError("residual_solve needs 0 < |z| < 1")
    g = complex(seed)
    f = elimination_phi(p, g, z)
    for _ in range(max_iter):
        h = 1e-6 * max(1.0, abs(g))
        fp = (elimination_phi(p, g + h, z) - elimination_phi(p, g - h, z)) / (2 * h)
        if fp == 0:
            break
        step = f / fp
        lam = 1.0
        while lam > 1e-4:
            gt = g - lam * step
            ft = elimination_phi(p, gt, z)
            if abs(ft) < abs(f):
                break
            lam /= 2
        else:
            break
        g, f = gt, ft
        if abs(lam * step) <= 1e-15 * max(1.0, abs(g)):
            break
    res, _ = residual_norm(p, g, z)
    if res > tol or abs(g - seed) > radius * max(1.0, abs(seed)):
        raise ResidualNotFoundError(
            f"no consistent g near {seed:.6g} at z={z:.6g} (misfit {res:.2e}, reached {g:.6g})"
        )
    return g


# -- roots of the leading coefficient on the unit circle --------------------------------


@dataclass(frozen=True)
class CircleRoot:
    z: complex
    x: complex
    multiplicity: int
    c5_prime: complex
    c5_second: complex
    c4: complex
    c4_prime: complex
    c3: complex

    @property
    def theta(self) -> float:
        return float(np.mod(np.angle(self.z), 2 * np.pi))


def c5_circle_roots(phi: PhiPolynomial, tol: float = 1e-9, merge: float = 1e-6) -> list[CircleRoot]:
    """Unit-circle zeros of ``z -> c_5(z^2)``, with the data needed for atom weights."""
    c5 = phi.c[5]
    scale = np.max(np.abs(phi.c))
    if scale == 0 or np.max(np.abs(c5)) <= EPS_LEAD * scale:
        raise DegenerateCoinError("c_5 vanishes identically")
    c5t = np.trim_zeros(c5, "b")
    xs = list(_P.polyroots(c5t)) if len(c5t) > 1 else []
    # merge numerically split multiple roots
    clusters: list[list[complex]] = []
    for x in xs:
        for cl in clusters:
            if abs(cl[0] - x) < merge:
                cl.append(x)
                break
        else:
            clusters.append([x])
    d5 = _P.polyder(c5)
    dd5 = _P.polyder(c5, 2)
    d4 = _P.polyder(phi.c[4])
    out = []
    for cl in clusters:
        x = complex(np.mean(cl))
        mult = len(cl)
        if abs(abs(x) - 1) > tol:
            continue
        x = x / abs(x)
        for zr in (np.sqrt(x), -np.sqrt(x)):
            out.append(CircleRoot(
                complex(zr), x, mult,
                complex(_P.polyval(x, d5)), complex(_P.polyval(x, dd5)),
                complex(_P.polyval(x, phi.c[4])), complex(_P.polyval(x, d4)),
                complex(_P.polyval(x, phi.c[3])),
            ))
    out.sort(key=lambda cr: cr.theta)
    return out


# -- transcription audit -------------------------------------------------------------------


@dataclass
class AuditReport:
    coefficient_map: list[dict]
    orthogonal: dict
    factored: dict
    summary: dict

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=_json_default)


def _json_default(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o))


def _rel(a, b):
    return float(abs(a - b) / max(1.0, abs(b)))


def transcription_audit(seed: int = 0, n_random: int = 20, t_grid: int = 360,
                        z_samples=(0.3, 0.2 + 0.25j, -0.45j, 0.5 * np.exp(0.7j))) -> AuditReport:
    """Compare every transcribed form with the elimination reference.

    * per coefficient ``c[j, k]``: transcribed expansion vs elimination over
      random eigenphase coins, CO+ and CO- coins; a coefficient is flagged
      when it disagrees on any coin;
    * the orthogonal simplification vs the corrected and transcribed expansions
      on a CO+ grid, and the CO- substitution vs the elimination;
    * the factored form evaluated on the exact branch, per coin family,
      including the permutation coin ``C_pi`` where it reduces to
      ``z^4 (1 - g)``.
    """
    from .coins import c_pi, c_sigma, identity, random_coin

    rng = np.random.default_rng(seed)
    coins = {f"eig#{i}": random_coin(rng) for i in range(n_random)}
    for t in np.linspace(0.1, 2 * np.pi, 4, endpoint=False):
        coins[f"co+:{t:.3f}"] = orthogonal_family(t, 1)
        coins[f"co-:{t:.3f}"] = orthogonal_family(t, -1)

    worst = np.zeros((6, 4))
    worst_corr = np.zeros((6, 4))
    for coin in coins.values():
        ref = elimination_coefficients(coin).c
        pr = coeffs_general(coin, "transcribed")[0].c
        co = coeffs_general(coin, "corrected")[0].c
        sc = np.maximum(1.0, np.abs(ref))
        worst = np.maximum(worst, np.abs(pr - ref) / sc)
        worst_corr = np.maximum(worst_corr, np.abs(co - ref) / sc)
    cmap = []
    for j in range(6):
        for k in range(4):
            cmap.append({
                "coefficient": f"c{j}[x^{k}]",
                "transcribed_max_rel_err": float(worst[j, k]),
                "corrected_max_rel_err": float(worst_corr[j, k]),
                "transcribed_ok": bool(worst[j, k] <= 1e-10),
            })

    # orthogonal sheet
    ts = np.linspace(0, 2 * np.pi, t_grid, endpoint=False)
    o_vs_corr = o_vs_tr = minus_vs_ref = minus_corr = 0.0
    for t in ts:
        cp = orthogonal_family(t, 1)
        o = coeffs_orthogonal(*orthogonal_parameters(cp, 1)).c
        o_vs_corr = max(o_vs_corr, float(np.max(np.abs(o - coeffs_general(cp, "corrected")[0].c))))
        o_vs_tr = max(o_vs_tr, float(np.max(np.abs(o - coeffs_general(cp, "transcribed")[0].c))))
    for t in ts[::12]:
        cm = orthogonal_family(t, -1)
        if cm.unitarity_defect() > 1e-9:
            continue
        ref = elimination_coefficients(cm).c
        sub = coeffs_orthogonal(*orthogonal_parameters(cm, -1)).c
        minus_vs_ref = max(minus_vs_ref, float(np.max(np.abs(sub - ref))))
        minus_corr = max(minus_corr, float(np.max(np.abs(coeffs_general(cm)[0].c - ref))))
    orth = {
        "co_plus_vs_corrected_max_abs": o_vs_corr,
        "co_plus_vs_transcribed_max_abs": o_vs_tr,
        "co_minus_substitution_vs_elimination_max_abs": minus_vs_ref,
        "co_minus_corrected_vs_elimination_max_abs": minus_corr,
        "t_grid": t_grid,
    }

    # factored form on the exact branch (the branch is the root of the
    # elimination polynomial seeded by g = 1 and continued outward)
    fam = {"eig": [], "co+": [], "co-": []}
    for name, coin in coins.items():
        phi = canonical_phi(coin)
        for z in z_samples:
            g = _branch_value(phi, complex(z))
            scale = max(1.0, float(np.max(np.abs(phi.at(z)))) * max(1.0, abs(g)) ** 5)
            val = abs(phi_factored(coin, g, z)) / scale
            fam[name.split(":")[0].split("#")[0]].append(val)
    # permutation coins: the exact g is 1/(1 - z^6) for C_pi, 1 for the
    # identity, and for C_sigma the two-cycle a x a <-> ab x c gives 1/(1 - z^2)
    special = {}
    exact = {
        "C_pi": (c_pi(), lambda z: 1 / (1 - z**6)),
        "identity": (identity(), lambda z: 1.0),
        "phase*identity": (identity().scaled(0.9), None),
        "C_sigma": (c_sigma(), lambda z: 1 / (1 - z**2)),
    }
    for label, (coin, gfun) in exact.items():
        vals = []
        for z in z_samples:
            z = complex(z)
            g_exact = gfun(z) if gfun else _branch_value(canonical_phi(coin), z)
            vals.append(abs(phi_factored(coin, g_exact, z)))
        special[label] = float(max(vals))
    zt = 0.37 + 0.21j
    gt = 0.8 - 0.3j
    pi_closed = abs(phi_factored(c_pi(), gt, zt) - zt**4 * (1 - gt))
    factored = {
        "family_min_rel_residual": {k: float(min(v)) for k, v in fam.items() if v},
        "family_max_rel_residual": {k: float(max(v)) for k, v in fam.items() if v},
        "special_abs_residual": special,
        "c_pi_equals_z4_one_minus_g": pi_closed < 1e-14,
        "agrees_on": [k for k, v in special.items() if v < 1e-12]
        + [k for k, v in fam.items() if v and max(v) < 1e-10],
    }
    bad = [e["coefficient"] for e in cmap if not e["transcribed_ok"]]
    summary = {
        "transcribed_coefficients_failing": bad,
        "corrected_max_rel_err": float(worst_corr.max()),
        "orthogonal_matches_corrected": o_vs_corr <= 1e-12,
        "orthogonal_matches_transcribed": o_vs_tr <= 1e-12,
        "co_minus_substitution_valid": minus_vs_ref <= 1e-10,
        "factored_form_valid_generic": all(max(v) < 1e-10 for v in fam.values() if v),
        "seed": seed,
    }
    return AuditReport(cmap, orth, factored, summary)


def _branch_value(phi: PhiPolynomial, z: complex, steps: int = 64) -> complex:
    r, th = abs(z), float(np.angle(z))
    if r == 0:
        return 1.0 + 0j
    path = continue_branch(phi, th, r, steps=steps)
    return path.points[-1].g
