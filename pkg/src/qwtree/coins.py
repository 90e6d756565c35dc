"""Circulant coin matrices.

``circ(c0, c1, c2)`` is the matrix::

    [[c0, c2, c1],
     [c1, c0, c2],
     [c2, c1, c0]]

acting on the coin basis ``(a, b, c)``; column ``tau`` is the image of the
coin letter ``tau``.  The parametrization used by the implicit equation is
``alpha = c0``, ``gamma = c1``, ``beta = c2 - 1``.
"""
from __future__ import annotations

import cmath
import math
import re
from dataclasses import dataclass

import numpy as np

__all__ = [
    "EPS3",
    "UNITARY_TOL",
    "NonUnitaryCoinError",
    "CoinSpecError",
    "CirculantCoin",
    "PermutationCoin",
    "circ_matrix",
    "from_entries",
    "from_eigenphases",
    "orthogonal_family",
    "identity",
    "c_sigma",
    "c_pi",
    "is_degenerate",
    "degenerate_kind",
    "orthogonal_identities_check",
    "theta_root_coin",
    "parse_coin",
    "random_coin",
]

EPS3 = cmath.exp(2j * math.pi / 3)
UNITARY_TOL = 1e-10

# Columns of W diagonalize every circulant.
_W = np.array([[1, 1, 1], [1, EPS3, EPS3**2], [1, EPS3**2, EPS3]]) / math.sqrt(3)


class NonUnitaryCoinError(ValueError):
    def __init__(self, moduli):
        self.moduli = tuple(float(m) for m in moduli)
        super().__init__(f"circulant is not unitary: eigenvalue moduli {self.moduli}")


class CoinSpecError(ValueError):
    pass


def circ_matrix(c0, c1, c2) -> np.ndarray:
    return np.array([[c0, c2, c1], [c1, c0, c2], [c2, c1, c0]], dtype=complex)


@dataclass(frozen=True)
class CirculantCoin:
    c0: complex
    c1: complex
    c2: complex

    @property
    def entries(self) -> np.ndarray:
        return np.array([self.c0, self.c1, self.c2], dtype=complex)

    @property
    def matrix(self) -> np.ndarray:
        return circ_matrix(self.c0, self.c1, self.c2)

    @property
    def alpha(self) -> complex:
        return complex(self.c0)

    @property
    def beta(self) -> complex:
        return complex(self.c2) - 1

    @property
    def gamma(self) -> complex:
        return complex(self.c1)

    @property
    def params(self) -> tuple[complex, complex, complex]:
        """``(alpha, beta, gamma)``."""
        return self.alpha, self.beta, self.gamma

    @property
    def eigenvalues(self) -> np.ndarray:
        c0, c1, c2 = self.c0, self.c1, self.c2
        return np.array(
            [c0 + c1 + c2, c0 + EPS3 * c1 + EPS3**2 * c2, c0 + EPS3**2 * c1 + EPS3 * c2],
            dtype=complex,
        )

    @property
    def eigenphases(self) -> np.ndarray:
        return np.mod(np.angle(self.eigenvalues), 2 * math.pi)

    def unitarity_defect(self) -> float:
        return float(np.max(np.abs(np.abs(self.eigenvalues) - 1.0)))

    @property
    def is_unitary(self) -> bool:
        return self.unitarity_defect() <= UNITARY_TOL

    @property
    def is_real(self) -> bool:
        return bool(np.all(np.abs(self.entries.imag) <= 1e-14))

    def scaled(self, phase: float) -> "CirculantCoin":
        """``e^{i phase}`` times this coin."""
        f = cmath.exp(1j * phase)
        return CirculantCoin(f * self.c0, f * self.c1, f * self.c2)

    def label(self) -> str:
        a, b, g = self.params
        return f"alpha={_fmt(a)} beta={_fmt(b)} gamma={_fmt(g)}"


def _fmt(z: complex) -> str:
    z = complex(z)
    if abs(z.imag) < 1e-15:
        return repr(float(z.real))
    return f"{z.real!r}{z.imag:+}j"


def from_entries(c0, c1, c2, tol: float = UNITARY_TOL) -> CirculantCoin:
    coin = CirculantCoin(complex(c0), complex(c1), complex(c2))
    moduli = np.abs(coin.eigenvalues)
    if np.max(np.abs(moduli - 1.0)) > tol:
        raise NonUnitaryCoinError(moduli)
    return coin


def from_eigenphases(t0: float, t1: float, t2: float) -> CirculantCoin:
    lam = np.exp(1j * np.array([t0, t1, t2], dtype=float))
    c0 = lam.sum() / 3
    c1 = (lam[0] + EPS3**2 * lam[1] + EPS3 * lam[2]) / 3
    c2 = (lam[0] + EPS3 * lam[1] + EPS3**2 * lam[2]) / 3
    return CirculantCoin(complex(c0), complex(c1), complex(c2))


def orthogonal_family(t: float, sign: int = +1) -> CirculantCoin:
    """The real orthogonal circulant at parameter ``t`` on the ``sign`` sheet."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    s, c, r3 = math.sin(t), math.cos(t), math.sqrt(3.0)
    return CirculantCoin(
        complex((sign + s + r3 * c) / 3),
        complex((sign + s - r3 * c) / 3),
        complex((sign - 2 * s) / 3),
    )


def identity() -> CirculantCoin:
    return CirculantCoin(1, 0, 0)


def c_sigma() -> CirculantCoin:
    return CirculantCoin(0, 1, 0)


def c_pi() -> CirculantCoin:
    return CirculantCoin(0, 0, 1)


@dataclass(frozen=True)
class PermutationCoin:
    kind: str  # "identity" | "sigma" | "pi"
    phase: complex = 1.0

    def __post_init__(self):
        if self.kind not in ("identity", "sigma", "pi"):
            raise ValueError(f"unknown permutation {self.kind!r}")
        if abs(abs(self.phase) - 1) > UNITARY_TOL:
            raise ValueError("phase must have unit modulus")

    def as_circulant(self) -> CirculantCoin:
        base = {"identity": identity(), "sigma": c_sigma(), "pi": c_pi()}[self.kind]
        p = complex(self.phase)
        return CirculantCoin(p * base.c0, p * base.c1, p * base.c2)

    @property
    def matrix(self) -> np.ndarray:
        return self.as_circulant().matrix


def degenerate_kind(coin: CirculantCoin, tol: float = 1e-9) -> PermutationCoin | None:
    """Return the permutation coin ``coin`` is a phase multiple of, if any."""
    e = coin.entries
    for pos, kind in ((0, "identity"), (1, "sigma"), (2, "pi")):
        others = [e[j] for j in range(3) if j != pos]
        if max(abs(x) for x in others) <= tol and abs(abs(e[pos]) - 1) <= tol:
            return PermutationCoin(kind, e[pos] / abs(e[pos]))
    return None


def is_degenerate(coin: CirculantCoin, tol: float = 1e-9) -> bool:
    """True iff ``coin`` is a phase times I, C_sigma or C_pi.

    A unitary circulant with a vanishing entry is always of that form, so the
    check is equivalent to asking for a zero entry.
    """
    return degenerate_kind(coin, tol) is not None


def orthogonal_identities_check(coin: CirculantCoin) -> np.ndarray:
    """Residuals of the five polynomial identities valid on the CO+ sheet."""
    a, b, g = coin.params
    return np.abs(
        np.array(
            [
                a + b + g,
                a * g - b * (b + 1),
                a**2 + b**2 + g**2 + 2 * b,
                g**2 - a * (b + 1) - g,
                a**3 + b**3 + g**3 - 3 * a * b * g,
            ]
        )
    )


def theta_root_coin(theta: float) -> np.ndarray:
    """The boundary coin carried by the site ``a`` in the theta family."""
    s, c = math.sin(theta), math.cos(theta)
    return np.array([[s, c, 0], [0, 0, 1], [c, -s, 0]], dtype=complex)


def random_coin(rng: np.random.Generator) -> CirculantCoin:
    return from_eigenphases(*rng.uniform(0, 2 * math.pi, size=3))


# -- coin spec strings ----------------------------------------------------

_PI_RE = re.compile(r"^\s*([-+]?[0-9.eE+-]*?)\s*\*?\s*pi\s*(?:/\s*([0-9.]+))?\s*$")


def parse_angle(s: str) -> float:
    """Parse ``0.3``, ``pi``, ``-pi/2``, ``2pi/3``, ``0.5*pi``."""
    s = s.strip()
    try:
        return float(s)
    except ValueError:
        pass
    m = _PI_RE.match(s)
    if not m:
        raise CoinSpecError(f"bad angle {s!r}")
    mult, div = m.groups()
    if mult in ("", "+"):
        k = 1.0
    elif mult == "-":
        k = -1.0
    else:
        try:
            k = float(mult)
        except ValueError as exc:
            raise CoinSpecError(f"bad angle {s!r}") from exc
    return k * math.pi / (float(div) if div else 1.0)


def _parse_complex(s: str) -> complex:
    s = s.strip().replace(" ", "")
    if s.endswith("i"):
        s = s[:-1] + "j"
    try:
        return complex(s)
    except ValueError as exc:
        raise CoinSpecError(f"bad complex literal {s!r}") from exc


def parse_coin(spec: str) -> CirculantCoin:
    """Build a coin from a spec string such as ``co+:pi/2`` or ``phase:0.3:pi``."""
    spec = spec.strip()
    if spec in ("id", "identity"):
        return identity()
    if spec == "sigma":
        return c_sigma()
    if spec == "pi":
        return c_pi()
    head, _, rest = spec.partition(":")
    try:
        if head == "phase":
            delta, _, base = rest.partition(":")
            if not base:
                raise CoinSpecError("phase spec needs a base coin: phase:<delta>:<base>")
            return parse_coin(base).scaled(parse_angle(delta))
        if head == "circ":
            parts = rest.split(",")
            if len(parts) != 3:
                raise CoinSpecError("circ spec needs three entries")
            return from_entries(*(_parse_complex(p) for p in parts))
        if head == "eig":
            parts = rest.split(",")
            if len(parts) != 3:
                raise CoinSpecError("eig spec needs three angles")
            return from_eigenphases(*(parse_angle(p) for p in parts))
        if head in ("co+", "co-"):
            return orthogonal_family(parse_angle(rest), +1 if head == "co+" else -1)
    except NonUnitaryCoinError as exc:
        raise CoinSpecError(str(exc)) from exc
    raise CoinSpecError(f"unknown coin spec {spec!r}")
