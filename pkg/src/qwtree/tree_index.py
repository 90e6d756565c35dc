"""Indexing of the rooted binary trees hanging off the root ``a``.

Vertices are reduced words over ``{a, b, c}`` starting with ``a``.  Each
vertex is stored as ``(depth, index)`` where ``depth`` counts edges from the
root ``a`` (so the word length is ``depth + 1``) and the bits of ``index``
record the branch choices, most significant bit first.  At every branching
child 0 appends ``sigma(last)`` and child 1 appends ``sigma^2(last)`` with
``sigma = (abc)``.

Three tree kinds are supported:

``SubtreeAB``
    ``{a} u {aby}``: the root has the single child ``ab``.
``SubtreeAC``
    ``{a} u {acy}``: the root has the single child ``ac``.
``FullA``
    ``{a} u {ay}``: the root has both children, ``ab`` (bit 0) and ``ac``
    (bit 1).

For the two subtrees the first branching is fixed, so the path stored in
``index`` has ``depth - 1`` bits; for ``FullA`` it has ``depth`` bits.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Letter",
    "TreeKind",
    "Vertex",
    "EXIT",
    "FrontierError",
    "WordError",
    "LayoutError",
    "LevelLayout",
    "layout",
    "level_size",
    "move_by_letter",
    "encode",
    "decode",
    "parse_word",
    "format_word",
    "last_letters",
    "MAX_DEPTH",
]


class Letter(enum.IntEnum):
    a = 0
    b = 1
    c = 2

    def sigma(self) -> "Letter":
        return Letter((self + 1) % 3)

    def pi(self) -> "Letter":
        return Letter((self + 2) % 3)

    def __str__(self) -> str:
        return self.name

    @classmethod
    def of(cls, x) -> "Letter":
        """Coerce a ``Letter``, an int 0-2 or one of ``'a'``, ``'b'``, ``'c'``."""
        if isinstance(x, str):
            try:
                return cls[x]
            except KeyError:
                raise WordError(f"invalid letter {x!r}") from None
        return cls(x)


class TreeKind(str, enum.Enum):
    SubtreeAB = "ab"
    SubtreeAC = "ac"
    FullA = "a"

    @classmethod
    def _missing_(cls, value):
        # accept member names ("FullA") as well as values ("a")
        if isinstance(value, str):
            for k in cls:
                if k.name.lower() == value.lower():
                    return k
        return None

    @property
    def root_coins(self) -> tuple[Letter, ...]:
        """Coin letters carried by the root ``a``."""
        if self is TreeKind.SubtreeAB:
            return (Letter.a,)
        if self is TreeKind.SubtreeAC:
            return (Letter.b,)
        return (Letter.a, Letter.b)

    @property
    def root_bit(self) -> int | None:
        """The fixed first branch bit of a subtree, ``None`` for ``FullA``."""
        if self is TreeKind.SubtreeAB:
            return 0
        if self is TreeKind.SubtreeAC:
            return 1
        return None


class FrontierError(RuntimeError):
    """A move or a walk step would leave the truncated tree."""


class WordError(ValueError):
    """A word is not reduced or does not belong to the requested tree."""


class LayoutError(ValueError):
    """The requested depth cannot be addressed."""

    def __init__(self, msg: str, max_depth: int):
        super().__init__(msg)
        self.max_depth = max_depth


# 3 * 2**D amplitudes must stay addressable by int64 offsets.
MAX_DEPTH = 60


class _Exit:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "EXIT"


EXIT = _Exit()


def level_size(depth: int, kind: TreeKind = TreeKind.SubtreeAB) -> int:
    """Number of vertices at ``depth``."""
    if depth < 0:
        raise ValueError("depth must be non-negative")
    if depth == 0:
        return 1
    if TreeKind(kind) is TreeKind.FullA:
        return 1 << depth
    return 1 << (depth - 1)


def _path_len(depth: int, kind: TreeKind) -> int:
    if kind is TreeKind.FullA:
        return depth
    return max(depth - 1, 0)


@dataclass(frozen=True, order=True)
class Vertex:
    depth: int
    index: int = 0
    kind: TreeKind = field(default=TreeKind.SubtreeAB, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", TreeKind(self.kind))
        if self.depth < 0:
            raise ValueError("depth must be non-negative")
        if not 0 <= self.index < level_size(self.depth, self.kind):
            raise ValueError(f"index {self.index} out of range at depth {self.depth}")

    @property
    def branch_path(self) -> tuple[int, ...]:
        n = _path_len(self.depth, self.kind)
        return tuple((self.index >> (n - 1 - i)) & 1 for i in range(n))

    @property
    def full_path(self) -> tuple[int, ...]:
        """Branch bits including the fixed first bit of a subtree."""
        if self.depth == 0 or self.kind.root_bit is None:
            return self.branch_path
        return (self.kind.root_bit,) + self.branch_path

    @property
    def last_letter(self) -> Letter:
        p = self.full_path
        return Letter((len(p) + sum(p)) % 3)

    @property
    def word(self) -> tuple[Letter, ...]:
        w = [Letter.a]
        for bit in self.full_path:
            w.append(Letter((w[-1] + 1 + bit) % 3))
        return tuple(w)

    @property
    def parity(self) -> int:
        """Parity of the distance to the root ``e`` of the full ternary tree."""
        return (self.depth + 1) % 2

    @property
    def parent(self) -> "Vertex | _Exit":
        if self.depth == 0:
            return EXIT
        if self.depth == 1 and self.kind is not TreeKind.FullA:
            return Vertex(0, 0, self.kind)
        return Vertex(self.depth - 1, self.index >> 1, self.kind)

    def child(self, bit: int) -> "Vertex":
        if self.depth == 0 and self.kind is not TreeKind.FullA:
            if bit != self.kind.root_bit:
                raise WordError(f"child {bit} of the root is outside {self.kind.name}")
            return Vertex(1, 0, self.kind)
        return Vertex(self.depth + 1, 2 * self.index + bit, self.kind)

    def __str__(self) -> str:
        return format_word(self.word)


def format_word(word) -> str:
    return "".join(Letter(x).name for x in word)


def parse_word(s: str) -> tuple[Letter, ...]:
    try:
        return tuple(Letter[ch] for ch in s.strip())
    except KeyError as exc:
        raise WordError(f"invalid letter in word {s!r}") from exc


def decode(word, kind: TreeKind = TreeKind.SubtreeAB) -> Vertex:
    """Map a reduced word to its vertex."""
    kind = TreeKind(kind)
    if isinstance(word, str):
        word = parse_word(word)
    word = tuple(Letter(x) for x in word)
    if not word or word[0] is not Letter.a:
        raise WordError(f"{format_word(word)!r} does not start at the root a")
    bits = []
    for prev, cur in zip(word, word[1:]):
        step = (cur - prev) % 3
        if step == 0:
            raise WordError(f"{format_word(word)!r} is not reduced")
        bits.append(step - 1)
    depth = len(word) - 1
    if kind.root_bit is not None and depth > 0:
        if bits[0] != kind.root_bit:
            raise WordError(f"{format_word(word)!r} lies outside {kind.name}")
        bits = bits[1:]
    index = 0
    for bit in bits:
        index = 2 * index + bit
    return Vertex(depth, index, kind)


def encode(v: Vertex) -> tuple[Letter, ...]:
    """Inverse of :func:`decode`."""
    return v.word


def move_by_letter(v: Vertex, letter, depth_cap: int | None = None):
    """Append ``letter`` to the word of ``v`` with cancellation.

    Returns the new vertex, or ``EXIT`` when the move leaves the tree through
    the root (towards ``e`` or into the sibling subtree).  Raises
    ``FrontierError`` if the move goes below ``depth_cap``.
    """
    letter = Letter.of(letter)
    last = v.last_letter
    if letter == last:
        return v.parent
    bit = (letter - last - 1) % 3
    if v.depth == 0 and v.kind.root_bit is not None and bit != v.kind.root_bit:
        return EXIT
    if depth_cap is not None and v.depth + 1 > depth_cap:
        raise FrontierError(f"move from {v} by {letter.name} exceeds depth cap {depth_cap}")
    return v.child(bit)


def last_letters(depth: int, kind: TreeKind = TreeKind.SubtreeAB) -> np.ndarray:
    """Last letter of every vertex at ``depth``, as a uint8 array."""
    kind = TreeKind(kind)
    n = level_size(depth, kind)
    idx = np.arange(n, dtype=np.int64)
    pop = np.zeros(n, dtype=np.int64)
    while idx.any():
        pop += idx & 1
        idx >>= 1
    shift = 1 if (kind is TreeKind.SubtreeAC and depth > 0) else 0
    return ((depth + pop + shift) % 3).astype(np.uint8)


@dataclass(frozen=True)
class LevelLayout:
    """Flat level-major addressing of amplitudes up to ``depth_cap``.

    Level ``d`` occupies ``[level_offsets[d], level_offsets[d + 1])``.  Within
    a level, amplitude ``(vertex index k, coin tau)`` sits at ``3 * k + tau``;
    the root stores only its ``coin_dims[0]`` admissible coin letters.
    """

    depth_cap: int
    kind: TreeKind
    level_offsets: tuple[int, ...]
    coin_dims: tuple[int, ...]

    @property
    def total_dim(self) -> int:
        return self.level_offsets[-1]

    def level_slice(self, depth: int) -> slice:
        return slice(self.level_offsets[depth], self.level_offsets[depth + 1])

    def index_of(self, v: Vertex, coin) -> int:
        coin = Letter.of(coin)
        if v.depth > self.depth_cap:
            raise FrontierError(f"{v} is below depth cap {self.depth_cap}")
        if v.depth == 0:
            roots = self.kind.root_coins
            if coin not in roots:
                raise WordError(f"coin {coin.name} is not carried by the root of {self.kind.name}")
            return roots.index(coin)
        return self.level_offsets[v.depth] + 3 * v.index + int(coin)

    def basis_label(self, i: int) -> tuple[Vertex, Letter]:
        if not 0 <= i < self.total_dim:
            raise IndexError(i)
        if i < self.level_offsets[1]:
            return Vertex(0, 0, self.kind), self.kind.root_coins[i]
        d = int(np.searchsorted(self.level_offsets, i, side="right")) - 1
        k, tau = divmod(i - self.level_offsets[d], 3)
        return Vertex(d, k, self.kind), Letter(tau)

    def memory_bytes(self, copies: int = 3) -> int:
        """Rough footprint of ``copies`` complex128 state vectors."""
        return 16 * copies * self.total_dim


def layout(depth_cap: int, kind: TreeKind = TreeKind.SubtreeAB) -> LevelLayout:
    kind = TreeKind(kind)
    if depth_cap < 1:
        raise ValueError("depth_cap must be at least 1")
    if depth_cap > MAX_DEPTH:
        raise LayoutError(
            f"depth_cap {depth_cap} overflows the index space (max {MAX_DEPTH})", MAX_DEPTH
        )
    root_dim = len(kind.root_coins)
    offsets = [0, root_dim]
    for d in range(1, depth_cap + 1):
        offsets.append(offsets[-1] + 3 * level_size(d, kind))
    dims = (root_dim,) + (3,) * depth_cap
    return LevelLayout(depth_cap, kind, tuple(offsets), dims)
