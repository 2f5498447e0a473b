"""Index algebra for the N-ary tree and its identification with dyadic cubes.

A node of the tree is a finite word of child labels in ``{1..N}`` with
``N = 2**d``.  The empty word is the root.  Each node owns one dyadic cube
of the unit cube ``[0,1)**d``: the root owns the unit cube, and the N
children of a node tile its cube with the half-side sub-cubes.

Conventions fixed here (the labelling of sub-cubes is otherwise free):

- child labels are ``1 + little-endian binary encoding`` of the per-axis
  half-offsets, so for ``d=2`` label 1 is the lower-left quarter, label 2
  the right half of axis 0, label 3 the upper half of axis 1, label 4 the
  upper-right quarter;
- cubes are half-open, ``[a, a+s)`` in every axis, which makes the
  point-to-path map total on ``[0,1)**d``;
- the labelling is self-similar: the homothety sending the unit cube onto
  the cube of ``j`` sends the cube of ``k`` onto the cube of ``jk``.

Everything in this module is pure and stateless; instances are immutable
and safe to share between threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

__all__ = ["TreeIndex", "DyadicCube", "path_of_point", "point_path"]

# Alphabet for the textual form: label k prints as _DIGITS[k-1].  Labels are
# 1-based, so '0' never appears and the empty string is unambiguous (root).
_DIGITS = "123456789abcdefghijklmnopqrstuv"


@dataclass(frozen=True, slots=True)
class TreeIndex:
    """A node of the N-ary tree, stored as a packed label sequence.

    The packed form keeps ``d = log2(N)`` bits per label (label minus one),
    most significant label first, so the packed integer of a generation-n
    node is also its rank in ``0..N**n - 1`` within the generation.  This
    lets generation-level enumerations run as plain counter loops.
    """

    arity: int
    generation: int
    code: int

    def __post_init__(self):
        n = self.arity
        if n < 2 or n & (n - 1):
            raise ValueError(f"arity must be a power of two >= 2, got {n}")
        if self.generation < 0:
            raise ValueError("generation must be non-negative")
        if not 0 <= self.code < n**self.generation:
            raise ValueError("packed code out of range for generation")

    # -- constructors -----------------------------------------------------

    @classmethod
    def root(cls, arity: int) -> "TreeIndex":
        return cls(arity, 0, 0)

    @classmethod
    def from_labels(cls, labels: Sequence[int], arity: int) -> "TreeIndex":
        code = 0
        for lab in labels:
            if not 1 <= lab <= arity:
                raise ValueError(f"label {lab} outside 1..{arity}")
            code = code * arity + (lab - 1)
        return cls(arity, len(labels), code)

    @classmethod
    def from_string(cls, text: str, arity: int) -> "TreeIndex":
        """Inverse of :meth:`to_string`; the empty string is the root."""
        labels = [_DIGITS.index(ch) + 1 for ch in text]
        return cls.from_labels(labels, arity)

    # -- basic structure ---------------------------------------------------

    @property
    def labels(self) -> tuple[int, ...]:
        out = []
        c = self.code
        for _ in range(self.generation):
            out.append(c % self.arity + 1)
            c //= self.arity
        return tuple(reversed(out))

    @property
    def is_root(self) -> bool:
        return self.generation == 0

    def parent(self) -> "TreeIndex":
        """The father node; the root has no father inside the tree."""
        if self.is_root:
            raise ValueError("the root has no parent")
        return TreeIndex(self.arity, self.generation - 1, self.code // self.arity)

    def child(self, label: int) -> "TreeIndex":
        if not 1 <= label <= self.arity:
            raise ValueError(f"label {label} outside 1..{self.arity}")
        return TreeIndex(self.arity, self.generation + 1,
                         self.code * self.arity + (label - 1))

    def offspring(self) -> list["TreeIndex"]:
        """The N children, in label order."""
        return [self.child(k) for k in range(1, self.arity + 1)]

    def append(self, other: "TreeIndex") -> "TreeIndex":
        """Concatenation of label words (the node ``jk``)."""
        if other.arity != self.arity:
            raise ValueError("mismatched arities")
        return TreeIndex(self.arity, self.generation + other.generation,
                         self.code * self.arity**other.generation + other.code)

    def is_prefix_of(self, other: "TreeIndex") -> bool:
        """The tree partial order: ``j <= k`` iff ``k`` extends ``j``."""
        if other.arity != self.arity or other.generation < self.generation:
            return False
        return other.code // self.arity ** (other.generation - self.generation) == self.code

    def ancestors(self) -> Iterator["TreeIndex"]:
        """The chain root = k_0 < k_1 < ... < k_n = self."""
        for g in range(self.generation + 1):
            yield TreeIndex(self.arity, g,
                            self.code // self.arity ** (self.generation - g))

    def to_string(self) -> str:
        """Slash-free digit string in base N; the root is the empty string."""
        return "".join(_DIGITS[lab - 1] for lab in self.labels)

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.to_string() or "<root>"

    # -- cube geometry -----------------------------------------------------

    def cube(self, dim: int) -> "DyadicCube":
        """The dyadic cube owned by this node, exact in dyadic rationals."""
        if 2**dim != self.arity:
            raise ValueError(f"dimension {dim} does not match arity {self.arity}")
        origin = [Fraction(0)] * dim
        side = Fraction(1)
        for lab in self.labels:
            side /= 2
            bits = lab - 1
            for axis in range(dim):
                if (bits >> axis) & 1:
                    origin[axis] += side
        return DyadicCube(tuple(origin), side)


@dataclass(frozen=True, slots=True)
class DyadicCube:
    """Half-open cube ``prod_a [origin_a, origin_a + side)`` with dyadic data."""

    origin: tuple[Fraction, ...]
    side: Fraction

    @property
    def dim(self) -> int:
        return len(self.origin)

    @property
    def volume(self) -> Fraction:
        return self.side**self.dim

    def contains(self, point: Sequence[float]) -> bool:
        return all(o <= x < o + self.side for o, x in zip(self.origin, point))

    def center(self) -> tuple[float, ...]:
        return tuple(float(o + self.side / 2) for o in self.origin)


def path_of_point(point: Sequence[float], generation: int, dim: int) -> TreeIndex:
    """The generation-n node whose cube contains ``point``.

    The half-open convention makes this total on ``[0,1)**d``; doubling a
    binary float is exact, so the returned path is the exact binary
    expansion of the coordinates.
    """
    coords = [float(x) for x in point]
    if len(coords) != dim:
        raise ValueError(f"expected a {dim}-vector, got {len(coords)} coordinates")
    if any(not 0.0 <= x < 1.0 for x in coords):
        raise ValueError("point must lie in [0,1)^d")
    labels = []
    for _ in range(generation):
        bits = 0
        for axis in range(dim):
            if coords[axis] >= 0.5:
                bits |= 1 << axis
                coords[axis] = 2.0 * coords[axis] - 1.0
            else:
                coords[axis] = 2.0 * coords[axis]
        labels.append(bits + 1)
    return TreeIndex.from_labels(labels, 2**dim)


def point_path(point: Sequence[float], dim: int) -> Iterator[TreeIndex]:
    """The nested sequence x_0 < x_1 < ... of nodes whose cubes contain x."""
    node = TreeIndex.root(2**dim)
    coords = [float(x) for x in point]
    if any(not 0.0 <= x < 1.0 for x in coords):
        raise ValueError("point must lie in [0,1)^d")
    while True:
        yield node
        bits = 0
        for axis in range(dim):
            if coords[axis] >= 0.5:
                bits |= 1 << axis
                coords[axis] = 2.0 * coords[axis] - 1.0
            else:
                coords[axis] = 2.0 * coords[axis]
        node = node.child(bits + 1)
