"""Ordered m-ary interaction trees and unary-event arrangements.

A tree records the meeting history of one component: every internal node is a
meeting of ``arity`` ordered participants, every leaf is a component at time
zero.  Trees are represented by their growth history, a *graft sequence*: the
k-th entry names the leaf (in left-to-right order) that the k-th meeting was
attached to.  Two trees are distinct when their graft sequences differ, so the
number of trees with n internal nodes is

    count_trees(m, n) = product over k = 1 .. n-1 of ((m-1) k + 1),

the number of ways to grow a tree one meeting at a time.  Distinct graft
sequences can share one unlabelled shape; evaluation of laws depends only on
the shape, counting depends on the history.

An :class:`Arrangement` places p indistinguishable unary events into the
``m*n + 1`` branches of a tree (weak composition).  The branch order is fixed
once and for all: depth-first pre-order, the planted root edge first, then for
each node its child edges left to right, descending into each child
immediately.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator

from .errors import PreconditionError, ResourceCapError

# A shape is None (leaf) or a tuple of `arity` child shapes.
Shape = tuple | None

_DEFAULT_ENUM_CAP = 10_000_000


@dataclass(frozen=True)
class OrderedTree:
    """Ordered m-ary tree with its growth history.

    ``grafts[k]`` is the index (left-to-right, 0-based) of the leaf onto which
    the k-th internal node was attached; a tree grown through k meetings has
    ``(arity - 1) * k + 1`` leaves, which bounds the next graft index.
    """

    arity: int
    grafts: tuple[int, ...] = ()

    def __post_init__(self):
        if self.arity < 2:
            raise PreconditionError("trees need arity >= 2")
        grafts = tuple(int(g) for g in self.grafts)
        object.__setattr__(self, "grafts", grafts)
        for k, g in enumerate(grafts):
            limit = (self.arity - 1) * k + 1
            if not 0 <= g < limit:
                raise PreconditionError(
                    f"graft {k} targets leaf {g}, but the tree had {limit} leaves"
                )

    @classmethod
    def leaf(cls, arity: int) -> "OrderedTree":
        return cls(arity, ())

    @property
    def internal_count(self) -> int:
        return len(self.grafts)

    @property
    def leaf_count(self) -> int:
        return (self.arity - 1) * self.internal_count + 1

    @property
    def branch_count(self) -> int:
        """Number of edges, counting the planted root edge."""
        return self.arity * self.internal_count + 1

    def graft(self, leaf_index: int) -> "OrderedTree":
        """Attach one more internal node at the given leaf."""
        return OrderedTree(self.arity, self.grafts + (leaf_index,))

    @cached_property
    def shape(self) -> Shape:
        """Unlabelled shape: None for a leaf, tuple of child shapes otherwise."""
        m = self.arity
        root = [None]
        # leaves as (container, slot) references, left to right
        leaves: list[tuple[list, int]] = [(root, 0)]
        for g in self.grafts:
            container, slot = leaves[g]
            node = [None] * m
            container[slot] = node
            leaves[g : g + 1] = [(node, j) for j in range(m)]

        def freeze(node):
            if node is None:
                return None
            return tuple(freeze(child) for child in node)

        return freeze(root[0])

    def text(self) -> str:
        return shape_text(self.shape)

    def __repr__(self) -> str:
        return f"OrderedTree(arity={self.arity}, grafts={self.grafts}, shape={self.text()})"


def shape_text(shape: Shape) -> str:
    """Parenthesised form of a shape, e.g. ``((LLL)LL)`` for a 2-node ternary tree."""
    if shape is None:
        return "L"
    return "(" + "".join(shape_text(child) for child in shape) + ")"


def shape_from_text(text: str, arity: int) -> Shape:
    """Parse the parenthesised form back into a shape."""
    pos = 0

    def fail() -> PreconditionError:
        return PreconditionError(f"malformed tree text {text!r} at position {pos}")

    def parse() -> Shape:
        nonlocal pos
        if pos >= len(text):
            raise fail()
        ch = text[pos]
        if ch == "L":
            pos += 1
            return None
        if ch != "(":
            raise fail()
        pos += 1
        children = tuple(parse() for _ in range(arity))
        if pos >= len(text) or text[pos] != ")":
            raise fail()
        pos += 1
        return children

    shape = parse()
    if pos != len(text):
        raise fail()
    return shape


def count_trees(m: int, n: int) -> int:
    """Number of ordered m-ary trees with n internal nodes (exact integer)."""
    if m < 2:
        raise PreconditionError("trees need arity >= 2")
    if n < 0:
        raise PreconditionError("internal node count must be >= 0")
    out = 1
    for k in range(1, n):
        out *= (m - 1) * k + 1
    return out


def enumerate_trees(
    m: int, n: int, max_count: int = _DEFAULT_ENUM_CAP
) -> Iterator[OrderedTree]:
    """Yield every ordered m-ary tree with n internal nodes, exactly once.

    Deterministic lexicographic order over graft sequences; the stream length
    equals :func:`count_trees`.  Raises :class:`ResourceCapError` up front when
    the count exceeds ``max_count``.
    """
    total = count_trees(m, n)
    if total > max_count:
        raise ResourceCapError(
            f"enumerating {total} trees exceeds the cap of {max_count}"
        )

    def rec(prefix: tuple[int, ...], k: int) -> Iterator[OrderedTree]:
        if k == n:
            yield OrderedTree(m, prefix)
            return
        for g in range((m - 1) * k + 1):
            yield from rec(prefix + (g,), k + 1)

    yield from rec((), 0)


@dataclass(frozen=True)
class Arrangement:
    """Placement of indistinguishable unary events into ordered boxes."""

    counts: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        object.__setattr__(self, "counts", counts)
        if len(counts) < 1:
            raise PreconditionError("arrangements need at least one box")
        if any(c < 0 for c in counts):
            raise PreconditionError("box counts must be non-negative")

    @property
    def boxes(self) -> int:
        return len(self.counts)

    @property
    def total(self) -> int:
        return sum(self.counts)


def count_arrangements(boxes: int, p: int) -> int:
    """Number of ways to place p indistinguishable objects into ``boxes`` boxes."""
    if boxes < 1:
        raise PreconditionError("need at least one box")
    if p < 0:
        raise PreconditionError("object count must be >= 0")
    return math.comb(boxes - 1 + p, boxes - 1)


def enumerate_arrangements(
    boxes: int, p: int, max_count: int = _DEFAULT_ENUM_CAP
) -> Iterator[Arrangement]:
    """Yield every arrangement exactly once, first box count descending."""
    total = count_arrangements(boxes, p)
    if total > max_count:
        raise ResourceCapError(
            f"enumerating {total} arrangements exceeds the cap of {max_count}"
        )

    def rec(prefix: tuple[int, ...], remaining_boxes: int, remaining: int):
        if remaining_boxes == 1:
            yield Arrangement(prefix + (remaining,))
            return
        for c in range(remaining, -1, -1):
            yield from rec(prefix + (c,), remaining_boxes - 1, remaining - c)

    yield from rec((), boxes, p)


@dataclass(frozen=True)
class DecoratedTree:
    """An ordered tree with unary events arranged on its branches.

    The arrangement is read against the canonical branch order (pre-order,
    root edge first).
    """

    tree: OrderedTree
    arrangement: Arrangement

    def __post_init__(self):
        if self.arrangement.boxes != self.tree.branch_count:
            raise PreconditionError(
                f"arrangement has {self.arrangement.boxes} boxes but the tree has "
                f"{self.tree.branch_count} branches"
            )

    @property
    def unary_count(self) -> int:
        return self.arrangement.total
