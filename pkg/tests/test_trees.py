"""Tree growth histories and unary-event arrangements.

Core claims:
    - the product formula counts growth histories: pairwise trees give n!,
      ternary trees give 1, 1, 3, 15, 105
    - enumeration is duplicate-free and its cardinality matches the formula
    - every enumerated tree has (m-1)n+1 leaves and mn+1 branches
    - the one-step recurrence count(n) = count(n-1) * ((n-1)(m-1)+1) holds
    - arrangement counts equal the stars-and-bars binomial
    - text serialisation round-trips shapes, matching the ((LLL)LL) form
"""
from __future__ import annotations

import math

import pytest

from wildsums import (
    Arrangement,
    DecoratedTree,
    OrderedTree,
    PreconditionError,
    ResourceCapError,
    count_arrangements,
    count_trees,
    enumerate_arrangements,
    enumerate_trees,
    shape_from_text,
    shape_text,
)


def count_leaves(shape) -> int:
    if shape is None:
        return 1
    return sum(count_leaves(child) for child in shape)


def test_pairwise_counts_are_factorials():
    for n in range(9):
        assert count_trees(2, n) == math.factorial(n)


def test_ternary_counts():
    assert [count_trees(3, n) for n in range(5)] == [1, 1, 3, 15, 105]


def test_count_recurrence():
    for m in (2, 3, 4):
        for n in range(1, 8):
            assert count_trees(m, n) == count_trees(m, n - 1) * ((n - 1) * (m - 1) + 1)


def test_enumeration_matches_counts_and_is_duplicate_free():
    for m in (2, 3, 4):
        for n in range(6 if m == 2 else 5):
            trees = list(enumerate_trees(m, n))
            assert len(trees) == count_trees(m, n)
            assert len({t.grafts for t in trees}) == len(trees)


def test_enumerated_trees_have_the_right_leaf_and_branch_counts():
    for m in (2, 3):
        for n in range(5):
            for tree in enumerate_trees(m, n):
                assert tree.leaf_count == (m - 1) * n + 1
                assert tree.branch_count == m * n + 1
                assert count_leaves(tree.shape) == tree.leaf_count


def test_single_leaf_and_small_enumerations():
    assert [t.grafts for t in enumerate_trees(3, 0)] == [()]
    assert len(list(enumerate_trees(3, 2))) == 3
    assert len(list(enumerate_trees(2, 3))) == 6


def test_graft_bounds_are_validated():
    with pytest.raises(PreconditionError):
        OrderedTree(2, (1,))  # the starting tree has a single leaf
    with pytest.raises(PreconditionError):
        OrderedTree(3, (0, 3))  # after one graft a ternary tree has 3 leaves
    with pytest.raises(PreconditionError):
        OrderedTree(1, ())


def test_enumeration_resource_cap():
    with pytest.raises(ResourceCapError):
        list(enumerate_trees(2, 9, max_count=1000))


def test_shape_text_matches_documented_form():
    tree = OrderedTree(3, (0, 0))
    assert tree.text() == "((LLL)LL)"
    assert OrderedTree(3, ()).text() == "L"
    assert OrderedTree(2, (0, 1)).text() == "(L(LL))"


def test_shape_text_round_trip():
    for m in (2, 3):
        for n in range(4):
            for tree in enumerate_trees(m, n):
                assert shape_text(shape_from_text(tree.text(), m)) == tree.text()
    with pytest.raises(PreconditionError):
        shape_from_text("(LL", 2)
    with pytest.raises(PreconditionError):
        shape_from_text("(LL)x", 2)


# -----------------------------------------------------------------------------
# Arrangements
# -----------------------------------------------------------------------------
def test_arrangement_counts():
    assert count_arrangements(7, 1) == 7
    assert count_arrangements(3, 2) == 6
    for boxes in (1, 2, 5):
        assert count_arrangements(boxes, 0) == 1


def test_arrangement_count_identity_on_tree_branches():
    for m in range(2, 5):
        for n in range(5):
            for p in range(7):
                assert count_arrangements(m * n + 1, p) == math.comb(m * n + p, m * n)


def test_enumerate_arrangements_small_cases():
    assert [a.counts for a in enumerate_arrangements(2, 1)] == [(1, 0), (0, 1)]
    sevens = [a.counts for a in enumerate_arrangements(7, 1)]
    assert len(sevens) == 7
    assert all(sum(c) == 1 and max(c) == 1 for c in sevens)
    six = [a.counts for a in enumerate_arrangements(3, 2)]
    assert six == [(2, 0, 0), (1, 1, 0), (1, 0, 1), (0, 2, 0), (0, 1, 1), (0, 0, 2)]


def test_enumerate_arrangements_matches_count_exactly():
    for boxes in (1, 2, 3, 7, 13):
        for p in range(5):
            arrangements = list(enumerate_arrangements(boxes, p))
            assert len(arrangements) == count_arrangements(boxes, p)
            assert len(set(a.counts for a in arrangements)) == len(arrangements)
            assert all(a.total == p for a in arrangements)


def test_arrangement_validation_and_caps():
    with pytest.raises(PreconditionError):
        Arrangement((1, -1))
    with pytest.raises(PreconditionError):
        count_arrangements(0, 1)
    with pytest.raises(ResourceCapError):
        list(enumerate_arrangements(30, 30, max_count=100))


def test_decorated_tree_box_count_must_match():
    tree = OrderedTree(2, (0,))
    DecoratedTree(tree, Arrangement((0, 1, 0)))
    with pytest.raises(PreconditionError):
        DecoratedTree(tree, Arrangement((1, 0)))
