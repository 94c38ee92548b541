"""Measures, kernels and the one-coordinate meeting marginal.

Core claims:
    - validation rejects malformed spaces, measures, kernels
    - identity (absent-entry) meetings preserve the first marginal
    - the trading kernel moves a (hn, lo) pair to (ho, ln), first coordinate ho
    - uniform x uniform through the trading kernel matches a brute-force sum
    - meeting marginals stay normalised and are multilinear in their inputs
    - permuting input laws of a symmetric kernel permutes coordinate marginals
    - unary application: single step, zero steps, involution, additivity
    - check_symmetry accepts symmetric kernels and flags a planted violation
"""
from __future__ import annotations

import itertools

import numpy as np
import pytest

from wildsums import (
    MAryKernel,
    Measure,
    PreconditionError,
    StateSpace,
    UnaryKernel,
    apply_unary,
    build_dgp,
    check_symmetry,
    marginal_interact,
)

RNG = np.random.default_rng(20240811)


def random_measure(space: StateSpace) -> Measure:
    w = RNG.random(space.size)
    return Measure(space, w / w.sum())


def random_kernel(space: StateSpace, m: int) -> MAryKernel:
    """Dense random kernel, no symmetry."""
    entries = {}
    for key in itertools.product(space.labels, repeat=m):
        outs = list(itertools.product(space.labels, repeat=m))
        probs = RNG.random(len(outs))
        probs /= probs.sum()
        entries[key] = tuple(zip(outs, probs))
    return MAryKernel(space, m, entries)


def random_symmetric_kernel(space: StateSpace, m: int) -> MAryKernel:
    """Symmetrised random kernel with exactly equal probabilities per orbit."""
    labels = space.labels
    raw = {
        (key, out): RNG.random()
        for key in itertools.product(labels, repeat=m)
        for out in itertools.product(labels, repeat=m)
    }
    sym = {}
    for (key, out), _ in raw.items():
        orbit = sorted(
            (tuple(key[j] for j in perm), tuple(out[j] for j in perm))
            for perm in itertools.permutations(range(m))
        )
        sym[(key, out)] = sum(raw[pair] for pair in orbit) / len(orbit)
    entries = {}
    for key in itertools.product(labels, repeat=m):
        # normalise every row in an orbit by the same float so entries stay
        # exactly equal across the orbit (check_symmetry compares exactly)
        canon = min(
            tuple(key[j] for j in perm) for perm in itertools.permutations(range(m))
        )
        total = sum(sym[(canon, out)] for out in itertools.product(labels, repeat=m))
        entries[key] = tuple(
            (out, sym[(key, out)] / total) for out in itertools.product(labels, repeat=m)
        )
    return MAryKernel(space, m, entries)


# -----------------------------------------------------------------------------
# Spaces and measures
# -----------------------------------------------------------------------------
def test_state_space_rejects_duplicates():
    with pytest.raises(PreconditionError):
        StateSpace(("a", "a"))
    with pytest.raises(PreconditionError):
        StateSpace(())


def test_measure_validation():
    space = StateSpace(("a", "b"))
    with pytest.raises(PreconditionError):
        Measure(space, np.array([0.7, 0.7]))
    with pytest.raises(PreconditionError):
        Measure(space, np.array([1.5, -0.5]))
    mu = Measure(space, np.array([0.25, 0.75]))
    assert mu.weight("b") == 0.75
    assert Measure.point(space, "a").as_dict() == {"a": 1.0, "b": 0.0}
    assert Measure.uniform(space).l1(Measure(space, [0.5, 0.5])) == 0.0


# -----------------------------------------------------------------------------
# Meeting marginals
# -----------------------------------------------------------------------------
def test_identity_kernel_preserves_first_marginal():
    space = StateSpace(("a", "b", "c"))
    kernel = MAryKernel(space, 2, {})
    mu = random_measure(space)
    nu = random_measure(space)
    assert marginal_interact(kernel, [mu, nu]).l1(mu) <= 1e-14
    assert marginal_interact(kernel, [mu, nu], coordinate=1).l1(nu) <= 1e-14


def test_trading_pair_outcome():
    model = build_dgp(1.0)
    hn = Measure.point(model.space, "hn")
    lo = Measure.point(model.space, "lo")
    out = marginal_interact(model.trade_kernel, [hn, lo])
    assert out.as_dict() == {"ln": 0.0, "lo": 0.0, "hn": 0.0, "ho": 1.0}
    # the reversed ordering hands the asset to the second slot
    out_rev = marginal_interact(model.trade_kernel, [lo, hn])
    assert out_rev.as_dict() == {"ln": 1.0, "lo": 0.0, "hn": 0.0, "ho": 0.0}


def test_trading_kernel_uniform_inputs_match_brute_force():
    model = build_dgp(1.0)
    space = model.space
    uniform = Measure.uniform(space)
    # oracle: explicit sum over all 16 input pairs of the joint kernel
    expected = np.zeros(space.size)
    for a in space.labels:
        for b in space.labels:
            if (a, b) == ("hn", "lo"):
                first = "ho"
            elif (a, b) == ("lo", "hn"):
                first = "ln"
            else:
                first = a
            expected[space.index(first)] += (1 / 4) * (1 / 4)
    got = marginal_interact(model.trade_kernel, [uniform, uniform])
    assert np.abs(got.weights - expected).max() <= 1e-15
    assert got.weight("ho") == pytest.approx(1 / 4 + 1 / 16, abs=1e-15)
    assert got.weight("hn") == pytest.approx(1 / 4 - 1 / 16, abs=1e-15)


def test_marginal_interact_rejects_mismatches():
    model = build_dgp(1.0)
    other = StateSpace(("x", "y"))
    with pytest.raises(PreconditionError):
        marginal_interact(model.trade_kernel, [Measure.uniform(model.space)])
    with pytest.raises(PreconditionError):
        marginal_interact(
            model.trade_kernel,
            [Measure.uniform(other), Measure.uniform(other)],
        )


def test_marginal_normalisation_random_kernels():
    space = StateSpace(("a", "b", "c"))
    for m in (2, 3):
        kernel = random_kernel(space, m)
        out = marginal_interact(kernel, [random_measure(space) for _ in range(m)])
        assert abs(out.weights.sum() - 1.0) <= 1e-12


def test_marginal_interact_is_multilinear():
    space = StateSpace(("a", "b", "c"))
    kernel = random_kernel(space, 2)
    mu, mu2, nu = (random_measure(space) for _ in range(3))
    for alpha in (0.0, 0.3, 1.0):
        mix = Measure(space, alpha * mu.weights + (1 - alpha) * mu2.weights)
        left = marginal_interact(kernel, [mix, nu]).weights
        right = (
            alpha * marginal_interact(kernel, [mu, nu]).weights
            + (1 - alpha) * marginal_interact(kernel, [mu2, nu]).weights
        )
        assert np.abs(left - right).max() <= 1e-14


def test_symmetric_kernel_permutation_covariance():
    """Permuting input laws acts on the output by permuting coordinates.

    For a symmetric kernel, marginal j given inputs (mu_{s(1)},...,mu_{s(m)})
    equals marginal s(j) given (mu_1,...,mu_m).  This is the correct form of
    input-permutation symmetry; the first marginal alone is not invariant
    (the identity kernel returns its first input whatever the second is).
    """
    for m in (2, 3):
        space = StateSpace(("a", "b") if m == 3 else ("a", "b", "c"))
        kernel = random_symmetric_kernel(space, m)
        assert check_symmetry(kernel)
        mus = [random_measure(space) for _ in range(m)]
        for perm in itertools.permutations(range(m)):
            permuted = [mus[perm[i]] for i in range(m)]
            for j in range(m):
                left = marginal_interact(kernel, permuted, coordinate=j)
                right = marginal_interact(kernel, mus, coordinate=perm[j])
                assert left.l1(right) <= 1e-12


# -----------------------------------------------------------------------------
# Unary kernels
# -----------------------------------------------------------------------------
def test_liquidity_flip_single_application():
    model = build_dgp(1.0)
    ln = Measure.point(model.space, "ln")
    assert apply_unary(model.flip_kernel, ln, 1).as_dict()["hn"] == 1.0


def test_apply_unary_zero_times_is_identity():
    model = build_dgp(1.0)
    mu = random_measure(model.space)
    assert apply_unary(model.flip_kernel, mu, 0).l1(mu) == 0.0


def test_flip_is_an_involution():
    model = build_dgp(1.0)
    squared = model.flip_kernel.matrix @ model.flip_kernel.matrix
    assert np.array_equal(squared, np.eye(4))
    ln = Measure.point(model.space, "ln")
    assert apply_unary(model.flip_kernel, ln, 2).l1(ln) == 0.0


def test_apply_unary_is_additive_in_the_exponent():
    space = StateSpace(("a", "b", "c"))
    mat = RNG.random((3, 3))
    mat /= mat.sum(axis=1, keepdims=True)
    kernel = UnaryKernel(space, mat)
    mu = random_measure(space)
    for a, b in ((0, 3), (2, 2), (1, 4)):
        left = apply_unary(kernel, mu, a + b)
        right = apply_unary(kernel, apply_unary(kernel, mu, a), b)
        assert left.l1(right) <= 1e-14


def test_unary_kernel_rejects_bad_rows():
    space = StateSpace(("a", "b"))
    with pytest.raises(PreconditionError):
        UnaryKernel(space, np.array([[0.5, 0.6], [0.0, 1.0]]))
    with pytest.raises(PreconditionError):
        UnaryKernel(space, np.array([[1.5, -0.5], [0.0, 1.0]]))


# -----------------------------------------------------------------------------
# Symmetry checking
# -----------------------------------------------------------------------------
def test_check_symmetry_on_models():
    model = build_dgp(1.0)
    assert check_symmetry(model.trade_kernel)
    identity = MAryKernel(model.space, 2, {})
    assert check_symmetry(identity)


def test_check_symmetry_flags_violation():
    space = StateSpace(("a", "b", "c", "d"))
    lopsided = MAryKernel(space, 2, {("a", "b"): ((("c", "d"), 1.0),)})
    assert not check_symmetry(lopsided)
    # adding the mirrored entry repairs it
    repaired = MAryKernel(
        space,
        2,
        {
            ("a", "b"): ((("c", "d"), 1.0),),
            ("b", "a"): ((("d", "c"), 1.0),),
        },
    )
    assert check_symmetry(repaired)
