"""Wild-sum series solvers for the macroscopic evolution equations.

The law of one component in a large m-ary interacting system solves

    d mu_t / dt = lam * (B(mu_t, ..., mu_t) - mu_t)

where B is the one-coordinate meeting marginal (:func:`marginal_interact`).
Conditioning on the number n of meetings in the component's backward history
and on the history itself yields the series

    mu_t = sum_n  w_n(t) * avg_n,

with ``w_n`` the branching-count law and ``avg_n`` the uniform average of the
iterated-kernel law over all n-node ordered trees.  The averages obey the
multilinear recursion implemented by :func:`tree_averages`: summing over the
split of the root meeting into subtrees reproduces the full tree average at a
cost polynomial in n, while direct enumeration grows factorially.  Tests pin
the recursion against explicit enumeration.

Autonomous unary transitions at rate gamma add a ``gamma * (mu P - mu)`` term.
The solver folds that term into an enlarged meeting kernel in which one
uniformly chosen participant performs the unary move while the others stand
witness; the generators match identically, so the same series machinery
applies at total rate ``lam + m * gamma``.  The alternative evaluation that
places Poisson-many unary events uniformly over tree branches is kept as
:func:`uniform_placement_series` for diagnostics; it does *not* solve the
two-kernel equation (branch lengths are neither equal nor independent of the
tree), and the tests measure its defect.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterator, Sequence

import numpy as np

from .errors import PreconditionError, ResourceCapError
from .statespace import (
    MAryKernel,
    Measure,
    UnaryKernel,
    _interact_arrays,
)
from .trees import DecoratedTree, OrderedTree, Shape

_DEFAULT_MAX_TERMS = 20_000


@dataclass(frozen=True)
class SeriesParams:
    """Rates, horizon and truncation budget for a series evaluation.

    ``gamma_up``/``gamma_down`` are the unary rates; leave both at zero for
    meeting-only dynamics, set only ``gamma_up`` when there is a single unary
    kernel.  ``truncation_eps`` bounds the probability mass the truncated
    series may discard.
    """

    lam: float
    t: float
    gamma_up: float = 0.0
    gamma_down: float = 0.0
    truncation_eps: float = 1e-8
    max_terms: int = _DEFAULT_MAX_TERMS

    def __post_init__(self):
        if self.lam <= 0:
            raise PreconditionError("meeting rate lam must be positive")
        if self.gamma_up < 0 or self.gamma_down < 0:
            raise PreconditionError("unary rates must be >= 0")
        if self.t < 0:
            raise PreconditionError("time horizon must be >= 0")
        if not 0 < self.truncation_eps < 1:
            raise PreconditionError("truncation_eps must lie in (0, 1)")
        if self.max_terms < 1:
            raise PreconditionError("max_terms must be >= 1")


@dataclass(frozen=True, eq=False)
class SeriesResult:
    """A truncated, renormalised series law plus its error budget.

    ``terms_used`` reports the retained orders (meetings, unary events);
    ``tail_bound`` is the series mass that was discarded before
    renormalisation.
    """

    law: Measure
    terms_used: tuple[int, int]
    tail_bound: float


# -----------------------------------------------------------------------------
# Scalar weights
# -----------------------------------------------------------------------------
def branching_weight(m: int, lam: float, t: float, n: int) -> float:
    """Probability that a component's history holds exactly n meetings.

    For m = 2 this reduces to the classical exp(-lam t) (1 - exp(-lam t))^n;
    the combinatorial prefactor is exact, so that reduction holds to the last
    bit.
    """
    if m < 2:
        raise PreconditionError("interaction arity must be >= 2")
    if n < 0 or t < 0 or lam <= 0:
        raise PreconditionError("need n >= 0, t >= 0 and lam > 0")
    from fractions import Fraction

    pref = Fraction(1)
    for k in range(1, n):
        pref *= (m - 1) * k + 1
    pref /= Fraction(m - 1) ** n * math.factorial(n)
    x = -math.expm1(-(m - 1) * lam * t)
    return float(pref) * math.exp(-lam * t) * x**n


def branching_weights(m: int, lam: float, t: float) -> Iterator[float]:
    """Yield the branching-count probabilities for n = 0, 1, 2, ... (stable ratios)."""
    x = -math.expm1(-(m - 1) * lam * t)
    p = math.exp(-lam * t)
    n = 0
    while True:
        yield p
        n += 1
        p *= (((m - 1) * (n - 1) + 1) / ((m - 1) * n)) * x


def unary_count_weight(rate: float, t: float, p: int) -> float:
    """Probability of exactly p autonomous moves by time t (Poisson mass)."""
    if rate < 0 or t < 0 or p < 0:
        raise PreconditionError("need rate >= 0, t >= 0 and p >= 0")
    mean = rate * t
    if mean == 0:
        return 1.0 if p == 0 else 0.0
    if p <= 30:
        return math.exp(-mean) * mean**p / math.factorial(p)
    # log-space keeps large orders finite
    return math.exp(p * math.log(mean) - mean - math.lgamma(p + 1))


# -----------------------------------------------------------------------------
# Tree evaluation
# -----------------------------------------------------------------------------
def tree_law(
    kernel: MAryKernel,
    mu: Measure,
    tree: OrderedTree,
    cache: dict | None = None,
) -> Measure:
    """Law at the root of a tree with ``mu`` on every leaf.

    Each internal node applies the meeting marginal to its children's laws.
    The value depends only on the tree's shape, so an optional ``cache``
    (shape -> weight vector) may be shared across calls; inserts are
    idempotent with deterministic values, which makes a plain dict safe under
    concurrent readers.
    """
    _check_kernel_measure(kernel, mu)
    if tree.arity != kernel.arity:
        raise PreconditionError(
            f"tree arity {tree.arity} does not match kernel arity {kernel.arity}"
        )
    tensor = kernel.marginal_tensor()

    def rec(shape: Shape) -> np.ndarray:
        if shape is None:
            return mu.weights
        if cache is not None and shape in cache:
            return cache[shape]
        w = _interact_arrays(tensor, [rec(child) for child in shape])
        if cache is not None:
            cache[shape] = w
        return w

    return Measure(kernel.space, rec(tree.shape))


def decorated_tree_law(
    kernel: MAryKernel,
    unary: UnaryKernel,
    mu: Measure,
    dtree: DecoratedTree,
) -> Measure:
    """Root law of a tree whose branches carry unary events.

    The law flowing up each branch is hit by the unary kernel as many times
    as the arrangement assigns to that branch (canonical pre-order branch
    numbering, root edge first, root-edge events applied last).  A zero
    arrangement reproduces :func:`tree_law`.
    """
    _check_kernel_measure(kernel, mu)
    if unary.space.labels != kernel.space.labels:
        raise PreconditionError("unary kernel lives on a different state space")
    if dtree.tree.arity != kernel.arity:
        raise PreconditionError("tree arity does not match kernel arity")
    tensor = kernel.marginal_tensor()
    mat = unary.matrix
    counts = dtree.arrangement.counts
    cursor = [0]

    def eval_edge(shape: Shape) -> np.ndarray:
        edge = cursor[0]
        cursor[0] += 1
        if shape is None:
            w = mu.weights
        else:
            w = _interact_arrays(tensor, [eval_edge(child) for child in shape])
        for _ in range(counts[edge]):
            w = w @ mat
        return w

    return Measure(kernel.space, eval_edge(dtree.tree.shape))


class _AverageStream:
    """Uniform tree averages avg_0, avg_1, ... computed by the root-split recursion.

    avg_n = sum over compositions (n_1 ... n_m) of n-1 of
            coef * B(avg_{n_1}, ..., avg_{n_m}),
    coef = g(n_1) ... g(n_m) / (g(n) * n)   with  g(k) = count_trees(k) / k!.

    The coefficients are the probabilities that a uniformly grown n-node tree
    splits into subtrees of those sizes; they sum to one at every n.  For
    efficiency the stream caches the kernel tensor partially contracted with
    each avg_i (first slot), cutting one contraction per composition.
    """

    def __init__(self, tensor: np.ndarray, w0: np.ndarray, m: int):
        self.tensor = tensor
        self.m = m
        self.avgs: list[np.ndarray] = [w0]
        self.partials: list[np.ndarray] = [np.tensordot(w0, tensor, axes=(0, 0))]
        self.ln_g: list[float] = [0.0]

    def up_to(self, n: int) -> np.ndarray:
        while len(self.avgs) <= n:
            self._extend()
        return self.avgs[n]

    def _extend(self):
        m = self.m
        n = len(self.avgs)
        self.ln_g.append(self.ln_g[-1] + math.log(((m - 1) * (n - 1) + 1) / n))
        acc = np.zeros_like(self.avgs[0])
        base = self.ln_g[n] + math.log(n)
        for comp in _compositions(n - 1, m):
            coef = math.exp(sum(self.ln_g[k] for k in comp) - base)
            w = self.partials[comp[0]]
            for k in comp[1:]:
                w = np.tensordot(self.avgs[k], w, axes=(0, 0))
            acc += coef * w
        self.avgs.append(acc)
        self.partials.append(np.tensordot(acc, self.tensor, axes=(0, 0)))


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def tree_averages(kernel: MAryKernel, mu: Measure, n_max: int) -> list[Measure]:
    """Uniform averages of the root law over all n-node trees, n = 0 .. n_max.

    Exactly equal to averaging :func:`tree_law` over the full enumeration
    (the recursion just resums it), but with polynomial cost.
    """
    _check_kernel_measure(kernel, mu)
    stream = _AverageStream(kernel.marginal_tensor(), mu.weights, kernel.arity)
    stream.up_to(n_max)
    return [Measure(kernel.space, w) for w in stream.avgs[: n_max + 1]]


# -----------------------------------------------------------------------------
# Series solvers
# -----------------------------------------------------------------------------
def _accumulate(
    tensor: np.ndarray,
    w0: np.ndarray,
    m: int,
    lam: float,
    t: float,
    eps: float,
    max_terms: int,
) -> tuple[np.ndarray, float, int]:
    stream = _AverageStream(tensor, w0, m)
    acc = np.zeros_like(w0)
    cum = 0.0
    n = 0
    for weight in branching_weights(m, lam, t):
        if n > max_terms:
            raise ResourceCapError(
                f"series needs more than {max_terms} orders at t={t}, eps={eps}; "
                "shorten the horizon, raise truncation_eps or raise max_terms"
            )
        acc += weight * stream.up_to(n)
        cum += weight
        if cum >= 1.0 - eps:
            break
        n += 1
    return acc, cum, n


def wild_sum(kernel: MAryKernel, mu0: Measure, params: SeriesParams) -> SeriesResult:
    """Series solution of the meeting-only evolution equation.

    Truncates once the branching-count weights cover ``1 - truncation_eps``
    of the mass, then renormalises; ``tail_bound`` reports the discarded
    mass so callers can tighten the budget.
    """
    if params.gamma_up != 0.0 or params.gamma_down != 0.0:
        raise PreconditionError("wild_sum handles meeting-only dynamics; use wild_sum_unary")
    _check_kernel_measure(kernel, mu0)
    acc, cum, n_used = _accumulate(
        kernel.marginal_tensor(),
        mu0.weights,
        kernel.arity,
        params.lam,
        params.t,
        params.truncation_eps,
        params.max_terms,
    )
    law = Measure(kernel.space, acc / cum)
    return SeriesResult(law, (n_used, 0), 1.0 - cum)


def _witness_tensor(
    tensor: np.ndarray, matrix: np.ndarray, lam: float, gamma: float, m: int
) -> tuple[np.ndarray, float]:
    """Fold a unary kernel into the meeting kernel via a witness meeting.

    With probability m*gamma / (lam + m*gamma) the meeting instead performs
    the unary move on one uniformly chosen participant and leaves the others
    unchanged; only the first-coordinate marginal is needed here, for which
    the chosen participant is the first with probability 1/m.  The combined
    generator at rate lam + m*gamma equals the original two-kernel one.
    """
    lam_hat = lam + m * gamma
    combined = (lam / lam_hat) * tensor
    scale = gamma / lam_hat
    size = matrix.shape[0]
    for i in range(size):
        combined[i] += scale * matrix[i]
        combined[i, ..., i] += (m - 1) * scale
    return combined, lam_hat


def wild_sum_unary(
    kernel: MAryKernel, unary: UnaryKernel, mu0: Measure, params: SeriesParams
) -> SeriesResult:
    """Series solution with meetings plus one autonomous unary kernel.

    The unary rate is ``params.gamma_up`` (``gamma_down`` must be zero).
    With a zero rate this is exactly :func:`wild_sum`.  ``terms_used``
    reports the retained combined order for both event kinds: the truncated
    series keeps every mixed term with that many events or fewer.
    """
    if params.gamma_down != 0.0:
        raise PreconditionError(
            "wild_sum_unary takes a single unary kernel; use wild_sum_unary_pair"
        )
    _check_kernel_measure(kernel, mu0)
    if unary.space.labels != kernel.space.labels:
        raise PreconditionError("unary kernel lives on a different state space")
    gamma = params.gamma_up
    if gamma == 0.0:
        return wild_sum(kernel, mu0, params)
    combined, lam_hat = _witness_tensor(
        kernel.marginal_tensor().copy(), unary.matrix, params.lam, gamma, kernel.arity
    )
    acc, cum, n_used = _accumulate(
        combined,
        mu0.weights,
        kernel.arity,
        lam_hat,
        params.t,
        params.truncation_eps,
        params.max_terms,
    )
    law = Measure(kernel.space, acc / cum)
    return SeriesResult(law, (n_used, n_used), 1.0 - cum)


def wild_sum_unary_pair(
    kernel: MAryKernel,
    up: UnaryKernel,
    down: UnaryKernel,
    mu0: Measure,
    params: SeriesParams,
) -> SeriesResult:
    """Series solution with separate upward and downward unary kernels.

    Uniformisation: a single unary kernel mixing the two in proportion to
    their rates, driven at the total rate, generates the same dynamics; the
    mixed kernel is handed to :func:`wild_sum_unary`.  Mixing also sidesteps
    any ordering question between distinct unary kernels on one branch.
    """
    gu, gd = params.gamma_up, params.gamma_down
    if gu == 0.0 and gd == 0.0:
        raise PreconditionError("at least one unary rate must be positive")
    for k in (up, down):
        if k.space.labels != kernel.space.labels:
            raise PreconditionError("unary kernel lives on a different state space")
    gamma = gu + gd
    mixed = UnaryKernel(
        kernel.space, (gu * up.matrix + gd * down.matrix) / gamma
    )
    merged = replace(params, gamma_up=gamma, gamma_down=0.0)
    return wild_sum_unary(kernel, mixed, mu0, merged)


# -----------------------------------------------------------------------------
# Diagnostic: uniform-placement double series
# -----------------------------------------------------------------------------
def uniform_placement_series(
    kernel: MAryKernel,
    unary: UnaryKernel,
    mu0: Measure,
    params: SeriesParams,
) -> SeriesResult:
    """Double series that places unary events uniformly over tree branches.

    Weights order (n, p) by branching-count x Poisson probabilities and
    averages uniformly over all placements of p events on the 2n+1 branches.
    This reading looks natural but is *not* the solution of the two-kernel
    equation: branch time-lengths are neither equal nor independent of the
    tree, so uniform placement mis-weights deep branches.  Kept for
    diagnostics and tests, which quantify the defect against the ODE oracle.
    Pairwise kernels only.
    """
    if kernel.arity != 2:
        raise PreconditionError("uniform_placement_series supports arity 2 only")
    _check_kernel_measure(kernel, mu0)
    if unary.space.labels != kernel.space.labels:
        raise PreconditionError("unary kernel lives on a different state space")
    gamma = params.gamma_up
    if params.gamma_down != 0.0:
        raise PreconditionError("single unary kernel only")
    eps = params.truncation_eps
    mean = gamma * params.t

    # Poisson order covering at least 1 - eps/2
    p_max, qcum = 0, unary_count_weight(gamma, params.t, 0)
    while qcum < 1.0 - eps / 2.0:
        p_max += 1
        if p_max > params.max_terms:
            raise ResourceCapError("unary order cap exceeded")
        qcum += unary_count_weight(gamma, params.t, p_max)
    q_weights = [unary_count_weight(gamma, params.t, p) for p in range(p_max + 1)]
    q_cov = sum(q_weights)

    tensor = kernel.marginal_tensor()
    size = kernel.space.size
    powers = [np.eye(size)]
    for _ in range(p_max):
        powers.append(powers[-1] @ unary.matrix)

    # D[n][p]: average root law at order (n meetings, p unary events)
    D: list[list[np.ndarray]] = [[mu0.weights @ powers[p] for p in range(p_max + 1)]]
    # E[(i, j, q)] = sum_{a+b=q} C(2i+a,2i) C(2j+b,2j) B(D[i][a], D[j][b])
    E: dict[tuple[int, int, int], np.ndarray] = {}

    law = np.zeros(size)
    cum = 0.0
    n = 0
    p_weights_iter = branching_weights(2, params.lam, params.t)
    pn = next(p_weights_iter)
    while True:
        for p in range(p_max + 1):
            law += pn * q_weights[p] * D[n][p]
            cum += pn * q_weights[p]
        if cum >= 1.0 - eps:
            break
        n += 1
        if n > params.max_terms:
            raise ResourceCapError("meeting order cap exceeded")
        pn = next(p_weights_iter)
        row = []
        for p in range(p_max + 1):
            acc = np.zeros(size)
            for i in range(n):
                j = n - 1 - i
                for r in range(p + 1):
                    q = p - r
                    key = (i, j, q)
                    if key not in E:
                        e = np.zeros(size)
                        for a in range(q + 1):
                            b = q - a
                            e += (
                                math.comb(2 * i + a, 2 * i)
                                * math.comb(2 * j + b, 2 * j)
                                * _interact_arrays(tensor, [D[i][a], D[j][b]])
                            )
                        E[key] = e
                    acc += E[key] @ powers[r]
            # 1/n is the exact tree-split weight for pairwise kernels
            row.append(acc / (n * math.comb(2 * n + p, 2 * n)))
        D.append(row)
    return SeriesResult(
        Measure(kernel.space, law / cum), (n, p_max), 1.0 - cum
    )


def _check_kernel_measure(kernel: MAryKernel, mu: Measure):
    if mu.space.labels != kernel.space.labels:
        raise PreconditionError("measure lives on a different state space")
