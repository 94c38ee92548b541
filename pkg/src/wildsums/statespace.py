"""Finite state spaces, probability measures and interaction kernels.

The building blocks of every solver in this package:

  * ``StateSpace``: an ordered finite set of state labels.
  * ``Measure``: a probability vector over a state space.
  * ``MAryKernel``: a joint transition kernel for meetings of m components,
    stored sparsely; input tuples without an explicit entry keep their state
    (identity outcome).
  * ``UnaryKernel``: a row-stochastic matrix for autonomous one-component
    transitions.
  * ``marginal_interact``: the law of one coordinate after a meeting of m
    independent components, extended multilinearly to distinct input laws.

All types are immutable after construction and all operations are pure, so
they may be shared freely across threads.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import PreconditionError, ResourceCapError

# Absolute tolerance on probability normalisation.  Double precision keeps
# sums of up to ~1e6 terms well inside this budget.
PROB_TOL = 1e-12

# Refuse to densify kernels beyond this many tensor entries.
_MAX_TENSOR_ENTRIES = 50_000_000

Outcome = tuple[tuple[str, ...], float]
OutcomeDist = tuple[Outcome, ...]


@dataclass(frozen=True)
class StateSpace:
    """An ordered finite collection of distinct state labels."""

    labels: tuple[str, ...]

    def __post_init__(self):
        labels = tuple(self.labels)
        object.__setattr__(self, "labels", labels)
        if len(labels) < 1:
            raise PreconditionError("state space needs at least one label")
        if any(not isinstance(s, str) or not s for s in labels):
            raise PreconditionError("state labels must be non-empty strings")
        if len(set(labels)) != len(labels):
            raise PreconditionError("state labels must be distinct")

    @property
    def size(self) -> int:
        return len(self.labels)

    @cached_property
    def _index(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.labels)}

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise PreconditionError(f"unknown state label {label!r}") from None

    def __len__(self) -> int:
        return len(self.labels)

    def __contains__(self, label: str) -> bool:
        return label in self._index


@dataclass(frozen=True, eq=False)
class Measure:
    """A probability vector over a finite state space.

    Weights must be non-negative and sum to one within ``PROB_TOL``.
    Tiny negative entries from floating-point round-off are clipped to zero.
    """

    space: StateSpace
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).copy()
        if w.shape != (self.space.size,):
            raise PreconditionError(
                f"weight vector has shape {w.shape}, expected ({self.space.size},)"
            )
        if w.min(initial=0.0) < -PROB_TOL:
            raise PreconditionError(f"negative weight {w.min():.3e}")
        np.clip(w, 0.0, None, out=w)
        total = float(w.sum())
        if abs(total - 1.0) > PROB_TOL:
            raise PreconditionError(f"weights sum to {total!r}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    # -- constructors ----------------------------------------------------------
    @classmethod
    def point(cls, space: StateSpace, label: str) -> "Measure":
        w = np.zeros(space.size)
        w[space.index(label)] = 1.0
        return cls(space, w)

    @classmethod
    def uniform(cls, space: StateSpace) -> "Measure":
        return cls(space, np.full(space.size, 1.0 / space.size))

    @classmethod
    def from_dict(cls, space: StateSpace, weights: Mapping[str, float]) -> "Measure":
        w = np.zeros(space.size)
        for label, val in weights.items():
            w[space.index(label)] = val
        return cls(space, w)

    # -- accessors -------------------------------------------------------------
    def weight(self, label: str) -> float:
        return float(self.weights[self.space.index(label)])

    def as_dict(self) -> dict[str, float]:
        return {s: float(w) for s, w in zip(self.space.labels, self.weights)}

    def l1(self, other: "Measure") -> float:
        """Total variation style L1 distance to another measure."""
        if other.space.labels != self.space.labels:
            raise PreconditionError("measures live on different state spaces")
        return float(np.abs(self.weights - other.weights).sum())

    def allclose(self, other: "Measure", tol: float = PROB_TOL) -> bool:
        return self.l1(other) <= tol

    def __repr__(self) -> str:
        body = ", ".join(f"{s}={w:.6g}" for s, w in zip(self.space.labels, self.weights))
        return f"Measure({body})"


def _canonical_entries(
    space: StateSpace, arity: int, entries: Mapping[Sequence[str], Iterable]
) -> dict[tuple[str, ...], OutcomeDist]:
    canonical: dict[tuple[str, ...], OutcomeDist] = {}
    for raw_key, raw_outcomes in entries.items():
        key = tuple(raw_key)
        if len(key) != arity:
            raise PreconditionError(f"input tuple {key} does not have {arity} states")
        for label in key:
            space.index(label)
        merged: dict[tuple[str, ...], float] = {}
        for out, prob in raw_outcomes:
            out = tuple(out)
            if len(out) != arity:
                raise PreconditionError(f"output tuple {out} does not have {arity} states")
            for label in out:
                space.index(label)
            prob = float(prob)
            if prob < 0.0:
                raise PreconditionError(f"negative probability {prob} for {key} -> {out}")
            merged[out] = merged.get(out, 0.0) + prob
        total = sum(merged.values())
        if abs(total - 1.0) > PROB_TOL:
            raise PreconditionError(
                f"outcome probabilities for input {key} sum to {total!r}, not 1"
            )
        canonical[key] = tuple(sorted(merged.items()))
    return canonical


@dataclass(frozen=True, eq=False)
class MAryKernel:
    """Joint transition kernel for meetings of ``arity`` components.

    ``entries`` maps an input tuple of states to a distribution over output
    tuples.  Input tuples with no entry are treated as the identity outcome:
    the meeting leaves all participants unchanged.  This keeps sparse model
    files small and makes "nothing happens" meetings representable.

    Symmetry (relabelling the participants relabels the outcome in the same
    way) is *not* enforced at construction; use :func:`check_symmetry`.
    """

    space: StateSpace
    arity: int
    entries: Mapping[tuple[str, ...], OutcomeDist]

    def __post_init__(self):
        if self.arity < 2:
            raise PreconditionError("meeting kernels need arity >= 2")
        object.__setattr__(
            self, "entries", _canonical_entries(self.space, self.arity, self.entries)
        )

    # -- dense first-coordinate view --------------------------------------------
    def marginal_tensor(self, coordinate: int = 0) -> np.ndarray:
        """Dense tensor T with T[x1,...,xm, c] = P(output coordinate = c | x).

        Shape is ``(size,) * arity + (size,)``.  Built lazily and cached per
        coordinate; absent entries contribute the identity outcome.
        """
        if not 0 <= coordinate < self.arity:
            raise PreconditionError(f"coordinate {coordinate} out of range")
        cache = self.__dict__.setdefault("_marginal_cache", {})
        if coordinate in cache:
            return cache[coordinate]
        s, m = self.space.size, self.arity
        if s ** (m + 1) > _MAX_TENSOR_ENTRIES:
            raise ResourceCapError(
                f"dense kernel tensor would need {s ** (m + 1)} entries"
            )
        tensor = np.zeros((s,) * m + (s,))
        grid = np.indices((s,) * m).reshape(m, -1)
        flat = tensor.reshape(-1, s)
        flat[np.arange(s**m), grid[coordinate]] = 1.0
        idx = self.space.index
        for key, outcomes in self.entries.items():
            row = np.zeros(s)
            for out, prob in outcomes:
                row[idx(out[coordinate])] += prob
            flat[int(np.ravel_multi_index([idx(x) for x in key], (s,) * m))] = row
        tensor.setflags(write=False)
        cache[coordinate] = tensor
        return tensor

    @cached_property
    def _sampling_table(self) -> dict[tuple[int, ...], tuple[list[tuple[int, ...]], list[float]]]:
        """Index-based outcome table for Monte Carlo sampling."""
        idx = self.space.index
        table = {}
        for key, outcomes in self.entries.items():
            outs = [tuple(idx(x) for x in out) for out, _ in outcomes]
            cum, acc = [], 0.0
            for _, prob in outcomes:
                acc += prob
                cum.append(acc)
            table[tuple(idx(x) for x in key)] = (outs, cum)
        return table


@dataclass(frozen=True, eq=False)
class UnaryKernel:
    """Autonomous one-component transition kernel (row-stochastic matrix)."""

    space: StateSpace
    matrix: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=float).copy()
        s = self.space.size
        if mat.shape != (s, s):
            raise PreconditionError(f"matrix has shape {mat.shape}, expected ({s}, {s})")
        if mat.min() < 0.0:
            raise PreconditionError("transition probabilities must be non-negative")
        sums = mat.sum(axis=1)
        bad = np.abs(sums - 1.0) > PROB_TOL
        if bad.any():
            state = self.space.labels[int(np.argmax(bad))]
            raise PreconditionError(f"row for state {state!r} sums to {sums[bad][0]!r}")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @classmethod
    def from_map(cls, space: StateSpace, mapping: Mapping[str, str]) -> "UnaryKernel":
        """Deterministic kernel sending each state to ``mapping[state]``.

        States missing from the mapping stay put.
        """
        mat = np.zeros((space.size, space.size))
        for i, label in enumerate(space.labels):
            mat[i, space.index(mapping.get(label, label))] = 1.0
        return cls(space, mat)

    @cached_property
    def _row_cumulatives(self) -> list[list[float]]:
        return [list(np.cumsum(row)) for row in self.matrix]


# -----------------------------------------------------------------------------
# Operations
# -----------------------------------------------------------------------------
def _interact_arrays(tensor: np.ndarray, inputs: Sequence[np.ndarray]) -> np.ndarray:
    """Multilinear contraction of input weight vectors against a kernel tensor."""
    out = tensor
    for w in inputs:
        out = np.tensordot(w, out, axes=(0, 0))
    return out


def marginal_interact(
    kernel: MAryKernel, inputs: Sequence[Measure], coordinate: int = 0
) -> Measure:
    """Law of one coordinate after a meeting of independently drawn components.

    With all inputs equal to ``mu`` this is the one-step interaction law of a
    component; with distinct inputs it is the multilinear extension used when
    evaluating interaction trees whose subtrees carry different laws.

    Note the result is generally *not* invariant under permuting the input
    measures, even for symmetric kernels: permuting the inputs permutes the
    output coordinates instead (see :func:`check_symmetry` for the symmetry
    actually guaranteed).
    """
    if len(inputs) != kernel.arity:
        raise PreconditionError(
            f"kernel arity is {kernel.arity} but {len(inputs)} input laws were given"
        )
    for mu in inputs:
        if mu.space.labels != kernel.space.labels:
            raise PreconditionError("input measure lives on a different state space")
    tensor = kernel.marginal_tensor(coordinate)
    return Measure(kernel.space, _interact_arrays(tensor, [mu.weights for mu in inputs]))


def apply_unary(kernel: UnaryKernel, mu: Measure, times: int = 1) -> Measure:
    """Apply the unary kernel ``times`` times (``times`` = 0 returns ``mu``)."""
    if mu.space.labels != kernel.space.labels:
        raise PreconditionError("measure lives on a different state space")
    if times < 0:
        raise PreconditionError("times must be a non-negative integer")
    w = mu.weights
    for _ in range(times):
        w = w @ kernel.matrix
    return Measure(kernel.space, w)


def check_symmetry(kernel: MAryKernel) -> bool:
    """True iff relabelling participants relabels outcomes consistently.

    Exhaustively checks, for every stored entry and every permutation of the
    meeting slots, that the permuted input tuple carries the correspondingly
    permuted outcome distribution (absent entries count as the identity
    outcome).  Comparison is exact.
    """
    m = kernel.arity
    if m > 6:
        raise ResourceCapError("symmetry check enumerates m! permutations; arity > 6 refused")

    def dist_at(key: tuple[str, ...]) -> dict[tuple[str, ...], float]:
        ent = kernel.entries.get(key)
        if ent is None:
            return {key: 1.0}
        return dict(ent)

    for key, outcomes in kernel.entries.items():
        dist = dict(outcomes)
        for perm in itertools.permutations(range(m)):
            pkey = tuple(key[j] for j in perm)
            expected = {tuple(out[j] for j in perm): p for out, p in dist.items()}
            if dist_at(pkey) != expected:
                return False
    return True
