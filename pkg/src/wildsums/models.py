"""Prebuilt models: a two-sided OTC trading market and information sharing.

``build_dgp`` constructs the four-state over-the-counter market in the style
of Duffie, Garleanu and Pedersen: investors carry a liquidity flag (l / h)
and an ownership flag (n / o).  Labels are the two flags concatenated, in
declaration order ``ln, lo, hn, ho``.  A meeting trades the asset exactly
when a high-liquidity non-owner meets a low-liquidity owner; every other
meeting changes nothing.  Autonomous liquidity moves are unary kernels:
``up`` lifts l to h, ``down`` drops h to l, and ``flip`` toggles (the
equal-rate special case).

``build_percolation`` constructs an information-sharing model: states are
information levels 0 .. L, a meeting leaves every participant with the sum
of the participants' levels (saturating at L, which truncates the naturally
unbounded level space), and an optional unary "regression" kernel resamples
an agent's level from a fixed distribution, independently of meetings.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import PreconditionError
from .ode import Generator
from .statespace import MAryKernel, Measure, StateSpace, UnaryKernel

DGP_LABELS = ("ln", "lo", "hn", "ho")


@dataclass(frozen=True, eq=False)
class DGPModel:
    """Four-state trading market with autonomous liquidity switches."""

    space: StateSpace
    trade_kernel: MAryKernel
    up_kernel: UnaryKernel
    down_kernel: UnaryKernel
    flip_kernel: UnaryKernel
    lam: float
    gamma_up: float
    gamma_down: float

    def generator(self) -> Generator:
        terms = []
        if self.gamma_up > 0:
            terms.append((self.gamma_up, self.up_kernel))
        if self.gamma_down > 0:
            terms.append((self.gamma_down, self.down_kernel))
        return Generator(self.trade_kernel, self.lam, tuple(terms))

    def mixed_unary(self) -> tuple[float, UnaryKernel]:
        """Total unary rate and the rate-weighted mixture of up and down moves."""
        gamma = self.gamma_up + self.gamma_down
        if gamma == 0:
            raise PreconditionError("model has no unary dynamics")
        mat = (self.gamma_up * self.up_kernel.matrix + self.gamma_down * self.down_kernel.matrix) / gamma
        return gamma, UnaryKernel(self.space, mat)

    def ownership_mass(self, mu: Measure) -> float:
        """Total weight of owner states; invariant under trading-only dynamics."""
        return mu.weight("lo") + mu.weight("ho")


def build_dgp(lam: float = 1.0, gamma_up: float = 0.0, gamma_down: float = 0.0) -> DGPModel:
    """Construct the trading market with the given meeting and liquidity rates."""
    if lam <= 0:
        raise PreconditionError("meeting rate must be positive")
    if gamma_up < 0 or gamma_down < 0:
        raise PreconditionError("liquidity rates must be >= 0")
    space = StateSpace(DGP_LABELS)
    trade = MAryKernel(
        space,
        2,
        {
            ("hn", "lo"): ((("ho", "ln"), 1.0),),
            ("lo", "hn"): ((("ln", "ho"), 1.0),),
        },
    )
    up = UnaryKernel.from_map(space, {"ln": "hn", "lo": "ho"})
    down = UnaryKernel.from_map(space, {"hn": "ln", "ho": "lo"})
    flip = UnaryKernel.from_map(space, {"ln": "hn", "lo": "ho", "hn": "ln", "ho": "lo"})
    return DGPModel(space, trade, up, down, flip, lam, gamma_up, gamma_down)


@dataclass(frozen=True, eq=False)
class PercolationModel:
    """Saturating information-sharing model on levels 0 .. levels."""

    space: StateSpace
    arity: int
    share_kernel: MAryKernel
    regression_kernel: UnaryKernel
    resample_law: Measure
    levels: int
    lam: float
    gamma: float

    def generator(self) -> Generator:
        terms = ((self.gamma, self.regression_kernel),) if self.gamma > 0 else ()
        return Generator(self.share_kernel, self.lam, terms)

    def mean_level(self, mu: Measure) -> float:
        return float(np.arange(self.levels + 1) @ mu.weights)


def build_percolation(
    m: int,
    levels: int,
    resample_law: Measure | Mapping[str, float] | Sequence[float],
    lam: float = 1.0,
    gamma: float = 0.0,
) -> PercolationModel:
    """Construct the information-sharing model.

    ``levels`` caps the state space at 0 .. levels with a saturating sum;
    ``resample_law`` is the level distribution used by the unary regression
    kernel (every row of its matrix).
    """
    if m < 2:
        raise PreconditionError("meetings need at least two participants")
    if levels < 1:
        raise PreconditionError("need at least levels >= 1")
    if lam <= 0:
        raise PreconditionError("meeting rate must be positive")
    if gamma < 0:
        raise PreconditionError("regression rate must be >= 0")
    space = StateSpace(tuple(str(i) for i in range(levels + 1)))
    if isinstance(resample_law, Measure):
        if resample_law.space.labels != space.labels:
            raise PreconditionError("resample law lives on a different state space")
        pi = resample_law
    elif isinstance(resample_law, Mapping):
        pi = Measure.from_dict(space, resample_law)
    else:
        pi = Measure(space, np.asarray(list(resample_law), dtype=float))

    entries = {}
    for combo in itertools.product(range(levels + 1), repeat=m):
        shared = min(levels, sum(combo))
        if all(c == shared for c in combo):
            continue  # identity outcome, stays implicit
        key = tuple(str(c) for c in combo)
        out = (str(shared),) * m
        entries[key] = ((out, 1.0),)
    share = MAryKernel(space, m, entries)
    regression = UnaryKernel(space, np.tile(pi.weights, (space.size, 1)))
    return PercolationModel(space, m, share, regression, pi, levels, lam, gamma)
