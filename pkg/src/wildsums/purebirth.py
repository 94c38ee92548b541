"""Pure-birth laws for the number of meetings in a component's history.

Looking backward from time t, the lineages of one component branch at unit
rate each, so the number n of meetings follows a pure-birth counting process
whose jump rate at count n is ``(m-1) n + 1`` (the current number of
lineages).  This module provides:

  * the closed-form law of that count,
  * an independent numerical solve of the forward (master) equations, which
    is the cross-check for the closed form,
  * the finite-population rates, where meeting partners must be fresh agents,
    and the law they generate,
  * the dominating geometric law obtained from the larger rates ``m (n + 1)``,
  * an upper bound on the mean number of redundant meetings (meetings whose
    inclusion in a history would close a cycle) in a population of N agents.

Time is measured in units of the per-component meeting rate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import PreconditionError

_AUTO_STEP = 1e-3


@dataclass(frozen=True, eq=False)
class BirthLaw:
    """Truncated law of the branching count at a fixed time.

    ``probs[n]`` is (an approximation of) the probability of n branchings;
    ``tail`` is the mass beyond the truncation index.
    """

    probs: np.ndarray
    t: float
    description: str

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float).copy()
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def n_max(self) -> int:
        return len(self.probs) - 1

    @property
    def tail(self) -> float:
        return max(0.0, 1.0 - float(self.probs.sum()))


def _validate_mt(m: int, t: float):
    if m < 2:
        raise PreconditionError("interaction arity must be >= 2")
    if t < 0:
        raise PreconditionError("time must be >= 0")


def branching_pmf(m: int, t: float, n: int) -> float:
    """Closed-form probability of n branchings by time t (limit process).

    The combinatorial prefactor is evaluated exactly before converting to
    float, so e.g. the m = 2 case reduces to exp(-t) (1 - exp(-t))^n with no
    round-off from the prefactor.
    """
    _validate_mt(m, t)
    if n < 0:
        raise PreconditionError("branching count must be >= 0")
    pref = Fraction(1)
    for k in range(1, n):
        pref *= (m - 1) * k + 1
    pref /= Fraction(m - 1) ** n * math.factorial(n)
    x = -math.expm1(-(m - 1) * t)
    return float(pref) * math.exp(-t) * x**n


def branching_pmf_vector(m: int, t: float, n_max: int) -> np.ndarray:
    """Closed-form probabilities for n = 0 .. n_max, via a stable ratio recursion."""
    _validate_mt(m, t)
    out = np.empty(n_max + 1)
    out[0] = math.exp(-t)
    x = -math.expm1(-(m - 1) * t)
    for n in range(1, n_max + 1):
        out[n] = out[n - 1] * (((m - 1) * (n - 1) + 1) / ((m - 1) * n)) * x
    return out


def _solve_pure_birth(rates: np.ndarray, t: float, step: float | None) -> np.ndarray:
    """Fixed-step 4th-order integration of the forward equations.

    The system is lower-bidiagonal (probability only flows upward in n), so
    truncation at n_max never perturbs components 0 .. n_max.
    """
    c = np.asarray(rates, dtype=float)
    if step is None:
        # stability needs step < 2.78 / max rate; stay well inside
        step = min(_AUTO_STEP, 0.5 / max(float(c.max()), 1.0))
    if step <= 0:
        raise PreconditionError("step must be positive")
    p = np.zeros(len(c))
    p[0] = 1.0
    if t == 0:
        return p

    def deriv(q: np.ndarray) -> np.ndarray:
        d = -c * q
        d[1:] += c[:-1] * q[:-1]
        return d

    steps, remainder = divmod(t, step)
    hs = [step] * int(steps)
    if remainder > 1e-15 * max(t, 1.0):
        hs.append(remainder)
    for h in hs:
        k1 = deriv(p)
        k2 = deriv(p + 0.5 * h * k1)
        k3 = deriv(p + 0.5 * h * k2)
        k4 = deriv(p + h * k3)
        p = p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return p


def branching_law_ode(
    m: int,
    t: float,
    n_max: int,
    step: float | None = None,
    tail_tol: float | None = 1e-12,
) -> BirthLaw:
    """Numerically integrate the forward equations of the limit birth process.

    Independent of :func:`branching_pmf`; agreement between the two is the
    numerical proof of the closed form.  ``tail_tol`` guards against
    truncating while real mass remains above ``n_max``; pass None to accept a
    partial law (the retained components are unaffected by truncation).
    """
    _validate_mt(m, t)
    if n_max < 0:
        raise PreconditionError("n_max must be >= 0")
    rates = (m - 1) * np.arange(n_max + 1, dtype=float) + 1.0
    probs = _solve_pure_birth(rates, t, step)
    law = BirthLaw(probs, t, f"limit process, m={m}")
    if tail_tol is not None and law.tail > tail_tol:
        raise PreconditionError(
            f"truncated tail {law.tail:.3e} exceeds {tail_tol:.1e}; raise n_max "
            f"(try suggest_cutoff({m}, {t}))"
        )
    return law


def finite_population_rate(m: int, N: int, n: int) -> float:
    """Meeting rate for the (n+1)-th branching among N agents.

    After n branchings a history involves (m-1) n + 1 lineages; the next
    branching requires one of them to meet m-1 agents outside the history.
    The value increases with N toward the limit rate (m-1) n + 1.
    """
    if m < 2:
        raise PreconditionError("interaction arity must be >= 2")
    if N < m:
        raise PreconditionError("population must have at least m agents")
    lineages = (m - 1) * n + 1
    if n < 0 or lineages > N:
        raise PreconditionError(
            f"population of {N} cannot support {n} branchings (needs {lineages} agents)"
        )
    value = Fraction(lineages) * math.comb(N - lineages, m - 1) / math.comb(N - 1, m - 1)
    return float(value)


def _finite_rates(m: int, N: int, n_max: int) -> np.ndarray:
    rates = np.zeros(n_max + 1)
    for n in range(n_max + 1):
        lineages = (m - 1) * n + 1
        if lineages <= N:
            rates[n] = finite_population_rate(m, N, n)
    return rates


def branching_law_finite(
    m: int,
    N: int,
    t: float,
    n_max: int | None = None,
    step: float | None = None,
) -> BirthLaw:
    """Law of the branching count in a population of N agents.

    Same integrator as :func:`branching_law_ode` but with the finite-N rates;
    the count cannot exceed the population, so the top state absorbs and the
    law is complete whenever ``n_max`` covers the reachable range.
    """
    _validate_mt(m, t)
    if N < m:
        raise PreconditionError("population must have at least m agents")
    reachable = (N - 1) // (m - 1)
    if n_max is None:
        n_max = min(suggest_cutoff(m, t), reachable)
    probs = _solve_pure_birth(_finite_rates(m, N, n_max), t, step)
    return BirthLaw(probs, t, f"finite population, m={m}, N={N}")


def geometric_envelope(m: int, t: float, n: int) -> float:
    """Geometric law from the dominating rates m (n + 1).

    Stochastically dominates the branching count at every time, which makes
    its tail a valid truncation bound for the limit law.
    """
    _validate_mt(m, t)
    if n < 0:
        raise PreconditionError("branching count must be >= 0")
    return math.exp(-m * t) * (-math.expm1(-m * t)) ** n


def suggest_cutoff(m: int, t: float, tol: float = 1e-12) -> int:
    """Smallest n with P(more than n branchings by t) provably below tol.

    Uses a Chernoff bound on the sum of the exponential waiting times of the
    limit process (tail(n) = P(T_0 + ... + T_n <= t) with T_k of rate
    (m-1) k + 1), so it needs no closed-form law.  The returned index is safe
    but modestly conservative.
    """
    _validate_mt(m, t)
    if not 0 < tol < 1:
        raise PreconditionError("tol must be in (0, 1)")
    if t == 0:
        return 0

    def log_tail_bound(n: int) -> float:
        rates = (m - 1) * np.arange(n + 1, dtype=float) + 1.0
        # minimise theta*t - sum log(1 + theta/c) over theta >= 0 (convex)
        lo, hi = 0.0, 1.0
        while t - float(np.sum(1.0 / (rates + hi))) < 0:
            hi *= 2.0
            if hi > 1e18:
                break
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if t - float(np.sum(1.0 / (rates + mid))) < 0:
                lo = mid
            else:
                hi = mid
        theta = 0.5 * (lo + hi)
        return theta * t - float(np.sum(np.log1p(theta / rates)))

    n = 8
    while log_tail_bound(n) > math.log(tol):
        n *= 2
        if n > 10_000_000:
            raise PreconditionError("cutoff search exceeded 1e7 branchings")
    # tighten by bisection between n/2 and n
    lo, hi = n // 2, n
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if log_tail_bound(mid) > math.log(tol):
            lo = mid
        else:
            hi = mid
    return hi


def redundancy_bound(m: int, N: int, t: float) -> float:
    """Upper bound on the mean number of redundant meetings by time t.

    A meeting is redundant when all its participants were already connected
    to the tagged component's history; with n branchings there are
    (m-1) n + 1 lineages and the chance that a meeting stays inside them is
    governed by C((m-1) n + 1, 2) / C(N, m) per candidate meeting, of which
    there are N/m per unit time.  Summing against the finite-N branching law
    gives a bound that decays like 1/N.
    """
    _validate_mt(m, t)
    if N < m:
        raise PreconditionError("population must have at least m agents")
    law = branching_law_finite(m, N, t)
    total = 0.0
    denom = math.comb(N, m)
    for n, prob in enumerate(law.probs):
        lineages = (m - 1) * n + 1
        total += (N / m) * (math.comb(lineages, 2) / denom) * float(prob)
    return total
