"""Branching-count laws: closed form, forward equations, finite populations.

Core claims:
    - the closed form reduces to exp(-t)(1-exp(-t))^n for pairwise meetings
    - integrating the forward equations reproduces the closed form to 1e-8
    - truncation of the forward system never perturbs retained components
    - finite-population meeting rates: exact values, monotone limit, bounds
    - the finite-population law approaches the limit law as N grows
    - the dominating geometric law really dominates (heavier tail)
    - the redundant-meeting bound vanishes at t=0 and decays like 1/N
"""
from __future__ import annotations

import math

import numpy as np
import pytest

from wildsums import (
    PreconditionError,
    branching_law_finite,
    branching_law_ode,
    branching_pmf,
    branching_pmf_vector,
    finite_population_rate,
    geometric_envelope,
    redundancy_bound,
    suggest_cutoff,
)


def test_pairwise_closed_form_is_geometric():
    for t in (0.25, 1.0, 2.0):
        for n in range(12):
            expected = math.exp(-t) * (-math.expm1(-t)) ** n
            assert branching_pmf(2, t, n) == expected  # exact prefactor


def test_closed_form_values():
    assert branching_pmf(2, 0.0, 0) == 1.0
    assert branching_pmf(3, 0.0, 0) == 1.0
    assert branching_pmf(4, 0.7, 0) == pytest.approx(math.exp(-0.7), abs=1e-15)
    # three meetings of arity 3 at t=1: prefactor 3 / (2^2 2!)
    expected = (3 / 8) * math.exp(-1.0) * (-math.expm1(-2.0)) ** 2
    assert branching_pmf(3, 1.0, 2) == pytest.approx(expected, rel=1e-14)


def test_vector_matches_scalar_form():
    for m in (2, 3, 4):
        vec = branching_pmf_vector(m, 0.8, 20)
        for n in (0, 1, 5, 20):
            assert vec[n] == pytest.approx(branching_pmf(m, 0.8, n), rel=1e-12)


def test_closed_form_normalisation():
    for m in (2, 3, 4):
        for t in (0.25, 1.0, 2.0):
            n = 0
            total = 0.0
            while True:
                p = branching_pmf(m, t, n)
                total += p
                if p < 1e-14 and n > 5:
                    break
                n += 1
            assert abs(total - 1.0) <= 1e-10


def test_forward_equations_match_closed_form():
    for m in (2, 3):
        for t in (0.7, 1.0):
            law = branching_law_ode(m, t, n_max=40, step=2e-4, tail_tol=None)
            exact = branching_pmf_vector(m, t, 30)
            assert np.max(np.abs(exact - law.probs[:31])) <= 1e-8


def test_forward_equations_at_time_zero():
    law = branching_law_ode(3, 0.0, n_max=5, tail_tol=None)
    assert law.probs[0] == 1.0
    assert np.all(law.probs[1:] == 0.0)


def test_truncation_never_perturbs_retained_components():
    a = branching_law_ode(3, 1.0, n_max=40, step=1e-3, tail_tol=None)
    b = branching_law_ode(3, 1.0, n_max=80, step=1e-3, tail_tol=None)
    assert np.max(np.abs(a.probs[:31] - b.probs[:31])) <= 1e-14


def test_tail_guard_raises_when_truncated_too_hard():
    with pytest.raises(PreconditionError):
        branching_law_ode(2, 2.0, n_max=5)


def test_suggested_cutoff_really_bounds_the_tail():
    for m, t in ((2, 1.0), (3, 0.5), (4, 0.25)):
        cutoff = suggest_cutoff(m, t, tol=1e-10)
        tail = 1.0 - branching_pmf_vector(m, t, cutoff).sum()
        assert tail <= 1e-10


# -----------------------------------------------------------------------------
# Finite populations
# -----------------------------------------------------------------------------
def test_first_meeting_rate_is_one():
    for m, n_agents in ((2, 5), (3, 10), (4, 17)):
        assert finite_population_rate(m, n_agents, 0) == 1.0


def test_pairwise_rate_value():
    # 2 lineages, 1 fresh partner from 3 candidates
    assert finite_population_rate(2, 4, 1) == pytest.approx(2 / 3, abs=1e-15)


def test_rate_bounds_and_monotone_limit():
    for m in (2, 3, 4):
        for n in (0, 1, 3, 7):
            previous = -1.0
            for n_agents in (50, 200, 1000, 10_000):
                if (m - 1) * n + 1 > n_agents:
                    continue
                rate = finite_population_rate(m, n_agents, n)
                limit = (m - 1) * n + 1
                assert rate <= limit <= m * (n + 1)
                assert rate > previous
                previous = rate
            assert limit - rate < limit * 0.001 * (m - 1) * (n + 1)


def test_rate_rejects_overfull_histories():
    with pytest.raises(PreconditionError):
        finite_population_rate(2, 4, 4)
    with pytest.raises(PreconditionError):
        finite_population_rate(3, 2, 0)


def test_finite_law_at_time_zero_and_smallest_population():
    law = branching_law_finite(2, 50, 0.0)
    assert law.probs[0] == 1.0
    # N = m: exactly one meeting can ever happen, at rate 1
    law = branching_law_finite(2, 2, 0.9, n_max=1, step=1e-4)
    assert law.probs[0] == pytest.approx(math.exp(-0.9), abs=1e-9)
    assert law.probs[1] == pytest.approx(-math.expm1(-0.9), abs=1e-9)
    assert law.tail <= 1e-12


def test_finite_law_approaches_limit_law():
    exact = branching_pmf_vector(2, 1.0, 15)
    gaps = []
    for n_agents in (50, 200, 1000, 100_000):
        law = branching_law_finite(2, n_agents, 1.0, n_max=60, step=5e-4)
        gaps.append(np.max(np.abs(law.probs[:16] - exact)))
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] <= 1e-3


# -----------------------------------------------------------------------------
# Dominating law and redundancy
# -----------------------------------------------------------------------------
def test_geometric_envelope_values():
    assert geometric_envelope(2, 0.0, 0) == 1.0
    t = math.log(2)
    for n in range(6):
        assert geometric_envelope(2, t, n) == pytest.approx((1 / 4) * (3 / 4) ** n, rel=1e-14)
    total = sum(geometric_envelope(3, 0.8, n) for n in range(2000))
    assert abs(total - 1.0) <= 1e-10


def test_geometric_envelope_dominates_the_branching_count():
    for m in (2, 3):
        for t in (0.25, 0.5, 1.0, 2.0):
            exact = branching_pmf_vector(m, t, 50)
            envelope = np.array([geometric_envelope(m, t, n) for n in range(51)])
            # heavier tail = smaller partial sums at every truncation point
            assert np.all(np.cumsum(envelope) <= np.cumsum(exact) + 1e-12)


def test_redundancy_bound_zero_at_time_zero():
    assert redundancy_bound(2, 100, 0.0) == 0.0


def test_redundancy_bound_decays_like_one_over_n():
    values = [redundancy_bound(2, n_agents, 1.0) for n_agents in (100, 200, 400, 800)]
    assert all(a > b for a, b in zip(values, values[1:]))
    for a, b in zip(values, values[1:]):
        assert 0.35 <= b / a <= 0.65
