"""Direct fixed-step integration of the macroscopic evolution equations.

Serves as the independent oracle for the series solvers: a classical
4th-order scheme applied to

    d mu / dt = lam * (B(mu, ..., mu) - mu) + sum_i gamma_i * (mu P_i - mu)

on the probability simplex.  The vector field conserves total mass exactly,
so the integrator only re-projects (clip tiny negatives, renormalise) when
accumulated round-off exceeds 1e-12.  Fixed step keeps runs reproducible and
the error model plain: halving the step divides the error by roughly 16.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import PreconditionError
from .statespace import MAryKernel, Measure, UnaryKernel, _interact_arrays

_PROJECT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Generator:
    """The dynamics: one meeting kernel plus any number of rated unary kernels."""

    kernel: MAryKernel
    lam: float
    unary_terms: tuple[tuple[float, UnaryKernel], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "unary_terms", tuple(self.unary_terms))
        if self.lam < 0:
            raise PreconditionError("meeting rate must be >= 0")
        if any(rate < 0 for rate, _ in self.unary_terms):
            raise PreconditionError("unary rates must be >= 0")
        if self.lam == 0 and not any(rate > 0 for rate, _ in self.unary_terms):
            raise PreconditionError("at least one rate must be positive")
        for _, kern in self.unary_terms:
            if kern.space.labels != self.kernel.space.labels:
                raise PreconditionError("unary kernel lives on a different state space")

    @property
    def space(self):
        return self.kernel.space

    def field(self) -> Callable[[np.ndarray], np.ndarray]:
        """The right-hand side as a function of a raw weight vector."""
        tensor = self.kernel.marginal_tensor()
        m = self.kernel.arity
        lam = self.lam
        terms = [(rate, kern.matrix) for rate, kern in self.unary_terms if rate > 0]

        def rhs(w: np.ndarray) -> np.ndarray:
            out = lam * (_interact_arrays(tensor, [w] * m) - w)
            for rate, mat in terms:
                out += rate * (w @ mat - w)
            return out

        return rhs


def ode_solve(gen: Generator, mu0: Measure, t: float, step: float) -> Measure:
    """Integrate the evolution equation from ``mu0`` over ``[0, t]``."""
    if mu0.space.labels != gen.space.labels:
        raise PreconditionError("initial measure lives on a different state space")
    if t < 0:
        raise PreconditionError("time horizon must be >= 0")
    if t == 0:
        return mu0
    if step <= 0:
        raise PreconditionError("step must be positive")
    if step > t:
        raise PreconditionError("step must not exceed the time horizon")
    rhs = gen.field()
    w = mu0.weights.copy()
    steps, remainder = divmod(t, step)
    sizes = [step] * int(steps)
    if remainder > 1e-15 * t:
        sizes.append(remainder)
    for h in sizes:
        k1 = rhs(w)
        k2 = rhs(w + 0.5 * h * k1)
        k3 = rhs(w + 0.5 * h * k2)
        k4 = rhs(w + h * k3)
        w = w + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        drift = abs(1.0 - float(w.sum()))
        if drift > _PROJECT_TOL or float(w.min()) < -_PROJECT_TOL:
            np.clip(w, 0.0, None, out=w)
            w /= w.sum()
    return Measure(gen.space, w)


def residual(
    gen: Generator,
    law_fn: Callable[[float], Measure],
    t: float,
    dt: float,
) -> float:
    """L1 defect of a candidate solution path against the evolution equation.

    Central difference of ``law_fn`` at ``t`` minus the generator applied to
    ``law_fn(t)``; a genuine solution gives a value of order dt^2 plus the
    evaluation noise of ``law_fn`` divided by dt.
    """
    if dt <= 0:
        raise PreconditionError("dt must be positive")
    if t - dt < 0:
        raise PreconditionError("need t - dt >= 0 for the central difference")
    ahead = law_fn(t + dt).weights
    behind = law_fn(t - dt).weights
    derivative = (ahead - behind) / (2.0 * dt)
    rhs = gen.field()(law_fn(t).weights)
    return float(np.abs(derivative - rhs).sum())
