"""Textual model files: parsing, validation and export.

A model file is line-oriented; ``#`` starts a comment and blank lines are
ignored.  Directives:

    states <label> <label> ...          state labels, in order (required, once)
    arity <m>                           meeting size (required, once)
    lambda <rate>                       meeting rate (default 1.0)
    gamma <rate>                        single unary rate, with `unary` rows
    gamma_u <rate> / gamma_d <rate>     split unary rates, with `unary_up` /
                                        `unary_down` rows
    initial <w> <w> ...                 initial law (default uniform)
    kernel <in...> -> <out...> <prob>   one meeting outcome; repeat lines to
                                        build a distribution per input tuple;
                                        inputs never listed keep their states
    unary <from> <p> <p> ...            one row of the unary transition matrix
    unary_up / unary_down <from> <p>... rows for the split kernels

Every malformed or invariant-violating row raises :class:`FormatError` with
its line number.  Export writes a canonical ordering (kernel rows sorted by
input tuple, unary rows in state order) with exact float round-trip, so
load(dump(model)) reproduces the model entry for entry.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import FormatError, PreconditionError
from .models import DGPModel, PercolationModel
from .ode import Generator
from .statespace import MAryKernel, Measure, StateSpace, UnaryKernel, PROB_TOL

_UNARY_DIRECTIVES = {"unary": "gamma", "unary_up": "gamma_u", "unary_down": "gamma_d"}
_RATE_DIRECTIVES = {"gamma", "gamma_u", "gamma_d"}


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """A fully assembled model: dynamics plus initial law."""

    space: StateSpace
    arity: int
    kernel: MAryKernel
    lam: float
    unary_terms: tuple[tuple[str, float, UnaryKernel], ...]
    initial: Measure

    def generator(self) -> Generator:
        terms = tuple((rate, kern) for _, rate, kern in self.unary_terms if rate > 0)
        return Generator(self.kernel, self.lam, terms)

    @property
    def gamma_up(self) -> float:
        for name, rate, _ in self.unary_terms:
            if name in ("gamma", "gamma_u"):
                return rate
        return 0.0

    @property
    def gamma_down(self) -> float:
        for name, rate, _ in self.unary_terms:
            if name == "gamma_d":
                return rate
        return 0.0

    @classmethod
    def from_dgp(cls, model: DGPModel, initial: Measure | None = None) -> "ModelSpec":
        terms = []
        if model.gamma_up > 0:
            terms.append(("gamma_u", model.gamma_up, model.up_kernel))
        if model.gamma_down > 0:
            terms.append(("gamma_d", model.gamma_down, model.down_kernel))
        return cls(
            model.space,
            2,
            model.trade_kernel,
            model.lam,
            tuple(terms),
            initial or Measure.uniform(model.space),
        )

    @classmethod
    def from_percolation(
        cls, model: PercolationModel, initial: Measure | None = None
    ) -> "ModelSpec":
        terms = []
        if model.gamma > 0:
            terms.append(("gamma", model.gamma, model.regression_kernel))
        return cls(
            model.space,
            model.arity,
            model.share_kernel,
            model.lam,
            tuple(terms),
            initial or Measure.point(model.space, "1" if model.levels >= 1 else "0"),
        )


def _parse_float(token: str, line: int, what: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise FormatError(f"{what} {token!r} is not a number", line) from None


def loads_model(text: str) -> ModelSpec:
    """Parse a model file from a string."""
    space: StateSpace | None = None
    arity: int | None = None
    lam: float | None = None
    rates: dict[str, tuple[float, int]] = {}
    initial_row: tuple[np.ndarray, int] | None = None
    # input tuple -> (first line, list of (output tuple, prob))
    kernel_rows: dict[tuple[str, ...], tuple[int, list]] = {}
    # directive -> from-state -> (row, line)
    unary_rows: dict[str, dict[str, tuple[np.ndarray, int]]] = {}

    def need_space(line: int) -> StateSpace:
        if space is None:
            raise FormatError("states must be declared before this row", line)
        return space

    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        tokens = body.split()
        directive, args = tokens[0], tokens[1:]

        if directive == "states":
            if space is not None:
                raise FormatError("states declared twice", lineno)
            if not args:
                raise FormatError("states needs at least one label", lineno)
            try:
                space = StateSpace(tuple(args))
            except PreconditionError as exc:
                raise FormatError(str(exc), lineno) from None

        elif directive == "arity":
            if arity is not None:
                raise FormatError("arity declared twice", lineno)
            if len(args) != 1 or not args[0].isdigit() or int(args[0]) < 2:
                raise FormatError("arity needs one integer >= 2", lineno)
            arity = int(args[0])

        elif directive == "lambda":
            if lam is not None:
                raise FormatError("lambda declared twice", lineno)
            if len(args) != 1:
                raise FormatError("lambda needs exactly one rate", lineno)
            lam = _parse_float(args[0], lineno, "rate")
            if lam <= 0:
                raise FormatError("lambda must be positive", lineno)

        elif directive in _RATE_DIRECTIVES:
            if directive in rates:
                raise FormatError(f"{directive} declared twice", lineno)
            if len(args) != 1:
                raise FormatError(f"{directive} needs exactly one rate", lineno)
            value = _parse_float(args[0], lineno, "rate")
            if value < 0:
                raise FormatError(f"{directive} must be >= 0", lineno)
            rates[directive] = (value, lineno)

        elif directive == "initial":
            if initial_row is not None:
                raise FormatError("initial declared twice", lineno)
            sp = need_space(lineno)
            if len(args) != sp.size:
                raise FormatError(
                    f"initial needs {sp.size} weights, got {len(args)}", lineno
                )
            weights = np.array([_parse_float(a, lineno, "weight") for a in args])
            initial_row = (weights, lineno)

        elif directive == "kernel":
            sp = need_space(lineno)
            if arity is None:
                raise FormatError("arity must be declared before kernel rows", lineno)
            if len(args) != 2 * arity + 2 or args[arity] != "->":
                raise FormatError(
                    f"kernel row must read: kernel <{arity} inputs> -> <{arity} outputs> <prob>",
                    lineno,
                )
            key = tuple(args[:arity])
            out = tuple(args[arity + 1 : 2 * arity + 1])
            for label in key + out:
                if label not in sp:
                    raise FormatError(f"unknown state label {label!r}", lineno)
            prob = _parse_float(args[-1], lineno, "probability")
            if not 0 <= prob <= 1 + PROB_TOL:
                raise FormatError(f"probability {prob} outside [0, 1]", lineno)
            first_line, rows = kernel_rows.setdefault(key, (lineno, []))
            rows.append((out, prob))

        elif directive in _UNARY_DIRECTIVES:
            sp = need_space(lineno)
            if len(args) != 1 + sp.size:
                raise FormatError(
                    f"{directive} row needs a source state and {sp.size} probabilities",
                    lineno,
                )
            src = args[0]
            if src not in sp:
                raise FormatError(f"unknown state label {src!r}", lineno)
            row = np.array([_parse_float(a, lineno, "probability") for a in args[1:]])
            if row.min() < 0:
                raise FormatError("transition probabilities must be >= 0", lineno)
            if abs(float(row.sum()) - 1.0) > PROB_TOL:
                raise FormatError(
                    f"row for {src!r} sums to {float(row.sum())!r}, not 1", lineno
                )
            per = unary_rows.setdefault(directive, {})
            if src in per:
                raise FormatError(f"duplicate {directive} row for {src!r}", lineno)
            per[src] = (row, lineno)

        else:
            raise FormatError(f"unknown directive {directive!r}", lineno)

    # -- assemble ---------------------------------------------------------------
    if space is None:
        raise FormatError("model file declares no states")
    if arity is None:
        raise FormatError("model file declares no arity")
    if "gamma" in rates and ("gamma_u" in rates or "gamma_d" in rates):
        raise FormatError("gamma cannot be combined with gamma_u/gamma_d")

    entries = {}
    for key, (first_line, rows) in kernel_rows.items():
        total = sum(p for _, p in rows)
        if abs(total - 1.0) > PROB_TOL:
            raise FormatError(
                f"outcome probabilities for input {' '.join(key)} sum to {total!r}, not 1",
                first_line,
            )
        entries[key] = tuple(rows)
    try:
        kernel = MAryKernel(space, arity, entries)
    except PreconditionError as exc:
        raise FormatError(str(exc)) from None

    unary_terms = []
    for directive, rate_name in _UNARY_DIRECTIVES.items():
        has_rows = directive in unary_rows
        has_rate = rate_name in rates
        if has_rows != has_rate:
            raise FormatError(
                f"{rate_name} and {directive} rows must be declared together"
            )
        if not has_rows:
            continue
        per = unary_rows[directive]
        missing = [s for s in space.labels if s not in per]
        if missing:
            raise FormatError(f"{directive} rows missing for states {missing}")
        matrix = np.vstack([per[s][0] for s in space.labels])
        unary_terms.append((rate_name, rates[rate_name][0], UnaryKernel(space, matrix)))

    if initial_row is None:
        initial = Measure.uniform(space)
    else:
        try:
            initial = Measure(space, initial_row[0])
        except PreconditionError as exc:
            raise FormatError(str(exc), initial_row[1]) from None

    return ModelSpec(space, arity, kernel, 1.0 if lam is None else lam, tuple(unary_terms), initial)


def load_model(path: str | Path) -> ModelSpec:
    return loads_model(Path(path).read_text())


def dumps_model(spec: ModelSpec) -> str:
    """Canonical text form; loads_model(dumps_model(spec)) is entry-identical."""
    lines = [
        "states " + " ".join(spec.space.labels),
        f"arity {spec.arity}",
        f"lambda {spec.lam!r}",
    ]
    for name, rate, _ in spec.unary_terms:
        lines.append(f"{name} {rate!r}")
    lines.append("initial " + " ".join(repr(float(w)) for w in spec.initial.weights))
    for key in sorted(spec.kernel.entries):
        for out, prob in spec.kernel.entries[key]:
            lines.append(f"kernel {' '.join(key)} -> {' '.join(out)} {prob!r}")
    directive_of = {v: k for k, v in _UNARY_DIRECTIVES.items()}
    for name, _, kern in spec.unary_terms:
        directive = directive_of[name]
        for src, row in zip(spec.space.labels, kern.matrix):
            lines.append(f"{directive} {src} " + " ".join(repr(float(p)) for p in row))
    return "\n".join(lines) + "\n"


def save_model(spec: ModelSpec, path: str | Path):
    Path(path).write_text(dumps_model(spec))
