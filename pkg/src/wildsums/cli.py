"""Command-line front end.

Subcommands:

    model      emit a builtin model file (dgp | percolation)
    trees      counts, tree listings and arrangement listings
    birth      branching-count laws side by side as CSV
    solve      solve a model by series (wild), integrator (ode) or
               Monte Carlo (mc) and emit the law
    simulate   run the agent simulation, optionally dumping events as JSON
               lines and tagging agent histories
    validate   run the cross-method validation suite, emit a JSON report

Exit codes: 0 success, 1 malformed model file, 2 precondition violation,
3 resource cap exceeded.  Output is deterministic for a fixed command line
(including the seed).  The environment variable WILDSUMS_THREADS (default 1)
sets how many worker processes the Monte Carlo replication loop may use.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .errors import FormatError, PreconditionError, ResourceCapError
from .models import build_dgp, build_percolation
from .modelio import ModelSpec, dumps_model, load_model
from .ode import Generator, ode_solve, residual
from .purebirth import (
    branching_law_finite,
    branching_law_ode,
    branching_pmf,
    branching_pmf_vector,
    finite_population_rate,
    geometric_envelope,
    suggest_cutoff,
)
from .series import (
    SeriesParams,
    SeriesResult,
    wild_sum,
    wild_sum_unary,
    wild_sum_unary_pair,
)
from .simulator import replicate_runs, simulate, tagged_history, tree_shape_law
from .statespace import Measure, check_symmetry
from .trees import (
    count_arrangements,
    count_trees,
    enumerate_arrangements,
    enumerate_trees,
)

_BUILTIN_HELP = (
    "path to a model file, or a builtin: 'dgp' (lambda=1, gamma_u=0.2, "
    "gamma_d=0.05) or 'percolation' (m=2, levels=16, lambda=1, gamma=0.5, "
    "resample at level 1)"
)


def _resolve_model(name: str) -> ModelSpec:
    if name == "dgp":
        return ModelSpec.from_dgp(build_dgp(1.0, 0.2, 0.05))
    if name == "percolation":
        model = build_percolation(2, 16, {"1": 1.0}, lam=1.0, gamma=0.5)
        return ModelSpec.from_percolation(model)
    return load_model(name)


def _parse_initial(text: str, spec: ModelSpec) -> Measure:
    if text == "uniform":
        return Measure.uniform(spec.space)
    weights = {}
    for part in text.split(","):
        label, _, value = part.partition(":")
        if not _:
            raise PreconditionError(
                "initial law must look like 'label:weight,label:weight' or 'uniform'"
            )
        weights[label.strip()] = float(value)
    return Measure.from_dict(spec.space, weights)


def _emit(text: str, out: str | None):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _law_text(law: Measure, meta: dict, fmt: str) -> str:
    if fmt == "json":
        payload = dict(meta)
        payload["law"] = {s: float(w) for s, w in zip(law.space.labels, law.weights)}
        return json.dumps(payload, indent=2) + "\n"
    lines = [f"# {key}={value}" for key, value in meta.items()]
    lines.append("state,weight")
    lines.extend(f"{s},{float(w)!r}" for s, w in zip(law.space.labels, law.weights))
    return "\n".join(lines) + "\n"


def _series_solve(spec: ModelSpec, initial: Measure, params: SeriesParams) -> SeriesResult:
    terms = spec.unary_terms
    if not terms:
        return wild_sum(spec.kernel, initial, params)
    if len(terms) == 1:
        return wild_sum_unary(spec.kernel, terms[0][2], initial, params)
    up = next(k for name, _, k in terms if name in ("gamma", "gamma_u"))
    down = next(k for name, _, k in terms if name == "gamma_d")
    return wild_sum_unary_pair(spec.kernel, up, down, initial, params)


def _series_params(spec: ModelSpec, t: float, eps: float) -> SeriesParams:
    gamma_up = 0.0
    gamma_down = 0.0
    for name, rate, _ in spec.unary_terms:
        if name == "gamma_d":
            gamma_down = rate
        else:
            gamma_up = rate
    if len(spec.unary_terms) == 1:
        # single kernel runs through the gamma_up slot regardless of its name
        gamma_down = 0.0
        gamma_up = spec.unary_terms[0][1]
    return SeriesParams(
        lam=spec.lam, t=t, gamma_up=gamma_up, gamma_down=gamma_down, truncation_eps=eps
    )


# -----------------------------------------------------------------------------
# Subcommands
# -----------------------------------------------------------------------------
def cmd_model(args) -> int:
    if args.which == "dgp":
        spec = ModelSpec.from_dgp(
            build_dgp(args.lam, args.gamma_u, args.gamma_d)
        )
    else:
        pi = {}
        for part in args.pi.split(","):
            label, _, value = part.partition(":")
            pi[label.strip()] = float(value)
        spec = ModelSpec.from_percolation(
            build_percolation(args.m, args.levels, pi, args.lam, args.gamma)
        )
    _emit(dumps_model(spec), args.out)
    return 0


def cmd_trees(args) -> int:
    if args.which == "count":
        _emit(f"{count_trees(args.m, args.n)}\n", args.out)
    elif args.which == "list":
        lines = [
            f"{tree.text()} grafts={','.join(map(str, tree.grafts)) or '-'}"
            for tree in enumerate_trees(args.m, args.n, max_count=args.max_count)
        ]
        _emit("\n".join(lines) + "\n", args.out)
    else:  # arrangements
        if args.list:
            lines = [
                ",".join(map(str, arr.counts))
                for arr in enumerate_arrangements(args.boxes, args.p, max_count=args.max_count)
            ]
            _emit("\n".join(lines) + "\n", args.out)
        else:
            _emit(f"{count_arrangements(args.boxes, args.p)}\n", args.out)
    return 0


def cmd_birth(args) -> int:
    n_max = args.n_max if args.n_max is not None else suggest_cutoff(args.m, args.t)
    limit = branching_pmf_vector(args.m, args.t, n_max)
    finite = branching_law_finite(args.m, args.agents, args.t, n_max=n_max, step=args.step)
    lines = ["n,limit,finite_population,envelope"]
    for n in range(n_max + 1):
        fin = float(finite.probs[n]) if n < len(finite.probs) else 0.0
        lines.append(
            f"{n},{float(limit[n])!r},{fin!r},{geometric_envelope(args.m, args.t, n)!r}"
        )
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _mc_law(
    spec: ModelSpec, initial: Measure, agents: int, t: float, seed: int, reps: int
) -> tuple[Measure, float]:
    """Replication-averaged population law and a CI half-width for its entries."""
    gen = spec.generator()
    workers = int(os.environ.get("WILDSUMS_THREADS", "1") or "1")
    if workers > 1 and reps >= 2 * workers:
        counts = _parallel_counts(spec, initial, agents, t, seed, reps, workers)
    else:
        counts, _ = replicate_runs(gen, initial, agents, t, seed, reps)
    shares = counts / agents
    law = Measure(spec.space, shares.mean(axis=0) / shares.mean(axis=0).sum())
    if reps > 1:
        half = float(np.max(1.96 * shares.std(axis=0, ddof=1) / math.sqrt(reps)))
    else:
        half = float("nan")
    return law, half


def _chunk_worker(payload):
    text, initial_weights, agents, t, seed, start, count = payload
    from .modelio import loads_model

    spec = loads_model(text)
    initial = Measure(spec.space, np.array(initial_weights))
    counts, _ = replicate_runs(spec.generator(), initial, agents, t, seed + start, count)
    return counts


def _parallel_counts(spec, initial, agents, t, seed, reps, workers) -> np.ndarray:
    from concurrent.futures import ProcessPoolExecutor

    text = dumps_model(spec)
    bounds = np.linspace(0, reps, workers + 1, dtype=int)
    payloads = [
        (text, initial.weights.tolist(), agents, t, seed, int(lo), int(hi - lo))
        for lo, hi in zip(bounds[:-1], bounds[1:])
        if hi > lo
    ]
    try:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk_worker, payloads))
    except Exception:
        counts, _ = replicate_runs(spec.generator(), initial, agents, t, seed, reps)
        return counts
    return np.vstack(parts)


def cmd_solve(args) -> int:
    spec = _resolve_model(args.model)
    initial = _parse_initial(args.initial, spec) if args.initial else spec.initial
    meta = {"method": args.method, "model": args.model, "t": args.t}
    if args.method == "wild":
        result = _series_solve(spec, initial, _series_params(spec, args.t, args.eps))
        law = result.law
        meta["tail_bound"] = result.tail_bound
        meta["terms_used"] = f"{result.terms_used[0]},{result.terms_used[1]}"
    elif args.method == "ode":
        law = ode_solve(spec.generator(), initial, args.t, args.step)
        meta["step"] = args.step
    else:  # mc
        law, half = _mc_law(spec, initial, args.agents, args.t, args.seed, args.replications)
        meta.update(
            agents=args.agents, replications=args.replications, seed=args.seed,
            ci_half_width=half,
        )
    _emit(_law_text(law, meta, args.format), args.out)
    return 0


def cmd_simulate(args) -> int:
    spec = _resolve_model(args.model)
    initial = _parse_initial(args.initial, spec) if args.initial else spec.initial
    gen = spec.generator()
    if args.events_out and args.replications != 1:
        raise PreconditionError("--events-out requires --replications 1")

    meta = {
        "command": "simulate", "model": args.model, "agents": args.agents,
        "t": args.t, "replications": args.replications, "seed": args.seed,
    }
    need_log = bool(args.events_out or args.tag_histories)
    totals = np.zeros(spec.space.size, dtype=np.int64)
    histories = []
    for r in range(args.replications):
        pop, log = simulate(gen, initial, args.agents, args.t, args.seed + r, record_log=need_log)
        totals += np.bincount(pop.states, minlength=spec.space.size)
        if args.events_out:
            _emit(log.to_jsonl(), args.events_out)
        if args.tag_histories:
            histories.extend(tagged_history(log, a) for a in range(args.agents))
    if args.tag_histories:
        law = tree_shape_law(histories)
        meta["mean_cycle_count"] = sum(h.cycle_count for h in histories) / len(histories)
        meta["branch_marginal"] = json.dumps(
            {str(n): round(f, 6) for n, f in sorted(law.branch_marginal().items())}
        )
    final = Measure(spec.space, totals / totals.sum())
    _emit(_law_text(final, meta, args.format), args.out)
    return 0


def _check(name: str, observed, tolerance, ok: bool) -> dict:
    return {"name": name, "observed": observed, "tolerance": tolerance, "pass": bool(ok)}


def cmd_validate(args) -> int:
    spec = _resolve_model(args.model)
    initial = spec.initial
    checks = []

    sym = check_symmetry(spec.kernel)
    checks.append(_check("kernel_symmetry", sym, True, sym))

    mass = float(initial.weights.sum())
    checks.append(_check("initial_normalisation", mass, 1e-12, abs(mass - 1.0) <= 1e-12))

    worst = 0.0
    for m in (2, 3):
        for t in (0.5, 1.0):
            law = branching_law_ode(m, t, n_max=40, tail_tol=None)
            exact = branching_pmf_vector(m, t, 25)
            worst = max(worst, float(np.max(np.abs(exact - law.probs[:26]))))
    checks.append(_check("branching_law_closed_form", worst, 1e-8, worst <= 1e-8))

    count_ok = all(
        sum(1 for _ in enumerate_trees(m, n)) == count_trees(m, n)
        for m in (2, 3)
        for n in range(6 if m == 2 else 5)
    )
    checks.append(_check("tree_enumeration_counts", count_ok, True, count_ok))

    arr_ok = all(
        sum(1 for _ in enumerate_arrangements(b, p)) == count_arrangements(b, p)
        for b in (1, 3, 7)
        for p in range(5)
    )
    checks.append(_check("arrangement_enumeration_counts", arr_ok, True, arr_ok))

    rate_ok = True
    for m in (2, 3, 4):
        for big_n in (max(m, 10), 100, 1000):
            for n in range(0, (big_n - 1) // (m - 1), max(1, big_n // (8 * (m - 1)))):
                rate = finite_population_rate(m, big_n, n)
                if not rate <= (m - 1) * n + 1 <= m * (n + 1):
                    rate_ok = False
    checks.append(_check("meeting_rate_bounds", rate_ok, True, rate_ok))

    params = _series_params(spec, args.t, args.eps)
    series = _series_solve(spec, initial, params)
    reference = ode_solve(spec.generator(), initial, args.t, args.step)
    gap = series.law.l1(reference)
    checks.append(_check("series_vs_ode", gap, args.tol_series, gap <= args.tol_series))

    mc, _half = _mc_law(spec, initial, args.mc_agents, args.t, args.seed, args.mc_replications)
    mc_gap = mc.l1(series.law)
    checks.append(_check("series_vs_mc", mc_gap, args.tol_mc, mc_gap <= args.tol_mc))

    if args.t > 1e-3:

        def law_fn(at: float) -> Measure:
            p = SeriesParams(
                lam=params.lam, t=at, gamma_up=params.gamma_up,
                gamma_down=params.gamma_down, truncation_eps=1e-12,
            )
            return _series_solve(spec, initial, p).law

        res = residual(spec.generator(), law_fn, args.t, 1e-4)
        checks.append(_check("series_residual", res, 1e-5, res <= 1e-5))

    report = {"model": args.model, "checks": checks, "pass": all(c["pass"] for c in checks)}
    _emit(json.dumps(report, indent=2) + "\n", args.out)
    return 0 if report["pass"] else 4


# -----------------------------------------------------------------------------
# Parser
# -----------------------------------------------------------------------------
def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wildsums",
        description="Series, ODE and Monte Carlo solvers for finite-state interacting systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_model = sub.add_parser("model", help="emit a builtin model file")
    model_sub = p_model.add_subparsers(dest="which", required=True)
    p_dgp = model_sub.add_parser("dgp", help="two-sided OTC trading market")
    p_dgp.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p_dgp.add_argument("--gamma-u", dest="gamma_u", type=float, default=0.2)
    p_dgp.add_argument("--gamma-d", dest="gamma_d", type=float, default=0.05)
    p_perc = model_sub.add_parser("percolation", help="saturating information sharing")
    p_perc.add_argument("--m", type=int, default=2)
    p_perc.add_argument("--levels", type=int, default=16)
    p_perc.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p_perc.add_argument("--gamma", type=float, default=0.5)
    p_perc.add_argument("--pi", default="1:1.0", help="resample law, label:weight pairs")
    for p in (p_dgp, p_perc):
        p.add_argument("--out", default=None)
    p_model.set_defaults(func=cmd_model)

    p_trees = sub.add_parser("trees", help="tree and arrangement combinatorics")
    trees_sub = p_trees.add_subparsers(dest="which", required=True)
    p_count = trees_sub.add_parser("count")
    p_list = trees_sub.add_parser("list")
    for p in (p_count, p_list):
        p.add_argument("--m", type=int, required=True)
        p.add_argument("--n", type=int, required=True)
    p_arr = trees_sub.add_parser("arrangements")
    p_arr.add_argument("--boxes", type=int, required=True)
    p_arr.add_argument("--p", type=int, required=True)
    p_arr.add_argument("--list", action="store_true")
    for p in (p_count, p_list, p_arr):
        p.add_argument("--max-count", type=int, default=10_000_000)
        p.add_argument("--out", default=None)
    p_trees.set_defaults(func=cmd_trees)

    p_birth = sub.add_parser("birth", help="branching-count laws as CSV")
    p_birth.add_argument("--m", type=int, required=True)
    p_birth.add_argument("--t", type=float, required=True)
    p_birth.add_argument("--agents", type=int, default=1000)
    p_birth.add_argument("--n-max", type=int, default=None)
    p_birth.add_argument("--step", type=float, default=None)
    p_birth.add_argument("--out", default=None)
    p_birth.set_defaults(func=cmd_birth)

    p_solve = sub.add_parser("solve", help="solve a model and emit the law")
    p_solve.add_argument("--model", required=True, help=_BUILTIN_HELP)
    p_solve.add_argument("--method", choices=("wild", "ode", "mc"), required=True)
    p_solve.add_argument("--t", type=float, required=True)
    p_solve.add_argument("--eps", type=float, default=1e-8, help="series truncation budget")
    p_solve.add_argument("--step", type=float, default=1e-4, help="integrator step")
    p_solve.add_argument("--agents", type=int, default=10_000)
    p_solve.add_argument("--replications", type=int, default=100)
    p_solve.add_argument("--seed", type=int, default=0)
    p_solve.add_argument("--initial", default=None, help="'uniform' or label:weight pairs")
    p_solve.add_argument("--format", choices=("csv", "json"), default="csv")
    p_solve.add_argument("--out", default=None)
    p_solve.set_defaults(func=cmd_solve)

    p_sim = sub.add_parser("simulate", help="run the agent simulation")
    p_sim.add_argument("--model", required=True, help=_BUILTIN_HELP)
    p_sim.add_argument("--agents", type=int, required=True)
    p_sim.add_argument("--t", type=float, required=True)
    p_sim.add_argument("--replications", type=int, default=1)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--initial", default=None)
    p_sim.add_argument("--events-out", default=None, help="dump events as JSON lines")
    p_sim.add_argument("--tag-histories", action="store_true")
    p_sim.add_argument("--format", choices=("csv", "json"), default="csv")
    p_sim.add_argument("--out", default=None)
    p_sim.set_defaults(func=cmd_simulate)

    p_val = sub.add_parser("validate", help="cross-method validation report (JSON)")
    p_val.add_argument("--model", default="dgp", help=_BUILTIN_HELP)
    p_val.add_argument("--t", type=float, default=1.0)
    p_val.add_argument("--eps", type=float, default=1e-8)
    p_val.add_argument("--step", type=float, default=1e-4)
    p_val.add_argument("--tol-series", type=float, default=1e-6)
    p_val.add_argument("--tol-mc", type=float, default=0.05)
    p_val.add_argument("--mc-agents", type=int, default=2000)
    p_val.add_argument("--mc-replications", type=int, default=50)
    p_val.add_argument("--seed", type=int, default=0)
    p_val.add_argument("--out", default=None)
    p_val.set_defaults(func=cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except PreconditionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ResourceCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
