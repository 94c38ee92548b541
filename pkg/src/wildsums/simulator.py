"""Event-driven N-agent random-matching simulation.

The microscopic counterpart of the series and ODE solvers: meetings of m
uniformly chosen agents arrive at total rate ``lam * N / m`` (so each agent
meets at rate ``lam``), each unary kernel fires at total rate ``rate * N``
with a uniformly chosen agent, and every event samples its outcome from the
corresponding kernel.  Exponential clocks, so the simulation is exact for
the finite-state continuous-time dynamics, and fully deterministic given the
seed.

``tagged_history`` extracts one agent's backward interaction history from an
event log: follow every lineage backward in time; when the next meeting on a
lineage would connect two agents that the history has already joined, the
meeting is dropped (it would close a cycle) and counted in ``cycle_count``;
otherwise it becomes an internal node and its participants become new
lineages.  The included meetings, in decreasing time order, give exactly the
graft sequence of an :class:`OrderedTree`.
"""
from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import PreconditionError
from .ode import Generator
from .statespace import Measure, StateSpace
from .trees import OrderedTree


class Event(NamedTuple):
    """One logged transition: a meeting of m agents or a unary move."""

    time: float
    kind: str  # "meeting" | "unary"
    agents: tuple[int, ...]
    pre: tuple[str, ...]
    post: tuple[str, ...]


@dataclass(frozen=True, eq=False)
class Population:
    """Final agent states of one run; ``states`` holds state-space indices."""

    space: StateSpace
    states: np.ndarray
    seed: int
    clock: float

    @property
    def n_agents(self) -> int:
        return len(self.states)

    def state_labels(self) -> tuple[str, ...]:
        return tuple(self.space.labels[i] for i in self.states)


@dataclass(frozen=True, eq=False)
class EventLog:
    events: tuple[Event, ...]
    arity: int
    n_agents: int
    horizon: float

    def __len__(self) -> int:
        return len(self.events)

    @cached_property
    def _meetings_by_agent(self) -> dict[int, tuple[list[float], list[tuple[int, ...]]]]:
        """Per agent: meeting times (increasing) and participant tuples."""
        index: dict[int, tuple[list[float], list[tuple[int, ...]]]] = {}
        for ev in self.events:
            if ev.kind != "meeting":
                continue
            for agent in ev.agents:
                times, meets = index.setdefault(agent, ([], []))
                times.append(ev.time)
                meets.append(ev.agents)
        return index

    def to_jsonl(self) -> str:
        """One JSON object per event, in time order."""
        import json

        lines = [
            json.dumps(
                {
                    "time": ev.time,
                    "kind": ev.kind,
                    "agents": list(ev.agents),
                    "pre": list(ev.pre),
                    "post": list(ev.post),
                }
            )
            for ev in self.events
        ]
        return "\n".join(lines) + ("\n" if lines else "")


@dataclass(frozen=True, eq=False)
class HistoryGraph:
    """Backward interaction history of one agent, reduced to a tree."""

    agent: int
    horizon: float
    tree: OrderedTree
    cycle_count: int
    meeting_times: tuple[float, ...]  # decreasing; one per internal node

    @property
    def branching_count(self) -> int:
        return self.tree.internal_count


def _draw_times(rng: np.random.Generator, total_rate: float, t: float) -> np.ndarray:
    chunks = []
    current = 0.0
    expected = total_rate * t
    size = max(64, int(expected + 6.0 * math.sqrt(expected + 1.0) + 16))
    while True:
        gaps = rng.exponential(1.0 / total_rate, size=size)
        times = current + np.cumsum(gaps)
        if times[-1] >= t:
            chunks.append(times[times < t])
            break
        chunks.append(times)
        current = float(times[-1])
        size = max(64, size // 4)
    return np.concatenate(chunks) if len(chunks) > 1 else chunks[0]


def _draw_groups(rng: np.random.Generator, n_agents: int, m: int, count: int) -> list:
    """Uniform ordered m-tuples of distinct agents."""
    if count == 0:
        return []
    if m == 2:
        first = rng.integers(0, n_agents, size=count)
        second = rng.integers(0, n_agents - 1, size=count)
        second = second + (second >= first)
        return np.column_stack([first, second]).tolist()
    rows = rng.integers(0, n_agents, size=(count, m))
    groups = rows.tolist()
    for i, row in enumerate(groups):
        while len(set(row)) < m:
            row = rng.integers(0, n_agents, size=m).tolist()
        groups[i] = row
    return groups


def simulate(
    gen: Generator,
    init: Measure | Sequence[str],
    n_agents: int,
    t: float,
    seed: int,
    record_log: bool = True,
) -> tuple[Population, EventLog | None]:
    """Run one exact event-driven simulation over [0, t].

    ``init`` is either a law to sample agents from independently, or an
    explicit sequence of ``n_agents`` state labels.  Identical arguments give
    an identical event log.
    """
    space = gen.space
    m = gen.kernel.arity
    if n_agents < m:
        raise PreconditionError(f"need at least {m} agents, got {n_agents}")
    if t < 0:
        raise PreconditionError("time horizon must be >= 0")
    rng = np.random.default_rng(seed)

    if isinstance(init, Measure):
        if init.space.labels != space.labels:
            raise PreconditionError("initial law lives on a different state space")
        states = rng.choice(space.size, size=n_agents, p=init.weights).tolist()
    else:
        labels = list(init)
        if len(labels) != n_agents:
            raise PreconditionError(
                f"explicit initial states must list {n_agents} labels, got {len(labels)}"
            )
        states = [space.index(s) for s in labels]

    unary_terms = [(rate, kern) for rate, kern in gen.unary_terms if rate > 0]
    rates = [gen.lam * n_agents / m] + [rate * n_agents for rate, _ in unary_terms]
    kinds_with_rate = [(k, r) for k, r in enumerate(rates) if r > 0]
    total_rate = sum(r for _, r in kinds_with_rate)

    events: list[Event] = []
    if t > 0 and total_rate > 0:
        times = _draw_times(rng, total_rate, t)
        n_events = len(times)
        thresholds = np.cumsum([r for _, r in kinds_with_rate]) / total_rate
        kind_pick = np.searchsorted(thresholds, rng.random(n_events))
        kind_ids = np.array([k for k, _ in kinds_with_rate])[
            np.minimum(kind_pick, len(kinds_with_rate) - 1)
        ]
        outcome_u = rng.random(n_events)

        groups = _draw_groups(rng, n_agents, m, int(np.sum(kind_ids == 0)))
        unary_agents = [
            rng.integers(0, n_agents, size=int(np.sum(kind_ids == k))).tolist()
            for k in range(1, len(rates))
        ]
        tables = gen.kernel._sampling_table
        row_cums = [kern._row_cumulatives for _, kern in unary_terms]
        labels_of = space.labels

        meet_ptr = 0
        unary_ptr = [0] * len(unary_terms)
        for i in range(n_events):
            kind = int(kind_ids[i])
            if kind == 0:
                group = groups[meet_ptr]
                meet_ptr += 1
                key = tuple(states[a] for a in group)
                entry = tables.get(key)
                if entry is None:
                    post = key  # identity outcome
                else:
                    outs, cum = entry
                    pos = bisect_right(cum, float(outcome_u[i]))
                    post = outs[min(pos, len(outs) - 1)]
                    for a, s in zip(group, post):
                        states[a] = s
                if record_log:
                    events.append(
                        Event(
                            float(times[i]),
                            "meeting",
                            tuple(group),
                            tuple(labels_of[s] for s in key),
                            tuple(labels_of[s] for s in post),
                        )
                    )
            else:
                term = kind - 1
                agent = unary_agents[term][unary_ptr[term]]
                unary_ptr[term] += 1
                pre = states[agent]
                cum = row_cums[term][pre]
                pos = bisect_right(cum, float(outcome_u[i]))
                post = min(pos, len(cum) - 1)
                states[agent] = post
                if record_log:
                    events.append(
                        Event(
                            float(times[i]),
                            "unary",
                            (int(agent),),
                            (labels_of[pre],),
                            (labels_of[post],),
                        )
                    )

    population = Population(space, np.array(states, dtype=np.int64), seed, t)
    log = EventLog(tuple(events), m, n_agents, t) if record_log else None
    return population, log


def empirical_law(pop: Population) -> Measure:
    """State frequencies across the population."""
    counts = np.bincount(pop.states, minlength=pop.space.size)
    return Measure(pop.space, counts / counts.sum())


def tagged_history(log: EventLog, agent: int, horizon: float | None = None) -> HistoryGraph:
    """Extract one agent's backward history tree from an event log.

    Lineages are scanned backward from ``horizon`` (default: the log's time
    span); each candidate meeting is included unless it touches two agents
    the history already connects, in which case it is dropped and counted as
    a cycle.  Simulated event times are almost surely distinct, so ties need
    no rule beyond strict time order.
    """
    if not 0 <= agent < log.n_agents:
        raise PreconditionError(f"agent index {agent} outside population")
    t = log.horizon if horizon is None else horizon
    index = log._meetings_by_agent
    m = log.arity

    reached = {agent}
    lineages: list[tuple[int, float]] = [(agent, t)]  # leaf order, left to right
    grafts: list[int] = []
    meeting_times: list[float] = []
    cycles = 0
    while True:
        best_time = -1.0
        best_pos = -1
        best_group: tuple[int, ...] | None = None
        for pos, (who, cursor) in enumerate(lineages):
            entry = index.get(who)
            if entry is None:
                continue
            times, meets = entry
            k = bisect_left(times, cursor) - 1
            if k >= 0 and times[k] > best_time:
                best_time, best_pos, best_group = times[k], pos, meets[k]
        if best_group is None:
            break
        hits = sum(1 for p in best_group if p in reached)
        if hits >= 2:
            cycles += 1
            lineages = [
                (who, best_time if who in best_group and cursor > best_time else cursor)
                for who, cursor in lineages
            ]
        else:
            grafts.append(best_pos)
            meeting_times.append(best_time)
            reached.update(best_group)
            lineages[best_pos : best_pos + 1] = [(p, best_time) for p in best_group]
    return HistoryGraph(
        agent=agent,
        horizon=t,
        tree=OrderedTree(m, tuple(grafts)),
        cycle_count=cycles,
        meeting_times=tuple(meeting_times),
    )


@dataclass(frozen=True, eq=False)
class ShapeLaw:
    """Empirical joint law of (branching count, history tree)."""

    counts: Counter
    total: int

    def branch_marginal(self) -> dict[int, float]:
        out: dict[int, float] = {}
        for (n, _), c in self.counts.items():
            out[n] = out.get(n, 0.0) + c / self.total
        return out

    def conditional_trees(self, n: int) -> dict[OrderedTree, float]:
        sub = {tree: c for (k, tree), c in self.counts.items() if k == n}
        total = sum(sub.values())
        if total == 0:
            return {}
        return {tree: c / total for tree, c in sub.items()}


def tree_shape_law(histories: Iterable[HistoryGraph]) -> ShapeLaw:
    counts: Counter = Counter()
    total = 0
    for h in histories:
        counts[(h.tree.internal_count, h.tree)] += 1
        total += 1
    if total == 0:
        raise PreconditionError("no histories supplied")
    return ShapeLaw(counts, total)


def replicate_runs(
    gen: Generator,
    init: Measure | Sequence[str],
    n_agents: int,
    t: float,
    seed: int,
    replications: int,
    tagged_agent: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Independent replications, re-seeded as seed + replication index.

    Returns the per-replication population state counts (replications x
    size, integers) and the tagged agent's final state index per
    replication.  Aggregation over rows is commutative, so results do not
    depend on execution order.
    """
    if replications < 1:
        raise PreconditionError("need at least one replication")
    size = gen.space.size
    counts = np.zeros((replications, size), dtype=np.int64)
    tagged = np.zeros(replications, dtype=np.int64)
    for r in range(replications):
        pop, _ = simulate(gen, init, n_agents, t, seed + r, record_log=False)
        counts[r] = np.bincount(pop.states, minlength=size)
        tagged[r] = pop.states[tagged_agent]
    return counts, tagged
