"""
Recovery Bipartite Transition System (RBTS) Module

Technique:
- Game between a supervisor (Y-states: pick a control decision) and the
  plant (Z-states: answer with a feasible observation) over state estimates
- Decisions leading to an unsafe estimate, or admitting no observation, are pruned
- Depth-first AND-OR search with path-scoped no-revisit and memoized verdicts;
  a loss that leaned on a revisit is rechecked by backward induction over the
  completed graph
- Breadth-first expansion solved by backward induction
- Exhaustive attractor oracle to cross-check recoverability verdicts
"""

from __future__ import annotations

import itertools
import logging
import os
import zlib
from collections import defaultdict, deque
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .automata import (ControlDecision, StateEstimate, check_estimate,
                       feasible_controllable, feasible_observable, is_safe,
                       make_decision, observe, unobservable_reach)
from .errors import ConfigError, OracleInconclusive, SynthesisAborted, UsageError
from .mission import DIRECTIONS, RETURN, move

logger = logging.getLogger(__name__)

EXPLORATIONS = ("dfs", "bfs")
DECISION_ORDERS = ("prefer-move", "minimal", "random", "maxperm")
BUDGET_ENV = "SWARMRECOVER_BUDGET"
DEFAULT_BUDGET = 1_000_000

PRUNED_UNSAFE = "unsafe"
PRUNED_STALL = "stall"


def default_budget():
    """Node budget from ``SWARMRECOVER_BUDGET``, else 1,000,000"""
    raw = os.environ.get(BUDGET_ENV, "").strip()
    if not raw:
        return DEFAULT_BUDGET
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{BUDGET_ENV} must be an integer, got {raw!r}") from None
    if value < 1:
        raise ConfigError(f"{BUDGET_ENV} must be positive, got {value}")
    return value


@dataclass(frozen=True)
class SynthConfig:
    exploration: str = "dfs"
    decision_order: str = "prefer-move"
    seed: int = 0
    budget: int = field(default_factory=default_budget)

    def __post_init__(self):
        if self.exploration not in EXPLORATIONS:
            raise ConfigError(f"exploration must be one of {EXPLORATIONS}, "
                              f"got {self.exploration!r}")
        if self.decision_order not in DECISION_ORDERS:
            raise ConfigError(f"decision_order must be one of {DECISION_ORDERS}, "
                              f"got {self.decision_order!r}")
        if not isinstance(self.budget, int) or self.budget < 1:
            raise ConfigError(f"budget must be a positive integer, got {self.budget!r}")


@dataclass(frozen=True)
class YState:
    """Supervisor's turn"""
    estimate: StateEstimate

    def __str__(self):
        return str(self.estimate)


@dataclass(frozen=True)
class ZState:
    """Plant's turn: estimate plus the decision just issued"""
    estimate: StateEstimate
    decision: ControlDecision


def is_goal(mission, y):
    """Navigation cell is exactly the operational region"""
    return y.estimate.cells[0] == {mission.map.or_state}


def initial_y(mission, raw):
    """
    First Y-state: unobservable reach of the post-desynchronization estimate.

    Returns:
    --------
    YState or None
        None when the closure already touches an unsafe state
        (unrecoverable at start)
    """
    model = mission.composite
    check_estimate(model, raw)
    closed = unobservable_reach(model, raw, make_decision(model))
    if not is_safe(model, closed):
        logger.info("estimate %s is unsafe after closure %s", raw, closed)
        return None
    return YState(closed)


def event_rank(name):
    """Global event order: moves, then return, then searches, then the rest"""
    if name.startswith("m_") and name[2:] in DIRECTIONS:
        return (0, DIRECTIONS.index(name[2:]), name)
    if name == RETURN:
        return (1, 0, name)
    if name.startswith("s_") and name[2:] in DIRECTIONS:
        return (2, DIRECTIONS.index(name[2:]), name)
    return (3, 0, name)


def _ranks(gamma):
    return tuple(sorted(event_rank(e) for e in gamma))


def state_rng(seed, y):
    """Generator fixed by the seed and the Y-state, the same on every visit"""
    return np.random.default_rng([seed, zlib.crc32(str(y).encode("utf-8"))])


def candidate_decisions(mission, y, config=None, rng=None, fresh=None):
    """
    Admissible control decisions at ``y``, ordered for exploration.

    Every decision enables all uncontrollable events plus a non-empty subset
    of the eligible controllable events; the bare uncontrollable decision is
    offered only when nothing controllable is eligible.

    Parameters:
    -----------
    mission : MissionModel
    y : YState
    config : SynthConfig, optional
    rng : numpy.random.Generator, optional
        for the ``random`` order; defaults to ``state_rng(config.seed, y)``
    fresh : callable, optional
        ``fresh(decision) -> bool``; with ``prefer-move``, single moves
        toward fresh estimates are tried first

    Returns:
    --------
    list of ControlDecision
    """
    config = config or SynthConfig()
    model = mission.composite
    eligible = sorted(feasible_controllable(model, y.estimate), key=event_rank)
    subsets = [frozenset(c) for size in range(1, len(eligible) + 1)
               for c in itertools.combinations(eligible, size)]
    if not subsets:
        return [make_decision(model)]

    order = config.decision_order
    if order == "prefer-move":
        single_moves = {move(d) for d in DIRECTIONS}

        def key(gamma):
            if len(gamma) == 1 and gamma <= single_moves:
                tier = 0
            elif gamma == {RETURN}:
                tier = 1
            else:
                tier = 2
            return (tier, len(gamma), _ranks(gamma))
        subsets.sort(key=key)
        decisions = [make_decision(model, g) for g in subsets]
        if fresh is not None:
            # stable: fresh single moves keep their place ahead of stale ones
            head = [d for d in decisions if len(d.controlled(model)) == 1
                    and d.controlled(model) <= single_moves]
            tail = decisions[len(head):]
            head.sort(key=lambda d: 0 if fresh(d) else 1)
            decisions = head + tail
        return decisions
    if order == "minimal":
        subsets.sort(key=lambda g: (len(g), sorted(g)))
    elif order == "maxperm":
        subsets.sort(key=lambda g: (-len(g), sorted(g)))
    elif order == "random":
        subsets.sort(key=lambda g: (len(g), sorted(g)))
        if rng is None:
            rng = state_rng(config.seed, y)
        subsets = [subsets[i] for i in rng.permutation(len(subsets))]
    return [make_decision(model, g) for g in subsets]


@dataclass
class RBTS:
    """
    Explored game graph with its winning region.

    Nodes of ``graph`` are YState / ZState objects with a ``kind`` attribute
    (``"Y"`` or ``"Z"``); Z-nodes carry ``pruned`` (None, ``"unsafe"`` or
    ``"stall"``). Y->Z edges carry ``decision``, Z->Y edges carry ``event``.
    """
    mission: object
    config: SynthConfig
    graph: nx.DiGraph
    initial: YState
    winning: frozenset
    choice: dict
    expansions: int = 0

    @property
    def recoverable(self):
        return self.initial in self.winning

    @property
    def y_nodes(self):
        return [n for n, kind in self.graph.nodes(data="kind") if kind == "Y"]

    @property
    def z_nodes(self):
        return [n for n, kind in self.graph.nodes(data="kind") if kind == "Z"]

    def is_goal(self, y):
        return is_goal(self.mission, y)

    def decisions_at(self, y):
        """Z-nodes issued from ``y`` in exploration order"""
        return list(self.graph.successors(y))

    def observations(self, z):
        """``(event, YState)`` pairs leaving a Z-node, by event name"""
        return sorted(((self.graph.edges[z, y]["event"], y)
                       for y in self.graph.successors(z)), key=lambda p: p[0])

    def strategy_successors(self, y):
        return self.observations(ZState(y.estimate, self.choice[y]))


def check_rbts(rbts):
    """
    Structural walk over an RBTS.

    Returns:
    --------
    list of str
        one message per violated invariant, empty when the graph is sound
    """
    problems = []
    graph = rbts.graph
    for source, target in graph.edges:
        kinds = (graph.nodes[source]["kind"], graph.nodes[target]["kind"])
        if kinds not in (("Y", "Z"), ("Z", "Y")):
            problems.append(f"edge {source} -> {target} does not alternate Y/Z")
    for z in rbts.z_nodes:
        if graph.nodes[z]["pruned"] is None and graph.out_degree(z) == 0:
            problems.append(f"Z-node {z.estimate} has no observation edge")
    for y in rbts.winning:
        if rbts.is_goal(y):
            continue
        decision = rbts.choice.get(y)
        if decision is None:
            problems.append(f"winning {y} has no decision")
            continue
        z = ZState(y.estimate, decision)
        if z not in graph or graph.nodes[z]["pruned"] is not None:
            problems.append(f"winning {y} chose a pruned or missing decision")
            continue
        losers = [s for _, s in rbts.observations(z) if s not in rbts.winning]
        if losers:
            problems.append(f"winning {y} has losing successors {list(map(str, losers))}")
    return problems


@dataclass
class _Frame:
    y: YState
    candidates: list
    index: int = 0
    decision: ControlDecision | None = None
    successors: list | None = None
    cursor: int = 0
    tainted: bool = False


class RBTSBuilder:
    """
    Incremental construction of one RBTS.

    Decision analyses are cached per (Y-state, decision) and every verdict
    is memoized, so each Y-state is expanded at most once. Losses that
    leaned on a revisit of the search path are tainted: when the root ends
    up tainted-lost, the graph is completed and solved by backward
    induction.
    """

    def __init__(self, mission, config=None):
        self.mission = mission
        self.model = mission.composite
        self.config = config or SynthConfig()
        self.graph = nx.DiGraph()
        self.winning = set()
        self.losing = set()
        self.choice = {}
        self.expansions = 0
        self._analyses = {}
        self._expanded = set()
        self._tainted = set()
        self._on_path = set()

    def _charge(self):
        self.expansions += 1
        if self.expansions > self.config.budget:
            raise SynthesisAborted(self.config.budget)

    def _add_y(self, y):
        if y not in self.graph:
            self.graph.add_node(y, kind="Y", goal=is_goal(self.mission, y))

    def candidates(self, y, on_path=None):
        """
        Decision order at ``y`` for this visit.

        With ``prefer-move`` and a search path, single moves whose
        successors all lie off ``on_path`` come first.
        """
        fresh = None
        if on_path is not None and self.config.decision_order == "prefer-move":
            def fresh(decision):
                reason, successors = self.analyse(y, decision)
                return reason is None and not any(s in on_path for _, s in successors)
        return candidate_decisions(self.mission, y, self.config, fresh=fresh)

    def analyse(self, y, decision):
        """
        Evaluate a decision at ``y``.

        Returns:
        --------
        reason : str or None
            ``"unsafe"`` or ``"stall"`` when the decision is pruned
        successors : list of (str, YState)
            observation successors by event name, empty when pruned
        """
        key = (y, decision)
        if key in self._analyses:
            return self._analyses[key]
        self._charge()
        model = self.model
        reason, successors = None, []
        closure = unobservable_reach(model, y.estimate, decision)
        if not is_safe(model, closure):
            reason = PRUNED_UNSAFE
        else:
            events = sorted(feasible_observable(model, closure, decision))
            if not events:
                reason = PRUNED_STALL
            else:
                raw = [(e, observe(model, closure, decision, e)) for e in events]
                if all(is_safe(model, s) for _, s in raw):
                    successors = [(e, YState(s)) for e, s in raw]
                else:
                    reason = PRUNED_UNSAFE

        z = ZState(y.estimate, decision)
        self._add_y(y)
        self.graph.add_node(z, kind="Z", pruned=reason)
        self.graph.add_edge(y, z, decision=decision)
        for e, s in successors:
            self._add_y(s)
            self.graph.add_edge(z, s, event=e)
        if reason is not None:
            logger.debug("pruned %s at %s: %s", decision.label(model), y, reason)
        self._analyses[key] = (reason, successors)
        return reason, successors

    def run(self, root):
        self._add_y(root)
        if self.config.exploration == "bfs":
            self._search_breadth_first(root)
        elif not self._search_depth_first(root) and root in self._tainted:
            logger.info("loss at %s leaned on revisits, solving the completed graph", root)
            self._search_breadth_first(root)
        return RBTS(self.mission, self.config, self.graph, root,
                    frozenset(self.winning), dict(self.choice), self.expansions)

    def _expand(self, y):
        if y not in self._expanded:
            self._charge()
            self._expanded.add(y)

    # depth-first AND-OR search

    def _enter(self, y, stack):
        """``(won, tainted)`` for a settled ``y``, or None once a frame is pushed"""
        if is_goal(self.mission, y):
            self.winning.add(y)
            return True, False
        if y in self.winning:
            return True, False
        if y in self.losing:
            return False, y in self._tainted
        if y in self._on_path:
            logger.debug("revisit of %s on the search path", y)
            return False, True
        self._expand(y)
        self._on_path.add(y)
        stack.append(_Frame(y, self.candidates(y, self._on_path)))
        return None

    def _next_decision(self, frame):
        while frame.index < len(frame.candidates):
            decision = frame.candidates[frame.index]
            frame.index += 1
            reason, successors = self.analyse(frame.y, decision)
            if reason is None:
                return decision, [s for _, s in successors]
        return None

    def _settle(self, frame, stack, won):
        stack.pop()
        self._on_path.discard(frame.y)
        if won:
            self.winning.add(frame.y)
            self.choice[frame.y] = frame.decision
            return True, False
        self.losing.add(frame.y)
        if frame.tainted:
            self._tainted.add(frame.y)
        return False, frame.tainted

    def _search_depth_first(self, root):
        stack = []
        result = self._enter(root, stack)
        while stack:
            frame = stack[-1]
            if result is not None:
                won, tainted = result
                result = None
                if won:
                    frame.cursor += 1
                else:
                    frame.tainted |= tainted
                    frame.successors = None
            if frame.successors is not None:
                if frame.cursor < len(frame.successors):
                    result = self._enter(frame.successors[frame.cursor], stack)
                else:
                    result = self._settle(frame, stack, won=True)
                continue
            picked = self._next_decision(frame)
            if picked is None:
                result = self._settle(frame, stack, won=False)
                continue
            frame.decision, frame.successors = picked
            frame.cursor = 0
        return result[0]

    # breadth-first expansion + backward induction

    def _search_breadth_first(self, root):
        """
        Expand everything reachable from ``root`` under viable decisions and
        rank it by backward induction. Goals and Y-states already won rank 0
        and keep their decisions.
        """
        options = {}
        seen = {root}
        queue = deque([root])
        while queue:
            y = queue.popleft()
            if is_goal(self.mission, y) or y in self.winning:
                continue
            self._expand(y)
            viable = []
            for decision in self.candidates(y):
                reason, successors = self.analyse(y, decision)
                if reason is not None:
                    continue
                viable.append((decision, [s for _, s in successors]))
                for _, s in successors:
                    if s not in seen:
                        seen.add(s)
                        queue.append(s)
            options[y] = viable

        rank = {y: 0 for y in seen if is_goal(self.mission, y) or y in self.winning}
        level = 0
        while True:
            level += 1
            settled = {}
            for y, viable in options.items():
                if y in rank:
                    continue
                for decision, successors in viable:
                    if all(s in rank for s in successors):
                        settled[y] = decision
                        break
            if not settled:
                break
            for y, decision in settled.items():
                rank[y] = level
                self.choice[y] = decision
        self.winning |= set(rank)
        self.losing = (self.losing | seen) - self.winning
        return root in self.winning


def build_rbts(mission, y0, config=None):
    """
    Build the RBTS from ``y0`` and decide recoverability.

    Parameters:
    -----------
    mission : MissionModel
    y0 : YState
        safe initial Y-state (see ``initial_y``)
    config : SynthConfig, optional

    Returns:
    --------
    RBTS
        the explored graph; ``recoverable`` is False when ``y0`` is losing

    Raises:
    -------
    SynthesisAborted
        when the node budget runs out
    """
    if not isinstance(y0, YState) or not is_safe(mission.composite, y0.estimate):
        raise UsageError(f"initial Y-state must be safe, got {y0}")
    config = config or SynthConfig()
    logger.info("building RBTS from %s (%s, %s)", y0, config.exploration,
                config.decision_order)
    rbts = RBTSBuilder(mission, config).run(y0)
    logger.info("RBTS from %s: %s, %d Y-nodes, %d Z-nodes", y0,
                "recoverable" if rbts.recoverable else "unrecoverable",
                len(rbts.y_nodes), len(rbts.z_nodes))
    return rbts


class OracleSolver:
    """
    Exhaustive recoverability by attractor computation.

    Explores every Y-state reachable under every admissible decision (the
    full decision lattice, no ordering), then propagates winning status
    backwards from the goal estimates.
    """

    def __init__(self, mission, budget=None):
        self.mission = mission
        self.model = mission.composite
        self.budget = budget or default_budget()
        self.options = {}

    def _decisions(self, estimate):
        eligible = sorted(feasible_controllable(self.model, estimate))
        subsets = list(itertools.chain.from_iterable(
            itertools.combinations(eligible, k) for k in range(1, len(eligible) + 1)))
        return [make_decision(self.model, g) for g in subsets] or [make_decision(self.model)]

    def _successors(self, estimate, decision):
        model = self.model
        closure = unobservable_reach(model, estimate, decision)
        if not is_safe(model, closure):
            return None
        events = feasible_observable(model, closure, decision)
        if not events:
            return None
        successors = frozenset(observe(model, closure, decision, e) for e in events)
        if not all(is_safe(model, s) for s in successors):
            return None
        return successors

    def _goal(self, estimate):
        return estimate.cells[0] == {self.mission.map.or_state}

    def explore(self, roots):
        queue = deque(r for r in roots if r not in self.options)
        pending = set(queue)
        while queue:
            estimate = queue.popleft()
            if self._goal(estimate):
                self.options[estimate] = []
                continue
            if len(self.options) >= self.budget:
                raise OracleInconclusive(
                    f"oracle budget of {self.budget} estimates exceeded")
            viable = []
            for decision in self._decisions(estimate):
                successors = self._successors(estimate, decision)
                if successors is None:
                    continue
                viable.append(successors)
                for s in successors:
                    if s not in self.options and s not in pending:
                        pending.add(s)
                        queue.append(s)
            self.options[estimate] = viable

    def winning_region(self):
        win = {e for e in self.options if self._goal(e)}
        remaining = {}
        watchers = defaultdict(list)
        for estimate, viable in self.options.items():
            for i, successors in enumerate(viable):
                remaining[(estimate, i)] = len(successors)
                for s in successors:
                    watchers[s].append((estimate, i))
        queue = deque(win)
        while queue:
            settled = queue.popleft()
            for estimate, i in watchers[settled]:
                remaining[(estimate, i)] -= 1
                if remaining[(estimate, i)] == 0 and estimate not in win:
                    win.add(estimate)
                    queue.append(estimate)
        return win

    def verdicts(self, roots):
        roots = [r.estimate if isinstance(r, YState) else r for r in roots]
        self.explore(roots)
        win = self.winning_region()
        return {r: r in win for r in roots}


def oracle_recoverable(mission, y0, budget=None):
    """
    Independent recoverability verdict for ``y0``.

    Raises:
    -------
    OracleInconclusive
        when more than ``budget`` estimates would have to be explored
    """
    estimate = y0.estimate if isinstance(y0, YState) else y0
    return OracleSolver(mission, budget).verdicts([estimate])[estimate]
