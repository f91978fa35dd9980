"""
Recovery Supervisor Module

Handles:
- Extraction of the winning strategy from an RBTS
- Closedness / acyclicity checks on extracted strategies
- Online execution against observed events
- Cached synthesis entry point used by the simulator and the CLI
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from functools import lru_cache

import networkx as nx

from .automata import StateEstimate, feasible_observable, is_safe, observe
from .errors import DesynchronizationError, UsageError
from .rbts import SynthConfig, YState, build_rbts, initial_y, is_goal

logger = logging.getLogger(__name__)

RECOVERABLE = "recoverable"
UNRECOVERABLE = "unrecoverable"
UNRECOVERABLE_AT_START = "unrecoverable-at-start"


@dataclass(frozen=True)
class RecoverySupervisor:
    """
    Winning strategy: one control decision per non-goal Y-state reachable
    from ``initial`` when the decisions are followed.
    """
    mission: object
    initial: YState
    strategy: dict

    def __hash__(self):
        return hash((self.initial, len(self.strategy)))

    def decision_at(self, y):
        return self.strategy.get(y)

    def successors(self, y):
        """``(event, YState)`` pairs of the strategy decision at ``y``"""
        model = self.mission.composite
        decision = self.strategy[y]
        return [(e, YState(observe(model, y.estimate, decision, e)))
                for e in sorted(feasible_observable(model, y.estimate, decision))]

    def graph(self):
        """Strategy as a DiGraph of Y-states, edges labeled by event"""
        graph = nx.DiGraph()
        graph.add_node(self.initial)
        for y in self.strategy:
            for e, s in self.successors(y):
                graph.add_edge(y, s, event=e)
        return graph


def extract_supervisor(rbts):
    """
    Follow the RBTS choices from the initial node.

    Parameters:
    -----------
    rbts : RBTS

    Returns:
    --------
    RecoverySupervisor

    Raises:
    -------
    UsageError
        when the initial Y-state is not winning
    """
    if not rbts.recoverable:
        raise UsageError(f"initial state {rbts.initial} of the RBTS is not winning")
    strategy = {}
    queue = deque([rbts.initial])
    while queue:
        y = queue.popleft()
        if y in strategy or rbts.is_goal(y):
            continue
        strategy[y] = rbts.choice[y]
        for _, s in rbts.strategy_successors(y):
            if s not in strategy:
                queue.append(s)
    supervisor = RecoverySupervisor(rbts.mission, rbts.initial, strategy)
    problems = check_supervisor(supervisor)
    if problems:
        raise UsageError("extracted strategy is malformed: " + "; ".join(problems))
    logger.info("supervisor from %s: %d decision states", rbts.initial, len(strategy))
    return supervisor


def check_supervisor(supervisor):
    """
    Closedness, safety and acyclicity of a strategy.

    Returns:
    --------
    list of str
        violated properties, empty when the strategy is sound
    """
    mission = supervisor.mission
    model = mission.composite
    problems = []
    if not is_goal(mission, supervisor.initial) and \
            supervisor.initial not in supervisor.strategy:
        problems.append(f"initial {supervisor.initial} has no decision")
    for y in supervisor.strategy:
        if is_goal(mission, y):
            problems.append(f"goal state {y} carries a decision")
            continue
        successors = supervisor.successors(y)
        if not successors:
            problems.append(f"decision at {y} admits no observation")
        for e, s in successors:
            if not is_safe(model, s.estimate):
                problems.append(f"{e} from {y} reaches unsafe {s}")
            elif not is_goal(mission, s) and s not in supervisor.strategy:
                problems.append(f"{e} from {y} leaves the strategy at {s}")
    if not problems and not nx.is_directed_acyclic_graph(supervisor.graph()):
        problems.append("strategy contains a cycle")
    return problems


def plays(supervisor):
    """
    Every strategy-consistent observation sequence, each ending at a goal.

    Yields:
    -------
    list of (str, YState)
    """
    stack = [(supervisor.initial, [])]
    while stack:
        y, prefix = stack.pop()
        if is_goal(supervisor.mission, y):
            yield prefix
            continue
        for e, s in reversed(supervisor.successors(y)):
            stack.append((s, prefix + [(e, s)]))


class SupervisorRuntime:
    """Online supervisor: tracks the current Y-state as observations arrive"""

    def __init__(self, supervisor):
        self.supervisor = supervisor
        self.model = supervisor.mission.composite
        self.current = supervisor.initial
        self.history = []

    @property
    def goal_reached(self):
        return is_goal(self.supervisor.mission, self.current)

    @property
    def decision(self):
        """Current control decision; None once the goal is reached"""
        if self.goal_reached:
            return None
        return self.supervisor.strategy[self.current]

    @property
    def estimate(self):
        return self.current.estimate

    def step(self, event):
        """
        Consume one observed event.

        Returns:
        --------
        ControlDecision or None
            the next decision, None when the goal was reached

        Raises:
        -------
        DesynchronizationError
            for an event outside the current decision's feasible set
        """
        if self.goal_reached:
            raise UsageError("the recovery supervisor has already reached its goal")
        decision = self.decision
        if event not in feasible_observable(self.model, self.current.estimate, decision):
            raise DesynchronizationError(
                f"observed {event!r} at {self.current} outside "
                f"{decision.label(self.model)}")
        successor = YState(observe(self.model, self.current.estimate, decision, event))
        if not is_goal(self.supervisor.mission, successor) and \
                successor not in self.supervisor.strategy:
            raise DesynchronizationError(
                f"observed {event!r} leads to {successor}, outside the strategy")
        self.history.append((event, successor))
        self.current = successor
        return self.decision


def supervisor_run(supervisor, mission=None):
    """Start an online runtime for ``supervisor``"""
    if mission is not None and mission.map != supervisor.mission.map:
        raise UsageError("supervisor was synthesized for another map")
    return SupervisorRuntime(supervisor)


@dataclass(frozen=True)
class RecoveryPlan:
    verdict: str
    raw: StateEstimate
    initial: YState | None = None
    rbts: object = None
    supervisor: RecoverySupervisor | None = None

    @property
    def recoverable(self):
        return self.verdict == RECOVERABLE


@lru_cache(maxsize=128)
def synthesize_recovery(mission, raw, config=None):
    """
    Closure, RBTS and supervisor for one post-desynchronization estimate.

    Parameters:
    -----------
    mission : MissionModel
    raw : StateEstimate
    config : SynthConfig, optional

    Returns:
    --------
    RecoveryPlan
        verdict is ``recoverable``, ``unrecoverable`` or
        ``unrecoverable-at-start``

    Raises:
    -------
    SynthesisAborted
        when the node budget runs out
    """
    config = config or SynthConfig()
    y0 = initial_y(mission, raw)
    if y0 is None:
        return RecoveryPlan(UNRECOVERABLE_AT_START, raw)
    rbts = build_rbts(mission, y0, config)
    if not rbts.recoverable:
        return RecoveryPlan(UNRECOVERABLE, raw, y0, rbts)
    return RecoveryPlan(RECOVERABLE, raw, y0, rbts, extract_supervisor(rbts))
