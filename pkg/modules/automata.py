"""
Automata Core Module

Discrete-event substrate:
- Events with controllability / observability attributes
- Deterministic automata and synchronous composition
- Cartesian state estimates under partial observation
- Nonblocking check (accessible + coaccessible trim)
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Hashable, Mapping

import networkx as nx
import numpy as np

from .errors import ContractViolation, ModelError, UsageError

logger = logging.getLogger(__name__)

State = Hashable


def state_sort_key(state):
    """Numbers first in numeric order, then everything else by text"""
    text = str(state)
    if text.isdigit():
        return (0, int(text), "")
    return (1, 0, text)


def _event_name(event):
    return event.name if isinstance(event, Event) else event


@dataclass(frozen=True, order=True)
class Event:
    name: str
    controllable: bool = False
    observable: bool = True

    def __post_init__(self):
        if not self.name or any(ch.isspace() for ch in self.name):
            raise ModelError(f"invalid event name {self.name!r}")
        if self.controllable and not self.observable:
            raise ModelError(
                f"event {self.name!r} is controllable but unobservable")

    def __str__(self):
        return self.name


@dataclass(frozen=True, eq=True)
class Automaton:
    """
    Deterministic finite automaton with marked and unsafe states.

    ``transitions`` maps ``(state, event name)`` to the successor state,
    so determinism holds by construction.
    """
    name: str
    states: frozenset
    alphabet: frozenset
    transitions: Mapping
    initial: State | None
    marked: frozenset = frozenset()
    unsafe: frozenset = frozenset()
    events: Mapping = field(init=False, repr=False, compare=False)
    _enabled: Mapping = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        states = frozenset(self.states)
        alphabet = frozenset(self.alphabet)
        marked = frozenset(self.marked)
        unsafe = frozenset(self.unsafe)
        transitions = dict(self.transitions)

        events = {}
        for ev in alphabet:
            if ev.name in events:
                raise ModelError(
                    f"{self.name}: event name {ev.name!r} declared twice")
            events[ev.name] = ev

        enabled = {q: set() for q in states}
        for (source, name), target in transitions.items():
            if source not in states or target not in states:
                raise ModelError(
                    f"{self.name}: transition {source} --{name}--> {target} "
                    f"references an undeclared state")
            if name not in events:
                raise ModelError(
                    f"{self.name}: transition on undeclared event {name!r}")
            enabled[source].add(name)

        if states and self.initial not in states:
            raise ModelError(f"{self.name}: initial state {self.initial!r} undeclared")
        if not states and self.initial is not None:
            raise ModelError(f"{self.name}: empty automaton cannot have an initial state")
        if not marked <= states or not unsafe <= states:
            raise ModelError(f"{self.name}: marked/unsafe states must be declared")
        if marked & unsafe:
            raise ModelError(f"{self.name}: states both marked and unsafe: "
                             f"{sorted(marked & unsafe, key=state_sort_key)}")

        object.__setattr__(self, "states", states)
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "marked", marked)
        object.__setattr__(self, "unsafe", unsafe)
        object.__setattr__(self, "transitions", transitions)
        object.__setattr__(self, "events", events)
        object.__setattr__(self, "_enabled",
                           {q: frozenset(names) for q, names in enabled.items()})

    def __hash__(self):
        return hash((self.name, self.states, self.initial))

    @classmethod
    def from_triples(cls, name, states, alphabet, triples, initial,
                     marked=(), unsafe=()):
        """Build from ``(source, event, target)`` triples, rejecting nondeterminism"""
        transitions = {}
        for source, event, target in triples:
            key = (source, _event_name(event))
            if key in transitions and transitions[key] != target:
                raise ModelError(
                    f"{name}: nondeterministic on {key[1]!r} from {source!r}")
            transitions[key] = target
        return cls(name, frozenset(states), frozenset(alphabet), transitions,
                   initial, frozenset(marked), frozenset(unsafe))

    def enabled_at(self, state):
        return self._enabled.get(state, frozenset())

    def triples(self):
        """Transitions as sorted ``(source, event, target)`` triples"""
        return sorted(
            ((q, e, t) for (q, e), t in self.transitions.items()),
            key=lambda x: (state_sort_key(x[0]), x[1], state_sort_key(x[2])))


def step(automaton, state, event):
    """
    Transition lookup.

    Returns:
    --------
    state or None
        ``δ(state, event)`` when defined, otherwise None
    """
    name = _event_name(event)
    if state not in automaton.states:
        raise UsageError(f"{automaton.name}: unknown state {state!r}")
    if name not in automaton.events:
        raise UsageError(f"{automaton.name}: unknown event {name!r}")
    return automaton.transitions.get((state, name))


@dataclass(frozen=True)
class CompositeModel:
    """Ordered automata running synchronously; the order fixes estimate cells"""
    components: tuple
    events: Mapping = field(init=False, repr=False, compare=False)
    owners: Mapping = field(init=False, repr=False, compare=False)
    _partition: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        components = tuple(self.components)
        if not components:
            raise ModelError("a composite needs at least one component")
        events, owners = {}, {}
        for index, component in enumerate(components):
            for ev in component.alphabet:
                known = events.setdefault(ev.name, ev)
                if known != ev:
                    raise ModelError(
                        f"event {ev.name!r} carries inconsistent attributes "
                        f"across components")
                owners.setdefault(ev.name, []).append(index)
        object.__setattr__(self, "components", components)
        object.__setattr__(self, "events", events)
        object.__setattr__(self, "owners",
                           {name: tuple(ix) for name, ix in owners.items()})
        object.__setattr__(self, "_partition", (
            frozenset(n for n, ev in events.items() if ev.controllable),
            frozenset(n for n, ev in events.items() if not ev.controllable),
            frozenset(n for n, ev in events.items() if ev.observable),
            frozenset(n for n, ev in events.items() if not ev.observable),
        ))

    def __hash__(self):
        return hash(tuple(c.name for c in self.components))

    @property
    def controllable(self):
        return self._partition[0]

    @property
    def uncontrollable(self):
        return self._partition[1]

    @property
    def observable(self):
        return self._partition[2]

    @property
    def unobservable(self):
        return self._partition[3]

    def initial_states(self):
        return tuple(c.initial for c in self.components)


@dataclass(frozen=True)
class StateEstimate:
    """One non-empty state subset per component, printed as ``({1,2},{R},{I})``"""
    cells: tuple

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(frozenset(c) for c in self.cells))

    @classmethod
    def of(cls, *cells):
        return cls(tuple(cells))

    @classmethod
    def singleton(cls, states):
        return cls(tuple(frozenset([q]) for q in states))

    def __str__(self):
        return "(" + ",".join(
            "{" + ",".join(str(q) for q in sorted(cell, key=state_sort_key)) + "}"
            for cell in self.cells) + ")"

    def contains(self, states):
        """True when the concrete state tuple lies inside every cell"""
        return len(states) == len(self.cells) and all(
            q in cell for q, cell in zip(states, self.cells))

    def replace(self, index, cell):
        cells = list(self.cells)
        cells[index] = frozenset(cell)
        return StateEstimate(tuple(cells))


@dataclass(frozen=True)
class ControlDecision:
    """Event names enabled by the supervisor"""
    enabled: frozenset

    def __post_init__(self):
        object.__setattr__(self, "enabled", frozenset(self.enabled))

    def controlled(self, model):
        return self.enabled & model.controllable

    def label(self, model):
        gamma = sorted(self.controlled(model))
        if not gamma:
            return "Σuc"
        return "{" + ",".join(gamma) + "}∪Σuc"


def make_decision(model, gamma=()):
    """Decision enabling every uncontrollable event plus ``gamma``"""
    gamma = frozenset(_event_name(e) for e in gamma)
    unknown = gamma - model.controllable
    if unknown:
        raise UsageError(f"not controllable events: {sorted(unknown)}")
    return ControlDecision(model.uncontrollable | gamma)


def check_estimate(model, estimate):
    if not isinstance(estimate, StateEstimate):
        raise UsageError(f"not a state estimate: {estimate!r}")
    if len(estimate.cells) != len(model.components):
        raise UsageError(
            f"malformed estimate {estimate}: {len(estimate.cells)} cells for "
            f"{len(model.components)} components")
    for cell, component in zip(estimate.cells, model.components):
        if not cell:
            raise UsageError(f"malformed estimate {estimate}: empty cell for "
                             f"{component.name}")
        if not cell <= component.states:
            raise UsageError(f"malformed estimate {estimate}: unknown states "
                             f"{sorted(cell - component.states, key=state_sort_key)} "
                             f"in {component.name}")


def check_decision(model, estimate, decision):
    missing = model.uncontrollable - decision.enabled
    if missing:
        raise UsageError(f"decision must enable all uncontrollable events, "
                         f"missing {sorted(missing)}")
    unknown = decision.enabled - model.events.keys()
    if unknown:
        raise UsageError(f"decision enables unknown events {sorted(unknown)}")
    infeasible = decision.controlled(model) - feasible_controllable(model, estimate)
    if infeasible:
        raise UsageError(f"decision enables infeasible controllable events "
                         f"{sorted(infeasible)} at {estimate}")


def _feasible(model, estimate, name):
    owners = model.owners.get(name, ())
    return bool(owners) and all(
        any(name in model.components[i].enabled_at(q) for q in estimate.cells[i])
        for i in owners)


def feasible_controllable(model, estimate):
    """
    Controllable events eligible at an estimate.

    An event is eligible when every component that knows it has at least
    one state in its cell enabling it.

    Parameters:
    -----------
    model : CompositeModel
    estimate : StateEstimate

    Returns:
    --------
    frozenset of str
    """
    check_estimate(model, estimate)
    return frozenset(e for e in model.controllable if _feasible(model, estimate, e))


def feasible_observable(model, estimate, decision):
    """Observable events of ``decision`` that the plant can generate at ``estimate``"""
    check_estimate(model, estimate)
    check_decision(model, estimate, decision)
    return frozenset(e for e in decision.enabled
                     if e in model.observable and _feasible(model, estimate, e))


def feasible_events(model, estimate):
    """Every event, of any kind, feasible at ``estimate``"""
    check_estimate(model, estimate)
    return frozenset(e for e in model.events if _feasible(model, estimate, e))


def unobservable_reach(model, estimate, decision):
    """
    Close each cell under the unobservable events enabled by ``decision``.

    Idempotent and monotone: cells only grow.
    """
    check_estimate(model, estimate)
    silent = decision.enabled & model.unobservable
    cells = []
    for cell, component in zip(estimate.cells, model.components):
        local = [e for e in silent if e in component.events]
        if not local:
            cells.append(cell)
            continue
        closed = set(cell)
        queue = deque(cell)
        while queue:
            q = queue.popleft()
            for e in local:
                target = component.transitions.get((q, e))
                if target is not None and target not in closed:
                    closed.add(target)
                    queue.append(target)
        cells.append(frozenset(closed))
    return StateEstimate(tuple(cells))


def observe(model, estimate, decision, event):
    """
    Refine ``estimate`` by an observed event, then close it.

    Raises:
    -------
    ContractViolation
        when ``event`` is not feasible under ``decision``
    """
    name = _event_name(event)
    if name not in feasible_observable(model, estimate, decision):
        raise ContractViolation(
            f"event {name!r} is not feasible at {estimate} under "
            f"{decision.label(model)}")
    cells = list(estimate.cells)
    for i in model.owners[name]:
        component = model.components[i]
        cells[i] = frozenset(
            component.transitions[(q, name)] for q in cells[i]
            if (q, name) in component.transitions)
    return unobservable_reach(model, StateEstimate(tuple(cells)), decision)


def is_safe(model, estimate):
    """True when no cell holds an unsafe state of its component"""
    return not any(cell & component.unsafe
                   for cell, component in zip(estimate.cells, model.components))


def sync_enabled(components, states):
    """Events the concrete joint state ``states`` can execute"""
    names = set()
    for component in components:
        names |= component.events.keys()
    return frozenset(
        e for e in names
        if all((q, e) in c.transitions
               for c, q in zip(components, states) if e in c.events))


def sync_step(components, states, event):
    """Synchronous successor of a concrete joint state, or None"""
    name = _event_name(event)
    successor = []
    known = False
    for component, q in zip(components, states):
        if name in component.events:
            known = True
            target = component.transitions.get((q, name))
            if target is None:
                return None
            successor.append(target)
        else:
            successor.append(q)
    return tuple(successor) if known else None


def sync_product(components):
    """
    Accessible synchronous product of the given automata.

    Shared events synchronize, private events interleave. A product state
    is unsafe when any coordinate is unsafe and marked when all are.

    Parameters:
    -----------
    components : list of Automaton

    Returns:
    --------
    Automaton
        States are tuples of component states.
    """
    components = tuple(components)
    if not components:
        raise UsageError("sync_product needs at least one automaton")
    composite = CompositeModel(components)
    alphabet = frozenset(composite.events.values())

    if any(c.initial is None for c in components):
        return Automaton(" || ".join(c.name for c in components),
                         frozenset(), alphabet, {}, None)

    start = composite.initial_states()
    seen = {start}
    queue = deque([start])
    transitions = {}
    while queue:
        current = queue.popleft()
        for name in sorted(sync_enabled(components, current)):
            target = sync_step(components, current, name)
            transitions[(current, name)] = target
            if target not in seen:
                seen.add(target)
                queue.append(target)

    marked = {s for s in seen
              if all(q in c.marked for c, q in zip(components, s))}
    unsafe = {s for s in seen
              if any(q in c.unsafe for c, q in zip(components, s))}
    product = Automaton(" || ".join(c.name for c in components), frozenset(seen),
                        alphabet, transitions, start, frozenset(marked),
                        frozenset(unsafe))
    logger.debug("product %s: %d states", product.name, len(seen))
    return product


def to_networkx(automaton):
    """Transition graph as a MultiDiGraph keyed by event name"""
    graph = nx.MultiDiGraph(name=automaton.name)
    graph.add_nodes_from(automaton.states)
    for (source, name), target in automaton.transitions.items():
        graph.add_edge(source, target, key=name)
    return graph


def trim_nonblocking(automaton):
    """
    Keep the accessible and coaccessible part of an automaton.

    Returns:
    --------
    trimmed : Automaton
        Accessible + coaccessible sub-automaton
    nonblocking : bool
        True when no accessible state had to be removed
    """
    if automaton.initial is None:
        return automaton, True

    graph = to_networkx(automaton)
    accessible = {automaton.initial} | nx.descendants(graph, automaton.initial)
    reverse = graph.reverse(copy=False)
    coaccessible = set()
    for q in automaton.marked & accessible:
        coaccessible |= {q} | nx.descendants(reverse, q)
    keep = accessible & coaccessible
    nonblocking = accessible <= coaccessible

    trimmed = Automaton(
        automaton.name,
        frozenset(keep),
        automaton.alphabet,
        {(q, e): t for (q, e), t in automaton.transitions.items()
         if q in keep and t in keep},
        automaton.initial if automaton.initial in keep else None,
        automaton.marked & keep,
        automaton.unsafe & keep,
    )
    if not nonblocking:
        logger.info("%s is blocking: %d of %d accessible states removed",
                    automaton.name, len(accessible - keep), len(accessible))
    return trimmed, nonblocking


def cosimulate(model, steps=200, seed=0, start=None):
    """
    Random plant walk tracked by the estimator.

    The walk begins at the concrete joint state ``start`` (default: the
    initial states).

    At every step a random admissible decision is issued, the concrete
    joint state takes a random enabled event, and the estimate is updated
    from the observation. Returns the first step at which the concrete
    state left the estimate, or None when the estimate stayed sound.
    """
    rng = np.random.default_rng(seed)
    components = model.components
    concrete = tuple(start) if start is not None else model.initial_states()
    estimate = unobservable_reach(model, StateEstimate.singleton(concrete),
                                  make_decision(model))
    for index in range(steps):
        eligible = sorted(feasible_controllable(model, estimate))
        gamma = [e for e in eligible if rng.random() < 0.5]
        decision = make_decision(model, gamma)
        choices = sorted(sync_enabled(components, concrete) & decision.enabled)
        if not choices:
            return None
        event = choices[int(rng.integers(len(choices)))]
        concrete = sync_step(components, concrete, event)
        if event in model.observable:
            try:
                estimate = observe(model, estimate, decision, event)
            except ContractViolation:
                return index
        if not estimate.contains(concrete):
            return index
    return None


def events_from(names, controllable=False, observable=True):
    """Convenience: build several events sharing attributes"""
    return [Event(name, controllable, observable) for name in names]
