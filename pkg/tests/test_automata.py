"""Automata core: composition, estimates, observation and nonblocking"""

import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modules.automata import (Automaton, CompositeModel, ControlDecision, Event,
                              StateEstimate, check_decision, cosimulate,
                              feasible_controllable, feasible_events, feasible_observable,
                              is_safe, make_decision, observe, step, sync_enabled,
                              sync_product, sync_step, trim_nonblocking,
                              unobservable_reach)
from modules.errors import ContractViolation, ModelError, UsageError

A = Event("a", controllable=True)
B = Event("b")
U = Event("u", observable=False)


def _toy():
    """0 --a--> 1 --u--> 2 --b--> 0, 2 unsafe only when reached in `unsafe`"""
    return Automaton.from_triples("toy", {0, 1, 2}, [A, B, U],
                                  [(0, "a", 1), (1, "u", 2), (2, "b", 0)],
                                  initial=0, marked={0})


EVENT_POOL = ["a", "b", "c", "u", "v"]


@st.composite
def random_models(draw, max_components=2):
    """Composites of up to ``max_components`` small deterministic automata"""
    events = {}
    for name in EVENT_POOL:
        observable = draw(st.booleans())
        events[name] = Event(name, controllable=observable and draw(st.booleans()),
                             observable=observable)
    components = []
    for index in range(draw(st.integers(min_value=1, max_value=max_components))):
        size = draw(st.integers(min_value=1, max_value=4))
        names = sorted(draw(st.sets(st.sampled_from(EVENT_POOL), min_size=1)))
        triples = []
        for q, name in itertools.product(range(size), names):
            target = draw(st.none() | st.integers(min_value=0, max_value=size - 1))
            if target is not None:
                triples.append((q, name, target))
        components.append(Automaton.from_triples(
            f"C{index}", set(range(size)), [events[n] for n in names], triples, 0))
    return CompositeModel(tuple(components))


def _silent_closure(model, joint_states, enabled):
    """Concrete joint states reachable through enabled unobservable events"""
    silent = enabled & model.unobservable
    reached, frontier = set(joint_states), set(joint_states)
    while frontier:
        frontier = {t for s in frontier for e in silent
                    if (t := sync_step(model.components, s, e)) is not None} - reached
        reached |= frontier
    return reached


def _random_case(model, data):
    cells = [data.draw(st.sets(st.sampled_from(sorted(c.states)), min_size=1))
             for c in model.components]
    estimate = StateEstimate(tuple(cells))
    eligible = sorted(feasible_controllable(model, estimate))
    gamma = data.draw(st.sets(st.sampled_from(eligible))) if eligible else set()
    return estimate, make_decision(model, gamma)


class TestAutomaton:
    def test_from_triples_rejects_nondeterminism(self):
        with pytest.raises(ModelError, match="nondeterministic"):
            Automaton.from_triples("bad", {0, 1, 2}, [A], [(0, "a", 1), (0, "a", 2)], 0)

    def test_undeclared_state_and_event(self):
        with pytest.raises(ModelError, match="undeclared state"):
            Automaton.from_triples("bad", {0}, [A], [(0, "a", 9)], 0)
        with pytest.raises(ModelError, match="undeclared event"):
            Automaton.from_triples("bad", {0, 1}, [A], [(0, "z", 1)], 0)

    def test_marked_and_unsafe_are_disjoint(self):
        with pytest.raises(ModelError, match="both marked and unsafe"):
            Automaton.from_triples("bad", {0}, [A], [], 0, marked={0}, unsafe={0})

    def test_controllable_events_are_observable(self):
        with pytest.raises(ModelError):
            Event("x", controllable=True, observable=False)

    def test_step(self):
        toy = _toy()
        assert step(toy, 0, "a") == 1
        assert step(toy, 0, "b") is None
        with pytest.raises(UsageError):
            step(toy, 7, "a")
        with pytest.raises(UsageError):
            step(toy, 0, "zzz")

    def test_triples_are_sorted(self):
        assert _toy().triples() == [(0, "a", 1), (1, "u", 2), (2, "b", 0)]


class TestComposition:
    def test_inconsistent_attributes_are_rejected(self):
        other = Automaton.from_triples("other", {0}, [Event("a")], [], 0)
        with pytest.raises(ModelError, match="inconsistent"):
            CompositeModel((_toy(), other))

    def test_shared_events_synchronize(self):
        left = Automaton.from_triples("L", {0, 1}, [A, B], [(0, "a", 1), (1, "b", 0)], 0,
                                      marked={0})
        right = Automaton.from_triples("R", {"x", "y"}, [A], [("x", "a", "y")], "x",
                                       marked={"x", "y"})
        product = sync_product([left, right])
        assert product.states == {(0, "x"), (1, "y"), (0, "y")}
        assert step(product, (0, "y"), "a") is None
        assert product.marked == {(0, "x"), (0, "y")}

    def test_empty_component_gives_empty_product(self):
        empty = Automaton("empty", frozenset(), frozenset([A]), {}, None)
        product = sync_product([_toy(), empty])
        assert product.states == frozenset()
        assert product.initial is None

    def test_unsafe_coordinate_makes_product_unsafe(self):
        guard = Automaton.from_triples("G", {"ok", "bad"}, [B], [("ok", "b", "bad")], "ok",
                                       unsafe={"bad"})
        product = sync_product([_toy(), guard])
        assert (0, "bad") in product.unsafe


class TestEstimates:
    def setup_method(self):
        self.model = CompositeModel((_toy(),))

    def test_string_form(self):
        assert str(StateEstimate.of({"1", "2"}, {"R"}, {"I"})) == "({1,2},{R},{I})"

    def test_decision_always_enables_uncontrollables(self):
        decision = make_decision(self.model)
        assert decision.enabled == {"b", "u"}
        assert decision.label(self.model) == "Σuc"
        assert make_decision(self.model, ["a"]).label(self.model) == "{a}∪Σuc"
        with pytest.raises(UsageError):
            make_decision(self.model, ["b"])

    def test_check_decision_requires_uncontrollables(self):
        estimate = StateEstimate.of({0})
        with pytest.raises(UsageError, match="uncontrollable"):
            check_decision(self.model, estimate, ControlDecision({"a"}))

    def test_unobservable_reach_and_observe(self):
        decision = make_decision(self.model, ["a"])
        start = StateEstimate.of({0})
        assert feasible_controllable(self.model, start) == {"a"}
        after = observe(self.model, start, decision, "a")
        assert after == StateEstimate.of({1, 2})
        assert feasible_observable(self.model, after, decision) == {"b"}
        assert feasible_events(self.model, after) == {"u", "b"}

    def test_observe_infeasible_event(self):
        decision = make_decision(self.model)
        with pytest.raises(ContractViolation):
            observe(self.model, StateEstimate.of({0}), decision, "a")

    def test_malformed_estimate(self):
        with pytest.raises(UsageError, match="malformed"):
            unobservable_reach(self.model, StateEstimate.of({0}, {0}), make_decision(self.model))
        with pytest.raises(UsageError, match="unknown states"):
            feasible_controllable(self.model, StateEstimate.of({42}))

    @given(cell=st.sets(st.sampled_from([0, 1, 2]), min_size=1),
           gamma=st.sets(st.just("a")))
    def test_closure_is_idempotent_and_monotone(self, cell, gamma):
        decision = make_decision(self.model, gamma)
        estimate = StateEstimate.of(cell)
        closed = unobservable_reach(self.model, estimate, decision)
        assert estimate.cells[0] <= closed.cells[0]
        assert unobservable_reach(self.model, closed, decision) == closed


class TestMissionEstimates:
    @settings(max_examples=25, deadline=None)
    @given(zone=st.integers(min_value=1, max_value=25).filter(lambda z: z != 13),
           seed=st.integers(min_value=0, max_value=10_000))
    def test_estimate_tracks_random_plant_walks(self, mission, zone, seed):
        start = (str(zone), "R", "I")
        assert cosimulate(mission.composite, steps=60, seed=seed, start=start) is None

    def test_is_safe(self, mission):
        model = mission.composite
        assert is_safe(model, mission.zone_estimate([1, 2]))
        assert not is_safe(model, StateEstimate.of({"1", "Δ"}, {"R"}, {"I"}))


class TestNonblocking:
    def test_trim_removes_deadlocks(self):
        trap = Automaton.from_triples("trap", {0, 1, 2}, [A, B], [(0, "a", 1), (0, "b", 2)],
                                      0, marked={1})
        trimmed, nonblocking = trim_nonblocking(trap)
        assert not nonblocking
        assert trimmed.states == {0, 1}

    def test_trim_keeps_live_automaton(self):
        trimmed, nonblocking = trim_nonblocking(_toy())
        assert nonblocking
        assert trimmed.states == {0, 1, 2}


class TestSingletonEstimates:
    @settings(max_examples=25, deadline=None)
    @given(zone=st.sampled_from([1, 2, 3, 6, 7, 11, 21, 25]), data=st.data())
    def test_singleton_estimate_follows_the_plant(self, mission, zone, data):
        model = mission.composite
        state = (str(zone), "R", "I")
        estimate = StateEstimate.singleton(state)
        for _ in range(30):
            decision = make_decision(model, feasible_controllable(model, estimate))
            events = sorted(sync_enabled(model.components, state) & model.observable)
            if not events:
                break
            event = data.draw(st.sampled_from(events))
            state = sync_step(model.components, state, event)
            estimate = observe(model, estimate, decision, event)
            if state[0].isdigit() and int(state[0]) in mission.map.unsafe_zones:
                assert estimate.cells[0] == {state[0], "Δ"}
                break
            assert estimate == StateEstimate.singleton(state)


class TestRandomAutomata:
    @settings(max_examples=80, deadline=None)
    @given(model=random_models(), data=st.data())
    def test_estimates_contain_every_concrete_run(self, model, data):
        estimate, decision = _random_case(model, data)
        closure = unobservable_reach(model, estimate, decision)
        silent = _silent_closure(model, set(itertools.product(*estimate.cells)),
                                 decision.enabled)
        assert all(closure.contains(s) for s in silent)
        for event in feasible_observable(model, closure, decision):
            after = observe(model, closure, decision, event)
            stepped = {t for s in silent
                       if (t := sync_step(model.components, s, event)) is not None}
            for s in _silent_closure(model, stepped, decision.enabled):
                assert after.contains(s), (event, s)

    @settings(max_examples=80, deadline=None)
    @given(model=random_models(max_components=1), data=st.data())
    def test_single_component_estimates_are_exact(self, model, data):
        estimate, decision = _random_case(model, data)
        closure = unobservable_reach(model, estimate, decision)
        silent = _silent_closure(model, {(q,) for q in estimate.cells[0]}, decision.enabled)
        assert closure == StateEstimate.of({s[0] for s in silent})
        for event in feasible_observable(model, closure, decision):
            stepped = {t for s in silent
                       if (t := sync_step(model.components, s, event)) is not None}
            expected = _silent_closure(model, stepped, decision.enabled)
            assert observe(model, closure, decision, event) == \
                StateEstimate.of({s[0] for s in expected})
