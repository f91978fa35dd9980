"""Recovery supervisors: extraction, checks, online execution"""

import pytest

from modules.errors import DesynchronizationError, UsageError
from modules.rbts import SynthConfig, YState, build_rbts
from modules.supervisor import (RECOVERABLE, UNRECOVERABLE, UNRECOVERABLE_AT_START,
                                RecoverySupervisor, check_supervisor, extract_supervisor,
                                plays, supervisor_run, synthesize_recovery)


class TestExtraction:
    def test_trial_plans(self, trial_plans):
        assert [trial_plans[t].verdict for t in (1, 2, 3, 4)] == [
            RECOVERABLE, RECOVERABLE, RECOVERABLE, UNRECOVERABLE]
        for trial in (1, 2, 3):
            assert check_supervisor(trial_plans[trial].supervisor) == []
        assert trial_plans[4].supervisor is None
        assert trial_plans[4].rbts is not None

    def test_unrecoverable_at_start(self, mission):
        plan = synthesize_recovery(mission, mission.zone_estimate([9, 10]))
        assert plan.verdict == UNRECOVERABLE_AT_START
        assert plan.rbts is None and not plan.recoverable

    def test_extract_requires_a_winning_root(self, trial_plans):
        with pytest.raises(UsageError):
            extract_supervisor(trial_plans[4].rbts)

    def test_synthesis_is_cached(self, mission, synth_config):
        raw = mission.zone_estimate([1, 2])
        assert synthesize_recovery(mission, raw, synth_config) is \
            synthesize_recovery(mission, raw, synth_config)

    def test_trial_one_opening(self, mission, trial_plans):
        sup = trial_plans[1].supervisor
        model = mission.composite
        assert sup.decision_at(sup.initial).controlled(model) == {"s_n"}
        after_scan = YState(mission.zone_estimate([1, 2], "O", "N"))
        assert sup.decision_at(after_scan).controlled(model) == frozenset()
        awaiting = YState(mission.zone_estimate([1, 2], "M", "N"))
        assert sup.decision_at(awaiting).controlled(model) == {"r"}

    def test_every_play_ends_at_the_goal(self, mission, trial_plans):
        for trial in (1, 2, 3):
            sup = trial_plans[trial].supervisor
            for play in plays(sup):
                assert play[-1][1].estimate.cells[0] == {mission.map.or_state}


class TestChecks:
    def test_missing_decision(self, trial_plans):
        sup = trial_plans[1].supervisor
        broken = dict(sup.strategy)
        broken.pop(next(y for y in broken if y != sup.initial))
        problems = check_supervisor(RecoverySupervisor(sup.mission, sup.initial, broken))
        assert any("leaves the strategy" in p for p in problems)

    def test_initial_without_decision(self, trial_plans):
        sup = trial_plans[1].supervisor
        problems = check_supervisor(RecoverySupervisor(sup.mission, sup.initial, {}))
        assert problems == [f"initial {sup.initial} has no decision"]


class TestRuntime:
    def test_observations_drive_the_strategy(self, mission, trial_plans):
        runtime = supervisor_run(trial_plans[1].supervisor, mission)
        assert runtime.decision.controlled(mission.composite) == {"s_n"}
        runtime.step("s_n")
        runtime.step("b_n")
        assert runtime.decision.controlled(mission.composite) == {"r"}
        assert [e for e, _ in runtime.history] == ["s_n", "b_n"]

    def test_unexpected_observation(self, trial_plans):
        runtime = supervisor_run(trial_plans[1].supervisor)
        with pytest.raises(DesynchronizationError):
            runtime.step("m_e")

    def test_goal_stops_the_runtime(self, mission, trial_plans):
        sup = trial_plans[2].supervisor
        runtime = supervisor_run(sup)
        # zone 11: east twice reaches the border of the operational region
        for event in ("s_n", "b_n", "r", "s_e", "b_e", "m_e",
                      "s_n", "b_n", "r", "s_e", "b_e", "m_e", "b_13"):
            runtime.step(event)
        assert runtime.goal_reached
        assert runtime.decision is None
        with pytest.raises(UsageError):
            runtime.step("s_n")

    def test_foreign_map(self, small_mission, trial_plans):
        with pytest.raises(UsageError):
            supervisor_run(trial_plans[1].supervisor, small_mission)

    def test_bfs_strategy_is_valid(self, mission):
        raw = mission.zone_estimate([1, 6, 11])
        plan = synthesize_recovery(mission, raw, SynthConfig(exploration="bfs"))
        assert plan.recoverable
        assert check_supervisor(plan.supervisor) == []
        rbts = build_rbts(mission, plan.initial, SynthConfig(exploration="bfs"))
        assert rbts.recoverable
