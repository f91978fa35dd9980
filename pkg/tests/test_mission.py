"""Mission models: grid, navigation, exploration, scanning, inner patrol"""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from modules.automata import step, trim_nonblocking
from modules.errors import ModelError, UsageError
from modules.mission import (NFZ, DEFAULT_MAP, GridMap, MissionModel, build_grid_map,
                             build_mission, mode_switched_closed_loop, neighbor,
                             nominal_closed_loop)


class TestGridMap:
    def test_default_map(self):
        assert DEFAULT_MAP.rows == DEFAULT_MAP.cols == 5
        assert DEFAULT_MAP.or_zone == 13
        assert DEFAULT_MAP.unsafe_zones == {10, 16}
        assert len(DEFAULT_MAP.buffer_zones) == 24
        assert DEFAULT_MAP.reentry_state == "B13"
        assert DEFAULT_MAP.reentry_event == "b_13"

    @pytest.mark.parametrize("kwargs", [
        dict(or_zone=26),
        dict(unsafe_zones=(0,)),
        dict(unsafe_zones=(13,)),
        dict(rows=0),
        dict(rows=1, cols=1, or_zone=1),
        dict(base_subzone="E"),
    ])
    def test_invalid_maps(self, kwargs):
        with pytest.raises(ModelError):
            build_grid_map(**kwargs)

    def test_neighbors(self):
        assert neighbor(DEFAULT_MAP, 1, "n") == NFZ
        assert neighbor(DEFAULT_MAP, 1, "w") == NFZ
        assert neighbor(DEFAULT_MAP, 1, "e") == "2"
        assert neighbor(DEFAULT_MAP, 1, "s") == "6"
        assert neighbor(DEFAULT_MAP, 8, "s") == "B13"
        assert neighbor(DEFAULT_MAP, "12", "e") == "B13"
        assert neighbor(DEFAULT_MAP, 25, "e") == NFZ

    def test_neighbor_rejects_non_buffer_zones(self):
        with pytest.raises(UsageError):
            neighbor(DEFAULT_MAP, 13, "n")
        with pytest.raises(UsageError):
            neighbor(DEFAULT_MAP, "B13", "n")
        with pytest.raises(UsageError):
            neighbor(DEFAULT_MAP, 1, "x")


class TestNavigation:
    def test_states_and_sinks(self, mission):
        nav = mission.navigation
        assert nav.initial == "13"
        assert nav.marked == {"13"}
        assert nav.unsafe == {NFZ}
        assert len(nav.states) == 27
        assert not nav.enabled_at("13")
        assert not nav.enabled_at(NFZ)
        assert nav.enabled_at("B13") == {"b_13"}

    def test_only_unsafe_zones_lose_the_drone(self, mission):
        nav = mission.navigation
        assert step(nav, "10", "l") == NFZ
        assert step(nav, "16", "l") == NFZ
        assert step(nav, "9", "l") is None

    def test_search_self_loops(self, mission):
        for d in "nesw":
            assert step(mission.navigation, "7", f"s_{d}") == "7"

    def test_event_attributes(self, mission):
        model = mission.composite
        assert {"m_n", "s_e", "r"} <= model.controllable
        assert {"b_n", "b_13", "l"} <= model.uncontrollable
        assert model.unobservable == {"l"}


class TestExplorationAndScanning:
    def test_exploration_cycle(self, mission):
        ex = mission.exploration
        assert step(ex, "R", "s_w") == "O"
        assert step(ex, "O", "b_s") == "M"
        assert step(ex, "M", "m_e") == "R"
        assert step(ex, "M", "r") == "R"
        assert step(ex, "R", "m_e") is None

    def test_scan_order_and_reset(self, mission):
        scan = mission.scanning
        assert step(scan, "I", "s_n") == "N"
        assert step(scan, "I", "s_e") is None
        assert step(scan, "N", "s_e") == "E"
        assert step(scan, "W", "s_n") == "N"
        assert step(scan, "S", "m_s") == "I"
        assert step(scan, "S", "m_n") is None
        assert step(scan, "E", "b_e") == "E"

    @given(events=st.lists(st.sampled_from(["s_n", "s_e", "s_s", "s_w", "b_n", "b_e",
                                             "b_s", "b_w", "m_n", "m_e", "m_s", "m_w"]),
                           max_size=40))
    def test_searches_always_follow_the_scan_order(self, mission, events):
        scan = mission.scanning
        order = ["s_n", "s_e", "s_s", "s_w"]
        state, last = "I", None
        for event in events:
            target = step(scan, state, event)
            if target is None:
                continue
            if event.startswith("s_"):
                expected = "s_n" if last is None else order[(order.index(last) + 1) % 4]
                assert event == expected
                last = event
            elif event.startswith("m_"):
                assert target == "I"
                last = None
            state = target


class TestInnerPatrol:
    def test_nominal_supervisor_size(self, mission):
        assert len(mission.nominal.states) == 13

    def test_nominal_route(self, mission):
        sup = mission.nominal
        assert step(sup, "start", "g_c") == "C.search"
        assert step(sup, "A.search", "s_13") == "A.observe"
        assert step(sup, "A.observe", "o_B") == "A.move"
        assert step(sup, "A.move", "m_B") == "B.search"
        assert step(sup, "D.move", "m_A") == "A.search"

    def test_reverse_route(self, mission):
        assert step(mission.reverse_patrol, "A.move", "m_D") == "D.search"

    def test_inner_adjacency(self, mission):
        inner = mission.inner
        assert step(inner, "A", "m_B") == "B"
        assert step(inner, "A", "m_C") is None
        assert inner.marked == {"A"}

    def test_secondary_supervisor(self, mission):
        sec = mission.secondary
        assert step(sec, "P", "s_13") == "Q"
        assert step(sec, "Q", "r") == "P"

    def test_closed_loops_are_nonblocking(self, mission):
        assert trim_nonblocking(nominal_closed_loop(mission))[1]
        assert trim_nonblocking(mode_switched_closed_loop(mission))[1]

    def test_mode_switcher(self, mission):
        switcher = mission.mode_switcher
        assert step(switcher, "NOM", "desync") == "REC1"
        assert step(switcher, "REC1", "b_13") == "REC2"
        assert step(switcher, "REC2", "regroup") == "NOM"
        assert step(switcher, "NOM", "regroup") is None


class TestMissionModel:
    def test_zone_estimate(self, mission):
        assert str(mission.zone_estimate([2, 1])) == "({1,2},{R},{I})"
        with pytest.raises(UsageError):
            mission.zone_estimate([13])
        with pytest.raises(UsageError):
            mission.zone_estimate([99])
        with pytest.raises(UsageError):
            mission.zone_estimate([])

    def test_validation_rejects_foreign_navigation(self, mission, small_mission):
        fields = {name: getattr(mission, name) for name in (
            "exploration", "scanning", "inner", "nominal", "secondary",
            "reverse_patrol", "mode_switcher")}
        with pytest.raises(ModelError, match="do not match"):
            MissionModel(map=mission.map, navigation=small_mission.navigation, **fields)

    def test_other_maps(self, small_mission):
        assert small_mission.map.reentry_state == "B5"
        assert small_mission.navigation.enabled_at("B5") == {"b_5"}
        assert build_mission(GridMap(rows=2, cols=3, or_zone=1, unsafe_zones=frozenset()))
