"""Model and supervisor documents, estimate notation"""

import pytest

from modules.errors import ModelError, ModelSyntaxError, UsageError
from utils.model_io import (load_model, parse_estimate, parse_model, parse_supervisor,
                            parse_zone_list, save_model, serialize_model,
                            serialize_supervisor)

MAP_ONLY = """
# 3x3 training map
[map]
rows 3
cols 3
or_zone 5
unsafe 9
base A
"""


class TestModelDocuments:
    def test_map_only_document_builds_the_mission(self):
        mission = parse_model(MAP_ONLY)
        assert mission.map.or_zone == 5
        assert mission.map.unsafe_zones == {9}
        assert mission.navigation.enabled_at("B5") == {"b_5"}

    def test_full_document_reads_back(self, mission, tmp_path):
        path = tmp_path / "default.model"
        save_model(mission, str(path))
        loaded = load_model(str(path))
        assert loaded == mission
        assert serialize_model(loaded) == path.read_text(encoding="utf-8")

    def test_serialization_is_deterministic(self, mission):
        assert serialize_model(mission) == serialize_model(mission)
        text = serialize_model(mission)
        assert "[automaton G_M]" in text
        assert "event l uncontrollable unobservable" in text
        assert "trans B13 b_13 13" in text

    @pytest.mark.parametrize("text, line, column", [
        ("[map]\nrows five\n", 2, 6),
        ("rows 5\n", 1, 1),
        ("[map]\n[automaton]\n", 2, 1),
        ("[map]\nrows 3\n[planet X]\n", 3, 2),
        ("[map]\ncols 3\nrowz 3\n", 3, 1),
    ])
    def test_syntax_errors_carry_positions(self, text, line, column):
        with pytest.raises(ModelSyntaxError) as info:
            parse_model(text)
        assert (info.value.line, info.value.column) == (line, column)
        assert str(info.value).startswith(f"line {line}, column {column}:")

    def test_bad_event_attribute(self):
        text = MAP_ONLY + "[automaton G_M]\nevent m_n controllable visible\n"
        with pytest.raises(ModelSyntaxError) as info:
            parse_model(text)
        assert info.value.column == 24

    def test_semantic_errors(self, mission):
        with pytest.raises(ModelError, match="exactly one"):
            parse_model("# nothing\n")
        with pytest.raises(ModelError, match="missing automata"):
            parse_model(MAP_ONLY + "[automaton G_M]\nstates 1\ninitial 1\n")
        with pytest.raises(ModelError, match="nondeterministic"):
            parse_model(MAP_ONLY + "[automaton G_M]\nstates 1 2\ninitial 1\n"
                        "event a uncontrollable observable\n"
                        "trans 1 a 1\ntrans 1 a 2\n")
        text = serialize_model(mission).replace(
            "order G_M exploration scanning", "order scanning G_M exploration")
        with pytest.raises(ModelError, match="composite order"):
            parse_model(text)

    def test_unsafe_zone_without_loss_transition(self, mission):
        text = serialize_model(mission)
        assert "trans 10 l Δ\n" in text
        with pytest.raises(ModelError, match="unsafe_zones without loss transitions") as info:
            parse_model(text.replace("trans 10 l Δ\n", ""))
        assert not isinstance(info.value, ModelSyntaxError)

    def test_controllable_event_must_be_observable(self):
        text = MAP_ONLY + "[automaton G_M]\nstates 1\ninitial 1\nevent a controllable unobservable\n"
        with pytest.raises(ModelError, match=r"line 12\): event 'a' is controllable but "
                                             "unobservable") as info:
            parse_model(text)
        assert not isinstance(info.value, ModelSyntaxError)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_model(str(tmp_path / "absent.model"))


class TestEstimateNotation:
    def test_zone_list(self):
        assert parse_zone_list("1, 2,6") == [1, 2, 6]
        with pytest.raises(UsageError):
            parse_zone_list("1,,2")
        with pytest.raises(UsageError):
            parse_zone_list("a")

    def test_estimate(self, mission):
        estimate = parse_estimate("({1,2},{R},{I})")
        assert estimate == mission.zone_estimate([1, 2])
        assert str(estimate) == "({1,2},{R},{I})"

    @pytest.mark.parametrize("text", ["{1,2},{R},{I}", "({1,2},{},{I})", "({1}x{R})"])
    def test_malformed_estimates(self, text):
        with pytest.raises(UsageError):
            parse_estimate(text)


class TestSupervisorDocuments:
    def test_supervisor_reads_back(self, mission, trial_plans):
        sup = trial_plans[1].supervisor
        text = serialize_supervisor(sup)
        assert text.startswith("[supervisor]\ninitial ({1,2},{R},{I})\n")
        assert "({1,2},{O},{N}) -> -\n" in text
        assert "({1,2},{M},{N}) -> r\n" in text
        loaded = parse_supervisor(text, mission)
        assert loaded.initial == sup.initial
        assert loaded.strategy == sup.strategy

    def test_incomplete_supervisor_is_rejected(self, mission, trial_plans):
        lines = serialize_supervisor(trial_plans[1].supervisor).splitlines()
        truncated = "\n".join(lines[:3]) + "\n"
        with pytest.raises(ModelError, match="invalid supervisor"):
            parse_supervisor(truncated, mission)

    def test_supervisor_syntax(self, mission):
        with pytest.raises(ModelSyntaxError):
            parse_supervisor("initial ({1},{R},{I})\n", mission)
        with pytest.raises(ModelSyntaxError):
            parse_supervisor("[supervisor]\n({1},{R},{I}) => s_n\n", mission)
        with pytest.raises(ModelSyntaxError):
            parse_supervisor("[supervisor]\n({1},{R},{I}) -> b_n\n", mission)
        with pytest.raises(ModelError, match="no initial"):
            parse_supervisor("[supervisor]\n", mission)
