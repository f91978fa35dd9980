"""
Model Loading and Persistence Module

Handles:
- Line-oriented model documents ([map], [automaton NAME], [composite])
- Supervisor documents (estimate -> decision lines)
- Estimate and zone-list notation used on the command line
"""

import os
import re

from modules.automata import Automaton, Event, StateEstimate, make_decision, state_sort_key
from modules.errors import ModelError, ModelSyntaxError, UsageError
from modules.mission import GridMap, MissionModel, build_mission
from modules.rbts import YState
from modules.supervisor import RecoverySupervisor, check_supervisor

_TOKEN = re.compile(r"\S+")
_SECTION = re.compile(r"^\[(\w+)(?:\s+(\S+))?\]$")
_CELL = re.compile(r"\{([^{}]*)\}")

MISSION_FIELDS = {
    "G_M": "navigation",
    "exploration": "exploration",
    "scanning": "scanning",
    "G_O": "inner",
    "nominal": "nominal",
    "secondary": "secondary",
    "reverse_patrol": "reverse_patrol",
    "mode_switcher": "mode_switcher",
}
COMPOSITE_ORDER = ("G_M", "exploration", "scanning")
NO_CONTROLLABLE = "-"


def _tokens(line):
    """(token, column) pairs, columns 1-based"""
    return [(m.group(), m.start() + 1) for m in _TOKEN.finditer(line)]


def _lines(text):
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if line.strip():
            yield number, line


def _int(token, number, column):
    try:
        return int(token)
    except ValueError:
        raise ModelSyntaxError(f"expected an integer, got {token!r}", number, column) from None


class _AutomatonDraft:
    def __init__(self, name, number):
        self.name = name
        self.number = number
        self.states = []
        self.events = []
        self.triples = []
        self.initial = None
        self.marked = []
        self.unsafe = []

    def add(self, tokens, number):
        keyword, column = tokens[0]
        values = [t for t, _ in tokens[1:]]
        if keyword == "states":
            self.states.extend(values)
        elif keyword == "initial":
            if len(values) != 1:
                raise ModelSyntaxError("initial takes exactly one state", number, column)
            self.initial = values[0]
        elif keyword == "marked":
            self.marked.extend(values)
        elif keyword == "unsafe":
            self.unsafe.extend(values)
        elif keyword == "event":
            if len(tokens) != 4:
                raise ModelSyntaxError("event takes NAME CONTROL OBSERVE", number, column)
            (name, _), (control, c_col), (observe, o_col) = tokens[1:]
            if control not in ("controllable", "uncontrollable"):
                raise ModelSyntaxError(f"unknown control attribute {control!r}", number, c_col)
            if observe not in ("observable", "unobservable"):
                raise ModelSyntaxError(f"unknown observation attribute {observe!r}",
                                       number, o_col)
            try:
                self.events.append(Event(name, control == "controllable",
                                         observe == "observable"))
            except ModelError as exc:
                raise ModelError(f"automaton {self.name} (line {number}): {exc}") from None
        elif keyword == "trans":
            if len(tokens) != 4:
                raise ModelSyntaxError("trans takes SOURCE EVENT TARGET", number, column)
            self.triples.append(tuple(values))
        else:
            raise ModelSyntaxError(f"unknown keyword {keyword!r}", number, column)

    def build(self):
        try:
            return Automaton.from_triples(self.name, self.states, self.events, self.triples,
                                          self.initial, self.marked, self.unsafe)
        except ModelError as exc:
            raise ModelError(f"automaton {self.name} (line {self.number}): {exc}") from None


def _parse_map(entries):
    fields = {}
    for tokens, number in entries:
        keyword, column = tokens[0]
        values = tokens[1:]
        if keyword in ("rows", "cols", "or_zone"):
            if len(values) != 1:
                raise ModelSyntaxError(f"{keyword} takes one integer", number, column)
            fields[keyword] = _int(values[0][0], number, values[0][1])
        elif keyword == "unsafe":
            fields["unsafe_zones"] = frozenset(_int(t, number, c) for t, c in values)
        elif keyword == "base":
            if len(values) != 1:
                raise ModelSyntaxError("base takes one sub-zone", number, column)
            fields["base_subzone"] = values[0][0]
        else:
            raise ModelSyntaxError(f"unknown map keyword {keyword!r}", number, column)
    return GridMap(**fields)


def parse_model(text):
    """
    Parse a model document into a validated mission

    Parameters:
    -----------
    text : str
        Document with a [map] section and optionally every automaton;
        a map-only document builds the automata from the map

    Returns:
    --------
    mission : MissionModel
    """
    sections = []
    current = None
    for number, line in _lines(text):
        stripped = line.strip()
        if stripped.startswith("["):
            match = _SECTION.match(stripped)
            if not match:
                raise ModelSyntaxError(f"malformed section header {stripped!r}", number,
                                       line.index("[") + 1)
            kind, name = match.groups()
            if kind not in ("map", "automaton", "composite"):
                raise ModelSyntaxError(f"unknown section {kind!r}", number,
                                       line.index("[") + 2)
            if (kind == "automaton") != (name is not None):
                raise ModelSyntaxError(f"section {kind!r} name mismatch", number,
                                       line.index("[") + 1)
            current = (kind, name, number, [])
            sections.append(current)
            continue
        if current is None:
            raise ModelSyntaxError("content before the first section", number,
                                   len(line) - len(line.lstrip()) + 1)
        current[3].append((_tokens(line), number))

    maps = [s for s in sections if s[0] == "map"]
    if len(maps) != 1:
        raise ModelError(f"a model needs exactly one [map] section, found {len(maps)}")
    grid = _parse_map(maps[0][3])

    automata = {}
    for kind, name, number, entries in sections:
        if kind != "automaton":
            continue
        if name in automata:
            raise ModelError(f"automaton {name} declared twice (line {number})")
        draft = _AutomatonDraft(name, number)
        for tokens, line_number in entries:
            draft.add(tokens, line_number)
        automata[name] = draft.build()

    for kind, _, number, entries in sections:
        if kind != "composite":
            continue
        for tokens, line_number in entries:
            keyword, column = tokens[0]
            if keyword != "order":
                raise ModelSyntaxError(f"unknown composite keyword {keyword!r}",
                                       line_number, column)
            order = tuple(t for t, _ in tokens[1:])
            if order != COMPOSITE_ORDER:
                raise ModelError(f"composite order must be {' '.join(COMPOSITE_ORDER)}, "
                                 f"got {' '.join(order)}")

    if not automata:
        return build_mission(grid)
    unknown = sorted(set(automata) - set(MISSION_FIELDS))
    if unknown:
        raise ModelError(f"unknown automata {unknown}")
    missing = [n for n in MISSION_FIELDS if n not in automata]
    if missing:
        raise ModelError(f"missing automata {missing}")
    return MissionModel(map=grid, **{MISSION_FIELDS[n]: a for n, a in automata.items()})


def _states(states):
    return " ".join(str(q) for q in sorted(states, key=state_sort_key))


def serialize_automaton(automaton):
    lines = [f"[automaton {automaton.name}]"]
    if automaton.initial is not None:
        lines.append(f"initial {automaton.initial}")
    lines.append(f"states {_states(automaton.states)}")
    if automaton.marked:
        lines.append(f"marked {_states(automaton.marked)}")
    if automaton.unsafe:
        lines.append(f"unsafe {_states(automaton.unsafe)}")
    for event in sorted(automaton.alphabet):
        control = "controllable" if event.controllable else "uncontrollable"
        observe = "observable" if event.observable else "unobservable"
        lines.append(f"event {event.name} {control} {observe}")
    for source, event, target in automaton.triples():
        lines.append(f"trans {source} {event} {target}")
    return "\n".join(lines)


def serialize_model(mission):
    """Deterministic text form of a mission; parse_model reads it back"""
    grid = mission.map
    parts = ["\n".join([
        "[map]",
        f"rows {grid.rows}",
        f"cols {grid.cols}",
        f"or_zone {grid.or_zone}",
        f"unsafe {' '.join(str(z) for z in sorted(grid.unsafe_zones))}".rstrip(),
        f"base {grid.base_subzone}",
    ])]
    for name in MISSION_FIELDS:
        parts.append(serialize_automaton(getattr(mission, MISSION_FIELDS[name])))
    parts.append("[composite]\norder " + " ".join(COMPOSITE_ORDER))
    return "\n\n".join(parts) + "\n"


def load_model(path):
    """
    Load a mission model file

    Parameters:
    -----------
    path : str
        Path to the model document

    Returns:
    --------
    mission : MissionModel
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"Model not found: {path}")
    with open(path, encoding="utf-8") as f:
        return parse_model(f.read())


def save_text(text, output_path, label="File"):
    directory = os.path.dirname(output_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(output_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    print(f"✓ {label} saved: {output_path}")


def save_model(mission, output_path):
    save_text(serialize_model(mission), output_path, "Model")


def parse_zone_list(text):
    """``"1,2,6,7"`` -> [1, 2, 6, 7]"""
    zones = []
    for item in text.split(","):
        item = item.strip()
        if not item.isdigit():
            raise UsageError(f"malformed zone list {text!r}")
        zones.append(int(item))
    if not zones:
        raise UsageError("empty zone list")
    return zones


def parse_estimate(text):
    """``"({1,2},{R},{I})"`` -> StateEstimate"""
    stripped = text.strip()
    if not (stripped.startswith("(") and stripped.endswith(")")):
        raise UsageError(f"malformed estimate {text!r}")
    inner = stripped[1:-1]
    cells = _CELL.findall(inner)
    if not cells or _CELL.sub("", inner).replace(",", "").strip():
        raise UsageError(f"malformed estimate {text!r}")
    parsed = []
    for cell in cells:
        states = [s.strip() for s in cell.split(",") if s.strip()]
        if not states:
            raise UsageError(f"empty cell in estimate {text!r}")
        parsed.append(frozenset(states))
    return StateEstimate(tuple(parsed))


def serialize_supervisor(supervisor):
    """One ``estimate -> controllable events`` line per decision state"""
    model = supervisor.mission.composite
    lines = ["[supervisor]", f"initial {supervisor.initial.estimate}"]
    rows = sorted(supervisor.strategy.items(), key=lambda kv: str(kv[0].estimate))
    for y, decision in rows:
        gamma = ",".join(sorted(decision.controlled(model))) or NO_CONTROLLABLE
        lines.append(f"{y.estimate} -> {gamma}")
    return "\n".join(lines) + "\n"


def parse_supervisor(text, mission):
    """
    Read a supervisor document back against ``mission``

    Returns:
    --------
    supervisor : RecoverySupervisor
        re-checked for closedness, safety and acyclicity
    """
    model = mission.composite
    initial = None
    strategy = {}
    seen_header = False
    for number, line in _lines(text):
        stripped = line.strip()
        if stripped == "[supervisor]":
            seen_header = True
            continue
        if not seen_header:
            raise ModelSyntaxError("expected [supervisor]", number, 1)
        if stripped.startswith("initial "):
            initial = YState(_estimate_at(stripped[len("initial "):], number, line))
            continue
        left, arrow, right = stripped.partition("->")
        if not arrow:
            raise ModelSyntaxError("expected ESTIMATE -> EVENTS", number, 1)
        y = YState(_estimate_at(left, number, line))
        names = [] if right.strip() == NO_CONTROLLABLE else \
            [n.strip() for n in right.split(",") if n.strip()]
        try:
            strategy[y] = make_decision(model, names)
        except UsageError as exc:
            raise ModelSyntaxError(str(exc), number, line.index("->") + 3) from None
    if initial is None:
        raise ModelError("supervisor document has no initial estimate")
    supervisor = RecoverySupervisor(mission, initial, strategy)
    problems = check_supervisor(supervisor)
    if problems:
        raise ModelError("invalid supervisor: " + "; ".join(problems))
    return supervisor


def _estimate_at(text, number, line):
    try:
        return parse_estimate(text)
    except UsageError as exc:
        raise ModelSyntaxError(str(exc), number, line.find(text.strip()) + 1) from None
