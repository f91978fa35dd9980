"""
Mission Models Module

Builds the patrol mission as discrete-event models:
- Grid map (operational region, buffer zone, unsafe zones, no-fly border)
- Navigation G_M, exploration cycle and directional scanning automata
- Inner navigation G_O with its nominal, secondary and reverse-patrol supervisors
- Mode switcher between nominal and recovery supervision
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .automata import (Automaton, CompositeModel, Event, StateEstimate,
                       check_estimate, sync_product)
from .errors import ModelError, UsageError

logger = logging.getLogger(__name__)

DIRECTIONS = ("n", "e", "s", "w")
_OFFSETS = {"n": (-1, 0), "e": (0, 1), "s": (1, 0), "w": (0, -1)}

# 2x2 quadrants of the operational region: A(NW) B(NE) C(SE) D(SW)
SUBZONES = ("A", "B", "C", "D")
SUBZONE_ADJACENCY = {"A": ("B", "D"), "B": ("A", "C"),
                     "C": ("B", "D"), "D": ("A", "C")}
NOMINAL_ROUTE = ("A", "B", "C", "D")
REVERSE_ROUTE = ("D", "C", "B", "A")
# sub-zone reached when the region is entered across each edge
ENTRY_SUBZONE = {"n": "A", "e": "B", "s": "C", "w": "D"}

NFZ = "Δ"
RETURN = "r"
LOSS = "l"
DESYNC = "desync"
REGROUP = "regroup"

NOMINAL = "NOM"
PRIMARY = "REC1"
SECONDARY = "REC2"

ROAMING, OBSERVING, AWAITING_MOVE = "R", "O", "M"
IDLE = "I"


def search(direction):
    return f"s_{direction}"


def move(direction):
    return f"m_{direction}"


def border(direction):
    return f"b_{direction}"


def scan_state(direction):
    return direction.upper()


def _controllable(*names):
    return [Event(n, controllable=True, observable=True) for n in names]


def _uncontrollable(*names, observable=True):
    return [Event(n, controllable=False, observable=observable) for n in names]


@dataclass(frozen=True)
class GridMap:
    """
    Mission area grid.

    Zones are numbered row-major from the north-west corner:
    ``id = (row - 1) * cols + col`` with row 1 on the north edge.
    """
    rows: int = 5
    cols: int = 5
    or_zone: int = 13
    unsafe_zones: frozenset = frozenset({10, 16})
    base_subzone: str = "A"

    def __post_init__(self):
        object.__setattr__(self, "unsafe_zones", frozenset(self.unsafe_zones))
        for label, value in (("rows", self.rows), ("cols", self.cols)):
            if not isinstance(value, int) or value < 1:
                raise ModelError(f"{label} must be a positive integer, got {value!r}")
        if self.rows * self.cols < 2:
            raise ModelError("the map needs at least one buffer zone")
        if not self.is_zone(self.or_zone):
            raise ModelError(f"or_zone {self.or_zone!r} is not a zone of a "
                             f"{self.rows}x{self.cols} map")
        bad = sorted(z for z in self.unsafe_zones if not self.is_zone(z))
        if bad:
            raise ModelError(f"unsafe zones out of range: {bad}")
        if self.or_zone in self.unsafe_zones:
            raise ModelError(f"or_zone {self.or_zone} cannot be unsafe")
        if self.base_subzone not in SUBZONES:
            raise ModelError(f"base_subzone must be one of {SUBZONES}, "
                             f"got {self.base_subzone!r}")

    def is_zone(self, zone):
        return isinstance(zone, int) and 1 <= zone <= self.rows * self.cols

    def cell(self, zone):
        """(row, col), both 1-based"""
        return (zone - 1) // self.cols + 1, (zone - 1) % self.cols + 1

    def zone_at(self, row, col):
        if 1 <= row <= self.rows and 1 <= col <= self.cols:
            return (row - 1) * self.cols + col
        return None

    @property
    def buffer_zones(self):
        return [z for z in range(1, self.rows * self.cols + 1) if z != self.or_zone]

    @property
    def or_state(self):
        return str(self.or_zone)

    @property
    def reentry_state(self):
        return f"B{self.or_zone}"

    @property
    def reentry_event(self):
        return f"b_{self.or_zone}"

    @property
    def search_event(self):
        return f"s_{self.or_zone}"


def build_grid_map(rows=5, cols=5, or_zone=13, unsafe_zones=(10, 16),
                   base_subzone="A"):
    """
    Validated grid map.

    Raises:
    -------
    ModelError
        for out-of-range ids or an unsafe operational region
    """
    return GridMap(rows, cols, or_zone, frozenset(unsafe_zones), base_subzone)


DEFAULT_MAP = GridMap()


def _zone_id(grid, zone):
    if isinstance(zone, str) and zone.isdigit():
        zone = int(zone)
    if not grid.is_zone(zone):
        raise UsageError(f"{zone!r} is not a zone of the map")
    return zone


def neighbor(grid, zone, direction):
    """
    Navigation successor of a buffer zone.

    Returns:
    --------
    str
        the adjacent zone id, ``Δ`` off the grid, or the re-entry state
        when the move crosses into the operational region
    """
    if direction not in DIRECTIONS:
        raise UsageError(f"unknown direction {direction!r}")
    if zone in (NFZ, grid.reentry_state):
        raise UsageError(f"{zone} is not a buffer zone")
    zone = _zone_id(grid, zone)
    if zone == grid.or_zone:
        raise UsageError(f"{zone} is the operational region, not a buffer zone")
    row, col = grid.cell(zone)
    d_row, d_col = _OFFSETS[direction]
    target = grid.zone_at(row + d_row, col + d_col)
    if target is None:
        return NFZ
    if target == grid.or_zone:
        return grid.reentry_state
    return str(target)


def build_navigation(grid=DEFAULT_MAP):
    """G_M: zones, the re-entry border state and the no-fly sink"""
    buffer = [str(z) for z in grid.buffer_zones]
    states = set(buffer) | {grid.or_state, grid.reentry_state, NFZ}
    alphabet = (_controllable(*(move(d) for d in DIRECTIONS))
                + _controllable(*(search(d) for d in DIRECTIONS))
                + _uncontrollable(grid.reentry_event)
                + _uncontrollable(LOSS, observable=False))
    triples = []
    for zone in buffer:
        for d in DIRECTIONS:
            triples.append((zone, move(d), neighbor(grid, zone, d)))
            triples.append((zone, search(d), zone))
    triples.append((grid.reentry_state, grid.reentry_event, grid.or_state))
    for zone in sorted(grid.unsafe_zones):
        triples.append((str(zone), LOSS, NFZ))
    return Automaton.from_triples("G_M", states, alphabet, triples,
                                  initial=grid.or_state, marked={grid.or_state},
                                  unsafe={NFZ})


def build_exploration():
    """Roam a zone, observe a border, await a move or return decision"""
    alphabet = (_controllable(*(search(d) for d in DIRECTIONS))
                + _uncontrollable(*(border(d) for d in DIRECTIONS))
                + _controllable(*(move(d) for d in DIRECTIONS))
                + _controllable(RETURN))
    triples = []
    for d in DIRECTIONS:
        triples.append((ROAMING, search(d), OBSERVING))
        triples.append((OBSERVING, border(d), AWAITING_MOVE))
        triples.append((AWAITING_MOVE, move(d), ROAMING))
    triples.append((AWAITING_MOVE, RETURN, ROAMING))
    return Automaton.from_triples("exploration", {ROAMING, OBSERVING, AWAITING_MOVE},
                                  alphabet, triples, initial=ROAMING,
                                  marked={ROAMING})


def build_scanning():
    """
    Border checks in the order north, east, south, west.

    A move is only possible toward the border just scanned and always
    resets the scan; after west the order wraps to north.
    """
    alphabet = (_controllable(*(search(d) for d in DIRECTIONS))
                + _uncontrollable(*(border(d) for d in DIRECTIONS))
                + _controllable(*(move(d) for d in DIRECTIONS)))
    states = {IDLE} | {scan_state(d) for d in DIRECTIONS}
    triples = [(IDLE, search("n"), scan_state("n"))]
    for current, following in zip(DIRECTIONS, DIRECTIONS[1:] + DIRECTIONS[:1]):
        triples.append((scan_state(current), search(following), scan_state(following)))
    for d in DIRECTIONS:
        triples.append((scan_state(d), border(d), scan_state(d)))
        triples.append((scan_state(d), move(d), IDLE))
    return Automaton.from_triples("scanning", states, alphabet, triples,
                                  initial=IDLE, marked=states)


def inner_move(subzone):
    return f"m_{subzone}"


def inner_border(subzone):
    return f"o_{subzone}"


def inner_signal(subzone):
    return f"g_{subzone.lower()}"


def build_inner(grid=DEFAULT_MAP):
    """G_O: unknown position, then the four sub-zones of the operational region"""
    alphabet = (_uncontrollable(*(inner_signal(x) for x in SUBZONES))
                + _controllable(grid.search_event)
                + _uncontrollable(*(inner_border(x) for x in SUBZONES))
                + _controllable(*(inner_move(x) for x in SUBZONES)))
    triples = []
    for x in SUBZONES:
        triples.append(("U", inner_signal(x), x))
        triples.append((x, grid.search_event, x))
        for y in SUBZONE_ADJACENCY[x]:
            triples.append((x, inner_border(y), x))
            triples.append((x, inner_move(y), y))
    return Automaton.from_triples("G_O", {"U", *SUBZONES}, alphabet, triples,
                                  initial="U", marked={grid.base_subzone})


def patrol_phase(subzone, phase):
    return f"{subzone}.{phase}"


def _patrol_supervisor(name, route, grid):
    """Search, observe the next border, move there; once per station of ``route``"""
    alphabet = (_uncontrollable(*(inner_signal(x) for x in SUBZONES))
                + _controllable(grid.search_event)
                + _uncontrollable(*(inner_border(x) for x in SUBZONES))
                + _controllable(*(inner_move(x) for x in SUBZONES)))
    states = {"start"}
    triples = []
    for x in SUBZONES:
        triples.append(("start", inner_signal(x), patrol_phase(x, "search")))
    for x, following in zip(route, route[1:] + route[:1]):
        states |= {patrol_phase(x, p) for p in ("search", "observe", "move")}
        triples.append((patrol_phase(x, "search"), grid.search_event,
                        patrol_phase(x, "observe")))
        triples.append((patrol_phase(x, "observe"), inner_border(following),
                        patrol_phase(x, "move")))
        triples.append((patrol_phase(x, "move"), inner_move(following),
                        patrol_phase(following, "search")))
    return Automaton.from_triples(name, states, alphabet, triples,
                                  initial="start", marked=states)


def build_nominal_supervisor(grid=DEFAULT_MAP):
    """Cyclic patrol A -> B -> C -> D -> A"""
    return _patrol_supervisor("nominal", NOMINAL_ROUTE, grid)


def build_reverse_patrol_supervisor(grid=DEFAULT_MAP):
    """Regrouping variant: patrol D -> C -> B -> A against the swarm"""
    return _patrol_supervisor("reverse_patrol", REVERSE_ROUTE, grid)


def build_secondary_supervisor(grid=DEFAULT_MAP):
    """Wait for the swarm: alternate a local search and a return"""
    alphabet = _controllable(grid.search_event, RETURN)
    triples = [("P", grid.search_event, "Q"), ("Q", RETURN, "P")]
    return Automaton.from_triples("secondary", {"P", "Q"}, alphabet, triples,
                                  initial="P", marked={"P", "Q"})


def build_mode_switcher(grid=DEFAULT_MAP):
    """NOM --desync--> REC1 --b_13--> REC2 --regroup--> NOM"""
    alphabet = _uncontrollable(DESYNC, grid.reentry_event, REGROUP)
    triples = [(NOMINAL, DESYNC, PRIMARY),
               (PRIMARY, grid.reentry_event, SECONDARY),
               (SECONDARY, REGROUP, NOMINAL)]
    return Automaton.from_triples("mode_switcher", {NOMINAL, PRIMARY, SECONDARY},
                                  alphabet, triples, initial=NOMINAL,
                                  marked={NOMINAL})


def validate_mission(mission):
    """
    Re-check the structural invariants of a mission model.

    Raises:
    -------
    ModelError
        naming the violated invariant
    """
    grid = mission.map
    nav = mission.navigation
    if nav.unsafe != {NFZ}:
        raise ModelError(f"Δ must be the only unsafe state of G_M, got "
                         f"{sorted(map(str, nav.unsafe))}")
    expected = {str(z) for z in grid.buffer_zones} | {
        grid.or_state, grid.reentry_state, NFZ}
    if nav.states != expected:
        raise ModelError("G_M states do not match the grid map")

    losses = {q for (q, e) in nav.transitions if e == LOSS}
    if any(nav.transitions[(q, LOSS)] != NFZ for q in losses):
        raise ModelError("loss transitions must lead to Δ")
    if {str(z) for z in grid.unsafe_zones} - losses:
        raise ModelError("unsafe_zones without loss transitions")
    if losses - {str(z) for z in grid.unsafe_zones}:
        raise ModelError("loss transitions outside unsafe_zones")

    for zone in grid.buffer_zones:
        q = str(zone)
        moves = [d for d in DIRECTIONS if (q, move(d)) in nav.transitions]
        loops = [d for d in DIRECTIONS if nav.transitions.get((q, search(d))) == q]
        if len(moves) != 4 or len(loops) != 4:
            raise ModelError(f"zone {zone} needs four moves and four search "
                             f"self-loops in G_M")
    if nav.enabled_at(grid.or_state) or nav.enabled_at(NFZ):
        raise ModelError("the operational region and Δ must have no outgoing "
                         "transitions in G_M")
    if nav.enabled_at(grid.reentry_state) != {grid.reentry_event}:
        raise ModelError(f"{grid.reentry_state} must only enable {grid.reentry_event}")

    if mission.inner.marked != {grid.base_subzone}:
        raise ModelError("G_O must mark exactly the base sub-zone")
    # the remaining attribute checks happen while composing
    CompositeModel((mission.inner, mission.nominal, mission.secondary,
                    mission.reverse_patrol, mission.mode_switcher,
                    mission.navigation, mission.exploration, mission.scanning))


@dataclass(frozen=True)
class MissionModel:
    map: GridMap
    navigation: Automaton
    exploration: Automaton
    scanning: Automaton
    inner: Automaton
    nominal: Automaton
    secondary: Automaton
    reverse_patrol: Automaton
    mode_switcher: Automaton
    composite: CompositeModel = field(init=False, repr=False, compare=False)
    nominal_estimate: StateEstimate = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        validate_mission(self)
        object.__setattr__(self, "composite", CompositeModel(
            (self.navigation, self.exploration, self.scanning)))
        object.__setattr__(self, "nominal_estimate", StateEstimate.of(
            {self.map.or_state}, {ROAMING}, {IDLE}))

    def __hash__(self):
        return hash(self.map)

    @property
    def automata(self):
        """Every automaton by name, in file order"""
        return {a.name: a for a in (
            self.navigation, self.exploration, self.scanning, self.inner,
            self.nominal, self.secondary, self.reverse_patrol, self.mode_switcher)}

    def zone_estimate(self, zones, exploration=ROAMING, scanning=IDLE):
        """Post-desynchronization estimate ``({zones},{R},{I})``"""
        cell = set()
        for zone in zones:
            if zone in (NFZ, self.map.reentry_state):
                cell.add(zone)
                continue
            zone_id = _zone_id(self.map, zone)
            if zone_id == self.map.or_zone:
                raise UsageError(f"{zone} is the operational region, not a buffer zone")
            cell.add(str(zone_id))
        if not cell:
            raise UsageError("an estimate needs at least one zone")
        estimate = StateEstimate.of(cell, {exploration}, {scanning})
        check_estimate(self.composite, estimate)
        return estimate


def build_mission(grid=DEFAULT_MAP):
    """Every automaton of the mission over ``grid``"""
    mission = MissionModel(
        map=grid,
        navigation=build_navigation(grid),
        exploration=build_exploration(),
        scanning=build_scanning(),
        inner=build_inner(grid),
        nominal=build_nominal_supervisor(grid),
        secondary=build_secondary_supervisor(grid),
        reverse_patrol=build_reverse_patrol_supervisor(grid),
        mode_switcher=build_mode_switcher(grid),
    )
    logger.debug("mission built for %dx%d map, OR=%d, unsafe=%s", grid.rows,
                 grid.cols, grid.or_zone, sorted(grid.unsafe_zones))
    return mission


def nominal_closed_loop(mission):
    """G_O under the nominal supervisor"""
    return sync_product([mission.inner, mission.nominal])


def mode_switched_closed_loop(mission):
    """Mode switcher composed with G_O under the secondary supervisor"""
    return sync_product([mission.mode_switcher, mission.inner, mission.secondary])
