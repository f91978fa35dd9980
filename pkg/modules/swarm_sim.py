"""
Swarm Simulation Module

Technique:
- Discrete-time loop (t = k * tick_period) over timed actions
- Every event class has a fixed duration; events fire when their action completes
- Nominal drones run the patrol supervisor over G_O
- The lost drone runs the synthesized recovery supervisor over G_M x exploration x scanning,
  then regroups with the swarm inside the operational region
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from utils.trace import TraceRecord

from .automata import (StateEstimate, make_decision, step, sync_enabled,
                       sync_step, unobservable_reach)
from .errors import (ConfigError, ContractViolation, DesynchronizationError,
                     SimulationInvariantError, UsageError)
from .mission import (DESYNC, DIRECTIONS, ENTRY_SUBZONE, IDLE, LOSS, NFZ,
                      NOMINAL, PRIMARY, REGROUP, RETURN, ROAMING, SECONDARY,
                      SUBZONES, DEFAULT_MAP, build_mission, inner_signal,
                      patrol_phase)
from .rbts import SynthConfig, event_rank
from .supervisor import supervisor_run, synthesize_recovery

logger = logging.getLogger(__name__)

LOSS_POLICIES = ("never", "always", "probability")
REGROUP_STRATEGIES = ("wait", "reverse")

RECOVERED = "recovered"
STALLED = "stalled"
UNSAFE = "unsafe"
TIMEOUT = "timeout"

_OPPOSITE = {"n": "s", "s": "n", "e": "w", "w": "e"}
_STEP = {"n": (0.0, 1.0), "e": (1.0, 0.0), "s": (0.0, -1.0), "w": (-1.0, 0.0)}
# quadrant centers relative to the operational region's center
_QUADRANT = {"A": (-0.25, 0.25), "B": (0.25, 0.25),
             "C": (0.25, -0.25), "D": (-0.25, -0.25)}


@dataclass(frozen=True)
class Durations:
    """Seconds per action class; ``detection`` delays b_d after its search"""
    search: float = 2.0
    move: float = 6.0
    return_: float = 2.0
    inner: float = 4.0
    detection: float = 0.0

    def __post_init__(self):
        for name in ("search", "move", "return_", "inner"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not value > 0:
                raise ConfigError(f"duration {name.rstrip('_')} must be > 0, got {value!r}")
        if not isinstance(self.detection, (int, float)) or not self.detection >= 0:
            raise ConfigError(f"duration detection must be >= 0, got {self.detection!r}")

    @classmethod
    def uniform(cls, value=1.0):
        return cls(value, value, value, value)

    @classmethod
    def parse(cls, text):
        """``search=2,move=6,return=2,inner=4,detection=0``; omitted keys keep their default"""
        values = {}
        for item in filter(None, (part.strip() for part in text.split(","))):
            key, sep, raw = item.partition("=")
            key = key.strip()
            if not sep or key not in ("search", "move", "return", "inner", "detection"):
                raise ConfigError(f"bad duration item {item!r}")
            try:
                values["return_" if key == "return" else key] = float(raw)
            except ValueError:
                raise ConfigError(f"duration {key} is not a number: {raw!r}") from None
        return cls(**values)

    def of(self, event):
        """Duration of the action completing with ``event``"""
        if event == RETURN:
            return self.return_
        if _directional_border(event):
            return self.detection
        if event[:2] in ("s_", "m_") and event[2:] in DIRECTIONS:
            return self.search if event[0] == "s" else self.move
        # inner actions: a search plus a move per sub-zone
        return self.inner / 2


@dataclass(frozen=True)
class SimConfig:
    map: object = DEFAULT_MAP
    n_drones: int = 10
    tick_period: float = 1 / 240
    durations: Durations = field(default_factory=Durations)
    loss_policy: str = "never"
    loss_probability: float = 0.5
    seed: int = 0
    estimate: tuple = (1, 2)
    start_zone: int = 1
    faulty_drone: int | None = None
    synth: SynthConfig = field(default_factory=SynthConfig)
    regroup_strategy: str = "wait"
    max_time: float = 3600.0
    stall_horizon: float = 60.0
    settle_time: float | None = None
    snapshot_times: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "estimate", tuple(self.estimate))
        object.__setattr__(self, "snapshot_times",
                           tuple(sorted(float(t) for t in self.snapshot_times)))
        if not isinstance(self.n_drones, int) or self.n_drones < 1:
            raise ConfigError(f"n_drones must be a positive integer, got {self.n_drones!r}")
        if not self.tick_period > 0:
            raise ConfigError(f"tick_period must be > 0, got {self.tick_period!r}")
        if self.loss_policy not in LOSS_POLICIES:
            raise ConfigError(f"loss_policy must be one of {LOSS_POLICIES}, "
                              f"got {self.loss_policy!r}")
        if not 0.0 <= self.loss_probability <= 1.0:
            raise ConfigError(f"loss_probability must lie in [0, 1], "
                              f"got {self.loss_probability!r}")
        if self.regroup_strategy not in REGROUP_STRATEGIES:
            raise ConfigError(f"regroup_strategy must be one of {REGROUP_STRATEGIES}, "
                              f"got {self.regroup_strategy!r}")
        if not self.estimate:
            raise ConfigError("the trial estimate needs at least one zone")
        if str(self.start_zone) not in {str(z) for z in self.estimate}:
            raise ConfigError(f"start zone {self.start_zone} is not in the estimate "
                              f"{list(self.estimate)}")
        if self.faulty_drone is not None and not 0 <= self.faulty_drone < self.n_drones:
            raise ConfigError(f"faulty_drone must lie in [0, {self.n_drones}), "
                              f"got {self.faulty_drone}")
        for label in ("max_time", "stall_horizon"):
            if not getattr(self, label) > 0:
                raise ConfigError(f"{label} must be > 0")
        if self.settle_time is not None and self.settle_time < 0:
            raise ConfigError("settle_time must be >= 0")

    def ticks(self, seconds):
        """Whole ticks covering ``seconds``"""
        return max(1, math.ceil(seconds / self.tick_period - 1e-9))


@dataclass
class Action:
    event: str
    start_tick: int
    end_tick: int
    origin: np.ndarray
    target: np.ndarray


@dataclass
class DroneState:
    id: int
    mode: str = NOMINAL
    zone: str = ""
    inner: str = "U"
    patrol: str | None = None
    exploration: str = ROAMING
    scanning: str = IDLE
    position: np.ndarray = field(default_factory=lambda: np.zeros(2))
    offset: np.ndarray = field(default_factory=lambda: np.zeros(2))
    action: Action | None = None
    stalled: bool = False


@dataclass
class SimState:
    config: SimConfig
    mission: object
    drones: list
    rng: np.random.Generator
    tick: int = 0
    trace: list = field(default_factory=list)
    lost: int | None = None
    plan: object = None
    runtime: object = None
    estimate: StateEstimate | None = None
    fault_tick: int | None = None
    reentry_tick: int | None = None
    regroup_tick: int | None = None
    move_sequence: list = field(default_factory=list)
    zone_path: list = field(default_factory=list)
    mode_trajectory: list = field(default_factory=lambda: [NOMINAL])
    snapshots: dict = field(default_factory=dict)
    unsafe: bool = False

    @property
    def time(self):
        return round(self.tick * self.config.tick_period, 6)

    @property
    def lost_drone(self):
        return None if self.lost is None else self.drones[self.lost]


@dataclass
class TrialReport:
    recoverable: bool
    verdict: str
    status: str
    drone: int
    move_sequence: list
    trace: list
    primary_recovery_time: float | None
    secondary_recovery_time: float | None
    zones_visited: Counter
    zone_path: list
    mode_trajectory: list
    snapshots: dict

    @property
    def controllable_after_fault(self):
        """Controllable events the lost drone executed while in primary recovery"""
        return [r.event for r in self.trace
                if r.drone == self.drone and r.mode == PRIMARY
                and (r.event.startswith(("m_", "s_")) or r.event == RETURN)]


def zone_center(grid, zone):
    """(x, y) of a zone center in map units; y grows northwards"""
    row, col = grid.cell(int(zone))
    return np.array([col - 0.5, grid.rows - row + 0.5])


def subzone_center(grid, subzone):
    return zone_center(grid, grid.or_zone) + np.array(_QUADRANT[subzone])


def _swarm_offsets(n):
    """Evenly spaced layout inside one quadrant"""
    if n == 1:
        return np.zeros((1, 2))
    side = math.ceil(math.sqrt(n))
    ticks = np.linspace(-0.18, 0.18, side)
    grid = np.array([(x, y) for y in ticks[::-1] for x in ticks])
    return grid[:n]


def _record(sim, drone, event):
    estimate = "" if drone.mode == NOMINAL else str(sim.estimate)
    sim.trace.append(TraceRecord(sim.time, drone.id, event, drone.mode, estimate))


def _switch_mode(sim, drone, event):
    mode = step(sim.mission.mode_switcher, drone.mode, event)
    if mode is None:
        raise SimulationInvariantError(f"drone {drone.id}: {event} undefined in {drone.mode}")
    drone.mode = mode
    sim.mode_trajectory.append(mode)
    logger.info("t=%.3f drone %d: %s -> mode %s", sim.time, drone.id, event, drone.mode)


def init_sim(config):
    """
    Swarm at rest in the base sub-zone, every drone under the nominal supervisor.

    Parameters:
    -----------
    config : SimConfig

    Returns:
    --------
    SimState
    """
    if not isinstance(config, SimConfig):
        raise ConfigError(f"expected a SimConfig, got {type(config).__name__}")
    mission = build_mission(config.map)
    grid = config.map
    base = grid.base_subzone
    signal = inner_signal(base)
    offsets = _swarm_offsets(config.n_drones)
    drones = []
    for i in range(config.n_drones):
        drone = DroneState(i, zone=grid.or_state, offset=offsets[i])
        drone.inner = step(mission.inner, "U", signal)
        drone.patrol = step(mission.nominal, "start", signal)
        drone.position = subzone_center(grid, base) + drone.offset
        drones.append(drone)
    sim = SimState(config, mission, drones, np.random.default_rng(config.seed))
    for drone in drones:
        _record(sim, drone, signal)
    for drone in drones:
        _settle(sim, drone)
    return sim


# per-drone controller


def _controller(sim, drone):
    """(components, concrete state) the drone currently runs, or None"""
    mission = sim.mission
    if drone.mode == PRIMARY:
        return mission.composite.components, (drone.zone, drone.exploration, drone.scanning)
    if drone.mode == SECONDARY and sim.config.regroup_strategy == "wait":
        return (mission.inner, mission.secondary), (drone.inner, drone.patrol)
    if drone.mode == SECONDARY:
        return (mission.inner, mission.reverse_patrol), (drone.inner, drone.patrol)
    return (mission.inner, mission.nominal), (drone.inner, drone.patrol)


def _enabled(sim, drone):
    components, concrete = _controller(sim, drone)
    events = sync_enabled(components, concrete)
    if drone.mode == SECONDARY and sim.config.regroup_strategy == "wait":
        # a waiting drone stays put: only the secondary supervisor's own events
        waiting = sim.mission.secondary.events.keys() | {
            inner_signal(x) for x in SUBZONES}
        return events & waiting
    if drone.mode != PRIMARY:
        return events
    if drone.stalled or sim.runtime is None or sim.runtime.decision is None:
        return frozenset()
    return (events & sim.runtime.decision.enabled) - {LOSS}


def _settle(sim, drone):
    """Fire pending uncontrollable observations, then schedule the next action"""
    if sim.unsafe:
        return
    while drone.action is None:
        events = _enabled(sim, drone)
        if not events:
            if drone.mode == PRIMARY and not drone.stalled and sim.runtime is not None \
                    and not sim.runtime.goal_reached:
                raise SimulationInvariantError(
                    f"drone {drone.id}: no event feasible at "
                    f"{(drone.zone, drone.exploration, drone.scanning)} under "
                    f"{sim.runtime.decision.label(sim.mission.composite)}")
            return
        controllable = _controllable_events(sim.mission)
        immediate = sorted(e for e in events if e not in controllable)
        if immediate:
            event = immediate[0]
            if _directional_border(event) and sim.config.durations.detection > 0:
                # border observed once the detection delay has run
                _schedule(sim, drone, event)
            else:
                _fire(sim, drone, event)
            continue
        event = min(events, key=event_rank)
        _schedule(sim, drone, event)


def _directional_border(event):
    return event[:2] == "b_" and event[2:] in DIRECTIONS


@lru_cache(maxsize=16)
def _controllable_events(mission):
    return frozenset(n for a in mission.automata.values()
                     for n, ev in a.events.items() if ev.controllable)


def _schedule(sim, drone, event):
    config = sim.config
    duration = config.ticks(config.durations.of(event))
    origin = drone.position.copy()
    target = origin
    if event.startswith("m_"):
        suffix = event[2:]
        if suffix in DIRECTIONS and drone.mode == PRIMARY:
            target = origin + np.array(_STEP[suffix])
        elif suffix in SUBZONES:
            target = subzone_center(config.map, suffix) + drone.offset
    drone.action = Action(event, sim.tick, sim.tick + duration, origin, target)


def drone_position(sim, drone):
    """Interpolated position: an action in progress heads for the shared border"""
    action = drone.action
    if action is None or action.end_tick == action.start_tick:
        return drone.position.copy()
    frac = (sim.tick - action.start_tick) / (action.end_tick - action.start_tick)
    frac = min(max(frac, 0.0), 1.0)
    return action.origin + 0.5 * frac * (action.target - action.origin)


def _fire(sim, drone, event, action=None):
    """Execute ``event`` for ``drone`` at the current tick"""
    if drone.mode == PRIMARY:
        _fire_lost(sim, drone, event, action)
        return
    components, concrete = _controller(sim, drone)
    successor = sync_step(components, concrete, event)
    if successor is None:
        raise SimulationInvariantError(f"drone {drone.id}: {event} infeasible at {concrete}")
    drone.inner, drone.patrol = successor
    if event.startswith("m_") or event.startswith("g_"):
        drone.position = subzone_center(sim.config.map, drone.inner) + drone.offset
    _record(sim, drone, event)


def _fire_lost(sim, drone, event, action):
    mission = sim.mission
    model = mission.composite
    runtime = sim.runtime
    concrete = (drone.zone, drone.exploration, drone.scanning)
    if runtime is None or runtime.decision is None or event not in runtime.decision.enabled:
        raise SimulationInvariantError(
            f"drone {drone.id}: plant emitted {event} outside the current decision")
    successor = sync_step(model.components, concrete, event)
    if successor is None:
        raise SimulationInvariantError(f"drone {drone.id}: {event} infeasible at {concrete}")
    try:
        runtime.step(event)
    except DesynchronizationError as exc:
        raise SimulationInvariantError(str(exc)) from exc
    drone.zone, drone.exploration, drone.scanning = successor
    sim.estimate = runtime.estimate
    if not sim.estimate.contains(successor):
        raise SimulationInvariantError(
            f"estimate {sim.estimate} lost track of drone {drone.id} at {successor}")

    if event.startswith("m_"):
        sim.move_sequence.append(event)
        if drone.zone == mission.map.reentry_state:
            # parked on the border it is about to cross
            drone.position = action.origin + 0.5 * (action.target - action.origin)
        else:
            drone.position = zone_center(mission.map, drone.zone)
            sim.zone_path.append(drone.zone)
    if event == mission.map.reentry_event:
        _reenter(sim, drone)
        return
    _record(sim, drone, event)
    if event.startswith("m_"):
        _maybe_lose(sim, drone)


def _reenter(sim, drone):
    """b_13: switch to secondary recovery inside the entry sub-zone"""
    mission = sim.mission
    grid = mission.map
    sim.reentry_tick = sim.tick
    sim.zone_path.append(grid.or_state)
    _switch_mode(sim, drone, grid.reentry_event)
    _record(sim, drone, grid.reentry_event)
    last_move = sim.move_sequence[-1][2:] if sim.move_sequence else "s"
    subzone = ENTRY_SUBZONE[_OPPOSITE[last_move]]
    drone.inner = "U"
    drone.patrol = (mission.secondary.initial if sim.config.regroup_strategy == "wait"
                    else mission.reverse_patrol.initial)
    _fire(sim, drone, inner_signal(subzone))
    logger.info("t=%.3f drone %d re-entered in sub-zone %s", sim.time, drone.id, subzone)


def _maybe_lose(sim, drone):
    """Apply the loss policy when the drone sits in an unsafe zone"""
    grid = sim.mission.map
    if not drone.zone.isdigit() or int(drone.zone) not in grid.unsafe_zones:
        return
    policy = sim.config.loss_policy
    if policy == "never":
        return
    if policy == "probability" and not sim.rng.random() < sim.config.loss_probability:
        return
    drone.zone = NFZ
    drone.action = None
    sim.unsafe = True
    _record(sim, drone, LOSS)
    logger.warning("t=%.3f drone %d lost in the no-fly zone", sim.time, drone.id)


def _complete(sim, drone):
    action, drone.action = drone.action, None
    _fire(sim, drone, action.event, action)


def inject_fault(sim, drone_id, true_zone, estimate):
    """
    Desynchronize one drone into the buffer zone and start its recovery.

    Parameters:
    -----------
    sim : SimState
    drone_id : int
    true_zone : int or str
        where the drone actually is
    estimate : StateEstimate or iterable of zones
        what the supervisor is told

    Returns:
    --------
    SimState

    Raises:
    -------
    ContractViolation
        when ``true_zone`` lies outside the estimate, the drone is not
        nominal, or another drone is already recovering
    """
    mission = sim.mission
    model = mission.composite
    if not 0 <= drone_id < len(sim.drones):
        raise UsageError(f"unknown drone {drone_id}")
    drone = sim.drones[drone_id]
    if drone.mode != NOMINAL:
        raise ContractViolation(f"drone {drone_id} is not in nominal mode")
    if sim.lost is not None:
        raise ContractViolation(f"drone {sim.lost} is already recovering")
    raw = estimate if isinstance(estimate, StateEstimate) else mission.zone_estimate(estimate)
    zone = str(true_zone)
    concrete = (zone, ROAMING, IDLE)
    if not raw.contains(concrete):
        raise ContractViolation(f"true state {concrete} lies outside the estimate {raw}")

    sim.lost = drone_id
    sim.fault_tick = sim.tick
    drone.action = None
    drone.zone, drone.exploration, drone.scanning = concrete
    drone.inner, drone.patrol = "U", None
    drone.position = zone_center(mission.map, zone)
    sim.zone_path.append(zone)
    sim.estimate = unobservable_reach(model, raw, make_decision(model))
    _switch_mode(sim, drone, DESYNC)
    _record(sim, drone, DESYNC)

    sim.plan = synthesize_recovery(mission, raw, sim.config.synth)
    if sim.plan.recoverable:
        sim.runtime = supervisor_run(sim.plan.supervisor, mission)
        sim.estimate = sim.runtime.estimate
    else:
        drone.stalled = True
        logger.info("drone %d stalls: %s for %s", drone_id, sim.plan.verdict, raw)
    _maybe_lose(sim, drone)
    _settle(sim, drone)
    return sim


def regroup_check(sim, drone_id):
    """
    True when the swarm occupies the recovered drone's sub-zone.

    Raises:
    -------
    UsageError
        unless the drone is in secondary recovery
    """
    drone = sim.drones[drone_id]
    if drone.mode != SECONDARY:
        raise UsageError(f"drone {drone_id} is in {drone.mode}, not {SECONDARY}")
    leader = _leader(sim, drone)
    return leader is None or leader.inner == drone.inner


def _leader(sim, exclude):
    """First nominal drone other than ``exclude``; the swarm moves in lockstep"""
    for drone in sim.drones:
        if drone.mode == NOMINAL and drone is not exclude:
            return drone
    return None


def _regroup(sim, drone):
    mission = sim.mission
    sim.regroup_tick = sim.tick
    _switch_mode(sim, drone, REGROUP)
    leader = _leader(sim, drone)
    if leader is not None:
        # adopt the swarm's phase
        drone.patrol = leader.patrol
        drone.action = None
        if leader.action is not None:
            action = leader.action
            target = action.target - leader.offset + drone.offset
            drone.action = Action(action.event, action.start_tick, action.end_tick,
                                  drone.position.copy(), target)
    else:
        drone.patrol = patrol_phase(drone.inner, "search")
        drone.action = None
    if drone.patrol not in mission.nominal.states:
        raise SimulationInvariantError(f"drone {drone.id} cannot resume at {drone.patrol}")
    _record(sim, drone, REGROUP)
    _settle(sim, drone)


def _snapshot(sim):
    return np.array([drone_position(sim, d) for d in sim.drones])


def _take_snapshots(sim):
    for t in sim.config.snapshot_times:
        if t in sim.snapshots:
            continue
        if t <= 0 or sim.tick >= sim.config.ticks(t):
            sim.snapshots[t] = _snapshot(sim)


def tick(sim):
    """
    Advance one tick.

    Returns:
    --------
    list of TraceRecord
        events emitted during this tick
    """
    sim.tick += 1
    emitted_from = len(sim.trace)
    for drone in sim.drones:
        if sim.unsafe:
            break
        if drone.action is not None and drone.action.end_tick <= sim.tick:
            _complete(sim, drone)
            _settle(sim, drone)
    lost = sim.lost_drone
    if lost is not None and lost.mode == SECONDARY and not sim.unsafe \
            and regroup_check(sim, lost.id):
        _regroup(sim, lost)
    _take_snapshots(sim)
    return sim.trace[emitted_from:]


def _next_tick(sim, deadline):
    ends = [d.action.end_tick for d in sim.drones if d.action is not None]
    shots = [sim.config.ticks(t) for t in sim.config.snapshot_times
             if t not in sim.snapshots and t > 0]
    candidates = [t for t in ends + shots + [deadline] if t > sim.tick]
    return min(candidates) if candidates else sim.tick + 1


def advance(sim, deadline):
    """Jump straight to the tick before the next completion, then tick"""
    sim.tick = _next_tick(sim, deadline) - 1
    return tick(sim)


def _settle_ticks(sim):
    config = sim.config
    settle = config.settle_time
    if settle is None:
        settle = 4 * config.durations.inner
    return config.ticks(settle) if settle > 0 else 0


def run_trial(config):
    """
    One fault-injection trial from start to verdict.

    Parameters:
    -----------
    config : SimConfig

    Returns:
    --------
    TrialReport
        status is ``recovered``, ``stalled``, ``unsafe`` or ``timeout``
    """
    sim = init_sim(config)
    drone_id = config.faulty_drone
    if drone_id is None:
        drone_id = int(sim.rng.integers(config.n_drones))
    _take_snapshots(sim)
    inject_fault(sim, drone_id, config.start_zone, config.estimate)
    max_tick = config.ticks(config.max_time)
    status = None
    while status is None:
        drone = sim.lost_drone
        if sim.unsafe:
            status = UNSAFE
        elif drone.stalled and sim.tick >= config.ticks(config.stall_horizon):
            status = STALLED
        elif sim.regroup_tick is not None and \
                sim.tick >= sim.regroup_tick + _settle_ticks(sim):
            status = RECOVERED
        elif sim.tick >= max_tick:
            status = TIMEOUT
        else:
            deadline = max_tick
            if drone.stalled:
                deadline = min(deadline, config.ticks(config.stall_horizon))
            if sim.regroup_tick is not None:
                deadline = min(deadline, sim.regroup_tick + _settle_ticks(sim))
            advance(sim, deadline)
    logger.info("trial %s from zone %s: %s after %.3f s", list(config.estimate),
                config.start_zone, status, sim.time)
    return _report(sim, drone_id, status)


def _report(sim, drone_id, status):
    period = sim.config.tick_period
    primary = secondary = None
    if sim.reentry_tick is not None:
        primary = round((sim.reentry_tick - sim.fault_tick) * period, 6)
    if sim.regroup_tick is not None:
        secondary = round((sim.regroup_tick - sim.reentry_tick) * period, 6)
    return TrialReport(
        recoverable=sim.plan.recoverable,
        verdict=sim.plan.verdict,
        status=status,
        drone=drone_id,
        move_sequence=list(sim.move_sequence),
        trace=list(sim.trace),
        primary_recovery_time=primary,
        secondary_recovery_time=secondary,
        zones_visited=Counter(sim.zone_path),
        zone_path=list(sim.zone_path),
        mode_trajectory=list(sim.mode_trajectory),
        snapshots=dict(sim.snapshots),
    )
