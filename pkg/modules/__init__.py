"""
SwarmRecover Modules

Automata core, mission models, RBTS synthesis, recovery supervisors
and the swarm simulator
"""

from .automata import Automaton, CompositeModel, ControlDecision, Event, StateEstimate
from .mission import DEFAULT_MAP, GridMap, MissionModel, build_grid_map, build_mission
from .rbts import RBTS, OracleSolver, SynthConfig, build_rbts, initial_y
from .supervisor import RecoverySupervisor, extract_supervisor, synthesize_recovery
from .swarm_sim import Durations, SimConfig, TrialReport, run_trial

__all__ = [
    'Automaton', 'CompositeModel', 'ControlDecision', 'Event', 'StateEstimate',
    'DEFAULT_MAP', 'GridMap', 'MissionModel', 'build_grid_map', 'build_mission',
    'RBTS', 'OracleSolver', 'SynthConfig', 'build_rbts', 'initial_y',
    'RecoverySupervisor', 'extract_supervisor', 'synthesize_recovery',
    'Durations', 'SimConfig', 'TrialReport', 'run_trial',
]
