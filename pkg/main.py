"""
SwarmRecover - Main Application

Command-line entry point: synthesis, simulation, the trial
harness, verification and DOT export.

Exit codes:
    0  success
    1  I/O, parse, contract or configuration error
    2  unrecoverable (synth: no solution, simulate: stalled run)
    3  synthesis aborted on the node budget
    4  verification failure (verdict mismatch, failed check, unsafe run)
"""

import argparse
import itertools
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor

from modules.automata import cosimulate, trim_nonblocking
from modules.errors import (OracleInconclusive, SimulationInvariantError,
                            SwarmRecoverError, SynthesisAborted)
from modules.mission import (DEFAULT_MAP, IDLE, ROAMING, build_mission,
                             mode_switched_closed_loop, nominal_closed_loop)
from modules.rbts import (DECISION_ORDERS, EXPLORATIONS, OracleSolver, SynthConfig,
                          build_rbts, check_rbts, default_budget, initial_y)
from modules.supervisor import check_supervisor, extract_supervisor, synthesize_recovery
from modules.swarm_sim import (LOSS_POLICIES, REGROUP_STRATEGIES, STALLED, Durations,
                               SimConfig, run_trial)
from utils.dot_export import export_dot
from utils.model_io import (load_model, parse_estimate, parse_zone_list, save_text,
                            serialize_supervisor)
from utils.report_generator import (generate_synthesis_report, generate_table1_report,
                                    generate_trial_report, generate_verify_report,
                                    save_report)
from utils.trace import write_trace

logger = logging.getLogger("swarmrecover")

EXIT_OK, EXIT_ERROR, EXIT_UNRECOVERABLE, EXIT_ABORTED, EXIT_FAILED = range(5)

# (trial, estimate, start zones, expected verdict)
TRIAL_TABLE = [
    (1, (1, 2), (1, 2), "recoverable"),
    (2, (1, 6, 11), (1, 6, 11), "recoverable"),
    (3, (1, 2, 6, 7), (1, 2, 6, 7), "recoverable"),
    (4, (1, 2, 3, 4, 5), (1,), "unrecoverable"),
]
TRIAL3_ROUTE = ["m_e", "m_e", "m_s", "m_n", "m_s", "m_s"]
EXHAUSTIVE_LIMIT = 10


def _mission(args):
    if args.map:
        return load_model(args.map)
    return build_mission(DEFAULT_MAP)


def _synth_config(args, order=None):
    return SynthConfig(exploration=args.explore,
                       decision_order=order or args.order,
                       seed=args.seed,
                       budget=args.budget or default_budget())


def _estimate(mission, text):
    if text.strip().startswith("("):
        return parse_estimate(text)
    return mission.zone_estimate(parse_zone_list(text))


def cmd_synth(args):
    mission = _mission(args)
    raw = _estimate(mission, args.estimate)
    started = time.perf_counter()
    plan = synthesize_recovery(mission, raw, _synth_config(args))
    elapsed = time.perf_counter() - started

    if args.dot and plan.rbts is not None:
        save_text(export_dot(plan.rbts), args.dot, "DOT")
    if args.report:
        save_report(generate_synthesis_report(raw, plan, elapsed), args.report)
    if not plan.recoverable:
        print(f"{raw}: {plan.verdict}")
        return EXIT_UNRECOVERABLE
    print(generate_synthesis_report(raw, plan, timestamp=False))
    if args.output:
        save_text(serialize_supervisor(plan.supervisor), args.output, "Supervisor")
    return EXIT_OK


def _sim_config(args, mission, **overrides):
    durations = Durations.parse(args.durations) if args.durations else Durations()
    snapshot_times = [float(t) for t in args.snapshots.split(",")] if args.snapshots else ()
    fields = dict(
        map=mission.map,
        n_drones=args.drones,
        durations=durations,
        loss_policy=args.loss,
        loss_probability=args.loss_probability,
        seed=args.seed,
        estimate=tuple(parse_zone_list(args.estimate)),
        start_zone=args.start,
        faulty_drone=args.drone,
        synth=_synth_config(args),
        regroup_strategy=args.regroup,
        snapshot_times=snapshot_times,
    )
    fields.update(overrides)
    return SimConfig(**fields)


def cmd_simulate(args):
    mission = _mission(args)
    config = _sim_config(args, mission)
    trial = run_trial(config)

    if args.trace:
        write_trace(trial.trace, args.trace)
    print(generate_trial_report(config, trial, timestamp=False))
    if args.report:
        save_report(generate_trial_report(config, trial), args.report)
    if args.figure or args.snapshot_figure:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        from utils.visualization import plot_recovery_path, plot_snapshots
        if args.figure:
            plt.close(plot_recovery_path(config.map, trial.zone_path,
                                         save_path=args.figure))
        if args.snapshot_figure and trial.snapshots:
            plt.close(plot_snapshots(config.map, trial.snapshots, trial.drone,
                                     save_path=args.snapshot_figure))

    if trial.status == STALLED:
        return EXIT_UNRECOVERABLE
    if trial.status != "recovered":
        return EXIT_FAILED
    return EXIT_OK


def _table1_row(job):
    trial_no, estimate, start, expected, config = job
    trial = run_trial(config)
    return {
        "trial": trial_no,
        "estimate": "{" + ",".join(map(str, estimate)) + "}",
        "start": start,
        "expected": expected,
        "verdict": "recoverable" if trial.recoverable else "unrecoverable",
        "moves": len(trial.move_sequence),
        "move_sequence": trial.move_sequence,
        "primary": trial.primary_recovery_time,
        "secondary": trial.secondary_recovery_time,
    }


def run_table1(mission, synth, durations, seed=0, workers=4, n_drones=10):
    """
    Run every trial row plus the trial-3 ordering sweep.

    Returns the rows in table order and the sweep as
    ``{order: (moves, reproduces_route)}``.
    """
    def config(estimate, start, synth_config):
        return SimConfig(map=mission.map, n_drones=n_drones, durations=durations,
                         seed=seed, estimate=estimate, start_zone=start,
                         synth=synth_config)

    jobs = [(trial_no, estimate, start, expected, config(estimate, start, synth))
            for trial_no, estimate, starts, expected in TRIAL_TABLE for start in starts]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(_table1_row, jobs))

    ordering = {}
    for order in DECISION_ORDERS:
        ordered = SynthConfig(synth.exploration, order, synth.seed, synth.budget)
        moves = run_trial(config((1, 2, 6, 7), 1, ordered)).move_sequence
        ordering[order] = (moves, moves == TRIAL3_ROUTE)
    return rows, ordering


def cmd_table1(args):
    mission = _mission(args)
    durations = Durations.parse(args.durations) if args.durations else Durations.uniform()
    rows, ordering = run_table1(mission, _synth_config(args), durations,
                                seed=args.seed, workers=args.workers)
    print(generate_table1_report(rows, ordering, timestamp=False))
    if args.report:
        save_report(generate_table1_report(rows, ordering), args.report)
    if any(row["verdict"] != row["expected"] for row in rows):
        return EXIT_FAILED
    return EXIT_OK


def _verify_estimates(mission):
    zones = mission.map.buffer_zones
    if len(zones) <= EXHAUSTIVE_LIMIT:
        sizes = range(1, len(zones) + 1)
    else:
        sizes = (1, 2)
    for size in sizes:
        for combo in itertools.combinations(zones, size):
            yield mission.zone_estimate(combo)


def verify_mission(mission, synth, steps=200, seed=0, oracle_budget=None):
    """
    Every check of the verify command.

    Returns:
    --------
    list of (name, status, detail)
    """
    checks = []
    for name, build in (("nominal closed loop nonblocking", nominal_closed_loop),
                        ("mode-switched loop nonblocking", mode_switched_closed_loop)):
        _, ok = trim_nonblocking(build(mission))
        checks.append((name, "pass" if ok else "fail", ""))

    model = mission.composite
    unsound = []
    for zone in mission.map.buffer_zones:
        index = cosimulate(model, steps, seed + zone, start=(str(zone), ROAMING, IDLE))
        if index is not None:
            unsound.append(f"zone {zone} at step {index}")
    checks.append(("estimate soundness co-simulation",
                   "fail" if unsound else "pass", ", ".join(unsound)))

    engine = {}
    structural = []
    for raw in _verify_estimates(mission):
        y0 = initial_y(mission, raw)
        if y0 is None:
            engine[raw] = (None, False)
            continue
        rbts = build_rbts(mission, y0, synth)
        engine[raw] = (y0, rbts.recoverable)
        problems = check_rbts(rbts)
        if rbts.recoverable:
            problems += check_supervisor(extract_supervisor(rbts))
        if problems:
            structural.append(f"{raw}: {problems[0]}")
    checks.append(("RBTS structure and strategies",
                   "fail" if structural else "pass", "; ".join(structural[:3])))

    try:
        solver = OracleSolver(mission, oracle_budget)
        roots = [y0 for y0, _ in engine.values() if y0 is not None]
        verdicts = solver.verdicts(roots)
        disagree = [str(raw) for raw, (y0, won) in engine.items()
                    if y0 is not None and verdicts[y0.estimate] != won]
        recoverable = sum(won for _, won in engine.values())
        detail = (f"{len(engine)} estimates, {recoverable} recoverable"
                  if not disagree else "disagree on " + ", ".join(disagree[:3]))
        checks.append(("engine / oracle agreement", "fail" if disagree else "pass", detail))
    except OracleInconclusive as exc:
        checks.append(("engine / oracle agreement", "inconclusive", str(exc)))
    return checks


def cmd_verify(args):
    mission = _mission(args)
    checks = verify_mission(mission, _synth_config(args), steps=args.steps,
                            seed=args.seed, oracle_budget=args.oracle_budget)
    print(generate_verify_report(checks, timestamp=False))
    if args.report:
        save_report(generate_verify_report(checks), args.report)
    if any(status == "fail" for _, status, _ in checks):
        return EXIT_FAILED
    return EXIT_OK


def cmd_export_dot(args):
    mission = _mission(args)
    if args.automaton:
        automata = mission.automata
        if args.automaton not in automata:
            print(f"Error: unknown automaton {args.automaton!r}; "
                  f"choose from {', '.join(automata)}", file=sys.stderr)
            return EXIT_ERROR
        dot = export_dot(automata[args.automaton])
    else:
        if not args.estimate:
            print("Error: export-dot needs --automaton or --estimate", file=sys.stderr)
            return EXIT_ERROR
        raw = _estimate(mission, args.estimate)
        plan = synthesize_recovery(mission, raw, _synth_config(args))
        if plan.rbts is None:
            print(f"{raw}: {plan.verdict}")
            return EXIT_UNRECOVERABLE
        dot = export_dot(plan.rbts)
    if args.output:
        save_text(dot, args.output, "DOT")
    else:
        sys.stdout.write(dot)
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--map", help="model file; a [map]-only file builds the automata")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--budget", type=int, default=None,
                        help="RBTS node budget (default: $SWARMRECOVER_BUDGET or 1000000)")
    common.add_argument("--order", choices=DECISION_ORDERS, default="prefer-move")
    common.add_argument("--explore", choices=EXPLORATIONS, default="dfs")
    common.add_argument("--report", help="also save the report to this path")

    parser = argparse.ArgumentParser(
        prog="swarmrecover",
        description="Recovery supervisor synthesis and swarm simulation")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", parents=[common], help="synthesize a recovery supervisor")
    synth.add_argument("--estimate", required=True, help='zones "1,2" or "({1,2},{R},{I})"')
    synth.add_argument("--output", help="supervisor file")
    synth.add_argument("--dot", help="RBTS DOT file")
    synth.set_defaults(func=cmd_synth)

    sim = sub.add_parser("simulate", parents=[common], help="run one fault-injection trial")
    sim.add_argument("--estimate", required=True, help='zones, e.g. "1,2"')
    sim.add_argument("--start", type=int, required=True, help="true start zone")
    sim.add_argument("--durations", help="search=2,move=6,return=2,inner=4,detection=0")
    sim.add_argument("--drones", type=int, default=10)
    sim.add_argument("--drone", type=int, default=None, help="faulty drone id")
    sim.add_argument("--loss", choices=LOSS_POLICIES, default="never")
    sim.add_argument("--loss-probability", type=float, default=0.5)
    sim.add_argument("--regroup", choices=REGROUP_STRATEGIES, default="wait")
    sim.add_argument("--trace", help="trace file (TSV)")
    sim.add_argument("--figure", help="recovery path figure")
    sim.add_argument("--snapshots", help="snapshot times in seconds, e.g. 0,30,60")
    sim.add_argument("--snapshot-figure", help="regrouping snapshots figure")
    sim.set_defaults(func=cmd_simulate)

    table = sub.add_parser("table1", parents=[common], help="run the trial table")
    table.add_argument("--durations", help="default: every action takes 1 s")
    table.add_argument("--workers", type=int, default=4)
    table.set_defaults(func=cmd_table1)

    verify = sub.add_parser("verify", parents=[common], help="invariant and oracle checks")
    verify.add_argument("--steps", type=int, default=200, help="co-simulation steps")
    verify.add_argument("--oracle-budget", type=int, default=None)
    verify.set_defaults(func=cmd_verify)

    dot = sub.add_parser("export-dot", parents=[common], help="DOT of an automaton or RBTS")
    dot.add_argument("--automaton", help="automaton name, e.g. G_M")
    dot.add_argument("--estimate", help="build the RBTS for this estimate")
    dot.add_argument("--output", help="DOT file (default: stdout)")
    dot.set_defaults(func=cmd_export_dot)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SynthesisAborted as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_ABORTED
    except SimulationInvariantError as exc:
        print(f"Simulation halted: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except (SwarmRecoverError, OSError, ValueError) as exc:
        logger.debug("command failed", exc_info=True)
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
