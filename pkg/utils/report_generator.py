"""
Report Generation Module

Handles:
- Synthesis and trial summaries
- The trial comparison table
- Verification reports
"""

import os
from datetime import datetime

BANNER = "=" * 70
RULE = "-" * 70


def _header(title, timestamp=True):
    report = [BANNER, f"SWARMRECOVER - {title}", BANNER]
    if timestamp:
        report.append(f"\nGenerated: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
    return report


def _seconds(value):
    return "n/a" if value is None else f"{value:.3f} s"


def get_status_label(status):
    """
    Get status label for a trial or check outcome

    Parameters:
    -----------
    status : str
        recovered / stalled / unsafe / timeout / pass / fail / inconclusive

    Returns:
    --------
    label : str
    """
    labels = {
        "recovered": "✓ RECOVERED",
        "pass": "✓ PASS",
        "stalled": "⚠️  STALLED (no solution found)",
        "inconclusive": "⚠️  INCONCLUSIVE",
        "timeout": "⚠️  TIMEOUT",
        "unsafe": "🚨 UNSAFE",
        "fail": "🚨 FAIL",
    }
    return labels.get(status, status.upper())


def reentry_summary(move_sequence):
    """Where b_13 happened relative to the move sequence"""
    if not move_sequence:
        return "no move executed"
    last = move_sequence[-1]
    ordinal = move_sequence.index(last) + 1
    first = f" (first {last})" if ordinal == len(move_sequence) else ""
    return f"after move {len(move_sequence)}: {last}{first}"


def generate_synthesis_report(raw, plan, elapsed=None, timestamp=True):
    """
    Summary of one synthesis run

    Parameters:
    -----------
    raw : StateEstimate
        Post-desynchronization estimate
    plan : RecoveryPlan
    elapsed : float, optional
        Wall-clock seconds spent synthesizing
    """
    report = _header("RECOVERY SYNTHESIS REPORT", timestamp)
    report.append(f"\nEstimate: {raw}")
    report.append(f"Verdict:  {plan.verdict}")
    if plan.rbts is not None:
        report.append(f"RBTS:     {len(plan.rbts.y_nodes)} Y-states, "
                      f"{len(plan.rbts.z_nodes)} Z-states")
    if plan.supervisor is not None:
        report.append(f"Strategy: {len(plan.supervisor.strategy)} decision states")
    if elapsed is not None:
        report.append(f"Time:     {elapsed:.3f} s")
    report.append("\n" + BANNER)
    return "\n".join(report)


def generate_trial_report(config, trial, timestamp=True):
    """
    Trial summary block

    Parameters:
    -----------
    config : SimConfig
    trial : TrialReport

    Returns:
    --------
    report : str
    """
    report = _header("TRIAL REPORT", timestamp)
    estimate = ",".join(str(z) for z in config.estimate)
    report.append(f"\nEstimate: {{{estimate}}}   Start zone: {config.start_zone}   "
                  f"Seed: {config.seed}   Drone: {trial.drone}")
    report.append("\n📊 RECOVERY SUMMARY")
    report.append(RULE)
    report.append(f"Recoverable:        {'YES ✓' if trial.recoverable else 'NO ⚠️'}")
    report.append(f"Move sequence:      {' '.join(trial.move_sequence) or '(none)'}")
    if trial.secondary_recovery_time is not None or trial.primary_recovery_time is not None:
        report.append(f"Re-entry (b_13):    {reentry_summary(trial.move_sequence)}")
    report.append(f"Primary recovery:   {_seconds(trial.primary_recovery_time)}")
    report.append(f"Secondary recovery: {_seconds(trial.secondary_recovery_time)}")
    visited = ", ".join(f"{zone}x{count}" for zone, count in sorted(
        trial.zones_visited.items(), key=lambda kv: (len(kv[0]), kv[0])))
    report.append(f"Zones visited:      {visited}")
    report.append(f"Mode trajectory:    {' -> '.join(trial.mode_trajectory)}")
    report.append(f"\nStatus: {get_status_label(trial.status)}")
    report.append("\n" + BANNER)
    return "\n".join(report)


def generate_table1_report(rows, ordering=None, timestamp=True):
    """
    Trial comparison table

    Parameters:
    -----------
    rows : list of dict
        trial, estimate, start, expected, verdict, moves, primary, secondary
    ordering : dict, optional
        decision order -> move sequence for the trial-3 ordering sweep
    """
    report = _header("RECOVERY PERFORMANCE ACROSS TRIALS", timestamp)
    report.append("")
    report.append(f"{'Trial':<6}{'Estimate':<14}{'Start':<7}{'Verdict':<16}"
                  f"{'Moves':<7}{'Primary':<12}{'Secondary':<12}Check")
    report.append(RULE)
    mismatches = 0
    for row in rows:
        ok = row["verdict"] == row["expected"]
        mismatches += not ok
        verdict = row["verdict"] if row["verdict"] == "recoverable" else "no solution"
        report.append(
            f"{row['trial']:<6}{row['estimate']:<14}{row['start']:<7}{verdict:<16}"
            f"{row['moves']:<7}{_seconds(row['primary']):<12}"
            f"{_seconds(row['secondary']):<12}{'✓' if ok else '✗'}")
    report.append(RULE)
    if ordering:
        report.append("\nTrial 3 ordering sweep (start 1):")
        for order, (moves, matches) in ordering.items():
            mark = "✓ reproduces the six-move route" if matches else "-"
            report.append(f"   {order:<12} {' '.join(moves):<40} {mark}")
    report.append("\n" + BANNER)
    if mismatches:
        report.append(f"🚨 {mismatches} VERDICT MISMATCH(ES)")
    else:
        report.append("✅ ALL VERDICTS MATCH")
    report.append(BANNER)
    return "\n".join(report)


def generate_verify_report(checks, timestamp=True):
    """
    Parameters:
    -----------
    checks : list of (name, status, detail)
        status is pass / fail / inconclusive
    """
    report = _header("VERIFICATION REPORT", timestamp)
    report.append("")
    for name, status, detail in checks:
        report.append(f"{name:<40} {get_status_label(status)}")
        if detail:
            report.append(f"   {detail}")
    report.append("\n" + BANNER)
    return "\n".join(report)


def save_report(report_text, output_path):
    """
    Save report to file

    Parameters:
    -----------
    report_text : str
        Report content
    output_path : str
        Path to save report
    """
    directory = os.path.dirname(output_path)
    if directory:
        os.makedirs(directory, exist_ok=True)

    with open(output_path, 'w', encoding='utf-8') as f:
        f.write(report_text)

    print(f"✓ Report saved: {output_path}")
