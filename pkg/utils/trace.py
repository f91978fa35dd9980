"""
Trace Module

Handles:
- One TraceRecord per simulated event
- Tab-separated trace files (write and read back)
"""

import os
from dataclasses import dataclass

HEADER = "time\tdrone\tevent\tmode\testimate"
NOMINAL_MODE = "NOM"


@dataclass(frozen=True)
class TraceRecord:
    time: float
    drone: int
    event: str
    mode: str
    estimate: str = ""

    def __post_init__(self):
        if (self.mode == NOMINAL_MODE) == bool(self.estimate):
            raise ValueError(f"estimate must be present iff mode != {NOMINAL_MODE}: "
                             f"{self.mode} {self.estimate!r}")

    def to_line(self):
        return f"{self.time:.6f}\t{self.drone}\t{self.event}\t{self.mode}\t{self.estimate}"

    @classmethod
    def from_line(cls, line):
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 5:
            raise ValueError(f"trace line needs 5 fields, got {len(parts)}: {line!r}")
        time, drone, event, mode, estimate = parts
        return cls(float(time), int(drone), event, mode, estimate)


def format_trace(records):
    """Trace text, header first; timestamps must be non-decreasing"""
    lines = [HEADER]
    last = None
    for record in records:
        if last is not None and record.time < last:
            raise ValueError(f"trace time goes backwards at {record}")
        last = record.time
        lines.append(record.to_line())
    return "\n".join(lines) + "\n"


def write_trace(records, output_path):
    """
    Save a trace as a tab-separated file

    Parameters:
    -----------
    records : list of TraceRecord
    output_path : str
    """
    directory = os.path.dirname(output_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(output_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(format_trace(records))
    print(f"✓ Trace saved: {output_path}")


def parse_trace(text):
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines or lines[0] != HEADER:
        raise ValueError("missing trace header")
    return [TraceRecord.from_line(line) for line in lines[1:]]


def read_trace(path):
    with open(path, encoding="utf-8") as f:
        return parse_trace(f.read())
