"""
Utility functions for SwarmRecover
"""

from .trace import TraceRecord, format_trace, read_trace, write_trace
from .report_generator import (
    generate_synthesis_report,
    generate_table1_report,
    generate_trial_report,
    generate_verify_report,
    save_report
)

__all__ = [
    'TraceRecord', 'format_trace', 'read_trace', 'write_trace',
    'generate_synthesis_report', 'generate_table1_report',
    'generate_trial_report', 'generate_verify_report', 'save_report'
]
