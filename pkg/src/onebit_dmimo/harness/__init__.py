"""Scenarios, frame simulation, sweeps, CSV output and the ``sim`` command."""

from .engine import run_frame, run_point
from .results import ResultRow, ResultTable, emit_csv
from .scenario import PRESETS, Scenario, load_scenario, preset
from .sweeps import sweep_received_power, sweep_ue_power

__all__ = [
    "PRESETS", "ResultRow", "ResultTable", "Scenario", "emit_csv", "load_scenario",
    "preset", "run_frame", "run_point", "sweep_received_power", "sweep_ue_power",
]
