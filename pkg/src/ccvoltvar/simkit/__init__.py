"""Closed-loop day simulation, baselines and metrics."""

from .engine import STRATEGIES, GainsSchedule, Profiles, SimTrace, run_simulation
from .io import load_profiles, load_trace_table, write_cdf_table, write_profiles, write_trace
from .metrics import MetricsReport, compute_metrics, empirical_cdf, energy_balance_error, run_lengths
from .multiphase import LinearTrace, run_linear_multiphase
from .protection import ProtectionSettings, ProtectionState, protection_step
from .svg import bars_svg, cdf_svg
from .voltvar import StaticVoltVarCurve, static_voltvar

__all__ = [
    "STRATEGIES",
    "GainsSchedule",
    "LinearTrace",
    "MetricsReport",
    "Profiles",
    "ProtectionSettings",
    "ProtectionState",
    "SimTrace",
    "StaticVoltVarCurve",
    "bars_svg",
    "cdf_svg",
    "compute_metrics",
    "empirical_cdf",
    "energy_balance_error",
    "load_profiles",
    "load_trace_table",
    "protection_step",
    "run_lengths",
    "run_linear_multiphase",
    "run_simulation",
    "static_voltvar",
    "write_cdf_table",
    "write_profiles",
    "write_trace",
]
