"""Incremental Volt/Var gain design and feeder simulation.

Gains ``(eta, alpha)`` shared by every inverter are designed from voltage
scenarios with a chance-constrained successive convex approximation
(:class:`GainDesigner`, :func:`design_schedule`) and checked in closed-loop
simulation against static VoltVar and ON/OFF baselines
(:func:`run_simulation`).
"""

from .chanceopt import DesignProblem, DesignSolution, DesignSpec, GainDesigner, ogd_sca
from .controller import Gains, equilibrium, stability_margin
from .exceptions import CCVoltVarError
from .netmodel import DerFleet, Network, load_ders, load_network
from .pipeline import design_schedule
from .powerflow import InjectionState, compute_rho, solve_pf
from .scenarios import ForecastSeries, UncertaintyModel, generate_scenarios
from .sensitivity import SensitivityModel, build_x_lindistflow, reduce_to_der_nodes
from .simkit import GainsSchedule, Profiles, compute_metrics, run_simulation

__version__ = "0.1.0"

__all__ = [
    "CCVoltVarError",
    "DerFleet",
    "DesignProblem",
    "DesignSolution",
    "DesignSpec",
    "ForecastSeries",
    "GainDesigner",
    "Gains",
    "GainsSchedule",
    "InjectionState",
    "Network",
    "Profiles",
    "SensitivityModel",
    "UncertaintyModel",
    "build_x_lindistflow",
    "compute_metrics",
    "compute_rho",
    "design_schedule",
    "equilibrium",
    "generate_scenarios",
    "load_ders",
    "load_network",
    "ogd_sca",
    "reduce_to_der_nodes",
    "run_simulation",
    "solve_pf",
    "stability_margin",
]
