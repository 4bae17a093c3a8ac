"""Forecast-to-gains pipeline: scenarios per horizon block, then one design each."""

import logging

import numpy as np

from .chanceopt import DesignProblem, DesignSpec, initial_point, ogd_sca
from .controller import Gains
from .exceptions import DomainError
from .scenarios import generate_scenarios, time_grid
from .sensitivity import build_x_lindistflow, reduce_to_der_nodes
from .simkit import GainsSchedule

__all__ = ["design_block", "design_schedule", "constant_schedule"]

logger = logging.getLogger(__name__)


def design_block(model, rho, spec):
    """Design gains for one block of scenarios ``rho[m, s, n]`` (controlled nodes only)."""
    problem = DesignProblem(model, rho, spec)
    x0 = initial_point(problem)
    return ogd_sca(problem, x0=x0)


def design_schedule(net, fleet, forecast, uncertainty, spec=None, horizon_s=3600.0, n_samples=100,
                    model=None, tau=0.1):
    """One gains block per ``horizon_s`` of the forecast.

    Returns ``(schedule, reports)`` where ``reports`` holds one dict per
    block with the design report and the scenario bookkeeping. ``model`` is
    the sensitivity model at the DER nodes; by default it is built from the
    network and reduced to the fleet.
    """
    spec = spec or DesignSpec()
    _, b, _ = time_grid(tau, forecast.interval_s, horizon_s)
    if forecast.n_intervals % b:
        raise DomainError(f"{forecast.n_intervals} forecast intervals do not split into blocks of {b}")
    if model is None:
        model = reduce_to_der_nodes(build_x_lindistflow(net), fleet)
    nodes = fleet.nodes
    blocks, reports = [], []
    for j in range(forecast.n_intervals // b):
        window = forecast.window(j * b, (j + 1) * b)
        unc = type(uncertainty)(**{**uncertainty.__dict__, "seed": int(uncertainty.seed) + j})
        scen = generate_scenarios(net, window, unc, n_samples)
        rho = scen.at_nodes(nodes)
        sol = design_block(model, rho, spec)
        start = j * horizon_s
        blocks.append((start, sol.gains))
        rep = sol.to_dict()
        rep.update(start_s=start, dropped=scen.dropped, seed=unc.seed,
                   rho_max=float(np.max(rho)), rho_min=float(np.min(rho)))
        reports.append(rep)
        logger.info("block %d: eta=%.4f alpha=%.4f (%d iterations)", j, sol.gains.eta, sol.gains.alpha, sol.n_iter)
    return GainsSchedule(blocks), reports


def constant_schedule(eta, alpha):
    return GainsSchedule.constant(Gains(eta, alpha))
