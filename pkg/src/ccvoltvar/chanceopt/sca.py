"""Optimal gain design by successive convex approximation."""

import logging
import warnings

import numpy as np

from ..controller import Gains
from ..exceptions import DomainError, NoFeasibleStart
from .functions import best_u, family_values, q_of_t, shift
from .problem import DesignSolution
from .subproblem import solve_subproblem
from .surrogates import build_surrogates, majorizer_matrices

__all__ = ["ConvergenceWarning", "evaluate_constraints", "initial_point", "ogd_sca"]

logger = logging.getLogger(__name__)

ETA_STEP = 0.05
ETA_CAP = 0.95
ALPHA_STEP = 0.25
ALPHA_FLOOR = 0.05


class ConvergenceWarning(UserWarning):
    pass


def evaluate_constraints(x, problem):
    """Empirical violation rates and optimal CVaR values at ``x``.

    Returns ``(rates, margins, u)``; each is a dict keyed by family with
    arrays of shape ``(b, n)``. ``margins`` holds the sample-average smooth
    CVaR term minimised over ``u >= 0`` (feasible when ``<= 0``).
    """
    spec = problem.spec
    rho = problem.samples
    q = q_of_t(shift(x), problem.model, rho)
    rates, margins, us = {}, {}, {}
    for i in spec.active_families:
        h = np.moveaxis(family_values(i, q, problem.model, rho, spec), 1, -1)  # (b, n, s)
        rates[i] = np.mean(h > 0, axis=-1)
        us[i], margins[i] = best_u(h, spec.epsilons[i - 1], spec.xi)
    return rates, margins, us


def objective(x, problem):
    """Sum over intervals of the sample mean of ``||q||^2``."""
    q = q_of_t(shift(x), problem.model, problem.samples)
    return float(np.sum(q**2, axis=-1).mean(axis=1).sum())


def _feasible(x, problem):
    if not problem.deterministic_feasible(x, strict=True):
        return False
    _, margins, _ = evaluate_constraints(x, problem)
    return all(np.all(m <= 0) for m in margins.values())


def initial_point(problem, return_trace=False):
    """First ``x`` on the schedule ``eta += 0.05, alpha -= 0.25`` that is feasible.

    Raises :class:`NoFeasibleStart` when the schedule is exhausted.
    """
    spec = problem.spec
    eta, alpha = spec.eta0, spec.alpha0
    trace = []
    while True:
        x = Gains(eta, alpha).x
        ok = _feasible(x, problem)
        trace.append((eta, alpha, ok))
        if ok:
            return (x, trace) if return_trace else x
        if eta >= ETA_CAP - 1e-12 and alpha <= ALPHA_FLOOR + 1e-12:
            raise NoFeasibleStart()
        eta = min(round(eta + ETA_STEP, 10), ETA_CAP)
        alpha = max(alpha - ALPHA_STEP, ALPHA_FLOOR)


def ogd_sca(problem, x0=None, callback=None):
    """Run the SCA iteration ``x <- x + gamma_p (x*(x) - x)`` from a feasible start."""
    spec = problem.spec
    if x0 is None:
        x0 = initial_point(problem)
    x = np.asarray(x0, dtype=float)
    if not _feasible(x, problem):
        raise DomainError(f"starting point {x} is not feasible")
    A, b = problem.linear_constraints()
    fixed_m = spec.majorizer != "anchor"
    majorizers = majorizer_matrices(problem, spec.active_families) if fixed_m else None
    scale = 1.0
    if spec.normalize_objective:
        f0 = objective(x, problem)
        scale = 1.0 / f0 if f0 > 1e-300 else 1.0

    history = []
    converged = False
    step = np.inf
    p = 0
    for p in range(spec.max_iter):
        bundle = build_surrogates(x, problem, majorizers, scale)
        res = solve_subproblem(bundle, A, b)
        gamma = spec.step_size(p)
        x_new = x + gamma * (res.x - x)
        step = float(np.linalg.norm(x_new - x))
        x = x_new
        rec = {"iteration": p, "x": x.copy(), "step": step, "gamma": gamma,
               "objective": objective(x, problem), "newton_steps": res.newton_steps,
               "kkt_residual": res.kkt_residual}
        history.append(rec)
        if callback is not None:
            callback(rec)
        logger.debug("sca %d: x=%s step=%.3e", p, x, step)
        if step < spec.tol:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"SCA stopped after {spec.max_iter} iterations with step {step:.3e}",
            ConvergenceWarning, stacklevel=2,
        )

    rates, margins, us = evaluate_constraints(x, problem)
    return DesignSolution(
        x=x,
        gains=Gains.from_x(x, lambda_max=problem.model.lambda_max),
        u=us,
        n_iter=len(history),
        step_norm=step,
        objective=objective(x, problem),
        converged=converged,
        violation_rates=rates,
        cvar_margins=margins,
        history=history,
        x0=np.asarray(x0, dtype=float),
    )
