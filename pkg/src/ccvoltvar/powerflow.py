"""Nonlinear power flow for radial feeders.

Solves ``s = diag(u) conj(y V0 + Y u)`` with a Z-bus fixed-point iteration
started from the flat profile, which lands on the high-voltage (practical)
solution near nominal.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .exceptions import PowerFlowFailure
from .netmodel import build_admittance

__all__ = ["InjectionState", "PfSolution", "solve_pf", "compute_rho", "line_currents", "slack_power"]

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 200


@dataclass
class InjectionState:
    """Non-controllable injections per node plus DER set-points.

    ``der_nodes`` holds the (1-based) node of each DER; ``p_ctrl`` replaces
    the available power at those nodes when DERs curtail or disconnect.
    """

    p_av: np.ndarray
    p_l: np.ndarray
    q_l: np.ndarray
    q_ctrl: np.ndarray = None
    p_ctrl: np.ndarray = None
    der_nodes: np.ndarray = None

    def net_injection(self):
        p = np.asarray(self.p_av, dtype=float).copy()
        q = -np.asarray(self.q_l, dtype=float)
        idx = None if self.der_nodes is None else np.asarray(self.der_nodes, dtype=int) - 1
        if self.p_ctrl is not None:
            p[idx] = self.p_ctrl
        if self.q_ctrl is not None:
            np.add.at(q, idx, self.q_ctrl)
        p = p - np.asarray(self.p_l, dtype=float)
        s = p + 1j * q
        if not np.all(np.isfinite(s)):
            raise ValueError("non-finite injections")
        return s


@dataclass
class PfSolution:
    u: np.ndarray
    v: np.ndarray
    iterations: int
    residual: float


@lru_cache(maxsize=32)
def _factors(net):
    y, Y = build_admittance(net)
    Z = np.linalg.inv(Y)
    return y, Y, Z


def _mismatch(u, s, y, Y, V0):
    return np.max(np.abs(u * np.conj(y * V0 + Y @ u) - s), initial=0.0)


def solve_pf(net, inj, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, u0=None):
    """Solve the power flow for ``inj``; returns a :class:`PfSolution`.

    Raises :class:`PowerFlowFailure` (a :class:`NoConvergence`) when the
    injections leave the region where the fixed-point map contracts.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    s = inj if isinstance(inj, np.ndarray) else inj.net_injection()
    y, Y, Z = _factors(net)
    V0 = net.slack_voltage
    u = np.full(net.n_nodes, V0, dtype=complex) if u0 is None else np.array(u0, dtype=complex)
    damping = 1.0
    prev = np.inf
    for it in range(1, max_iter + 1):
        u_fp = V0 + Z @ np.conj(s / u)
        u = u + damping * (u_fp - u) if damping < 1.0 else u_fp
        res = _mismatch(u, s, y, Y, V0)
        if not np.isfinite(res):
            break
        if res <= tol:
            v = np.abs(u)
            if v.min() < 0.5 or v.max() > 1.5:
                break
            return PfSolution(u, v, it, float(res))
        if res > prev:
            damping = max(damping / 2.0, 1.0 / 64)
        prev = res
    raise PowerFlowFailure(max_iter, float(prev))


def compute_rho(net, z, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Voltage magnitudes with every controllable reactive set-point at zero."""
    if z.q_ctrl is not None and np.any(np.asarray(z.q_ctrl) != 0):
        raise ValueError("compute_rho expects zero controllable reactive power")
    return solve_pf(net, z, tol, max_iter).v


def line_currents(net, u):
    """Complex current on every line, oriented from parent to child."""
    V = np.concatenate([[net.slack_voltage], u])
    idx = np.arange(1, net.n_nodes + 1)
    lines = net.parent_line[idx]
    ys = np.array([ln.admittance for ln in net.lines])[lines]
    I = np.empty(net.n_nodes, dtype=complex)
    I[lines] = (V[net.parent[idx]] - V[idx]) * ys
    return I


def slack_power(net, u):
    """Complex power drawn from the slack bus."""
    y, _, _ = _factors(net)
    I0 = -np.sum(y) * net.slack_voltage + y @ u
    return net.slack_voltage * np.conj(I0)
