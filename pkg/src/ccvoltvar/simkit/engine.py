"""Closed-loop feeder simulation against the nonlinear power flow."""

import logging
from dataclasses import dataclass, field

import numpy as np

from ..controller import Gains
from ..exceptions import AlignmentError, DomainError, PowerFlowFailure
from ..powerflow import InjectionState, line_currents, slack_power, solve_pf
from .protection import ProtectionSettings, ProtectionState, protection_step
from .voltvar import StaticVoltVarCurve

__all__ = ["STRATEGIES", "Profiles", "GainsSchedule", "SimTrace", "run_simulation"]

logger = logging.getLogger(__name__)

STRATEGIES = ("ogd", "voltvar", "onoff")


@dataclass(frozen=True, eq=False)
class Profiles:
    """Per-node injections ``(T, n)`` sampled every ``dt`` seconds from ``start_s``."""

    p_av: np.ndarray
    p_l: np.ndarray
    q_l: np.ndarray
    dt: float = 1.0
    start_s: float = 0.0

    def __post_init__(self):
        arrs = [np.atleast_2d(np.asarray(a, dtype=float)) for a in (self.p_av, self.p_l, self.q_l)]
        if len({a.shape for a in arrs}) != 1:
            raise DomainError("profile arrays must share the shape (T, n)")
        if self.dt <= 0:
            raise DomainError("profile resolution must be positive")
        for name, a in zip(("p_av", "p_l", "q_l"), arrs):
            object.__setattr__(self, name, a)

    @property
    def n_steps(self):
        return self.p_av.shape[0]

    @property
    def n_nodes(self):
        return self.p_av.shape[1]

    @property
    def duration_s(self):
        return self.n_steps * self.dt

    def index(self, t):
        """Zero-order hold: row holding the value at time ``t``."""
        k = int(np.floor((t - self.start_s) / self.dt + 1e-9))
        return min(max(k, 0), self.n_steps - 1)

    def window(self, start_s, stop_s):
        a, b = self.index(start_s), self.index(stop_s - self.dt) + 1
        return Profiles(self.p_av[a:b], self.p_l[a:b], self.q_l[a:b], self.dt, self.start_s + a * self.dt)

    @classmethod
    def zeros(cls, n_nodes, duration_s, dt=1.0):
        T = int(round(duration_s / dt))
        z = np.zeros((T, n_nodes))
        return cls(z, z, z, dt)


class GainsSchedule:
    """Piecewise-constant gains: block ``i`` applies from ``starts[i]`` on."""

    def __init__(self, blocks):
        blocks = sorted(((float(s), g) for s, g in blocks), key=lambda b: b[0])
        if not blocks:
            raise DomainError("empty gains schedule")
        self.starts = np.array([b[0] for b in blocks])
        self.gains = [g if isinstance(g, Gains) else Gains(*g) for _, g in blocks]

    def at(self, t):
        i = int(np.searchsorted(self.starts, t, side="right")) - 1
        return self.gains[max(i, 0)]

    def to_list(self):
        return [{"start_s": float(s), "eta": g.eta, "alpha": g.alpha} for s, g in zip(self.starts, self.gains)]

    @classmethod
    def from_list(cls, rows):
        try:
            return cls([(r["start_s"], Gains(float(r["eta"]), float(r["alpha"]))) for r in rows])
        except (KeyError, TypeError) as exc:
            raise DomainError(f"malformed gains schedule: {exc}") from None

    @classmethod
    def constant(cls, gains):
        return cls([(0.0, gains)])


@dataclass(eq=False)
class SimTrace:
    """Step-by-step record of one simulation run.

    Node-indexed arrays are ``(K, n)``, DER-indexed arrays ``(K, G)``.
    ``line_loss`` and ``slack_p`` are active powers in p.u. per step;
    ``load_p`` is the consumption net of PV at nodes without a DER.
    """

    t: np.ndarray
    v: np.ndarray
    q: np.ndarray
    p: np.ndarray
    p_av: np.ndarray
    connected: np.ndarray
    pf_failed: np.ndarray
    line_loss: np.ndarray
    slack_p: np.ndarray
    load_p: np.ndarray
    tau: float
    strategy: str
    der_nodes: np.ndarray
    s_rating: np.ndarray
    base_power_kva: float = 100.0
    gains_schedule: list = field(default_factory=list)

    @property
    def n_steps(self):
        return self.t.shape[0]

    @property
    def n_failed(self):
        return int(np.sum(self.pf_failed))


def _check_inputs(net, fleet, profiles, strategy, tau):
    if strategy not in STRATEGIES:
        raise DomainError(f"unknown strategy {strategy!r}; expected one of {', '.join(STRATEGIES)}")
    if tau <= 0:
        raise AlignmentError("controller period must be positive")
    if profiles.n_nodes != net.n_nodes:
        raise DomainError(f"profiles have {profiles.n_nodes} nodes, network has {net.n_nodes}")
    if not fleet.one_per_node:
        raise DomainError("simulation needs at most one DER per node; aggregate co-located DERs first")
    ratio = profiles.dt / tau
    if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
        raise AlignmentError(f"profile step {profiles.dt} s is not a multiple of tau = {tau} s")


def run_simulation(net, fleet, profiles, strategy="ogd", gains_schedule=None, tau=0.1,
                   duration_s=None, protection=True, protection_settings=None, curve=None,
                   pf_tol=1e-8, pf_max_iter=200):
    """Simulate ``strategy`` over the profiles at controller period ``tau``.

    Each step reads the zero-order-held profile, lets every connected DER
    react to its local voltage from the previous step, updates the
    protection state and solves one power flow. A failed power flow is
    flagged and the previous voltages are held.
    """
    _check_inputs(net, fleet, profiles, strategy, tau)
    if strategy == "ogd":
        if gains_schedule is None:
            raise DomainError("the OGD strategy needs a gains schedule")
        if not isinstance(gains_schedule, GainsSchedule):
            gains_schedule = (GainsSchedule.constant(gains_schedule) if isinstance(gains_schedule, Gains)
                              else GainsSchedule(gains_schedule))
    curve = curve or StaticVoltVarCurve()
    settings = protection_settings or ProtectionSettings()
    duration_s = profiles.duration_s if duration_s is None else duration_s
    K = int(round(duration_s / tau))

    nodes = fleet.nodes
    idx = nodes - 1
    s = fleet.s
    q_lo = np.maximum(fleet.q_min, -s)
    q_hi = np.minimum(fleet.q_max, s)
    G, N = len(nodes), net.n_nodes
    r = net.line_r
    free = np.setdiff1d(np.arange(N), idx)

    t = profiles.start_s + tau * np.arange(K)
    out_v = np.empty((K, N))
    out_q = np.zeros((K, G))
    out_p = np.zeros((K, G))
    out_pav = np.empty((K, G))
    out_conn = np.ones((K, G), dtype=bool)
    failed = np.zeros(K, dtype=bool)
    loss = np.zeros(K)
    slack = np.zeros(K)
    load = np.zeros(K)

    def injections(row, q, p):
        return InjectionState(profiles.p_av[row], profiles.p_l[row], profiles.q_l[row],
                              q_ctrl=q, p_ctrl=p, der_nodes=nodes)

    row0 = profiles.index(t[0]) if K else 0
    p0 = np.minimum(profiles.p_av[row0][idx], s)
    sol = solve_pf(net, injections(row0, np.zeros(G), p0), pf_tol, pf_max_iter)
    u, v_prev = sol.u, sol.v
    q = np.zeros(G)
    prot = ProtectionState.initial(G)

    for k in range(K):
        row = profiles.index(t[k])
        p_av = profiles.p_av[row][idx]
        v_meas = v_prev[idx]
        if protection:
            prot = protection_step(prot, v_meas, tau, settings)
        conn = prot.connected

        if strategy == "ogd":
            g = gains_schedule.at(t[k])
            q = np.clip(q + g.eta * (1.0 - v_meas) - (1.0 - g.eta) * g.alpha * q, q_lo, q_hi)
            q = np.where(conn, q, 0.0)
            p = np.minimum(p_av, np.sqrt(np.maximum(s**2 - q**2, 0.0)))
        elif strategy == "voltvar":
            p = np.minimum(p_av, s)
            q = np.clip(curve(v_meas, p, s), q_lo, q_hi)
        else:
            p = np.minimum(p_av, s)
            q = np.zeros(G)
        p = np.where(conn, p, 0.0)
        q = np.where(conn, q, 0.0)

        try:
            sol = solve_pf(net, injections(row, q, p), pf_tol, pf_max_iter, u0=u)
            u, v_prev = sol.u, sol.v
            cur = line_currents(net, u)
            loss[k] = np.sum(np.abs(cur) ** 2 * r)
            slack[k] = slack_power(net, u).real
        except PowerFlowFailure:
            failed[k] = True
            loss[k] = loss[k - 1] if k else 0.0
            slack[k] = slack[k - 1] if k else 0.0
        out_v[k] = v_prev
        out_q[k] = q
        out_p[k] = p
        out_pav[k] = p_av
        out_conn[k] = conn
        load[k] = profiles.p_l[row].sum() - profiles.p_av[row][free].sum()

    if failed.any():
        logger.warning("%s: %d power-flow failures held previous voltages", strategy, int(failed.sum()))
    return SimTrace(
        t=t, v=out_v, q=out_q, p=out_p, p_av=out_pav, connected=out_conn, pf_failed=failed,
        line_loss=loss, slack_p=slack, load_p=load, tau=tau, strategy=strategy,
        der_nodes=nodes.copy(), s_rating=s.copy(), base_power_kva=net.base_power_kva,
        gains_schedule=gains_schedule.to_list() if strategy == "ogd" else [],
    )
