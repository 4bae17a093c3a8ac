"""Forecasts, uncertainty sampling and no-control voltage scenarios.

Three time scales are involved: the controller period ``tau``, the forecast
interval ``delta_tau`` and the design horizon ``horizon = b * delta_tau``.
"""

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .exceptions import AlignmentError, DomainError, PowerFlowFailure, SchemaError, TooManyDropped
from .powerflow import InjectionState, compute_rho

__all__ = [
    "ForecastSeries",
    "UncertaintyModel",
    "ScenarioSet",
    "sample_delta",
    "generate_scenarios",
    "time_grid",
    "forecast_from_profiles",
    "load_forecast",
    "write_forecast",
    "load_scenarios",
    "write_scenarios",
]

logger = logging.getLogger(__name__)

MAX_ATTEMPTS = 5
MAX_DROP_FRACTION = 0.10
FAMILIES = ("gaussian", "uniform", "scaled-beta")


@dataclass(frozen=True, eq=False)
class ForecastSeries:
    """Mean injections ``(b, n)`` per forecast interval, in p.u. per node."""

    p_av: np.ndarray
    p_l: np.ndarray
    q_l: np.ndarray
    interval_s: float = 1800.0

    def __post_init__(self):
        arrs = [np.atleast_2d(np.asarray(a, dtype=float)) for a in (self.p_av, self.p_l, self.q_l)]
        if len({a.shape for a in arrs}) != 1:
            raise DomainError("forecast arrays must share the shape (b, n)")
        if self.interval_s <= 0:
            raise DomainError("interval length must be positive")
        if np.any(arrs[0] < 0):
            raise DomainError("available power must be nonnegative")
        for name, a in zip(("p_av", "p_l", "q_l"), arrs):
            object.__setattr__(self, name, a)

    @property
    def n_intervals(self):
        return self.p_av.shape[0]

    @property
    def n_nodes(self):
        return self.p_av.shape[1]

    @property
    def horizon_s(self):
        return self.n_intervals * self.interval_s

    def interval(self, m):
        return self.p_av[m], self.p_l[m], self.q_l[m]

    def window(self, start, stop):
        """Forecast restricted to intervals ``start:stop``."""
        return ForecastSeries(self.p_av[start:stop], self.p_l[start:stop], self.q_l[start:stop], self.interval_s)


@dataclass(frozen=True)
class UncertaintyModel:
    """Distribution of the forecast errors ``delta``.

    ``sigma_pv`` and ``sigma_load`` are standard deviations relative to the
    forecast mean. Draws are truncated at ``truncation`` standard deviations
    and so that available power and loads stay nonnegative. With
    ``common_mode`` a single shock per sample scales all PV errors, as for a
    cloud front passing over the whole feeder.
    """

    family: str = "gaussian"
    sigma_pv: float = 0.10
    sigma_load: float = 0.05
    truncation: float = 3.0
    common_mode: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown distribution family {self.family!r}")
        if self.sigma_pv < 0 or self.sigma_load < 0:
            raise DomainError("relative spreads must be nonnegative")
        if self.truncation <= 0:
            raise DomainError("truncation must be positive")

    def standard(self, rng, size):
        """Zero-mean unit-variance draws of the chosen family, truncated."""
        if self.family == "gaussian":
            z = rng.standard_normal(size)
        elif self.family == "uniform":
            z = rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), size)
        else:
            # Beta(2, 2) has variance 1/20 on [0, 1]
            z = (rng.beta(2.0, 2.0, size) - 0.5) * np.sqrt(20.0)
        return np.clip(z, -self.truncation, self.truncation)


def sample_delta(model, zbar, rng=None):
    """One draw ``(d_av, d_pl, d_ql)`` around the means ``zbar = (p_av, p_l, q_l)``."""
    p_av, p_l, q_l = (np.asarray(a, dtype=float) for a in zbar)
    if rng is None:
        rng = np.random.default_rng(model.seed)
    n = p_av.shape[-1]
    if model.common_mode:
        z_pv = np.full(n, model.standard(rng, 1)[0])
    else:
        z_pv = model.standard(rng, n)
    z_pl = model.standard(rng, n)
    z_ql = model.standard(rng, n)
    d_av = np.maximum(model.sigma_pv * p_av * z_pv, -p_av)
    d_pl = np.maximum(model.sigma_load * p_l * z_pl, -p_l)
    d_ql = model.sigma_load * q_l * z_ql
    # q_l keeps its sign
    d_ql = np.where(q_l >= 0, np.maximum(d_ql, -q_l), np.minimum(d_ql, -q_l))
    return d_av, d_pl, d_ql


def sample_rng(seed, m, s, attempt=0):
    """Independent stream for interval ``m``, sample ``s`` and retry ``attempt``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(m), int(s), int(attempt)]))


@dataclass(eq=False)
class ScenarioSet:
    """No-control voltages ``rho[m, s, n]`` over all non-slack nodes."""

    rho: np.ndarray
    dropped: int = 0
    seed: int = 0
    nodes: np.ndarray = field(default=None)

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        if self.rho.ndim != 3:
            raise DomainError("scenario array must have shape (b, n_samples, n)")
        if not np.all(np.isfinite(self.rho)):
            raise DomainError("non-finite scenarios")
        if self.nodes is None:
            self.nodes = np.arange(1, self.rho.shape[2] + 1)
        self.nodes = np.asarray(self.nodes, dtype=int)

    @property
    def n_intervals(self):
        return self.rho.shape[0]

    @property
    def n_samples(self):
        return self.rho.shape[1]

    def at_nodes(self, nodes):
        """Samples restricted to the given (1-based) nodes."""
        pos = {n: k for k, n in enumerate(self.nodes)}
        try:
            idx = [pos[int(n)] for n in nodes]
        except KeyError as exc:
            raise DomainError(f"node {exc.args[0]} not in scenario set") from None
        return self.rho[:, :, idx]


def generate_scenarios(net, forecast, model, n_samples=100, tol=1e-8, max_iter=200):
    """Solve one power flow per draw ``z_bar + delta`` with no reactive control."""
    if forecast.n_nodes != net.n_nodes:
        raise DomainError(f"forecast has {forecast.n_nodes} nodes, network has {net.n_nodes}")
    if n_samples < 1:
        raise DomainError("need at least one sample")
    b = forecast.n_intervals
    rho = np.empty((b, n_samples, net.n_nodes))
    keep = np.ones((b, n_samples), dtype=bool)
    dropped = 0
    for m in range(b):
        zbar = forecast.interval(m)
        for s in range(n_samples):
            for attempt in range(MAX_ATTEMPTS):
                d_av, d_pl, d_ql = sample_delta(model, zbar, sample_rng(model.seed, m, s, attempt))
                z = InjectionState(zbar[0] + d_av, zbar[1] + d_pl, zbar[2] + d_ql)
                try:
                    rho[m, s] = compute_rho(net, z, tol, max_iter)
                    break
                except PowerFlowFailure:
                    continue
            else:
                keep[m, s] = False
                dropped += 1
    total = b * n_samples
    if dropped > MAX_DROP_FRACTION * total:
        raise TooManyDropped(f"{dropped} of {total} scenario draws failed the power flow")
    if dropped:
        logger.warning("dropped %d of %d scenario draws", dropped, total)
        # keep a rectangular array: refill dropped slots with kept samples of the same interval
        for m in range(b):
            ok = np.flatnonzero(keep[m])
            if ok.size == 0:
                raise TooManyDropped(f"every draw of interval {m} failed the power flow")
            bad = np.flatnonzero(~keep[m])
            rho[m, bad] = rho[m, ok[np.arange(bad.size) % ok.size]]
    return ScenarioSet(rho, dropped=dropped, seed=model.seed)


def _ratio(a, b, what):
    r = a / b
    k = int(round(r))
    if k < 1 or abs(r - k) > 1e-9 * max(1.0, r):
        raise AlignmentError(f"{what}: {a} is not a multiple of {b}")
    return k


def time_grid(tau, delta_tau, horizon):
    """``(steps per interval, intervals per horizon, steps per horizon)``."""
    if tau <= 0 or delta_tau <= 0 or horizon <= 0:
        raise AlignmentError("time scales must be positive")
    steps = _ratio(delta_tau, tau, "forecast interval")
    b = _ratio(horizon, delta_tau, "horizon")
    return steps, b, steps * b


def forecast_from_profiles(p_av, p_l, q_l, dt, interval_s, start_s=0.0, n_intervals=None):
    """Average ``(T, n)`` profiles sampled every ``dt`` seconds into a forecast."""
    p_av, p_l, q_l = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (p_av, p_l, q_l))
    per = _ratio(interval_s, dt, "forecast interval")
    first = int(round(start_s / dt))
    avail = (p_av.shape[0] - first) // per
    b = avail if n_intervals is None else n_intervals
    if b < 1 or b > avail:
        raise AlignmentError("profiles do not cover the requested forecast window")
    sl = slice(first, first + b * per)

    def block(a):
        return a[sl].reshape(b, per, -1).mean(axis=1)

    return ForecastSeries(block(p_av), block(p_l), block(q_l), interval_s)


FORECAST_HEADER = ["interval", "node", "p_av_pu", "p_l_pu", "q_l_pu"]
SCENARIO_HEADER = ["m", "s", "node", "rho_pu"]


def _read_csv(path, header):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            head = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if head != header:
            raise SchemaError(f"{path}: expected header {','.join(header)}, got {','.join(head)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaError(f"{path}:{lineno}: expected {len(header)} fields")
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise SchemaError(f"{path}:{lineno}: non-numeric field") from None
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return np.array(rows)


def load_forecast(path, interval_s=1800.0, n_nodes=None):
    data = _read_csv(path, FORECAST_HEADER)
    m = data[:, 0].astype(int)
    node = data[:, 1].astype(int)
    if m.min() < 1 or node.min() < 1:
        raise SchemaError(f"{path}: intervals and nodes are 1-based")
    b = m.max()
    n = n_nodes or node.max()
    out = np.full((3, b, n), np.nan)
    out[:, m - 1, node - 1] = data[:, 2:].T
    if np.isnan(out).any():
        raise SchemaError(f"{path}: missing (interval, node) rows")
    return ForecastSeries(out[0], out[1], out[2], interval_s)


def write_forecast(forecast, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FORECAST_HEADER)
        for m in range(forecast.n_intervals):
            for n in range(forecast.n_nodes):
                w.writerow([m + 1, n + 1, repr(float(forecast.p_av[m, n])), repr(float(forecast.p_l[m, n])),
                            repr(float(forecast.q_l[m, n]))])


def write_scenarios(scen, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SCENARIO_HEADER)
        b, ns, n = scen.rho.shape
        for m in range(b):
            for s in range(ns):
                for k in range(n):
                    w.writerow([m + 1, s + 1, int(scen.nodes[k]), repr(float(scen.rho[m, s, k]))])


def load_scenarios(path):
    data = _read_csv(path, SCENARIO_HEADER)
    m, s = data[:, 0].astype(int), data[:, 1].astype(int)
    nodes = np.unique(data[:, 2].astype(int))
    pos = np.searchsorted(nodes, data[:, 2].astype(int))
    rho = np.full((m.max(), s.max(), nodes.size), np.nan)
    rho[m - 1, s - 1, pos] = data[:, 3]
    if np.isnan(rho).any():
        raise SchemaError(f"{path}: incomplete scenario table")
    return ScenarioSet(rho, nodes=nodes)
