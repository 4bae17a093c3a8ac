"""Synthetic low-voltage feeders and day profiles shipped with the package.

Two feeders are provided: a compact 8-node feeder with high PV penetration
(overvoltage around noon, undervoltage in the evening) and a 42-node
branched feeder of the same flavour. Both use a 100 kVA / 0.4 kV base with a
PV inverter at every node, rated 20, 25 or 31 kVA.
"""

from importlib import resources

import numpy as np
from scipy import stats

from .exceptions import DomainError
from .netmodel import Der, DerFleet, GridConfig, Line, Network, load_ders, load_network
from .scenarios import ForecastSeries, UncertaintyModel, load_forecast

__all__ = [
    "DER_SIZES_KVA",
    "make_feeder",
    "feeder_8",
    "feeder_42",
    "load_shipped",
    "load_shipped_forecast",
    "daily_shapes",
    "make_forecast",
    "sample_day",
]

DER_SIZES_KVA = (20.0, 25.0, 31.0)
POWER_FACTOR = 0.95
Q_BOX_FRACTION = 0.6
DAY_S = 86400


def make_feeder(n_nodes, seed=0, r=0.01, x=0.008, branching=0.0, spread=0.3,
                base_power_kva=100.0, base_voltage_kv=0.4, q_box=Q_BOX_FRACTION):
    """Random radial feeder with a PV inverter at every node.

    Each new node hangs off the previous one, or with probability
    ``branching`` off a random earlier node. Line impedances vary by
    ``+-spread`` around ``(r, x)`` p.u.
    """
    rng = np.random.default_rng(seed)
    lines = []
    for k in range(1, n_nodes + 1):
        parent = k - 1
        if k > 2 and rng.random() < branching:
            parent = int(rng.integers(0, k - 1))
        f = 1.0 + spread * rng.uniform(-1, 1)
        g = 1.0 + spread * rng.uniform(-1, 1)
        lines.append(Line(parent, k, round(r * f, 6), round(x * g, 6)))
    net = Network(n_nodes, lines, 1.0, base_power_kva, base_voltage_kv)
    sizes = rng.choice(DER_SIZES_KVA, size=n_nodes) / base_power_kva
    ders = [Der(f"pv{k}", k, float(s), -q_box * float(s), q_box * float(s)) for k, s in zip(range(1, n_nodes + 1), sizes)]
    return net, DerFleet(ders, n_nodes)


def feeder_8():
    """The 8-node high-PV feeder (a single lateral)."""
    return make_feeder(8, seed=8, r=0.012, x=0.009)


def feeder_42():
    """The 42-node branched feeder."""
    return make_feeder(42, seed=42, r=0.0024, x=0.0019, branching=0.25)


def load_shipped(name):
    """``(network, fleet)`` read from the CSV files in the package data."""
    if name not in ("feeder8", "feeder42"):
        raise DomainError(f"unknown shipped feeder {name!r}")
    data = resources.files("ccvoltvar") / "data"
    with resources.as_file(data / f"{name}_lines.csv") as lp, resources.as_file(data / f"{name}_ders.csv") as dp:
        net = load_network(lp, GridConfig())
        fleet = load_ders(dp, net)
    return net, fleet


def load_shipped_forecast(name):
    """Half-hourly day forecast shipped with feeder ``name``."""
    if name not in ("feeder8", "feeder42"):
        raise DomainError(f"unknown shipped feeder {name!r}")
    with resources.as_file(resources.files("ccvoltvar") / "data" / f"{name}_forecast.csv") as fp:
        return load_forecast(fp, 1800.0)


def daily_shapes(t_s, pv_peak=0.85, load_base=0.25, load_peak=1.0):
    """Normalised PV availability and load shapes at times ``t_s`` (seconds)."""
    h = np.asarray(t_s, dtype=float) / 3600.0
    pv = np.clip(np.sin(np.pi * (h - 6.0) / 14.0), 0.0, None) ** 1.5 * pv_peak
    pv = np.where((h > 6.0) & (h < 20.0), pv, 0.0)
    evening = np.exp(-0.5 * ((h - 19.5) / 1.6) ** 2)
    morning = 0.45 * np.exp(-0.5 * ((h - 7.5) / 1.0) ** 2)
    load = load_base + (load_peak - load_base) * (evening + morning) / 1.0
    return pv, np.clip(load, 0.0, None)


def make_forecast(net, fleet, interval_s=1800.0, load_pu=0.2, pf_sign=-1.0, **shape_kw):
    """Piecewise-constant day forecast, one mean per ``interval_s`` window.

    PV availability scales with each inverter rating, loads with ``load_pu``.
    Loads draw reactive power ``pf_sign * tan(acos(0.95)) * p_l``; the
    default sign ``-1`` models the leading (capacitive) power factor.
    """
    b = int(round(DAY_S / interval_s))
    mids = (np.arange(b) + 0.5) * interval_s
    pv, load = daily_shapes(mids, **shape_kw)
    n = net.n_nodes
    rating = np.zeros(n)
    np.add.at(rating, fleet.nodes - 1, fleet.s)
    weight = 0.8 + 0.4 * (np.arange(n) % 3) / 2.0
    p_av = pv[:, None] * rating[None, :]
    p_l = load[:, None] * load_pu * weight[None, :]
    q_l = pf_sign * np.tan(np.arccos(POWER_FACTOR)) * p_l
    return ForecastSeries(p_av, p_l, q_l, interval_s)


def _marginal(model, z):
    """Map standard normal ``z`` to the zero-mean unit-variance family of ``model``."""
    if model.family == "gaussian":
        out = z
    elif model.family == "uniform":
        out = np.sqrt(3.0) * (2.0 * stats.norm.cdf(z) - 1.0)
    else:
        out = (stats.beta.ppf(stats.norm.cdf(z), 2.0, 2.0) - 0.5) * np.sqrt(20.0)
    return np.clip(out, -model.truncation, model.truncation)


def _ar1(rng, steps, n, phi):
    z = np.empty((steps, n))
    z[0] = rng.standard_normal(n)
    scale = np.sqrt(1.0 - phi**2)
    noise = rng.standard_normal((steps, n)) * scale
    for k in range(1, steps):
        z[k] = phi * z[k - 1] + noise[k]
    return z


def sample_day(forecast, model=None, dt=1.0, corr_time_s=60.0, seed=0):
    """1 s-style profiles ``(p_av, p_l, q_l)`` of shape ``(T, n)``.

    Each step equals the forecast mean of its interval plus an error whose
    marginal law is the design distribution ``model``; errors are AR(1) in
    time with correlation time ``corr_time_s``.
    """
    model = model or UncertaintyModel()
    per = int(round(forecast.interval_s / dt))
    steps = per * forecast.n_intervals
    n = forecast.n_nodes
    rng = np.random.default_rng(seed)
    phi = float(np.exp(-dt / corr_time_s)) if corr_time_s > 0 else 0.0
    idx = np.arange(steps) // per
    means = [a[idx] for a in (forecast.p_av, forecast.p_l, forecast.q_l)]
    if model.common_mode:
        z_pv = np.repeat(_ar1(rng, steps, 1, phi), n, axis=1)
    else:
        z_pv = _ar1(rng, steps, n, phi)
    z_pl = _ar1(rng, steps, n, phi)
    z_ql = _ar1(rng, steps, n, phi)
    p_av = np.maximum(means[0] * (1.0 + model.sigma_pv * _marginal(model, z_pv)), 0.0)
    p_l = np.maximum(means[1] * (1.0 + model.sigma_load * _marginal(model, z_pl)), 0.0)
    q_l = means[2] * np.maximum(1.0 + model.sigma_load * _marginal(model, z_ql), 0.0)
    return p_av, p_l, q_l
