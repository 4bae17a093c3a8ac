"""Voltage statistics, violation durations and energy accounting of a trace."""

from dataclasses import dataclass

import numpy as np

__all__ = ["MetricsReport", "compute_metrics", "run_lengths", "empirical_cdf", "energy_balance_error"]


def run_lengths(flags):
    """Lengths of the runs of ``True`` in ``flags``, in order.

    A run still open at the end of the record is included.
    """
    f = np.asarray(flags, dtype=bool).astype(np.int8)
    if f.size == 0:
        return np.zeros(0, dtype=int)
    d = np.diff(np.concatenate([[0], f, [0]]))
    starts = np.flatnonzero(d == 1)
    stops = np.flatnonzero(d == -1)
    return (stops - starts).astype(int)


def empirical_cdf(values):
    """``(x, F)`` of the empirical distribution; ``F`` is non-decreasing in (0, 1]."""
    x = np.sort(np.asarray(values, dtype=float).ravel())
    if x.size == 0:
        return np.zeros(1), np.ones(1)
    return x, np.arange(1, x.size + 1) / x.size


@dataclass
class MetricsReport:
    strategy: str
    v_max: np.ndarray
    v_min: np.ndarray
    gamma_v: np.ndarray
    tau: float
    violation_fraction: float
    line_loss_kwh: float
    curtailment_kwh: float
    reactive_kvarh: float
    pf_failures: int = 0

    @property
    def lost_energy_kwh(self):
        return self.line_loss_kwh + self.curtailment_kwh

    @property
    def gamma_v_seconds(self):
        return self.gamma_v * self.tau

    def gamma_quantile(self, q):
        """Quantile of the violation durations in seconds (0 without violations)."""
        if self.gamma_v.size == 0:
            return 0.0
        return float(np.quantile(self.gamma_v_seconds, q))

    def cdf_tables(self):
        return {
            "v_max": empirical_cdf(self.v_max),
            "v_min": empirical_cdf(self.v_min),
            "gamma_v_s": empirical_cdf(self.gamma_v_seconds) if self.gamma_v.size else (np.zeros(1), np.ones(1)),
        }

    def summary(self):
        return {
            "strategy": self.strategy,
            "violation_fraction": self.violation_fraction,
            "n_violations": int(self.gamma_v.size),
            "gamma_v_p95_s": self.gamma_quantile(0.95),
            "gamma_v_max_s": float(self.gamma_v_seconds.max()) if self.gamma_v.size else 0.0,
            "v_max": float(self.v_max.max()) if self.v_max.size else None,
            "v_min": float(self.v_min.min()) if self.v_min.size else None,
            "line_loss_kwh": self.line_loss_kwh,
            "curtailment_kwh": self.curtailment_kwh,
            "lost_energy_kwh": self.lost_energy_kwh,
            "reactive_kvarh": self.reactive_kvarh,
            "pf_failures": self.pf_failures,
        }


def compute_metrics(trace, v_min=0.95, v_max=1.05):
    """Metrics of ``trace`` for voltage limits ``[v_min, v_max]``.

    Energies are converted from p.u. seconds with the trace's power base.
    """
    tau = trace.tau
    vmax = trace.v.max(axis=1) if trace.v.size else np.zeros(0)
    vmin = trace.v.min(axis=1) if trace.v.size else np.zeros(0)
    bad = (vmax > v_max) | (vmin < v_min)
    to_kwh = trace.base_power_kva / 3600.0
    return MetricsReport(
        strategy=trace.strategy,
        v_max=vmax,
        v_min=vmin,
        gamma_v=run_lengths(bad),
        tau=tau,
        violation_fraction=float(bad.mean()) if bad.size else 0.0,
        line_loss_kwh=float(np.sum(trace.line_loss) * tau * to_kwh),
        curtailment_kwh=float(np.sum(np.maximum(trace.p_av - trace.p, 0.0)) * tau * to_kwh),
        reactive_kvarh=float(np.sum(np.abs(trace.q)) * tau * to_kwh),
        pf_failures=trace.n_failed,
    )


def energy_balance_error(trace):
    """Relative mismatch of ``slack = load + losses - generation`` over the run."""
    gen = trace.p.sum(axis=1)
    lhs = np.sum(trace.slack_p)
    rhs = np.sum(trace.load_p + trace.line_loss - gen)
    scale = max(np.sum(np.abs(trace.slack_p)), np.sum(trace.load_p), 1e-12)
    return float(abs(lhs - rhs) / scale)
