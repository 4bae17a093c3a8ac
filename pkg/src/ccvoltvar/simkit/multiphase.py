"""Per-phase controller on the linear multi-phase model ``v = X q + rho``.

This mode runs on the linearised model only; no multi-phase power flow is
solved.
"""

from dataclasses import dataclass

import numpy as np

from ..exceptions import DomainError

__all__ = ["LinearTrace", "run_linear_multiphase"]


@dataclass
class LinearTrace:
    v: np.ndarray
    q: np.ndarray
    diverged_at: int = None
    mode: str = "linear-model"


def run_linear_multiphase(X, rho, gains, q_min, q_max, steps=None, q0=None, threshold=1e3):
    """Iterate the projected per-phase law against ``v = X q + rho``.

    ``rho`` is either one vector of length ``3n`` (held constant for
    ``steps`` iterations) or an array ``(K, 3n)`` replayed step by step.
    ``q_min``/``q_max`` are per-phase boxes of the same length.
    """
    X = np.asarray(X, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if rho.ndim == 1:
        if steps is None:
            raise DomainError("steps is required with a constant rho")
        rho = np.broadcast_to(rho, (steps, rho.size))
    K, n = rho.shape
    if X.shape != (n, n):
        raise DomainError(f"X must be {n}x{n}")
    q = np.zeros(n) if q0 is None else np.asarray(q0, dtype=float).copy()
    out_q = np.empty((K, n))
    out_v = np.empty((K, n))
    diverged = None
    # a diverging loop overflows; that is the outcome being detected
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(K):
            v = X @ q + rho[k]
            out_v[k] = v
            q = np.clip(q + gains.eta * (1.0 - v) - (1.0 - gains.eta) * gains.alpha * q, q_min, q_max)
            out_q[k] = q
            if diverged is None and (not np.all(np.isfinite(q)) or np.max(np.abs(q)) > threshold):
                diverged = k
    return LinearTrace(out_v, out_q, diverged)
