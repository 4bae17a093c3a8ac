"""Static Volt/Var droop curve used as a baseline."""

from dataclasses import dataclass

import numpy as np

__all__ = ["StaticVoltVarCurve", "static_voltvar"]


@dataclass(frozen=True)
class StaticVoltVarCurve:
    """Piecewise-linear curve with a dead band.

    Full injection ``+q_cap`` at ``v_low`` and below, zero between
    ``db_low`` and ``db_high``, full absorption ``-q_cap`` at ``v_high``
    and above. ``q_cap = min(cap_fraction * s, sqrt(s^2 - p^2))`` so active
    power keeps priority.
    """

    v_low: float = 0.95
    db_low: float = 0.99
    db_high: float = 1.01
    v_high: float = 1.05
    cap_fraction: float = 0.44

    def cap(self, p, s):
        p, s = np.asarray(p, dtype=float), np.asarray(s, dtype=float)
        return np.minimum(self.cap_fraction * s, np.sqrt(np.maximum(s**2 - p**2, 0.0)))

    def __call__(self, v, p, s):
        v = np.asarray(v, dtype=float)
        cap = self.cap(p, s)
        up = np.interp(v, [self.v_low, self.db_low], [1.0, 0.0])
        down = np.interp(v, [self.db_high, self.v_high], [0.0, 1.0])
        return cap * (up - down)


def static_voltvar(v_local, p_g, s_g, curve=None):
    """Curve set-point for local voltage ``v_local`` and active power ``p_g``."""
    curve = curve or StaticVoltVarCurve()
    q = curve(v_local, p_g, s_g)
    return q if np.ndim(q) else float(q)
