"""Overvoltage protection of the PV inverters.

An inverter trips at once above 1.06 p.u. and after ten minutes above
1.05 p.u.; it reconnects once the voltage has stayed below 1.05 p.u. for one
minute.
"""

from dataclasses import dataclass

import numpy as np

__all__ = ["ProtectionSettings", "ProtectionState", "protection_step"]


@dataclass(frozen=True)
class ProtectionSettings:
    trip_instant: float = 1.06
    trip_sustained: float = 1.05
    trip_delay_s: float = 600.0
    reconnect_below: float = 1.05
    reconnect_delay_s: float = 60.0

    def steps(self, delay_s, tau):
        return int(round(delay_s / tau))


@dataclass
class ProtectionState:
    connected: np.ndarray
    over_count: np.ndarray
    under_count: np.ndarray

    @classmethod
    def initial(cls, n):
        return cls(np.ones(n, dtype=bool), np.zeros(n, dtype=int), np.zeros(n, dtype=int))

    def copy(self):
        return ProtectionState(self.connected.copy(), self.over_count.copy(), self.under_count.copy())


def protection_step(state, v_local, tau, settings=None):
    """Advance the per-DER protection counters by one step of ``tau`` seconds."""
    cfg = settings or ProtectionSettings()
    v = np.asarray(v_local, dtype=float)
    connected = state.connected.copy()

    over = v > cfg.trip_sustained
    over_count = np.where(over & connected, state.over_count + 1, 0)
    under = v < cfg.reconnect_below
    under_count = np.where(under & ~connected, state.under_count + 1, 0)

    trip = connected & ((v > cfg.trip_instant) | (over_count >= cfg.steps(cfg.trip_delay_s, tau)))
    reconnect = ~connected & (under_count >= cfg.steps(cfg.reconnect_delay_s, tau))

    connected = (connected & ~trip) | reconnect
    over_count = np.where(trip, 0, over_count)
    under_count = np.where(reconnect, 0, under_count)
    return ProtectionState(connected, over_count, under_count)
