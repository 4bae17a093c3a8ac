"""CSV readers and writers for profiles, traces and CDF tables."""

import csv

import numpy as np

from ..exceptions import AlignmentError, SchemaError
from .engine import Profiles

__all__ = [
    "PROFILE_HEADER",
    "TRACE_HEADER",
    "load_profiles",
    "write_profiles",
    "write_trace",
    "load_trace_table",
    "write_cdf_table",
]

PROFILE_HEADER = ["t_seconds", "node", "p_av_pu", "p_l_pu", "q_l_pu"]
TRACE_HEADER = ["t", "node", "v_pu", "q_pu", "p_pu", "connected"]


def _read(path, header):
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        head = next(reader, None)
        if head is None or [h.strip() for h in head] != header:
            raise SchemaError(f"{path}: expected header {','.join(header)}")
        rows = [r for r in reader if r]
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    try:
        data = np.array(rows, dtype=float)
    except ValueError:
        raise SchemaError(f"{path}: non-numeric or ragged rows") from None
    if data.ndim != 2 or data.shape[1] != len(header):
        raise SchemaError(f"{path}: expected {len(header)} columns")
    return data


def load_profiles(path, n_nodes=None):
    """Read a 1 s profile table into :class:`Profiles`."""
    data = _read(path, PROFILE_HEADER)
    times = np.unique(data[:, 0])
    nodes = data[:, 1].astype(int)
    if nodes.min() < 1:
        raise SchemaError(f"{path}: nodes are 1-based")
    n = n_nodes or nodes.max()
    dt = float(np.diff(times).min()) if times.size > 1 else 1.0
    if times.size > 1 and not np.allclose(np.diff(times), dt):
        raise AlignmentError(f"{path}: profile times are not evenly spaced")
    k = np.rint((data[:, 0] - times[0]) / dt).astype(int)
    arr = np.full((3, times.size, n), np.nan)
    arr[:, k, nodes - 1] = data[:, 2:].T
    if np.isnan(arr).any():
        raise SchemaError(f"{path}: missing (time, node) rows")
    return Profiles(arr[0], arr[1], arr[2], dt, float(times[0]))


def write_profiles(profiles, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PROFILE_HEADER)
        for k in range(profiles.n_steps):
            t = profiles.start_s + k * profiles.dt
            for n in range(profiles.n_nodes):
                w.writerow([f"{t:g}", n + 1, f"{profiles.p_av[k, n]:.10g}",
                            f"{profiles.p_l[k, n]:.10g}", f"{profiles.q_l[k, n]:.10g}"])


def _decimated_voltages(v, every):
    """Per window of ``every`` steps and per node, the sample farthest from 1 p.u."""
    K, n = v.shape
    pad = (-K) % every
    if pad:
        v = np.concatenate([v, np.repeat(v[-1:], pad, axis=0)])
    w = v.reshape(-1, every, n)
    pick = np.abs(w - 1.0).argmax(axis=1)
    return np.take_along_axis(w, pick[:, None, :], axis=1)[:, 0, :]


def write_trace(trace, path, every=1):
    """Write one row per (kept step, node); DER columns are blank at nodes without a DER.

    With ``every > 1`` one row per window of ``every`` steps is written. The
    voltage of each node is its sample farthest from 1 p.u. within the
    window, so voltage extremes and violations survive decimation; the DER
    columns are taken at the start of the window.
    """
    pos = {int(n): g for g, n in enumerate(trace.der_nodes)}
    every = max(1, int(every))
    steps = range(0, trace.n_steps, every)
    v = trace.v if every == 1 else _decimated_voltages(trace.v, every)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        for row, k in enumerate(steps):
            for n in range(trace.v.shape[1]):
                g = pos.get(n + 1)
                if g is None:
                    w.writerow([f"{trace.t[k]:g}", n + 1, f"{v[row, n]:.10g}", "", "", ""])
                else:
                    w.writerow([f"{trace.t[k]:g}", n + 1, f"{v[row, n]:.10g}",
                                f"{trace.q[k, g]:.10g}", f"{trace.p[k, g]:.10g}", int(trace.connected[k, g])])


def load_trace_table(path):
    """Read a trace CSV back as ``(t, v)`` with ``v`` of shape ``(K, n)``."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        head = next(reader, None)
        if head is None or [h.strip() for h in head] != TRACE_HEADER:
            raise SchemaError(f"{path}: expected header {','.join(TRACE_HEADER)}")
        ts, ns, vs = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(TRACE_HEADER):
                raise SchemaError(f"{path}:{lineno}: expected {len(TRACE_HEADER)} fields")
            try:
                ts.append(float(row[0]))
                ns.append(int(row[1]))
                vs.append(float(row[2]))
            except ValueError:
                raise SchemaError(f"{path}:{lineno}: malformed numeric field") from None
    if not ts:
        raise SchemaError(f"{path}: no data rows")
    t_u, k = np.unique(np.array(ts), return_inverse=True)
    nodes = np.array(ns)
    v = np.full((t_u.size, nodes.max()), np.nan)
    v[k, nodes - 1] = vs
    if np.isnan(v).any():
        raise SchemaError(f"{path}: incomplete trace table")
    return t_u, v


def write_cdf_table(path, columns):
    """Write ``{name: (x, F)}`` CDFs side by side as ``name_x,name_F`` column pairs."""
    names = list(columns)
    length = max(len(columns[n][0]) for n in names)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"{n}_{c}" for n in names for c in ("x", "F")])
        for i in range(length):
            row = []
            for n in names:
                x, F = columns[n]
                row += [f"{x[i]:.10g}", f"{F[i]:.10g}"] if i < len(x) else ["", ""]
            w.writerow(row)
