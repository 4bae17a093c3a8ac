"""Radial feeder description: topology, line impedances and the DER fleet.

All electrical quantities are stored in per-unit. DER ratings read from CSV
are given in kVA/kvar and converted with ``base_power_kva``.
"""

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ParseError, SingularityError, TopologyError, UnitError

__all__ = [
    "Line",
    "Network",
    "Der",
    "DerFleet",
    "GridConfig",
    "load_network",
    "load_ders",
    "load_config",
    "write_network",
    "write_ders",
    "build_admittance",
    "aggregate_colocated_ders",
]


@dataclass(frozen=True)
class Line:
    from_node: int
    to_node: int
    r: float
    x: float

    def __post_init__(self):
        if self.from_node == self.to_node:
            raise TopologyError(f"line {self.from_node}->{self.to_node} is a self loop")
        if not (np.isfinite(self.r) and np.isfinite(self.x)):
            raise UnitError(f"non-finite impedance on line {self.from_node}->{self.to_node}")
        if self.r < 0:
            raise UnitError(f"negative resistance on line {self.from_node}->{self.to_node}")
        if self.x <= 0:
            raise UnitError(f"nonpositive reactance on line {self.from_node}->{self.to_node}")

    @property
    def admittance(self):
        return 1.0 / complex(self.r, self.x)


@dataclass(frozen=True)
class GridConfig:
    base_power_kva: float = 100.0
    base_voltage_kv: float = 0.4
    slack_voltage_pu: float = 1.0


@dataclass(frozen=True)
class Network:
    """Radial feeder with slack node 0 and non-slack nodes ``1..n_nodes``."""

    n_nodes: int
    lines: tuple
    slack_voltage: float = 1.0
    base_power_kva: float = 100.0
    base_voltage_kv: float = 0.4
    parent: np.ndarray = field(init=False, repr=False, compare=False)
    parent_line: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "lines", tuple(self.lines))
        if self.n_nodes < 1:
            raise TopologyError("network needs at least one non-slack node")
        for ln in self.lines:
            for nd in (ln.from_node, ln.to_node):
                if not 0 <= nd <= self.n_nodes:
                    raise TopologyError(f"node {nd} outside 0..{self.n_nodes}")
        if len(self.lines) != self.n_nodes:
            raise TopologyError(
                f"radial network with {self.n_nodes} non-slack nodes needs exactly "
                f"{self.n_nodes} lines, got {len(self.lines)}"
            )
        parent, parent_line = _orient_tree(self.n_nodes, self.lines)
        object.__setattr__(self, "parent", parent)
        object.__setattr__(self, "parent_line", parent_line)

    @property
    def line_r(self):
        return np.array([ln.r for ln in self.lines])

    @property
    def line_x(self):
        return np.array([ln.x for ln in self.lines])

    def path_to_root(self, node):
        """Line indices on the path from ``node`` up to the slack."""
        path = []
        while node != 0:
            path.append(int(self.parent_line[node]))
            node = int(self.parent[node])
        return path

    def depth_first_order(self):
        children = [[] for _ in range(self.n_nodes + 1)]
        for nd in range(1, self.n_nodes + 1):
            children[self.parent[nd]].append(nd)
        order, stack = [], [0]
        while stack:
            nd = stack.pop()
            order.append(nd)
            stack.extend(reversed(children[nd]))
        return order

    def scaled(self, factor):
        lines = [Line(ln.from_node, ln.to_node, ln.r * factor, ln.x * factor) for ln in self.lines]
        return Network(self.n_nodes, lines, self.slack_voltage, self.base_power_kva, self.base_voltage_kv)


def _orient_tree(n_nodes, lines):
    adj = [[] for _ in range(n_nodes + 1)]
    for k, ln in enumerate(lines):
        adj[ln.from_node].append((ln.to_node, k))
        adj[ln.to_node].append((ln.from_node, k))
    parent = np.full(n_nodes + 1, -1, dtype=int)
    parent_line = np.full(n_nodes + 1, -1, dtype=int)
    seen = np.zeros(n_nodes + 1, dtype=bool)
    seen[0] = True
    stack = [0]
    while stack:
        nd = stack.pop()
        for nb, k in adj[nd]:
            if k == parent_line[nd]:
                continue
            if seen[nb]:
                raise TopologyError(f"cycle detected through line {lines[k].from_node}->{lines[k].to_node}")
            seen[nb] = True
            parent[nb] = nd
            parent_line[nb] = k
            stack.append(nb)
    if not seen.all():
        missing = np.flatnonzero(~seen).tolist()
        raise TopologyError(f"nodes {missing} are not connected to the slack")
    return parent, parent_line


@dataclass(frozen=True)
class Der:
    id: str
    node: int
    s: float
    q_min: float
    q_max: float

    def __post_init__(self):
        if self.s <= 0:
            raise UnitError(f"DER {self.id}: rated size must be positive")
        if not self.q_min <= 0 <= self.q_max:
            raise UnitError(f"DER {self.id}: need q_min <= 0 <= q_max")
        if max(-self.q_min, self.q_max) > self.s * (1 + 1e-12):
            raise UnitError(f"DER {self.id}: reactive limits exceed rated size")


@dataclass(frozen=True)
class DerFleet:
    """DERs hosted by a network of ``n_nodes`` non-slack nodes.

    ``members`` maps each DER to the original DERs it aggregates (id and
    rated size); it is empty for fleets that were never aggregated.
    """

    ders: tuple
    n_nodes: int
    members: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "ders", tuple(self.ders))
        for d in self.ders:
            if not 1 <= d.node <= self.n_nodes:
                raise TopologyError(f"DER {d.id} sits on node {d.node}, outside 1..{self.n_nodes}")

    def __len__(self):
        return len(self.ders)

    @property
    def nodes(self):
        return np.array([d.node for d in self.ders], dtype=int)

    @property
    def s(self):
        return np.array([d.s for d in self.ders])

    @property
    def q_min(self):
        return np.array([d.q_min for d in self.ders])

    @property
    def q_max(self):
        return np.array([d.q_max for d in self.ders])

    @property
    def placement(self):
        """Node-by-DER 0/1 matrix, one nonzero per column."""
        A = np.zeros((self.n_nodes, len(self.ders)))
        A[self.nodes - 1, np.arange(len(self.ders))] = 1.0
        return A

    @property
    def one_per_node(self):
        return len(set(self.nodes.tolist())) == len(self.ders)

    def disaggregate(self, values):
        """Split per-DER values of an aggregated fleet proportionally to rated size.

        Returns a dict ``{original_id: value}``.
        """
        values = np.asarray(values, dtype=float)
        out = {}
        if not self.members:
            return {d.id: float(v) for d, v in zip(self.ders, values)}
        for group, v in zip(self.members, values):
            total = sum(s for _, s in group)
            for der_id, s in group:
                out[der_id] = float(v) * s / total
        return out


def aggregate_colocated_ders(fleet):
    """Merge DERs sharing a node into one device with summed rating and limits."""
    by_node = {}
    for d in fleet.ders:
        by_node.setdefault(d.node, []).append(d)
    old_members = fleet.members or tuple(((d.id, d.s),) for d in fleet.ders)
    member_of = {d.id: m for d, m in zip(fleet.ders, old_members)}
    ders, members = [], []
    for node in sorted(by_node):
        group = by_node[node]
        if len(group) == 1:
            ders.append(group[0])
            members.append(member_of[group[0].id])
            continue
        ders.append(Der(
            id="+".join(d.id for d in group),
            node=node,
            s=sum(d.s for d in group),
            q_min=sum(d.q_min for d in group),
            q_max=sum(d.q_max for d in group),
        ))
        members.append(tuple(m for d in group for m in member_of[d.id]))
    return DerFleet(ders, fleet.n_nodes, tuple(members))


def build_admittance(net):
    """Slack coupling column ``y`` and reduced bus admittance matrix ``Y``.

    With ``I = y V0 + Y u`` the current injected at each non-slack node.
    """
    N = net.n_nodes
    Yfull = np.zeros((N + 1, N + 1), dtype=complex)
    for ln in net.lines:
        with np.errstate(all="ignore"):
            y = ln.admittance
        if not np.isfinite(y):
            raise SingularityError(f"line {ln.from_node}->{ln.to_node} has non-finite admittance")
        i, j = ln.from_node, ln.to_node
        Yfull[i, i] += y
        Yfull[j, j] += y
        Yfull[i, j] -= y
        Yfull[j, i] -= y
    return Yfull[1:, 0].copy(), Yfull[1:, 1:].copy()


def _read_rows(path, header):
    path = Path(path)
    if not path.exists():
        raise ParseError(f"{path}: file not found")
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [h.strip() for h in reader.fieldnames] != header:
            raise ParseError(f"{path}: expected header {','.join(header)}, got {reader.fieldnames}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if any(v is None or v.strip() == "" for v in row.values()):
                raise ParseError(f"{path}:{lineno}: missing field")
            rows.append((lineno, {k.strip(): v.strip() for k, v in row.items()}))
    return rows


def load_config(path):
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return GridConfig(
        base_power_kva=float(data.get("base_power_kva", GridConfig.base_power_kva)),
        base_voltage_kv=float(data.get("base_voltage_kv", GridConfig.base_voltage_kv)),
        slack_voltage_pu=float(data.get("slack_voltage_pu", GridConfig.slack_voltage_pu)),
    )


def load_network(path, config=None):
    """Read a ``from,to,r_pu,x_pu`` line list into a validated :class:`Network`."""
    config = config or GridConfig()
    lines = []
    nodes = {0}
    for lineno, row in _read_rows(path, ["from", "to", "r_pu", "x_pu"]):
        try:
            i, j = int(row["from"]), int(row["to"])
            r, x = float(row["r_pu"]), float(row["x_pu"])
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc
        if i < 0 or j < 0:
            raise ParseError(f"{path}:{lineno}: negative node id")
        lines.append(Line(i, j, r, x))
        nodes.update((i, j))
    n_nodes = max(nodes)
    if nodes != set(range(n_nodes + 1)):
        raise TopologyError(f"{path}: node ids must be contiguous from 0")
    return Network(n_nodes, lines, config.slack_voltage_pu, config.base_power_kva, config.base_voltage_kv)


def load_ders(path, net, aggregate=True):
    """Read ``id,node,s_kva,qmin_kvar,qmax_kvar`` rows into a per-unit fleet."""
    base = net.base_power_kva
    ders = []
    for lineno, row in _read_rows(path, ["id", "node", "s_kva", "qmin_kvar", "qmax_kvar"]):
        try:
            ders.append(Der(
                id=row["id"],
                node=int(row["node"]),
                s=float(row["s_kva"]) / base,
                q_min=float(row["qmin_kvar"]) / base,
                q_max=float(row["qmax_kvar"]) / base,
            ))
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc
    fleet = DerFleet(ders, net.n_nodes)
    return aggregate_colocated_ders(fleet) if aggregate else fleet


def write_network(net, path):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["from", "to", "r_pu", "x_pu"])
        for ln in net.lines:
            w.writerow([ln.from_node, ln.to_node, repr(float(ln.r)), repr(float(ln.x))])


def write_ders(fleet, path, base_power_kva):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "node", "s_kva", "qmin_kvar", "qmax_kvar"])
        for d in fleet.ders:
            w.writerow([d.id, d.node, repr(float(d.s * base_power_kva)),
                        repr(float(d.q_min * base_power_kva)), repr(float(d.q_max * base_power_kva))])
