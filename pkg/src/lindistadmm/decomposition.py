"""Component-based decomposition of the centralized LP into consensus subsystems.

Each bus and each line of the feeder graph becomes one subsystem, except that
a non-root leaf bus is merged with its single incident line. Subsystem ``s``
owns a block of rows of ``A``; its local variables are the columns those rows
touch, recorded as an ascending index list ``cols`` (the mapping ``B_s``).
"""
from __future__ import annotations

import csv
import statistics
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleSubsystemError, OrphanVariableError, PartitionError
from .feeder import FeederModel
from .lp import CentralizedLP

PIVOT_RTOL = 1e-10
CONSISTENCY_RTOL = 1e-8


@dataclass(frozen=True)
class ComponentGraph:
    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str, str], ...]  # (edge id, from node, to node)
    root: str | None = None
    degree: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        deg = {v: 0 for v in self.nodes}
        for eid, u, v in self.edges:
            if u not in deg or v not in deg:
                raise PartitionError(f"edge {eid!r} has an endpoint outside the node set")
            deg[u] += 1
            deg[v] += 1
        self.degree.clear()
        self.degree.update(deg)

    def leaves(self) -> list[str]:
        return [v for v in self.nodes if self.degree[v] == 1]


@dataclass(frozen=True)
class Group:
    """One subsystem skeleton: the buses and lines whose rows it owns."""

    kind: str  # "bus", "line", "leaf" (leaf bus + its line) or "all"
    buses: tuple[str, ...]
    lines: tuple[str, ...]

    @property
    def name(self) -> str:
        return "+".join(self.buses + self.lines) if self.kind != "all" else "all"


def component_graph(model: FeederModel) -> ComponentGraph:
    """One node per bus, one edge per line or transformer."""
    return ComponentGraph(
        nodes=tuple(b.id for b in model.buses),
        edges=tuple((e.id, e.from_bus, e.to_bus) for e in model.lines),
        root=model.root,
    )


def merge_leaves(g: ComponentGraph) -> list[Group]:
    """Singleton groups for nodes and edges, with each non-root leaf folded into its edge.

    ``len(result) == #nodes + #edges - #merged leaves``.
    """
    incident = {v: [] for v in g.nodes}
    for eid, u, v in g.edges:
        incident[u].append(eid)
        incident[v].append(eid)
    claimed: dict[str, str] = {}  # edge id -> leaf node
    for v in g.nodes:
        if v != g.root and g.degree[v] == 1:
            eid = incident[v][0]
            if eid not in claimed:
                claimed[eid] = v
    merged = set(claimed.values())
    groups = [Group("bus", (v,), ()) for v in g.nodes if v not in merged]
    for eid, _, _ in g.edges:
        if eid in claimed:
            groups.append(Group("leaf", (claimed[eid],), (eid,)))
        else:
            groups.append(Group("line", (), (eid,)))
    return groups


def single_group(model: FeederModel) -> list[Group]:
    """Degenerate partition: the whole network is one subsystem."""
    return [Group("all", tuple(b.id for b in model.buses), tuple(e.id for e in model.lines))]


def row_rank_reduce(A, b, name=None, pivot_rtol=PIVOT_RTOL):
    """Drop redundant rows of a consistent system ``A x = b``.

    Gaussian elimination with partial pivoting picks a maximal independent
    subset of the original rows; those rows are returned in their original
    order together with their indices.

    Raises
    ------
    InfeasibleSubsystemError
        If an eliminated row reduces to ``0 = beta`` with ``beta`` nonzero.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if m == 0:
        return A.copy(), b.copy(), np.arange(0)
    scale = max(1.0, float(np.abs(A).max(initial=0.0)))
    bscale = max(scale, float(np.abs(b).max(initial=0.0)))
    M = np.hstack([A, b[:, None]])
    perm = np.arange(m)
    rank = 0
    for j in range(n):
        if rank == m:
            break
        p = rank + int(np.argmax(np.abs(M[rank:, j])))
        if abs(M[p, j]) <= pivot_rtol * scale:
            M[rank:, j] = 0.0
            continue
        if p != rank:
            M[[rank, p]] = M[[p, rank]]
            perm[[rank, p]] = perm[[p, rank]]
        f = M[rank + 1:, j] / M[rank, j]
        M[rank + 1:] -= np.outer(f, M[rank])
        M[rank + 1:, j] = 0.0
        rank += 1
    resid = np.abs(M[rank:, n])
    if resid.size and resid.max() > CONSISTENCY_RTOL * bscale:
        label = f"subsystem {name!r}" if name is not None else "subsystem"
        raise InfeasibleSubsystemError(
            f"{label} is infeasible: redundant row reduces to 0 = {M[rank:, n][np.argmax(resid)]:.3e}",
            subsystem=name,
        )
    keep = np.sort(perm[:rank])
    return A[keep], b[keep], keep


@dataclass(frozen=True, eq=False)
class Subsystem:
    name: str
    kind: str
    rows: np.ndarray  # global row indices owned (before reduction)
    cols: np.ndarray  # ascending global column indices, defines B_s
    A: np.ndarray  # dense, full row rank
    b: np.ndarray

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return len(self.cols)


@dataclass(frozen=True, eq=False)
class DistributedLP:
    subsystems: tuple[Subsystem, ...]
    c: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    nu: np.ndarray
    lp: CentralizedLP | None = None

    @property
    def n(self) -> int:
        return len(self.c)

    @property
    def S(self) -> int:
        return len(self.subsystems)

    def init_template(self) -> np.ndarray:
        """Per-column starting value: 1 for voltages, bound midpoint when both bounds are finite, else 0."""
        x0 = np.zeros(self.n)
        both = np.isfinite(self.lower) & np.isfinite(self.upper)
        x0[both] = 0.5 * (self.lower[both] + self.upper[both])
        if self.lp is not None:
            x0[self.lp.variables.columns("w")] = 1.0
        return x0

    def stats(self) -> dict:
        """min/max/mean/stdev/sum of ``m_s`` and ``n_s``; stdev is the population value."""
        out = {"S": self.S}
        for key, vals in (("m", [s.m for s in self.subsystems]), ("n", [s.n for s in self.subsystems])):
            out[key] = {
                "min": min(vals), "max": max(vals),
                "mean": statistics.fmean(vals), "stdev": statistics.pstdev(vals),
                "sum": sum(vals),
            }
        return out

    def write_partition_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["subsystem", "kind", "name", "m_s", "n_s"])
            for i, s in enumerate(self.subsystems):
                w.writerow([i, s.kind, s.name, s.m, s.n])


def _row_owner(lp: CentralizedLP, model: FeederModel) -> list[tuple[str, str]]:
    """Component (``"bus"`` or ``"line"``, id) that owns each row."""
    load_bus = {ld.id: ld.bus for ld in model.loads}
    owners = []
    for role, cid, _ in lp.row_catalog:
        if role.startswith("balance"):
            owners.append(("bus", cid))
        elif role.startswith("vdlm"):
            owners.append(("bus", load_bus[cid]))
        else:
            owners.append(("line", cid))
    return owners


def partition_lp(lp: CentralizedLP, model: FeederModel, groups: list[Group]) -> DistributedLP:
    """Split ``lp`` row-wise into one dense, full-row-rank block per group."""
    owner_group: dict[tuple[str, str], int] = {}
    for gi, grp in enumerate(groups):
        for key in [("bus", v) for v in grp.buses] + [("line", e) for e in grp.lines]:
            if key in owner_group:
                raise PartitionError(f"{key[0]} {key[1]!r} belongs to two groups")
            owner_group[key] = gi
    rows_of = [[] for _ in groups]
    for r, key in enumerate(_row_owner(lp, model)):
        if key not in owner_group:
            raise PartitionError(f"row {r} {lp.row_catalog[r]} is attributable to no group")
        rows_of[owner_group[key]].append(r)

    A = lp.A()
    row_cols = lp.row_columns()
    subs = []
    for gi, grp in enumerate(groups):
        rows = np.array(rows_of[gi], dtype=int)
        cols = np.unique(np.concatenate([row_cols[r] for r in rows])) if len(rows) else np.arange(0)
        As = A[rows][:, cols].toarray() if len(rows) else np.zeros((0, 0))
        Ar, br, _ = row_rank_reduce(As, lp.b[rows], name=grp.name)
        subs.append(Subsystem(grp.name, grp.kind, rows, cols, Ar, br))
    nu = np.bincount(np.concatenate([s.cols for s in subs]), minlength=lp.n) if subs else np.zeros(lp.n, int)
    orphans = np.flatnonzero(nu == 0)
    if orphans.size:
        names = [lp.variables.entries[i] for i in orphans[:5]]
        raise OrphanVariableError(f"{orphans.size} variables belong to no subsystem, e.g. {names}")
    return DistributedLP(tuple(subs), lp.c.copy(), lp.lower.copy(), lp.upper.copy(), nu, lp)


def decompose(lp: CentralizedLP, model: FeederModel, mode: str = "component") -> DistributedLP:
    if mode == "component":
        groups = merge_leaves(component_graph(model))
    elif mode == "single":
        groups = single_group(model)
    else:
        raise ValueError(f"unknown partition mode {mode!r}")
    return partition_lp(lp, model, groups)
