"""Synthetic radial feeders for experiments and tests."""
from __future__ import annotations

import numpy as np

from .feeder import FeederModel, parse_feeder


def ieee13_shaped_parents() -> list[int]:
    """Parent list of a 29-node radial tree with 28 edges and 7 non-root leaves.

    A 23-node spine rooted at node 0 with one pendant node hung off spine
    nodes 3, 6, ..., 18. Same node, edge and leaf counts as the IEEE 13-bus
    component graph.
    """
    parents = [-1] + list(range(22))
    parents += [3, 6, 9, 12, 15, 18]
    return parents


def random_parents(n: int, rng: np.random.Generator) -> list[int]:
    """Uniform random recursive tree on ``n`` nodes rooted at 0."""
    return [-1] + [int(rng.integers(0, i)) for i in range(1, n)]


def tree_feeder_text(parents, phases=(1, 2, 3), seed=0) -> str:
    """Feeder text for a radial tree. Node 0 is the substation; every other node gets a wye load."""
    rng = np.random.default_rng(seed)
    ph = ",".join(map(str, phases))
    k = len(phases)
    out = [f"bus id=n0 phases={ph} wmin=1.0 wmax=1.0 root=true",
           f"gen id=sub bus=n0 phases={ph} pmin=-50 pmax=50 qmin=-50 qmax=50"]
    for i in range(1, len(parents)):
        out.append(f"bus id=n{i} phases={ph} wmin=0.81 wmax=1.21")
    for i in range(1, len(parents)):
        r = 0.004 * np.eye(k) + 0.001 * (1 - np.eye(k))
        x = 0.008 * np.eye(k) + 0.002 * (1 - np.eye(k))
        r *= rng.uniform(0.5, 1.5)
        x *= rng.uniform(0.5, 1.5)
        fmt = lambda m: ",".join(f"{v:.6g}" for v in m.ravel())
        out.append(f"line id=e{i} from=n{parents[i]} to=n{i} phases={ph} r={fmt(r)} x={fmt(x)}")
    for i in range(1, len(parents)):
        a = ",".join(f"{v:.4f}" for v in rng.uniform(0.005, 0.02, k))
        b = ",".join(f"{v:.4f}" for v in rng.uniform(0.002, 0.01, k))
        alpha = float(rng.choice([0.0, 1.0, 2.0]))
        out.append(f"load id=d{i} bus=n{i} phases={ph} conn=wye alpha={alpha} beta={alpha} a={a} b={b}")
    return "\n".join(out) + "\n"


def tree_feeder(parents, phases=(1, 2, 3), seed=0) -> FeederModel:
    return parse_feeder(tree_feeder_text(parents, phases, seed), name="synthetic")
