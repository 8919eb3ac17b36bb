"""Assembly of the linearized unbalanced OPF into ``min c'x s.t. Ax = b, lo <= x <= hi``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .feeder import PHASES, FeederModel, Line

SQRT3 = np.sqrt(3.0)

VAR_ROLES = ("pg", "qg", "w", "pb", "qb", "pd", "qd", "p_fwd", "q_fwd", "p_rev", "q_rev")
ROW_ROLES = ("balance-p", "balance-q", "vdlm-def", "vdlm-wye", "vdlm-delta", "loss-p", "loss-q", "volt-drop")

# +1 where the off-diagonal sqrt(3) term of M^p enters with a plus sign.
_CYCLIC_SIGN = np.array([
    [0.0, -1.0, 1.0],
    [1.0, 0.0, -1.0],
    [-1.0, 1.0, 0.0],
])


def build_m_matrices(line: Line) -> tuple[np.ndarray, np.ndarray]:
    """Return the 3x3 sensitivity matrices ``(Mp, Mq)`` of a line.

    ``line.r``/``line.x`` cover only the line's phases; absent phases give
    zero rows and columns, which the assembler never reads.
    """
    r = np.zeros((3, 3))
    x = np.zeros((3, 3))
    idx = np.array(line.phases) - 1
    r[np.ix_(idx, idx)] = line.r
    x[np.ix_(idx, idx)] = line.x
    eye = np.eye(3, dtype=bool)
    mp = np.where(eye, -2.0 * r, r + SQRT3 * _CYCLIC_SIGN * x)
    mq = np.where(eye, -2.0 * x, x - SQRT3 * _CYCLIC_SIGN * r)
    return mp, mq


@dataclass(frozen=True, eq=False)
class VariableCatalog:
    entries: tuple[tuple[str, str, int], ...]
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "_index", {e: i for i, e in enumerate(self.entries)})

    def __len__(self):
        return len(self.entries)

    def index(self, role: str, cid: str, phase: int) -> int:
        return self._index[role, cid, phase]

    def roles(self) -> np.ndarray:
        return np.array([e[0] for e in self.entries], dtype=object)

    def columns(self, role: str) -> np.ndarray:
        return np.array([i for i, e in enumerate(self.entries) if e[0] == role], dtype=int)


@dataclass(frozen=True, eq=False)
class CentralizedLP:
    """``A`` is kept as COO triplets; zero-valued structural entries are retained."""

    c: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    b: np.ndarray
    variables: VariableCatalog
    row_catalog: tuple[tuple[str, str, int], ...]

    @property
    def n(self) -> int:
        return len(self.c)

    @property
    def m(self) -> int:
        return len(self.b)

    @property
    def lower(self) -> np.ndarray:
        return self.variables.lower

    @property
    def upper(self) -> np.ndarray:
        return self.variables.upper

    def A(self) -> sp.csr_matrix:
        """Sparse ``A`` with duplicate triplets summed."""
        return sp.csr_matrix((self.vals, (self.rows, self.cols)), shape=(self.m, self.n))

    def dense(self) -> np.ndarray:
        return self.A().toarray()

    def row_columns(self) -> list[np.ndarray]:
        """Sorted structural column set of every row."""
        order = np.lexsort((self.cols, self.rows))
        r, c = self.rows[order], self.cols[order]
        starts = np.searchsorted(r, np.arange(self.m + 1))
        return [np.unique(c[starts[i]:starts[i + 1]]) for i in range(self.m)]


class _Builder:
    def __init__(self):
        self.rows, self.cols, self.vals, self.rhs, self.catalog = [], [], [], [], []

    def add(self, role, cid, phase, terms, rhs=0.0):
        i = len(self.rhs)
        for col, val in terms:
            self.rows.append(i)
            self.cols.append(col)
            self.vals.append(float(val))
        self.rhs.append(float(rhs))
        self.catalog.append((role, cid, phase))


def _variable_catalog(model: FeederModel) -> VariableCatalog:
    entries, lo, hi = [], [], []

    def add(role, cid, phase, lower, upper):
        entries.append((role, cid, phase))
        lo.append(lower)
        hi.append(upper)

    for g in model.generators:
        for k, ph in enumerate(g.phases):
            add("pg", g.id, ph, g.pmin[k], g.pmax[k])
            add("qg", g.id, ph, g.qmin[k], g.qmax[k])
    for bus in model.buses:
        for k, ph in enumerate(bus.phases):
            add("w", bus.id, ph, bus.wmin[k], bus.wmax[k])
    for ld in model.loads:
        for ph in ld.phases:
            for role in ("pb", "qb", "pd", "qd"):
                add(role, ld.id, ph, -np.inf, np.inf)
    for e in model.lines:
        for k, ph in enumerate(e.phases):
            add("p_fwd", e.id, ph, e.pmin[k], e.pmax[k])
            add("q_fwd", e.id, ph, e.qmin[k], e.qmax[k])
            add("p_rev", e.id, ph, e.pmin[k], e.pmax[k])
            add("q_rev", e.id, ph, e.qmin[k], e.qmax[k])
    return VariableCatalog(tuple(entries), np.array(lo, dtype=float), np.array(hi, dtype=float))


def assemble_lp(model: FeederModel) -> CentralizedLP:
    """Build the centralized LP of the feeder.

    Rows, in order: bus balance (p then q per bus-phase), load rows (two
    definition rows per load-phase followed by the wye or delta coupling rows),
    line rows (loss-p, loss-q, volt-drop per line-phase). The load-side voltage
    is substituted directly as ``w`` (wye) or ``3w`` (delta).
    """
    cat = _variable_catalog(model)
    col = cat.index
    rb = _Builder()

    for bus in model.buses:
        for k, ph in enumerate(bus.phases):
            tp = [(col("w", bus.id, ph), bus.gsh[k])]
            tq = [(col("w", bus.id, ph), -bus.bsh[k])]
            for e in model.lines:
                if ph not in e.phases:
                    continue
                if e.from_bus == bus.id:
                    tp.append((col("p_fwd", e.id, ph), 1.0))
                    tq.append((col("q_fwd", e.id, ph), 1.0))
                elif e.to_bus == bus.id:
                    tp.append((col("p_rev", e.id, ph), 1.0))
                    tq.append((col("q_rev", e.id, ph), 1.0))
            for ld in model.loads_at(bus.id):
                if ph in ld.phases:
                    tp.append((col("pb", ld.id, ph), 1.0))
                    tq.append((col("qb", ld.id, ph), 1.0))
            for g in model.generators_at(bus.id):
                if ph in g.phases:
                    tp.append((col("pg", g.id, ph), -1.0))
                    tq.append((col("qg", g.id, ph), -1.0))
            rb.add("balance-p", bus.id, ph, tp)
            rb.add("balance-q", bus.id, ph, tq)

    for ld in model.loads:
        scale = 1.0 if ld.conn == "wye" else 3.0
        for k, ph in enumerate(ld.phases):
            w = col("w", ld.bus, ph)
            a, b, alpha, beta = ld.a[k], ld.b[k], ld.alpha[k], ld.beta[k]
            rb.add("vdlm-def", ld.id, ph,
                   [(col("pd", ld.id, ph), 1.0), (w, -scale * a * alpha / 2.0)], a * (1.0 - alpha / 2.0))
            rb.add("vdlm-def", ld.id, ph,
                   [(col("qd", ld.id, ph), 1.0), (w, -scale * b * beta / 2.0)], b * (1.0 - beta / 2.0))
        if ld.conn == "wye":
            for ph in ld.phases:
                rb.add("vdlm-wye", ld.id, ph, [(col("pb", ld.id, ph), 1.0), (col("pd", ld.id, ph), -1.0)])
                rb.add("vdlm-wye", ld.id, ph, [(col("qb", ld.id, ph), 1.0), (col("qd", ld.id, ph), -1.0)])
        else:
            _delta_rows(rb, ld.id, lambda role, ph, _id=ld.id: col(role, _id, ph))

    for e in model.lines:
        mp, mq = build_m_matrices(e)
        i, j = e.from_bus, e.to_bus
        for k, ph in enumerate(e.phases):
            rb.add("loss-p", e.id, ph, [
                (col("p_fwd", e.id, ph), 1.0), (col("p_rev", e.id, ph), 1.0),
                (col("w", i, ph), -e.gs[k]), (col("w", j, ph), -e.gs_to[k]),
            ])
            rb.add("loss-q", e.id, ph, [
                (col("q_fwd", e.id, ph), 1.0), (col("q_rev", e.id, ph), 1.0),
                (col("w", i, ph), e.bs[k]), (col("w", j, ph), e.bs_to[k]),
            ])
        for k, ph in enumerate(e.phases):
            # w_i - tap w_j + sum_psi Mp (p_psi - gs w_i,psi) + Mq (q_psi + bs w_i,psi) = 0
            terms = [(col("w", i, ph), 1.0), (col("w", j, ph), -e.tap[k])]
            for kk, psi in enumerate(e.phases):
                a_p, a_q = mp[ph - 1, psi - 1], mq[ph - 1, psi - 1]
                terms.append((col("p_fwd", e.id, psi), a_p))
                terms.append((col("q_fwd", e.id, psi), a_q))
                terms.append((col("w", i, psi), -a_p * e.gs[kk] + a_q * e.bs[kk]))
            rb.add("volt-drop", e.id, ph, terms)

    c = np.zeros(len(cat))
    c[cat.columns("pg")] = 1.0
    return CentralizedLP(
        c=c,
        rows=np.array(rb.rows, dtype=np.int64),
        cols=np.array(rb.cols, dtype=np.int64),
        vals=np.array(rb.vals, dtype=float),
        b=np.array(rb.rhs, dtype=float),
        variables=cat,
        row_catalog=tuple(rb.catalog),
    )


def _delta_rows(rb: _Builder, lid: str, col) -> None:
    h = SQRT3 / 2.0
    pb = {ph: col("pb", ph) for ph in PHASES}
    qb = {ph: col("qb", ph) for ph in PHASES}
    pd = {ph: col("pd", ph) for ph in PHASES}
    qd = {ph: col("qd", ph) for ph in PHASES}
    rb.add("vdlm-delta", lid, 0, [t for ph in PHASES for t in ((pb[ph], 1.0), (pd[ph], -1.0))])
    rb.add("vdlm-delta", lid, 0, [t for ph in PHASES for t in ((qb[ph], 1.0), (qd[ph], -1.0))])
    rb.add("vdlm-delta", lid, 2, [(pb[2], 1.5), (qb[2], -h), (pd[2], -1.0), (pd[1], -0.5), (qd[1], h)])
    rb.add("vdlm-delta", lid, 2, [(pb[2], h), (qb[2], 1.5), (pd[1], -h), (qd[1], -0.5), (qd[2], -1.0)])
    rb.add("vdlm-delta", lid, 3, [(qb[2], SQRT3), (pb[3], 1.5), (qb[3], -h), (pd[1], -0.5), (qd[1], -h), (pd[3], -1.0)])
    rb.add("vdlm-delta", lid, 3, [(pb[2], -SQRT3), (pb[3], h), (qb[3], 1.5), (pd[1], h), (qd[1], -0.5), (qd[3], -1.0)])
