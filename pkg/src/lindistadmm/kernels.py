"""Packed storage and batched execution of the per-subsystem closed-form updates.

All ``Abar_s`` blocks live back to back in one flat row-major buffer; the
local vectors ``bbar_s``, ``x_s`` and ``lam_s`` share a second offset table.
For execution, subsystems are sorted by size, split into contiguous ranges
(one per worker) and, inside a range, stacked by equal ``n_s`` so each bucket
is a single stacked matrix-vector product.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field

import numpy as np

DTYPES = {"double": np.float64, "single": np.float32}


def stacked_matvec(mats: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    """``out[k] = mats[k] @ vecs[k]`` for a stack of square blocks.

    Both the sequential and the batched path go through this function, so a
    block yields the same bits whether it is computed alone or in a stack.
    """
    return np.matmul(mats, vecs[..., None])[..., 0]


@dataclass
class Bucket:
    subs: np.ndarray  # subsystem ids
    abar: np.ndarray  # (k, n_s, n_s)
    bbar: np.ndarray  # (k, n_s)
    pos: np.ndarray  # (k, n_s) positions into the flat vector buffers
    gidx: np.ndarray  # (k, n_s) global column indices


@dataclass
class PackedBatch:
    dtype: type
    n: int
    abar: np.ndarray  # flat, sum n_s^2
    abar_offsets: np.ndarray  # (S,) start of each block in ``abar``
    sizes: np.ndarray  # (S,) n_s
    offsets: np.ndarray  # (S + 1,) start of each block in the vector buffers
    index: np.ndarray  # concatenated I_s
    bbar: np.ndarray
    xs: np.ndarray
    lam: np.ndarray
    ranges: list = field(default_factory=list)  # per worker: list[Bucket]

    @property
    def S(self) -> int:
        return len(self.sizes)

    def block(self, s: int) -> np.ndarray:
        k = int(self.sizes[s])
        a0 = int(self.abar_offsets[s])
        return self.abar[a0:a0 + k * k].reshape(k, k)

    def slot(self, s: int) -> slice:
        return slice(int(self.offsets[s]), int(self.offsets[s + 1]))

    def plan(self, workers: int) -> None:
        """Assign subsystems to ``workers`` contiguous ranges of the size-sorted order."""
        workers = max(1, min(int(workers), max(self.S, 1)))
        order = sorted(range(self.S), key=lambda s: (-int(self.sizes[s]), s))
        cost = np.array([int(self.sizes[s]) ** 2 + 1 for s in order], dtype=float)
        cum = np.cumsum(cost)
        total = cum[-1] if len(cum) else 0.0
        cuts = [0]
        for w in range(1, workers):
            cuts.append(int(np.searchsorted(cum, total * w / workers, side="left")) + 1)
        cuts.append(len(order))
        cuts = np.maximum.accumulate(np.clip(cuts, 0, len(order)))
        self.ranges = []
        for w in range(workers):
            members = order[cuts[w]:cuts[w + 1]]
            by_size: dict[int, list[int]] = {}
            for s in members:
                by_size.setdefault(int(self.sizes[s]), []).append(s)
            buckets = []
            for k, subs in by_size.items():
                subs = np.array(sorted(subs), dtype=int)
                pos = (self.offsets[subs][:, None] + np.arange(k)[None, :]).astype(np.int64)
                buckets.append(Bucket(
                    subs=subs,
                    abar=np.stack([self.block(s) for s in subs]) if k else np.zeros((len(subs), 0, 0), self.dtype),
                    bbar=self.bbar[pos],
                    pos=pos,
                    gidx=self.index[pos],
                ))
            self.ranges.append(buckets)


def pack(subsystems, precision: str = "double", n: int | None = None) -> PackedBatch:
    """Pack precomputed subsystems (objects with ``abar``, ``bbar``, ``cols``).

    Every block must already match ``precision``; mixing precisions is an error.
    """
    dtype = DTYPES[precision]
    subsystems = list(subsystems)
    for i, s in enumerate(subsystems):
        if s.abar.dtype != dtype or s.bbar.dtype != dtype:
            raise TypeError(f"subsystem {i} has dtype {s.abar.dtype}/{s.bbar.dtype}, expected {np.dtype(dtype)}")
    sizes = np.array([len(s.cols) for s in subsystems], dtype=np.int64)
    sq = sizes * sizes
    abar_offsets = np.concatenate([[0], np.cumsum(sq)[:-1]]).astype(np.int64) if len(sizes) else np.zeros(0, np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    total_sq = int(sq.sum())
    if total_sq < 0 or offsets[-1] < 0:
        raise OverflowError("packed buffer size overflows int64")
    index = np.concatenate([np.asarray(s.cols, dtype=np.int64) for s in subsystems]) if subsystems else np.zeros(0, np.int64)
    if n is None:
        n = int(index.max()) + 1 if index.size else 0
    if index.size and (index.min() < 0 or index.max() >= n):
        raise ValueError("column index outside [0, n)")
    abar = np.concatenate([s.abar.ravel() for s in subsystems]) if subsystems else np.zeros(0, dtype)
    bbar = np.concatenate([s.bbar for s in subsystems]) if subsystems else np.zeros(0, dtype)
    batch = PackedBatch(
        dtype=dtype, n=n, abar=abar.astype(dtype, copy=False), abar_offsets=abar_offsets, sizes=sizes,
        offsets=offsets, index=index, bbar=bbar.astype(dtype, copy=False),
        xs=np.zeros(offsets[-1], dtype), lam=np.zeros(offsets[-1], dtype),
    )
    batch.plan(1)
    return batch


def unpack(batch: PackedBatch) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Inverse of :func:`pack`: ``(abar, bbar, cols)`` per subsystem."""
    return [(batch.block(s).copy(), batch.bbar[batch.slot(s)].copy(), batch.index[batch.slot(s)].copy())
            for s in range(batch.S)]


def _local_range(batch: PackedBatch, buckets, x, rho, inv_rho):
    for bk in buckets:
        bx = x[bk.gidx]
        d = -rho * bx - batch.lam[bk.pos]
        batch.xs[bk.pos] = stacked_matvec(bk.abar, d) * inv_rho + bk.bbar


def _dual_range(batch: PackedBatch, buckets, x, rho):
    for bk in buckets:
        bx = x[bk.gidx]
        batch.lam[bk.pos] = batch.lam[bk.pos] + rho * (bx - batch.xs[bk.pos])


def _run(pool, fn, batch, *args):
    if pool is None or len(batch.ranges) == 1:
        for buckets in batch.ranges:
            fn(batch, buckets, *args)
        return
    futures = [pool.submit(fn, batch, buckets, *args) for buckets in batch.ranges]
    for f in futures:
        f.result()


def local_phase(batch: PackedBatch, x, rho, pool: ThreadPoolExecutor | None = None) -> None:
    """``x_s <- Abar_s (-rho B_s x - lam_s) / rho + bbar_s`` for every subsystem."""
    rho = batch.dtype(rho)
    _run(pool, _local_range, batch, x, rho, batch.dtype(1.0) / rho)


def dual_phase(batch: PackedBatch, x, rho, pool: ThreadPoolExecutor | None = None) -> None:
    """``lam_s <- lam_s + rho (B_s x - x_s)`` for every subsystem."""
    _run(pool, _dual_range, batch, x, batch.dtype(rho))


def batched_local_step(batch: PackedBatch, x, rho, pool: ThreadPoolExecutor | None = None):
    """Fused local and dual update over the whole batch; buffers are updated in place."""
    local_phase(batch, x, rho, pool)
    dual_phase(batch, x, rho, pool)
    return batch.xs, batch.lam


def gather_scatter_accumulate(batch: PackedBatch, pool: ThreadPoolExecutor | None = None,
                              deterministic: bool = True):
    """Per-column sums ``sum_s B_s^T x_s`` and ``sum_s B_s^T lam_s``.

    Deterministic mode accumulates the whole buffer in packed order (ascending
    subsystem, ascending column). Otherwise each worker range produces a
    partial sum and partials are merged as they complete.
    """
    n = batch.n
    if deterministic or pool is None or len(batch.ranges) == 1:
        xs_sum = np.zeros(n, batch.dtype)
        lam_sum = np.zeros(n, batch.dtype)
        np.add.at(xs_sum, batch.index, batch.xs)
        np.add.at(lam_sum, batch.index, batch.lam)
        return xs_sum, lam_sum

    def partial(buckets):
        px = np.zeros(n, batch.dtype)
        pl = np.zeros(n, batch.dtype)
        for bk in buckets:
            np.add.at(px, bk.gidx.ravel(), batch.xs[bk.pos].ravel())
            np.add.at(pl, bk.gidx.ravel(), batch.lam[bk.pos].ravel())
        return px, pl

    xs_sum = np.zeros(n, batch.dtype)
    lam_sum = np.zeros(n, batch.dtype)
    for f in as_completed([pool.submit(partial, b) for b in batch.ranges]):
        px, pl = f.result()
        xs_sum += px
        lam_sum += pl
    return xs_sum, lam_sum
