"""Consensus ADMM with closed-form global, local and dual updates.

The global problem is separable per column and solved by clamping; each local
problem is an equality-constrained QP with identity Hessian, solved with a
projector that is factored once up front.
"""
from __future__ import annotations

import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import OrphanVariableError, RankDeficiencyError
from .kernels import DTYPES, dual_phase, gather_scatter_accumulate, local_phase, pack, stacked_matvec

TRACE_COLUMNS = ("iter", "pres", "dres", "eps_prim", "eps_dual", "t_global_us", "t_local_us", "t_dual_us")


@dataclass(frozen=True)
class SolverConfig:
    rho: float = 100.0
    eps_rel: float = 1e-3
    max_iter: int = 50000
    precision: str = "double"
    workers: int = 1
    deterministic: bool = True

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError(f"rho must be > 0, got {self.rho}")
        if not self.eps_rel > 0:
            raise ValueError(f"eps_rel must be > 0, got {self.eps_rel}")
        if self.max_iter < 0:
            raise ValueError(f"max_iter must be >= 0, got {self.max_iter}")
        if self.precision not in DTYPES:
            raise ValueError(f"precision must be one of {sorted(DTYPES)}, got {self.precision!r}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")


@dataclass(frozen=True, eq=False)
class PrecomputedSubsystem:
    abar: np.ndarray  # A^T (A A^T)^-1 A - I
    bbar: np.ndarray  # A^T (A A^T)^-1 b
    cols: np.ndarray

    def astype(self, dtype) -> PrecomputedSubsystem:
        return PrecomputedSubsystem(self.abar.astype(dtype), self.bbar.astype(dtype), self.cols)


def precompute(A, b, cols=None, name=None) -> PrecomputedSubsystem:
    """Factor ``A A^T`` (Cholesky) and form the local projector pair ``(Abar, bbar)``.

    ``A`` must have full row rank. A subsystem without rows gets ``Abar = -I``
    and ``bbar = 0``.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    cols = np.arange(n) if cols is None else np.asarray(cols)
    if m == 0:
        return PrecomputedSubsystem(-np.eye(n), np.zeros(n), cols)
    gram = A @ A.T
    label = f" for subsystem {name!r}" if name is not None else ""
    try:
        factor = scipy.linalg.cho_factor(gram, lower=True)
    except np.linalg.LinAlgError:
        raise RankDeficiencyError(f"A A^T is not positive definite{label}; apply row_rank_reduce first") from None
    d = np.abs(np.diag(factor[0]))
    if d.min() <= 1e-7 * d.max():
        raise RankDeficiencyError(f"A is numerically rank deficient{label}; apply row_rank_reduce first")
    proj = A.T @ scipy.linalg.cho_solve(factor, A)
    abar = 0.5 * (proj + proj.T) - np.eye(n)
    bbar = A.T @ scipy.linalg.cho_solve(factor, b)
    return PrecomputedSubsystem(abar, bbar, cols)


def global_update(xs_sum, lam_sum, c, nu, lower, upper, rho):
    """Elementwise minimizer of ``g_i x + rho/2 sum_k (x - t_k)^2`` over ``[lower_i, upper_i]``.

    ``xs_sum`` holds ``sum_k t_k`` (local copies of column i), ``lam_sum`` the
    matching dual sum and ``nu`` the copy count. Infinite bounds do not clamp.
    """
    if np.any(nu == 0):
        raise OrphanVariableError(f"{int(np.sum(nu == 0))} global variables have no local copy")
    xhat = (xs_sum - (c + lam_sum) / rho) / nu
    return np.minimum(np.maximum(xhat, lower), upper)


def local_update(pre: PrecomputedSubsystem, bx, lam, rho):
    """Closed-form local step ``x_s = Abar d / rho + bbar`` with ``d = -rho B_s x - lam``."""
    dt = pre.abar.dtype.type
    rho = dt(rho)
    d = -rho * bx - lam
    return stacked_matvec(pre.abar[None], d[None])[0] * (dt(1.0) / rho) + pre.bbar


def dual_update(bx, xs, lam, rho):
    return lam + lam.dtype.type(rho) * (bx - xs)


def sequential_local_step(pre, x, lams, rho):
    """Per-subsystem local then dual update; reference path for the batched kernel."""
    xs_new, lam_new = [], []
    for p, lam in zip(pre, lams):
        bx = x[p.cols]
        xs = local_update(p, bx, lam, rho)
        xs_new.append(xs)
        lam_new.append(dual_update(bx, xs, lam, rho))
    return xs_new, lam_new


@dataclass(frozen=True)
class Residuals:
    pres: float
    dres: float
    eps_prim: float
    eps_dual: float

    @property
    def primal_ok(self) -> bool:
        return self.pres <= self.eps_prim

    @property
    def dual_ok(self) -> bool:
        return self.dres <= self.eps_dual

    @property
    def converged(self) -> bool:
        return self.primal_ok and self.dual_ok


def _flat(v):
    if isinstance(v, (list, tuple)):
        return np.concatenate(v) if v else np.zeros(0)
    return np.asarray(v)


def residuals(bx, xs, xs_prev, lam, rho, eps_rel) -> Residuals:
    """Primal/dual residuals and their tolerances.

    Arguments are the stacked local vectors (flat arrays or per-subsystem
    lists): ``bx`` = ``B_s x``, current and previous ``x_s``, and ``lam_s``.
    Each ``B_s`` selects distinct columns, so ``||B_s^T v|| = ||v||``.
    """
    bx, xs, xs_prev, lam = map(_flat, (bx, xs, xs_prev, lam))
    gap = bx - xs
    step = xs - xs_prev
    pres = float(np.sqrt(np.sum(gap * gap)))
    dres = float(rho * np.sqrt(np.sum(step * step)))
    eps_prim = float(eps_rel * max(np.sqrt(np.sum(bx * bx)), np.sqrt(np.sum(xs * xs))))
    eps_dual = float(eps_rel * np.sqrt(np.sum(lam * lam)))
    return Residuals(pres, dres, eps_prim, eps_dual)


@dataclass
class IterationTrace:
    rows: list = field(default_factory=list)

    def append(self, t, res: Residuals, t_global_us, t_local_us, t_dual_us):
        self.rows.append((t, res.pres, res.dres, res.eps_prim, res.eps_dual, t_global_us, t_local_us, t_dual_us))

    def __len__(self):
        return len(self.rows)

    def column(self, name) -> np.ndarray:
        i = TRACE_COLUMNS.index(name)
        return np.array([r[i] for r in self.rows])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_COLUMNS)
            for r in self.rows:
                w.writerow([r[0]] + [repr(float(v)) for v in r[1:]])


@dataclass
class Solution:
    status: str  # "Converged" or "MaxIter"
    x: np.ndarray
    objective: float
    iterations: int
    trace: IterationTrace
    xs: np.ndarray = None
    lam: np.ndarray = None

    def write(self, path, catalog) -> None:
        """CSV of ``role, component, phase, value`` keyed by the variable catalog."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["role", "component", "phase", "value"])
            for (role, cid, ph), v in zip(catalog.entries, self.x):
                w.writerow([role, cid, ph, repr(float(v))])


def _elapsed_us(t0):
    return (time.perf_counter_ns() - t0) / 1e3


def solve(dlp, cfg: SolverConfig = SolverConfig(), *, fixed_iterations: bool = False,
          precomputed=None) -> Solution:
    """Run the ADMM loop on a :class:`~lindistadmm.decomposition.DistributedLP`.

    Local copies start from :meth:`DistributedLP.init_template`, duals from
    zero, and the global iterate from one global update of that start. With
    ``fixed_iterations`` the residual test is recorded but never stops the run.
    """
    dtype = DTYPES[cfg.precision]
    if precomputed is None:
        precomputed = [precompute(s.A, s.b, s.cols, name=s.name) for s in dlp.subsystems]
    batch = pack([p.astype(dtype) for p in precomputed], cfg.precision, n=dlp.n)
    batch.plan(cfg.workers)

    rho = dtype(cfg.rho)
    c = dlp.c.astype(dtype)
    lo = dlp.lower.astype(dtype)
    hi = dlp.upper.astype(dtype)
    nu = dlp.nu.astype(dtype)
    batch.xs[:] = dlp.init_template().astype(dtype)[batch.index]
    batch.lam[:] = 0

    pool = ThreadPoolExecutor(cfg.workers) if cfg.workers > 1 and len(batch.ranges) > 1 else None
    det = cfg.deterministic
    trace = IterationTrace()
    status = "MaxIter"
    try:
        x = global_update(*gather_scatter_accumulate(batch, pool, det), c, nu, lo, hi, rho)
        for t in range(1, cfg.max_iter + 1):
            t0 = time.perf_counter_ns()
            x = global_update(*gather_scatter_accumulate(batch, pool, det), c, nu, lo, hi, rho)
            tg = _elapsed_us(t0)
            xs_prev = batch.xs.copy()
            t0 = time.perf_counter_ns()
            local_phase(batch, x, rho, pool)
            tl = _elapsed_us(t0)
            t0 = time.perf_counter_ns()
            dual_phase(batch, x, rho, pool)
            td = _elapsed_us(t0)
            res = residuals(x[batch.index], batch.xs, xs_prev, batch.lam, rho, cfg.eps_rel)
            trace.append(t, res, tg, tl, td)
            if res.converged and not fixed_iterations:
                status = "Converged"
                break
    finally:
        if pool is not None:
            pool.shutdown()
    objective = float(dlp.c @ x.astype(np.float64))
    return Solution(status, x, objective, len(trace), trace, batch.xs.copy(), batch.lam.copy())


@dataclass(frozen=True)
class KKTReport:
    eq_violation: float
    bound_violation: float
    objective: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.eq_violation <= self.tol and self.bound_violation <= self.tol


def kkt_check(lp, x, tol=1e-6) -> KKTReport:
    """Primal feasibility report: ``||Ax - b||_inf``, worst bound excess and ``c'x``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (lp.n,):
        raise ValueError(f"x has shape {x.shape}, expected ({lp.n},)")
    eq = float(np.max(np.abs(lp.A() @ x - lp.b), initial=0.0))
    bnd = float(np.max(np.maximum(lp.lower - x, x - lp.upper), initial=0.0))
    return KKTReport(eq, max(bnd, 0.0), float(lp.c @ x), tol)
