"""Reference solvers used to check ADMM output; never called from the iteration loop."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import OracleSizeError

MAX_ORACLE_N = 5000

_STATUS = {0: "Optimal", 2: "Infeasible", 3: "Unbounded"}


@dataclass(frozen=True, eq=False)
class OracleReport:
    objective: float
    x: np.ndarray | None
    status: str  # Optimal, Infeasible, Unbounded
    iterations: int
    duality_gap: float = float("nan")


def solve_lp_reference(lp, max_n: int = MAX_ORACLE_N) -> OracleReport:
    """Solve ``min c'x, Ax = b, lo <= x <= hi`` with HiGHS (dual simplex / IPM).

    The returned duality gap is ``|c'x - (b'y + lo'z_lo + hi'z_hi)|`` built
    from the solver's equality and bound marginals.
    """
    if lp.n > max_n:
        raise OracleSizeError(f"reference LP limited to n <= {max_n}, got n = {lp.n}")
    if lp.n == 0:
        return OracleReport(0.0, np.zeros(0), "Optimal", 0, 0.0)
    bounds = np.column_stack([lp.lower, lp.upper])
    kw = dict(A_eq=lp.A(), b_eq=lp.b) if lp.m else {}
    res = linprog(lp.c, bounds=bounds, method="highs", **kw)
    status = _STATUS.get(res.status)
    if status is None:
        raise RuntimeError(f"reference LP failed: status {res.status}: {res.message}")
    if status != "Optimal":
        return OracleReport(float("nan"), None, status, int(res.nit))
    dual = 0.0
    if lp.m:
        dual += float(lp.b @ res.eqlin.marginals)
    for bnd, marg in ((lp.lower, res.lower.marginals), (lp.upper, res.upper.marginals)):
        finite = np.isfinite(bnd)
        dual += float(bnd[finite] @ marg[finite])
    return OracleReport(float(res.fun), np.asarray(res.x), status, int(res.nit), abs(float(res.fun) - dual))


def solve_eq_qp_reference(rho, d, A, b) -> np.ndarray:
    """Minimize ``rho/2 |x|^2 + d'x`` subject to ``Ax = b`` via the dense KKT system."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    d = np.asarray(d, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if m and np.linalg.matrix_rank(A) < m:
        raise np.linalg.LinAlgError("singular KKT system: A is not full row rank")
    K = np.block([[rho * np.eye(n), A.T], [A, np.zeros((m, m))]])
    sol = np.linalg.solve(K, np.concatenate([-d, b]))
    return sol[:n]
