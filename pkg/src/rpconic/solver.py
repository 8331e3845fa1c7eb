"""Solver adapter: one entry point for the original, sketched and transformed problems.

Backends
--------
``highs``     scipy's HiGHS through ``scipy.optimize.linprog`` (LP only).
``clarabel``  Clarabel through cvxpy (LP and PSD blocks).
``scs``       SCS through cvxpy (first-order; useful for loose-tolerance runs).
``auto``      ``highs`` for LPs, ``clarabel`` otherwise.

The default backend can be overridden with the ``RPCONIC_BACKEND``
environment variable.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .conic import ConicElement, ConicProblem, DualSolution, ProblemError, dual_of

log = logging.getLogger(__name__)

BACKENDS = ("auto", "highs", "clarabel", "scs")
OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
TIME_LIMIT = "timeLimit"
NUMERICAL_FAILURE = "numericalFailure"
STATUSES = (OPTIMAL, INFEASIBLE, UNBOUNDED, TIME_LIMIT, NUMERICAL_FAILURE)


class BackendUnavailable(RuntimeError):
    pass


def default_backend() -> str:
    return os.environ.get("RPCONIC_BACKEND", "auto")


@dataclass(frozen=True)
class SolverConfig:
    backend: str = field(default_factory=default_backend)
    feas_tol: float = 1e-8
    opt_tol: float = 1e-8
    time_limit: float = 3600.0
    threads: int = 1
    log_dir: str | None = None

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise BackendUnavailable(f"unknown backend {self.backend!r}; choose from {BACKENDS}")
        for name in ("feas_tol", "opt_tol"):
            v = getattr(self, name)
            if not 0 < v < 1e-2 + 1e-15:
                raise ValueError(f"{name} must lie in (0, 1e-2], got {v}")
        if self.time_limit <= 0:
            raise ValueError("time_limit must be positive")


@dataclass(frozen=True)
class SolveReport:
    status: str
    value: float
    x: np.ndarray | None
    dual: DualSolution | None
    wall_seconds: float
    backend: str = ""
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


# ------------------------------------------------------------------ HiGHS model


def _is_identity(B) -> bool:
    if B.shape[0] != B.shape[1]:
        return False
    if sp.issparse(B):
        D = B - sp.identity(B.shape[0], format="csr")
        return D.count_nonzero() == 0
    return bool(np.array_equal(B, np.eye(B.shape[0])))


@dataclass(frozen=True)
class LinprogModel:
    """``min c^T x  s.t.  A_ub x <= b_ub,  lb <= x``.

    Rows ``0 .. m-1`` of ``A_ub`` are the negated orthant rows; any further
    rows are the negated side rows. When ``B = I`` the side cone is carried
    by the lower bounds instead.
    """

    c: np.ndarray
    A_ub: sp.csr_matrix
    b_ub: np.ndarray
    lb: np.ndarray
    m: int
    side_as_bounds: bool
    side_rows: int

    @property
    def nnz(self) -> int:
        return int(self.A_ub.nnz)


def to_linprog_model(problem: ConicProblem) -> LinprogModel:
    if not problem.is_lp:
        raise ProblemError("the HiGHS backend handles LPs only")
    n = problem.n
    blocks = [-sp.csr_matrix(problem.A0)]
    rhs = [-problem.b0]
    lb = np.full(n, -np.inf)
    side_as_bounds = False
    if problem.has_side:
        if _is_identity(problem.B):
            lb = problem.side_rhs().astype(float).copy()
            side_as_bounds = True
        else:
            blocks.append(-sp.csr_matrix(problem.B))
            rhs.append(-problem.side_rhs())
    A_ub = sp.vstack(blocks, format="csr") if blocks else sp.csr_matrix((0, n))
    A_ub.eliminate_zeros()
    return LinprogModel(c=problem.c, A_ub=A_ub, b_ub=np.concatenate(rhs), lb=lb,
                        m=problem.m, side_as_bounds=side_as_bounds, side_rows=problem.r)


def from_linprog_model(model: LinprogModel) -> ConicProblem:
    n = model.c.size
    A0 = -model.A_ub[:model.m]
    b0 = -model.b_ub[:model.m]
    if model.side_as_bounds:
        B, d = sp.identity(n, format="csr"), model.lb.copy()
    elif model.side_rows:
        B, d = -model.A_ub[model.m:], -model.b_ub[model.m:]
    else:
        B, d = None, None
    return ConicProblem(c=model.c, A0=A0, b0=b0, B=B, d=d,
                        side_cone="orthant" if B is not None else None)


_LINPROG_STATUS = {0: OPTIMAL, 2: INFEASIBLE, 3: UNBOUNDED, 4: NUMERICAL_FAILURE}


def _solve_highs(problem: ConicProblem, config: SolverConfig) -> SolveReport:
    model = to_linprog_model(problem)
    bounds = [(None if np.isinf(lo) else lo, None) for lo in model.lb]
    options = {
        "primal_feasibility_tolerance": config.feas_tol,
        "dual_feasibility_tolerance": config.opt_tol,
        "time_limit": config.time_limit,
    }
    A_ub = model.A_ub if model.A_ub.shape[0] else None
    b_ub = model.b_ub if model.A_ub.shape[0] else None
    t0 = time.perf_counter()
    res = linprog(model.c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs", options=options)
    wall = time.perf_counter() - t0
    if res.status == 1:
        status = TIME_LIMIT if "time" in res.message.lower() else NUMERICAL_FAILURE
    else:
        status = _LINPROG_STATUS.get(res.status, NUMERICAL_FAILURE)
    if status != OPTIMAL:
        return SolveReport(status, float("nan"), None, None, wall, "highs", res.message)

    marg = getattr(getattr(res, "ineqlin", None), "marginals", None)
    if marg is None:
        return SolveReport(NUMERICAL_FAILURE, float("nan"), res.x, None, wall, "highs",
                           "no dual information returned")
    y0 = np.maximum(-np.asarray(marg[:model.m]), 0.0)
    if model.side_as_bounds:
        lam = np.maximum(np.asarray(res.lower.marginals), 0.0)
    else:
        lam = np.maximum(-np.asarray(marg[model.m:]), 0.0)
    y = ConicElement(y0)
    dual = DualSolution(y, lam, dual_of(problem).objective(y, lam))
    return SolveReport(OPTIMAL, float(res.fun), np.asarray(res.x), dual, wall, "highs", res.message)


# ------------------------------------------------------------------ cvxpy models


def _solve_cvxpy(problem: ConicProblem, config: SolverConfig, backend: str) -> SolveReport:
    try:
        import cvxpy as cp
    except ImportError as exc:  # pragma: no cover
        raise BackendUnavailable("cvxpy is not installed") from exc
    solver = backend.upper()
    if solver not in cp.installed_solvers():
        raise BackendUnavailable(f"{solver} is not available to cvxpy")

    n = problem.n
    x = cp.Variable(n)
    cons = []
    orth = side = None
    if problem.m:
        A0 = problem.A0
        orth = A0 @ x >= problem.b0
        cons.append(orth)
    psd = []
    for Ai, bi in zip(problem.A_psd, problem.b_psd):
        p = bi.shape[0]
        expr = cp.reshape(Ai.reshape(n, p * p).T @ x, (p, p), order="C") - bi
        con = expr >> 0
        psd.append(con)
        cons.append(con)
    if problem.has_side:
        side = problem.B @ x >= problem.side_rhs()
        cons.append(side)
    prob = cp.Problem(cp.Minimize(problem.c @ x), cons)

    if solver == "CLARABEL":
        opts = {"tol_gap_abs": config.opt_tol, "tol_gap_rel": config.opt_tol,
                "tol_feas": config.feas_tol, "time_limit": config.time_limit}
    elif solver == "SCS":
        opts = {"eps": config.opt_tol, "time_limit_secs": config.time_limit}
    else:
        opts = {}
    try:
        prob.solve(solver=solver, **opts)
    except cp.error.SolverError as exc:
        return SolveReport(NUMERICAL_FAILURE, float("nan"), None, None, 0.0, backend, str(exc))
    stats = prob.solver_stats
    wall = float(stats.solve_time) if stats is not None and stats.solve_time is not None else 0.0
    st = prob.status
    if st in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        status = OPTIMAL
    elif st in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        status = INFEASIBLE
    elif st in (cp.UNBOUNDED, cp.UNBOUNDED_INACCURATE):
        status = UNBOUNDED
    elif st == cp.USER_LIMIT:
        status = TIME_LIMIT
    else:
        status = NUMERICAL_FAILURE
    if status != OPTIMAL:
        return SolveReport(status, float("nan"), None, None, wall, backend, str(st))
    y0 = np.asarray(orth.dual_value).ravel() if orth is not None else np.zeros(0)
    Ms = []
    for con in psd:
        M = np.asarray(con.dual_value)
        Ms.append(0.5 * (M + M.T))
    lam = np.asarray(side.dual_value).ravel() if side is not None else np.zeros(0)
    y = ConicElement(y0, tuple(Ms))
    dual = DualSolution(y, lam, dual_of(problem).objective(y, lam))
    return SolveReport(OPTIMAL, float(prob.value), np.asarray(x.value), dual, wall, backend, str(st))


def solve(problem: ConicProblem, config: SolverConfig | None = None) -> SolveReport:
    """Solve ``problem`` and return value, primal point, duals and solver time."""
    config = SolverConfig() if config is None else config
    backend = config.backend
    if backend == "auto":
        backend = "highs" if problem.is_lp else "clarabel"
    if backend == "highs":
        report = _solve_highs(problem, config)
    else:
        report = _solve_cvxpy(problem, config, backend)
    if config.log_dir is not None:
        _write_log(report, problem, config)
    return report


def _write_log(report: SolveReport, problem: ConicProblem, config: SolverConfig) -> None:
    d = Path(config.log_dir)
    d.mkdir(parents=True, exist_ok=True)
    idx = len(list(d.glob("solve_*.json")))
    entry = {"backend": report.backend, "status": report.status, "value": report.value,
             "wall_seconds": report.wall_seconds, "message": report.message,
             "n": problem.n, "m": problem.m, "p": list(problem.p)}
    (d / f"solve_{idx:05d}.json").write_text(json.dumps(entry, indent=1) + "\n")


# ---------------------------------------------------------------- assumptions


@dataclass(frozen=True)
class AssumptionReport:
    zero_dual_components: tuple[int, ...]
    zero_value: bool
    duality_gap: float
    gap_flag: bool
    dual_residual: float

    @property
    def flags(self) -> list[str]:
        out = []
        if self.zero_dual_components:
            out.append(f"dual orthant component(s) equal to zero: {len(self.zero_dual_components)}")
        if self.zero_value:
            out.append("optimal value is zero")
        if self.gap_flag:
            out.append(f"duality gap {self.duality_gap:.3e} above tolerance")
        return out

    @property
    def clean(self) -> bool:
        return not self.flags


def check_assumptions(report: SolveReport, problem: ConicProblem, gap_tol: float = 1e-6,
                      zero_tol: float = 0.0, value_tol: float = 1e-9) -> AssumptionReport:
    """Advisory flags: zero dual components, zero optimal value, duality gap."""
    if not report.optimal or report.dual is None:
        raise ValueError("assumption checks need an optimal report with duals")
    y0 = report.dual.y.y0
    zeros = tuple(int(i) for i in np.flatnonzero(np.abs(y0) <= zero_tol))
    primal = float(problem.c @ report.x)
    dual_val = dual_of(problem).objective(report.dual.y, report.dual.lam)
    gap = abs(primal - dual_val) / max(1.0, abs(primal))
    resid = dual_of(problem).residual(report.dual.y, report.dual.lam)
    return AssumptionReport(
        zero_dual_components=zeros,
        zero_value=abs(report.value) <= value_tol,
        duality_gap=gap,
        gap_flag=gap > gap_tol,
        dual_residual=float(np.max(np.abs(resid), initial=0.0)),
    )
