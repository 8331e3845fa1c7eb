"""Value-preserving reformulation of ``min c^T x, Ax >= b, Bx >= d``.

Pick ``n`` independent rows ``Ahat`` of ``A`` and set column ``i`` of ``N``
to ``eta_i`` times column ``i`` of ``Ahat^{-1}``, with the sign ``eta_i``
chosen so that ``N^T c > 0``.  Then ``A N`` carries ``D(eta)`` on the
selected rows, so each of its columns has at most ``m - n + 1`` nonzeros.
A shift ``v`` with ``(N^T c)^T v = 0`` additionally zeroes all but one of
the selected entries of ``b - A N v``.

The substitution ``x = N (x' + v)`` maps feasible points one-to-one and
keeps the objective value, so the transformed problem

    min (N^T c)^T x'  s.t.  A N x' >= b - A N v,  B N x' >= d - B N v

has the same optimal value.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .conic import ConicProblem, ProblemError

CONDITION_CAP = 1e8
IDENTITY_TOL = 1e-10
SPARSITY_TOL = 1e-12


class TransformError(ValueError):
    pass


def _dense(A) -> np.ndarray:
    return A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)


def select_basis(A, cond_cap: float = CONDITION_CAP) -> tuple[np.ndarray, np.ndarray]:
    """Row indices of an invertible ``n x n`` submatrix and the submatrix itself.

    The leading ``n`` rows are kept when they are well conditioned;
    otherwise rows come from a column-pivoted QR of ``A^T``.
    """
    A = _dense(A)
    m, n = A.shape
    if m < n:
        raise TransformError(f"A not full column rank: only {m} rows for {n} columns")
    lead = A[:n]
    if np.linalg.cond(lead) < cond_cap:
        rows = np.arange(n)
        return rows, lead.copy()
    _, R, piv = la.qr(A.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size < n or diag[n - 1] <= max(m, n) * np.finfo(float).eps * diag[0]:
        raise TransformError("A not full column rank")
    rows = np.sort(piv[:n])
    Ahat = A[rows]
    cond = np.linalg.cond(Ahat)
    if not np.isfinite(cond) or cond >= cond_cap:
        raise TransformError(f"A not full column rank (best basis has condition {cond:.2e})")
    return rows, Ahat


def build_N(Ahat, c) -> tuple[np.ndarray, np.ndarray]:
    """Signed inverse basis ``N`` and sign vector ``eta`` with ``N^T c > 0``."""
    Ahat = np.asarray(Ahat, dtype=float)
    c = np.asarray(c, dtype=float)
    Ainv = np.linalg.inv(Ahat)
    w = Ainv.T @ c
    tol = 1e-10 * np.linalg.norm(c) * np.linalg.norm(Ainv, axis=0)
    bad = np.flatnonzero(np.abs(w) <= tol)
    if bad.size:
        raise TransformError(
            f"(Ahat^-1 c)_{bad[0]} vanishes; perturb c by a small random vector and retry")
    eta = np.sign(w)
    N = Ainv * eta
    eye = Ahat @ N
    if np.max(np.abs(eye - np.diag(eta))) > IDENTITY_TOL * max(1.0, np.linalg.norm(Ahat, 2) * np.linalg.norm(N, 2)):
        raise TransformError("Ahat N differs from D(eta); the basis is too ill conditioned")
    return N, eta


def build_shift(A, N, b, ctilde, eta, rows=None) -> np.ndarray:
    """Shift ``v`` with ``ctilde^T v = 0`` and ``(b - A N v)`` zero on ``rows[1:]``.

    ``rows`` are the basis rows (default: the first ``n``).
    """
    ctilde = np.asarray(ctilde, dtype=float)
    eta = np.asarray(eta, dtype=float)
    b = np.asarray(b, dtype=float)
    n = ctilde.size
    rows = np.arange(n) if rows is None else np.asarray(rows)
    if rows.size != n or eta.size != n:
        raise ValueError("need exactly n basis rows and n signs")
    if ctilde[0] == 0:
        raise TransformError("first transformed cost entry is zero")
    v = np.empty(n)
    v[1:] = eta[1:] * b[rows[1:]]
    v[0] = -(ctilde[1:] @ v[1:]) / ctilde[0]
    return v


@dataclass(frozen=True)
class TransformData:
    rows: np.ndarray
    Ahat: np.ndarray
    eta: np.ndarray
    N: np.ndarray
    v: np.ndarray
    ctilde: np.ndarray

    def to_dict(self) -> dict:
        return {"rows": self.rows.tolist(), "eta": self.eta.tolist(),
                "Ahat": self.Ahat.tolist(), "N": self.N.tolist(),
                "v": self.v.tolist(), "ctilde": self.ctilde.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "TransformData":
        return cls(rows=np.array(d["rows"], dtype=int), Ahat=np.array(d["Ahat"]),
                   eta=np.array(d["eta"]), N=np.array(d["N"]), v=np.array(d["v"]),
                   ctilde=np.array(d["ctilde"]))

    def dumps(self) -> str:
        return json.dumps(self.to_dict())

    def to_original(self, x_prime) -> np.ndarray:
        """``x = N (x' + v)``."""
        return self.N @ (np.asarray(x_prime) + self.v)

    def from_original(self, x) -> np.ndarray:
        """``x' = N^{-1} x - v`` (``N^{-1} = D(eta) Ahat``)."""
        return self.eta * (self.Ahat @ np.asarray(x)) - self.v


def make_transform(problem: ConicProblem, cond_cap: float = CONDITION_CAP) -> TransformData:
    if not problem.is_lp:
        raise ProblemError("the basis transform applies to LPs only")
    rows, Ahat = select_basis(problem.A0, cond_cap)
    N, eta = build_N(Ahat, problem.c)
    ctilde = N.T @ problem.c
    v = build_shift(problem.A0, N, problem.b0, ctilde, eta, rows)
    data = TransformData(rows=rows, Ahat=Ahat, eta=eta, N=N, v=v, ctilde=ctilde)
    scale = np.abs(ctilde) @ np.abs(v)
    if abs(ctilde @ v) > 1e-10 * max(1.0, scale):
        raise TransformError("shift is not orthogonal to the transformed cost")
    return data


def transform_problem(problem: ConicProblem, data: TransformData) -> ConicProblem:
    """Data ``(A N, B N, N^T c, b - A N v, d - B N v)``; ``x'`` is free."""
    if not problem.is_lp:
        raise ProblemError("the basis transform applies to LPs only")
    n = problem.n
    AN = np.asarray(problem.A0 @ data.N)
    rhs = problem.b0 - AN @ data.v
    # the basis rows are D(eta) and the shifted rhs vanishes there (except the
    # first) by construction; store them exactly
    AN[data.rows] = np.diag(data.eta)
    rhs[data.rows[1:]] = 0.0
    B = d = None
    side_cone = None
    if problem.has_side:
        B = np.asarray(problem.B @ data.N)
        d = problem.side_rhs() - B @ data.v
        side_cone = problem.side_cone
    ctilde = data.N.T @ problem.c
    if np.any(ctilde <= 0):
        raise TransformError("transformed cost is not entrywise positive")
    out = ConicProblem(c=ctilde, A0=AN, b0=rhs, B=B, d=d, side_cone=side_cone)
    assert out.n == n
    return out


@dataclass(frozen=True)
class SparsityReport:
    bound: float
    max_nonzeros: int
    column_ratios: np.ndarray
    column_nonzeros: np.ndarray
    rhs_ratio: float
    rhs_nonzeros: int
    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def _nnz_ratio(u: np.ndarray) -> tuple[int, float]:
    a = np.abs(u)
    top = a.max(initial=0.0)
    nnz = int(np.count_nonzero(a > SPARSITY_TOL * top)) if top > 0 else 0
    l2 = np.linalg.norm(a)
    return nnz, (float(a.sum() / l2) if l2 > 0 else 0.0)


def sparsity_certificate(AN, shifted_b) -> SparsityReport:
    """Check the nonzero count and ``||.||_1 / ||.||_2 <= sqrt(m - n + 1)`` for every
    column of ``A N`` and for the shifted right-hand side."""
    AN = _dense(AN)
    m, n = AN.shape
    limit = m - n + 1
    bound = float(np.sqrt(limit))
    slack = bound * (1 + 1e-12)
    ratios = np.empty(n)
    counts = np.empty(n, dtype=int)
    violations = []
    for j in range(n):
        counts[j], ratios[j] = _nnz_ratio(AN[:, j])
        if counts[j] > limit:
            violations.append(f"column {j}: {counts[j]} nonzeros > {limit}")
        if ratios[j] > slack:
            violations.append(f"column {j}: l1/l2 ratio {ratios[j]:.6g} > {bound:.6g}")
    rnnz, rratio = _nnz_ratio(np.asarray(shifted_b, dtype=float))
    if rnnz > limit:
        violations.append(f"rhs: {rnnz} nonzeros > {limit}")
    if rratio > slack:
        violations.append(f"rhs: l1/l2 ratio {rratio:.6g} > {bound:.6g}")
    return SparsityReport(bound=bound, max_nonzeros=limit, column_ratios=ratios,
                          column_nonzeros=counts, rhs_ratio=rratio, rhs_nonzeros=rnnz,
                          violations=tuple(violations))
