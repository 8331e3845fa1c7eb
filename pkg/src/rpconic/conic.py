"""Conic problem pair and its sketched relaxation.

A problem is

    min  c^T x
    s.t. A0 x - b0 >= 0                         (orthant, m rows)
         sum_j x_j A_i[j] - b_i  PSD            (one per block i, p_i x p_i)
         B x - d >= 0                           (side cone K', optional)

and the sketched problem replaces the orthant rows by ``S A0 x >= S b0`` and
each block by its congruence with ``T_i``.  Dual variables are
``y = (y0, M_1, ..., M_l)`` in the same product cone plus ``lam`` for K'.

Symmetric matrices are exchanged as scaled lower triangles (``svec``):
row-major lower triangle, off-diagonal entries times sqrt(2), so that
``svec(X) @ svec(Y) == <X, Y>_F``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .bounds import alpha_factor, nuclear_ratio
from .sketch import SYMMETRY_TOL, SketchBundle, apply_psd_sketch, check_symmetric

PSD_TOL = 1e-8
SIDE_CONES = (None, "orthant")


class ProblemError(ValueError):
    """Malformed or unsupported problem data."""


def svec(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    p = M.shape[0]
    i, j = np.tril_indices(p)
    scale = np.where(i == j, 1.0, np.sqrt(2.0))
    return M[i, j] * scale


def smat(v, p: int | None = None) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if p is None:
        p = int(round((np.sqrt(8 * v.size + 1) - 1) / 2))
    if p * (p + 1) // 2 != v.size:
        raise ValueError(f"vector of length {v.size} is not a packed {p}x{p} matrix")
    i, j = np.tril_indices(p)
    vals = np.where(i == j, v, v / np.sqrt(2.0))
    M = np.zeros((p, p))
    M[i, j] = vals
    M[j, i] = vals
    return M


def in_psd_cone(M, tol: float = PSD_TOL) -> bool:
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return True
    w = np.linalg.eigvalsh(0.5 * (M + M.T))
    return bool(w[0] >= -tol * max(1.0, float(np.max(np.abs(w)))))


@dataclass(frozen=True)
class ConeSpec:
    m: int
    p: tuple[int, ...] = ()

    @property
    def l(self) -> int:  # noqa: E743
        return len(self.p)

    @property
    def dim(self) -> int:
        return self.m + sum(pi * (pi + 1) // 2 for pi in self.p)


@dataclass(frozen=True)
class ConicElement:
    y0: np.ndarray
    M: tuple[np.ndarray, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "y0", np.asarray(self.y0, dtype=float))
        object.__setattr__(self, "M", tuple(check_symmetric(Mi, name=f"block {i}")
                                            for i, Mi in enumerate(self.M)))

    @classmethod
    def zeros(cls, cone: ConeSpec) -> "ConicElement":
        return cls(np.zeros(cone.m), tuple(np.zeros((pi, pi)) for pi in cone.p))

    @property
    def cone(self) -> ConeSpec:
        return ConeSpec(self.y0.size, tuple(Mi.shape[0] for Mi in self.M))

    def vec(self) -> np.ndarray:
        return np.concatenate([self.y0] + [svec(Mi) for Mi in self.M])

    def inner(self, other: "ConicElement") -> float:
        out = float(self.y0 @ other.y0)
        for Mi, Ni in zip(self.M, other.M):
            out += float(np.sum(Mi * Ni))
        return out

    def norm(self) -> float:
        return float(np.sqrt(self.inner(self)))

    def in_cone(self, tol: float = PSD_TOL) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.y0), initial=0.0)))
        if np.any(self.y0 < -tol * scale):
            return False
        return all(in_psd_cone(Mi, tol) for Mi in self.M)


def _as_matrix(A):
    if A is None:
        return None
    if sp.issparse(A):
        return sp.csr_matrix(A, dtype=float)
    return np.atleast_2d(np.asarray(A, dtype=float))


@dataclass(frozen=True)
class ConicProblem:
    c: np.ndarray
    A0: np.ndarray | sp.csr_matrix
    b0: np.ndarray
    A_psd: tuple[np.ndarray, ...] = ()
    b_psd: tuple[np.ndarray, ...] = ()
    B: np.ndarray | sp.csr_matrix | None = None
    d: np.ndarray | None = None
    side_cone: str | None = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        object.__setattr__(self, "c", c)
        A0 = self.A0
        if A0 is None or (not sp.issparse(A0) and np.asarray(A0).size == 0):
            A0 = np.zeros((0, c.size))
        object.__setattr__(self, "A0", _as_matrix(A0))
        object.__setattr__(self, "b0", np.asarray(self.b0, dtype=float).ravel())
        object.__setattr__(self, "A_psd", tuple(np.asarray(a, dtype=float) for a in self.A_psd))
        object.__setattr__(self, "b_psd", tuple(np.asarray(b, dtype=float) for b in self.b_psd))
        object.__setattr__(self, "B", _as_matrix(self.B))
        if self.d is not None:
            object.__setattr__(self, "d", np.asarray(self.d, dtype=float).ravel())
        if self.side_cone not in SIDE_CONES:
            raise ProblemError(f"unsupported side cone {self.side_cone!r}; "
                               "only the non-negative orthant (or none) is handled")

    @property
    def n(self) -> int:
        return self.c.size

    @property
    def m(self) -> int:
        return self.A0.shape[0]

    @property
    def p(self) -> tuple[int, ...]:
        return tuple(b.shape[0] for b in self.b_psd)

    @property
    def cone(self) -> ConeSpec:
        return ConeSpec(self.m, self.p)

    @property
    def has_side(self) -> bool:
        return self.side_cone is not None and self.B is not None

    @property
    def r(self) -> int:
        return self.B.shape[0] if self.has_side else 0

    @property
    def is_lp(self) -> bool:
        return len(self.b_psd) == 0

    def rhs(self) -> ConicElement:
        return ConicElement(self.b0, self.b_psd)

    def side_rhs(self) -> np.ndarray:
        if not self.has_side:
            return np.zeros(0)
        return self.d if self.d is not None else np.zeros(self.r)

    def apply(self, x) -> ConicElement:
        """``A x`` in the product space."""
        x = np.asarray(x, dtype=float)
        y0 = np.asarray(self.A0 @ x).ravel()
        return ConicElement(y0, tuple(np.tensordot(x, Ai, axes=1) for Ai in self.A_psd))

    def adjoint(self, y: ConicElement) -> np.ndarray:
        """``A^T y = A0^T y0 + sum_i [<A_i[j], M_i>]_j``."""
        out = np.asarray(self.A0.T @ y.y0).ravel()
        for Ai, Mi in zip(self.A_psd, y.M):
            out = out + np.tensordot(Ai, Mi, axes=([1, 2], [0, 1]))
        return out

    def side_adjoint(self, lam) -> np.ndarray:
        if not self.has_side:
            return np.zeros(self.n)
        return np.asarray(self.B.T @ np.asarray(lam, dtype=float)).ravel()

    def column_norms(self) -> tuple[np.ndarray, list[np.ndarray]]:
        """Euclidean norms of the columns of A0 and Frobenius norms of each A_i[j]."""
        if sp.issparse(self.A0):
            a0 = np.sqrt(np.asarray(self.A0.multiply(self.A0).sum(axis=0)).ravel())
        else:
            a0 = np.linalg.norm(self.A0, axis=0) if self.m else np.zeros(self.n)
        psd = [np.sqrt(np.sum(Ai * Ai, axis=(1, 2))) for Ai in self.A_psd]
        return a0, psd

    def is_feasible(self, x, tol: float = 1e-7) -> bool:
        x = np.asarray(x, dtype=float)
        slack = self.apply(x)
        rhs = self.rhs()
        y0 = slack.y0 - rhs.y0
        scale = max(1.0, float(np.max(np.abs(rhs.y0), initial=0.0)))
        if np.any(y0 < -tol * scale):
            return False
        for Mi, bi in zip(slack.M, rhs.M):
            if not in_psd_cone(Mi - bi, tol):
                return False
        if self.has_side:
            s = np.asarray(self.B @ x).ravel() - self.side_rhs()
            if np.any(s < -tol * max(1.0, float(np.max(np.abs(self.side_rhs()), initial=0.0)))):
                return False
        return True


@dataclass(frozen=True)
class DualSolution:
    y: ConicElement
    lam: np.ndarray
    objective: float


@dataclass(frozen=True)
class ErrorVector:
    E: np.ndarray
    component_bounds: np.ndarray
    advisory: bool = False


def validate(problem: ConicProblem) -> list[str]:
    """Named violations of the structural assumptions (empty when clean)."""
    issues = []
    n = problem.n
    for j in np.flatnonzero(problem.c == 0):
        issues.append(f"zero cost entry at index {j + 1}")
    if problem.A0.shape[1] != n:
        issues.append(f"dimension: A0 has {problem.A0.shape[1]} columns, c has {n} entries")
    if problem.A0.shape[0] != problem.b0.size:
        issues.append(f"dimension: A0 has {problem.A0.shape[0]} rows, b0 has {problem.b0.size} entries")
    if len(problem.A_psd) != len(problem.b_psd):
        issues.append(f"dimension: {len(problem.A_psd)} PSD coefficient blocks "
                      f"but {len(problem.b_psd)} right-hand sides")
    for i, (Ai, bi) in enumerate(zip(problem.A_psd, problem.b_psd)):
        pi = bi.shape[0] if bi.ndim == 2 else -1
        if bi.ndim != 2 or bi.shape[0] != bi.shape[1]:
            issues.append(f"dimension: b_{i + 1} is not square")
            continue
        if Ai.shape != (n, pi, pi):
            issues.append(f"dimension: A_{i + 1} has shape {Ai.shape}, expected {(n, pi, pi)}")
            continue
        if np.max(np.abs(bi - bi.T), initial=0.0) > SYMMETRY_TOL:
            issues.append(f"non-symmetric block: b_{i + 1}")
        asym = np.max(np.abs(Ai - Ai.transpose(0, 2, 1)), axis=(1, 2), initial=0.0)
        for j in np.flatnonzero(asym > SYMMETRY_TOL):
            issues.append(f"non-symmetric block: A_{i + 1} column {j + 1}")
    if problem.side_cone is not None:
        if problem.B is None:
            issues.append("dimension: side cone declared without B")
        else:
            if problem.B.shape[1] != n:
                issues.append(f"dimension: B has {problem.B.shape[1]} columns, c has {n} entries")
            if problem.d is not None and problem.d.size != problem.B.shape[0]:
                issues.append(f"dimension: B has {problem.B.shape[0]} rows, d has {problem.d.size} entries")
    return issues


def _check_sketch(cone: ConeSpec, sketch: SketchBundle) -> None:
    if sketch.m != cone.m:
        raise ProblemError(f"sketch expects m={sketch.m}, problem has m={cone.m}")
    if sketch.p != cone.p:
        raise ProblemError(f"sketch expects PSD blocks {sketch.p}, problem has {cone.p}")


def project_problem(problem: ConicProblem, sketch: SketchBundle) -> ConicProblem:
    """The relaxation with orthant rows ``S A0``, ``S b0`` and congruence-compressed blocks."""
    _check_sketch(problem.cone, sketch)
    if problem.m:
        SA = sketch.S @ problem.A0
        SA = np.asarray(SA.toarray() if sp.issparse(SA) else SA)
        Sb = sketch.S @ problem.b0
    else:
        SA, Sb = np.zeros((0, problem.n)), np.zeros(0)
    A_psd, b_psd = [], []
    for Ti, Ai, bi in zip(sketch.blocks, problem.A_psd, problem.b_psd):
        R = np.einsum("ab,jbc,dc->jad", Ti, Ai, Ti)
        A_psd.append(0.5 * (R + R.transpose(0, 2, 1)))
        b_psd.append(apply_psd_sketch(Ti, bi))
    return ConicProblem(c=problem.c, A0=SA, b0=Sb, A_psd=tuple(A_psd), b_psd=tuple(b_psd),
                        B=problem.B, d=problem.d, side_cone=problem.side_cone)


@dataclass(frozen=True)
class DualForm:
    """``max b^T y + d^T lam  s.t.  A^T y + B^T lam = c,  y in K,  lam in K'``."""

    problem: ConicProblem

    def objective(self, y: ConicElement, lam) -> float:
        val = self.problem.rhs().inner(y)
        if self.problem.has_side:
            val += float(self.problem.side_rhs() @ np.asarray(lam, dtype=float))
        return val

    def residual(self, y: ConicElement, lam) -> np.ndarray:
        """``A^T y + B^T lam - c``."""
        return self.problem.adjoint(y) + self.problem.side_adjoint(lam) - self.problem.c

    def as_inequality_form(self):
        """For an LP with ``B = I, d = 0`` on the orthant, eliminate ``lam``:
        ``max b0^T y  s.t.  A0^T y <= c, y >= 0``; returns ``(b0, A0^T, c)``."""
        P = self.problem
        if not P.is_lp or P.side_cone != "orthant":
            raise ProblemError("lambda can only be eliminated for an LP with orthant side cone")
        B = P.B.toarray() if sp.issparse(P.B) else P.B
        if B.shape != (P.n, P.n) or not np.array_equal(B, np.eye(P.n)) or np.any(P.side_rhs() != 0):
            raise ProblemError("lambda can only be eliminated when B = I and d = 0")
        return P.b0, P.A0.T, P.c


def dual_of(problem: ConicProblem) -> DualForm:
    if problem.side_cone not in SIDE_CONES:
        raise ProblemError(f"unsupported side cone {problem.side_cone!r}")
    return DualForm(problem)


def apply_sketch(y: ConicElement, sketch: SketchBundle) -> ConicElement:
    """The map ``Q(y) = (S y0, T_i M_i T_i^T)``."""
    _check_sketch(y.cone, sketch)
    return ConicElement(sketch.S @ y.y0,
                        tuple(apply_psd_sketch(Ti, Mi) for Ti, Mi in zip(sketch.blocks, y.M)))


def apply_sketch_adjoint(z: ConicElement, sketch: SketchBundle) -> ConicElement:
    """The adjoint ``Q^T(z) = (S^T z0, T_i^T Z_i T_i)``."""
    if z.y0.size != sketch.k or z.cone.p != sketch.q:
        raise ProblemError("element does not live in the sketched cone")
    return ConicElement(sketch.S.T @ z.y0,
                        tuple(apply_psd_sketch(Ti.T, Zi) for Ti, Zi in zip(sketch.blocks, z.M)))


def build_zQ(y_star: ConicElement, sketch: SketchBundle) -> ConicElement:
    return apply_sketch(y_star, sketch)


def error_vector(problem: ConicProblem, sketch: SketchBundle, y_star: ConicElement,
                 epsilon: float | None = None) -> ErrorVector:
    """``E = A^T(Q^T Q y* - y*)`` with the matching per-component bounds.

    The bound for component ``j`` is
    ``eps alpha(y0*, A0) ||A0_j|| ||y0*|| + 3 eps rho sum_i ||M_i*||_F ||A_i[j]||_F``
    with ``rho`` the largest nuclear-to-Frobenius ratio of the ``M_i*``.
    Zero entries of ``y0*`` or zero columns of ``A0`` are dropped from
    ``alpha`` and the result is flagged advisory.
    """
    _check_sketch(problem.cone, sketch)
    eps = sketch.config.epsilon if epsilon is None else epsilon
    back = apply_sketch_adjoint(apply_sketch(y_star, sketch), sketch)
    diff = ConicElement(back.y0 - y_star.y0, tuple(a - b for a, b in zip(back.M, y_star.M)))
    E = problem.adjoint(diff)

    a0_norms, psd_norms = problem.column_norms()
    bounds = np.zeros(problem.n)
    advisory = False
    y0 = y_star.y0
    if problem.m and np.any(y0 != 0):
        support = y0 != 0
        advisory = not bool(np.all(support))
        A0 = problem.A0.toarray() if sp.issparse(problem.A0) else problem.A0
        cols = np.flatnonzero(a0_norms > 0)
        if cols.size:
            alpha = alpha_factor(y0[support], A0[:, cols], sketch.k, eps)
            bounds += eps * alpha * a0_norms * np.linalg.norm(y0)
    fro = [np.linalg.norm(Mi) for Mi in y_star.M]
    ratios = [nuclear_ratio(Mi) for Mi in y_star.M if np.linalg.norm(Mi) > 0]
    if ratios:
        rho = max(ratios)
        for f, col in zip(fro, psd_norms):
            bounds += 3 * eps * rho * f * col
    return ErrorVector(E=E, component_bounds=bounds, advisory=advisory)


# ---------------------------------------------------------------- file format

INSTANCE_FORMAT = "rpconic-instance"


def _triplets(A) -> dict:
    C = sp.coo_matrix(A)
    order = np.lexsort((C.col, C.row))
    return {"shape": [int(C.shape[0]), int(C.shape[1])],
            "rows": C.row[order].tolist(), "cols": C.col[order].tolist(),
            "vals": C.data[order].tolist()}


def _from_triplets(t: dict) -> sp.csr_matrix:
    return sp.csr_matrix((t["vals"], (t["rows"], t["cols"])), shape=tuple(t["shape"]))


def problem_to_dict(problem: ConicProblem) -> dict:
    """Ordered, JSON-ready representation.

    Field order: header (format, version, n, m, p, side_cone, side_rows),
    then c, A0 (coordinate triplets sorted by row then column), A_psd
    (per block, per variable, scaled lower triangle), b0, b_psd (scaled
    lower triangles), B (triplets or null), d.
    """
    return {
        "format": INSTANCE_FORMAT,
        "version": 1,
        "n": problem.n,
        "m": problem.m,
        "p": list(problem.p),
        "side_cone": problem.side_cone,
        "side_rows": problem.r,
        "c": problem.c.tolist(),
        "A0": _triplets(problem.A0),
        "A_psd": [[svec(Aij).tolist() for Aij in Ai] for Ai in problem.A_psd],
        "b0": problem.b0.tolist(),
        "b_psd": [svec(bi).tolist() for bi in problem.b_psd],
        "B": _triplets(problem.B) if problem.B is not None else None,
        "d": problem.d.tolist() if problem.d is not None else None,
    }


def problem_from_dict(data: dict) -> ConicProblem:
    if data.get("format") != INSTANCE_FORMAT:
        raise ProblemError(f"not an instance file (format={data.get('format')!r})")
    p = data["p"]
    n = data["n"]
    A_psd = tuple(np.stack([smat(v, pi) for v in cols]) if cols else np.zeros((n, pi, pi))
                  for pi, cols in zip(p, data["A_psd"]))
    b_psd = tuple(smat(v, pi) for pi, v in zip(p, data["b_psd"]))
    B = _from_triplets(data["B"]) if data["B"] is not None else None
    d = np.array(data["d"]) if data["d"] is not None else None
    return ConicProblem(c=np.array(data["c"]), A0=_from_triplets(data["A0"]),
                        b0=np.array(data["b0"]), A_psd=A_psd, b_psd=b_psd,
                        B=B, d=d, side_cone=data["side_cone"])


def save_problem(problem: ConicProblem, path) -> None:
    with open(path, "w") as f:
        json.dump(problem_to_dict(problem), f, indent=1)
        f.write("\n")


def load_problem(path) -> ConicProblem:
    with open(path) as f:
        return problem_from_dict(json.load(f))


def lp_problem(c, A, b, B=None, d=None, side_cone: str | None = "orthant",
               nonneg: bool = True) -> ConicProblem:
    """Shorthand for ``min c^T x, A x >= b`` with ``x >= 0`` (``B = I, d = 0``) by default."""
    c = np.asarray(c, dtype=float)
    if nonneg and B is None:
        B = sp.identity(c.size, format="csr")
        d = np.zeros(c.size)
    if B is None:
        side_cone = None
    return ConicProblem(c=c, A0=A, b0=b, B=B, d=d, side_cone=side_cone)
