"""Value-bound evaluation on solved instances and Monte Carlo checks of the
concentration statements behind them.

Every ``verify_*`` function draws its own Gaussian matrices from
``numpy.random.default_rng(seed)`` and returns a :class:`Verification`
holding the success fraction over independent trials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
import scipy.sparse as sp

from .bounds import alpha_factor, general_factor, lp_factor, nuclear_ratio
from .conic import ConicProblem, svec
from .sketch import SketchBundle
from .solver import SolveReport

COS_TOL = 1e-12
SANDWICH_TOL = 1e-6


def _cos(u, v) -> float:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def stacked_columns(problem: ConicProblem) -> np.ndarray:
    """Columns of ``[A0; svec(A_i[.]); B]`` as a dense matrix."""
    parts = [problem.A0.toarray() if sp.issparse(problem.A0) else np.asarray(problem.A0)]
    for Ai in problem.A_psd:
        parts.append(np.stack([svec(Aij) for Aij in Ai], axis=1))
    if problem.has_side:
        parts.append(problem.B.toarray() if sp.issparse(problem.B) else np.asarray(problem.B))
    return np.vstack(parts)


def stacked_rhs(problem: ConicProblem) -> np.ndarray:
    return np.concatenate([problem.rhs().vec(), problem.side_rhs()])


@dataclass
class BoundReport:
    """Inputs and outcome of one value-bound evaluation.

    ``thm1_factor`` is the multiplier of the general conic bound and
    ``thm3_factor`` the one of the transformed-LP bound; whichever was not
    evaluated is ``None``.  ``sandwich`` is ``v(P) * factor <= v(P_S) <= v(P)``
    (with ``SANDWICH_TOL`` relative slack).
    """

    epsilon: float
    alpha_a: float = 0.0
    alpha_b: float = 0.0
    alpha_max: float = 0.0
    nuclear_ratios: tuple[float, ...] = ()
    cos_beta: float = float("nan")
    cos_theta: float = float("nan")
    cos_gamma: np.ndarray = field(default_factory=lambda: np.zeros(0))
    thm1_factor: float | None = None
    thm3_factor: float | None = None
    v_orig: float = float("nan")
    v_proj: float = float("nan")
    observed_ratio: float = float("nan")
    relaxation_holds: bool = False
    lower_holds: bool = False
    advisory: bool = False
    undefined: str | None = None

    @property
    def factor(self) -> float | None:
        return self.thm1_factor if self.thm1_factor is not None else self.thm3_factor

    @property
    def sandwich(self) -> bool:
        return self.relaxation_holds and self.lower_holds

    def as_row(self) -> dict:
        return {"alphaA": self.alpha_a, "alphaB": self.alpha_b, "alphaMax": self.alpha_max,
                "cosBeta": self.cos_beta, "cosTheta": self.cos_theta,
                "minAbsCosGamma": float(np.min(np.abs(self.cos_gamma), initial=np.inf)),
                "thm1Factor": self.thm1_factor, "thm3Factor": self.thm3_factor,
                "observedRatio": self.observed_ratio, "sandwich": self.sandwich,
                "advisory": self.advisory, "undefined": self.undefined}


def _fill_values(rep: BoundReport, v: float, vq: float) -> None:
    rep.v_orig, rep.v_proj = v, vq
    rep.observed_ratio = (v - vq) / v if v != 0 else float("nan")
    slack = SANDWICH_TOL * max(abs(v), 1e-12)
    rep.relaxation_holds = bool(vq <= v + slack)
    f = rep.factor
    rep.lower_holds = bool(f is not None and math.isfinite(f) and v * f <= vq + slack)


def _alphas(y0: np.ndarray, A0, b0: np.ndarray, k: int, epsilon: float):
    """``(alpha(y0, A0), alpha(y0, b0), advisory)`` over the nonzero support of ``y0``."""
    support = y0 != 0
    if y0.size == 0 or not support.any():
        return 0.0, 0.0, y0.size > 0
    A0 = A0.toarray() if sp.issparse(A0) else np.asarray(A0)
    cols = np.linalg.norm(A0, axis=0) > 0
    a = alpha_factor(y0[support], A0[:, cols], k, epsilon) if cols.any() else 0.0
    b = alpha_factor(y0[support], b0, k, epsilon) if np.any(b0 != 0) else 0.0
    return a, b, not bool(support.all())


def _check_reports(orig: SolveReport, proj: SolveReport) -> None:
    if not (orig.optimal and proj.optimal):
        raise ValueError(f"bounds need two optimal solves, got ({orig.status}, {proj.status})")
    if orig.dual is None:
        raise ValueError("the original solve carries no duals")


def evaluate_theorem1(orig: SolveReport, proj: SolveReport, problem: ConicProblem,
                      sketch: SketchBundle, epsilon: float) -> BoundReport:
    """General conic bound ``v(P) * factor <= v(P_Q) <= v(P)``.

    ``x*_Q`` is the projected solver's optimum (exact, so no extra slack).
    """
    _check_reports(orig, proj)
    rep = BoundReport(epsilon=epsilon)
    y, lam = orig.dual.y, orig.dual.lam
    u = np.concatenate([y.vec(), lam])
    rep.cos_beta = _cos(stacked_rhs(problem), u)
    C = stacked_columns(problem)
    norms = np.linalg.norm(C, axis=0) * np.linalg.norm(u)
    with np.errstate(invalid="ignore", divide="ignore"):
        rep.cos_gamma = np.clip(np.where(norms > 0, (C.T @ u) / norms, 0.0), -1.0, 1.0)
    rep.cos_theta = _cos(problem.c, orig.x)
    rep.alpha_a, rep.alpha_b, rep.advisory = _alphas(y.y0, problem.A0, problem.b0,
                                                     sketch.k, epsilon)
    rep.alpha_max = max(rep.alpha_a, rep.alpha_b)
    rep.nuclear_ratios = tuple(nuclear_ratio(M) for M in y.M if np.linalg.norm(M) > 0)

    problems = []
    if abs(rep.cos_beta) < COS_TOL:
        problems.append("cos(beta) vanishes: zero dual objective")
    if rep.cos_gamma.size and np.min(np.abs(rep.cos_gamma)) < COS_TOL:
        problems.append("cos(gamma_j) vanishes: a cost entry is zero")
    if abs(rep.cos_theta) < COS_TOL:
        problems.append("cos(theta) vanishes: zero optimal value")
    if problems:
        rep.undefined = "; ".join(problems)
    else:
        xq_over_x = np.linalg.norm(proj.x) / np.linalg.norm(orig.x)
        rep.thm1_factor = general_factor(
            epsilon, rep.alpha_max, max(rep.nuclear_ratios, default=0.0),
            float(np.max(1.0 / np.abs(rep.cos_gamma))), xq_over_x, rep.cos_theta, rep.cos_beta)
    _fill_values(rep, orig.value, proj.value)
    return rep


def evaluate_theorem3(orig: SolveReport, proj: SolveReport, transformed: ConicProblem,
                      k: int, epsilon: float) -> BoundReport:
    """Transformed-LP bound ``v(P) * factor <= v(P_S) <= v(P)``.

    ``transformed`` is the output of :func:`rpconic.transform.transform_problem`;
    ``orig`` must carry duals of that problem.  Those equal the duals of the
    untransformed LP, and projected values coincide too, so the reports of
    the untransformed solves can be passed directly.
    """
    _check_reports(orig, proj)
    if not transformed.is_lp:
        raise ValueError("the transformed-LP bound needs an LP")
    rep = BoundReport(epsilon=epsilon)
    y, lam = orig.dual.y.y0, orig.dual.lam
    u = np.concatenate([y, lam])
    rep.cos_beta = _cos(stacked_rhs(transformed), u)
    C = stacked_columns(transformed)
    norms = np.linalg.norm(C, axis=0) * np.linalg.norm(u)
    with np.errstate(invalid="ignore", divide="ignore"):
        rep.cos_gamma = np.clip(np.where(norms > 0, (C.T @ u) / norms, 0.0), -1.0, 1.0)
    support = y != 0
    rep.alpha_a, rep.alpha_b, rep.advisory = _alphas(y, transformed.A0, transformed.b0,
                                                     k, epsilon)
    rep.alpha_max = max(rep.alpha_a, rep.alpha_b)
    problems = []
    if not support.any():
        problems.append("dual of the inequality rows is zero")
    if abs(rep.cos_beta) < COS_TOL:
        problems.append("cos(beta) vanishes: zero dual objective")
    if rep.cos_gamma.size and np.min(np.abs(rep.cos_gamma)) < COS_TOL:
        problems.append("cos(gamma_j) vanishes: a cost entry is zero")
    if problems:
        rep.undefined = "; ".join(problems)
    else:
        m, n = transformed.m, transformed.n
        rep.thm3_factor = lp_factor(epsilon, m, n, k, y[support],
                                    float(np.max(1.0 / np.abs(rep.cos_gamma))), rep.cos_beta)
    _fill_values(rep, orig.value, proj.value)
    return rep


# ------------------------------------------------------------------ Monte Carlo


@dataclass(frozen=True)
class Verification:
    fraction: float
    events: int
    worst: float
    """Largest observed deviation divided by its allowed bound (``<= 1`` means success)."""
    extra: dict = field(default_factory=dict)


def _ratio(dev: np.ndarray, bound: np.ndarray) -> np.ndarray:
    dev, bound = np.broadcast_arrays(np.asarray(dev, float), np.asarray(bound, float))
    out = np.zeros(dev.shape)
    pos = bound > 0
    out[pos] = dev[pos] / bound[pos]
    out[~pos & (dev > 0)] = np.inf
    return out


def _summary(ratios: np.ndarray, **extra) -> Verification:
    ratios = np.asarray(ratios, dtype=float).ravel()
    return Verification(fraction=float(np.mean(ratios <= 1.0)), events=ratios.size,
                        worst=float(np.max(ratios, initial=0.0)), extra=extra)


def _check_trials(trials: int) -> None:
    if trials < 1:
        raise ValueError("trials must be at least 1")


def verify_jll(points, k: int, epsilon: float, trials: int = 50, seed: int = 0) -> Verification:
    """Pairwise distances preserved within ``1 +- eps`` by ``G / sqrt(k)``."""
    Z = np.atleast_2d(np.asarray(points, dtype=float))
    if Z.shape[0] < 2:
        raise ValueError("need at least two points")
    _check_trials(trials)
    rng = np.random.default_rng(seed)
    i, j = np.array(list(combinations(range(Z.shape[0]), 2))).T
    D = Z[i] - Z[j]
    dist = np.linalg.norm(D, axis=1)
    ratios = []
    for _ in range(trials):
        G = rng.standard_normal((k, Z.shape[1]))
        proj = np.linalg.norm(D @ G.T, axis=1) / np.sqrt(k)
        ratios.append(_ratio(np.abs(proj - dist), epsilon * dist))
    return _summary(np.concatenate(ratios))


def verify_frobenius_sketch(A, B, k: int, epsilon: float, trials: int = 50,
                            seed: int = 0) -> Verification:
    """``|<A,B> - <TAT', TBT'>| <= 3 eps ||A||_F ||B||_*``.

    ``extra["worst_frobenius_only"]`` records the deviation against the
    ``eps ||A||_F ||B||_F`` scale, which is not a valid bound in general.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    _check_trials(trials)
    rng = np.random.default_rng(seed)
    exact = float(np.sum(A * B))
    bound = 3 * epsilon * np.linalg.norm(A) * np.linalg.norm(B, "nuc")
    alt = epsilon * np.linalg.norm(A) * np.linalg.norm(B)
    devs = np.empty(trials)
    for t in range(trials):
        T = rng.standard_normal((k, A.shape[0])) / np.sqrt(k)
        devs[t] = abs(exact - np.sum((T @ A @ T.T) * (T @ B @ T.T)))
    return _summary(_ratio(devs, bound),
                    worst_frobenius_only=float(np.max(_ratio(devs, alt), initial=0.0)))


def verify_gram_concentration(a, k: int, epsilon: float, trials: int = 50,
                              seed: int = 0) -> Verification:
    """``||U D(a) U' - ||a||_1 I||_2 <= (max a / min a) ||a||_1 eps`` for standard normal ``U``."""
    a = np.asarray(a, dtype=float)
    if np.any(a <= 0):
        raise ValueError("a must be entrywise positive")
    _check_trials(trials)
    rng = np.random.default_rng(seed)
    s = a.sum()
    bound = a.max() / a.min() * s * epsilon
    devs = np.empty(trials)
    for t in range(trials):
        U = rng.standard_normal((k, a.size))
        devs[t] = np.linalg.norm((U * a) @ U.T - s * np.eye(k), 2)
    return _summary(_ratio(devs, bound))


def _nonzero(y, name: str) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    zero = np.flatnonzero(y == 0)
    if zero.size:
        raise ValueError(f"{name} has a zero component at index {zero[0]}")
    return y


def prop1_sides(T, y0, epsilon: float) -> tuple[float, float]:
    """``(||D(S y0) - T D(y0) T'||_2, 16 eps max|y0| / (k min|y0|) ||y0||_1)``."""
    T = np.asarray(T, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    k = T.shape[0]
    S = T * T
    lhs = np.linalg.norm(np.diag(S @ y0) - (T * y0) @ T.T, 2)
    a = np.abs(y0)
    rhs = 16 * epsilon * a.max() / (k * a.min()) * a.sum()
    return float(lhs), float(rhs)


def verify_prop1(y0, k: int, epsilon: float, trials: int = 50, seed: int = 0) -> Verification:
    y0 = _nonzero(y0, "y0")
    _check_trials(trials)
    rng = np.random.default_rng(seed)
    out = np.empty(trials)
    for t in range(trials):
        T = rng.standard_normal((k, y0.size)) / np.sqrt(k)
        out[t] = _ratio(*prop1_sides(T, y0, epsilon))
    return _summary(out)


def verify_prop3(y1, y2, k: int, epsilon: float, trials: int = 50, seed: int = 0) -> Verification:
    """``|(S y1)'(S y2) - y1'y2| <= eps alpha(y1, y2) ||y1|| ||y2||``, with ``alpha``
    the sketch multiplier of ``y2`` against the single column ``y1``."""
    y1 = np.asarray(y1, dtype=float)
    y2 = _nonzero(y2, "y2")
    _check_trials(trials)
    if not np.any(y1):
        return Verification(fraction=1.0, events=trials, worst=0.0)
    alpha = alpha_factor(y2, y1, k, epsilon)
    bound = epsilon * alpha * np.linalg.norm(y1) * np.linalg.norm(y2)
    rng = np.random.default_rng(seed)
    exact = y1 @ y2
    devs = np.empty(trials)
    for t in range(trials):
        T = rng.standard_normal((k, y1.size)) / np.sqrt(k)
        S = T * T
        devs[t] = abs((S @ y1) @ (S @ y2) - exact)
    return _summary(_ratio(devs, bound), alpha=alpha)


def verify_jllapprox(x, y, Q, k: int, epsilon: float, trials: int = 50,
                     seed: int = 0) -> dict[str, Verification]:
    """Three inner-product consequences of distance preservation.

    ``"i"``: ``|(Tx)'(Ty) - x'y| <= eps ||x|| ||y||``;
    ``"ii"``: ``|Q T'T x - Q x| <= eps ||x|| ||Q_row||`` per row of ``Q``;
    ``"iii"``: ``|x'T'T Q T'T y - x'Qy| <= 3 eps ||x|| ||y|| ||Q||_F``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    Q = np.asarray(Q, dtype=float)
    _check_trials(trials)
    rng = np.random.default_rng(seed)
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    rows = np.linalg.norm(Q, axis=1)
    r1, r2, r3 = [], [], []
    for _ in range(trials):
        T = rng.standard_normal((k, x.size)) / np.sqrt(k)
        Tx, Ty = T @ x, T @ y
        r1.append(_ratio(abs(Tx @ Ty - x @ y), epsilon * nx * ny))
        r2.append(_ratio(np.abs(Q @ (T.T @ Tx) - Q @ x), epsilon * nx * rows))
        r3.append(_ratio(abs((T.T @ Tx) @ Q @ (T.T @ Ty) - x @ Q @ y),
                         3 * epsilon * nx * ny * np.linalg.norm(Q)))
    return {"i": _summary(np.array(r1)), "ii": _summary(np.concatenate(r2)),
            "iii": _summary(np.array(r3))}
