"""Random LP benchmark: instance generation, trials, aggregation, CSV output."""

from __future__ import annotations

import csv
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .analysis import BoundReport, evaluate_theorem1, evaluate_theorem3
from .conic import ConicProblem, lp_problem, project_problem
from .sketch import SketchBundle, SketchConfig, make_sketch
from .solver import OPTIMAL, SolverConfig, solve
from .transform import make_transform, transform_problem

log = logging.getLogger(__name__)

KAPPA = 1.8055
EPSILON_GRID = (0.05, 0.1, 0.2, 0.4)
CSV_HEADER = ("m", "n", "k", "law", "meantorg", "stdtorg", "meantproj", "stdtproj",
              "meanratio", "stdratio")
SERIES_HEADER = ("law", "m", "n", "k", "trials", "meanratio", "stdratio")


@dataclass(frozen=True)
class Law:
    """``U(a,b)`` (uniform on ``[a, b]``) or ``N(mu,var)`` (normal, ``var`` is the variance)."""

    kind: str
    a: float
    b: float

    _PATTERN = re.compile(r"^\s*([UN])\s*\(\s*([^,()]+?)\s*,\s*([^,()]+?)\s*\)\s*$", re.I)

    def __post_init__(self):
        if self.kind not in ("U", "N"):
            raise ValueError(f"unknown law kind {self.kind!r}")
        if self.kind == "U" and not self.a < self.b:
            raise ValueError(f"uniform law needs a < b, got U({self.a},{self.b})")
        if self.kind == "N" and self.b <= 0:
            raise ValueError(f"normal law needs a positive variance, got {self.b}")

    @classmethod
    def parse(cls, text: str) -> "Law":
        match = cls._PATTERN.match(text)
        if not match:
            raise ValueError(f"cannot parse law {text!r}; expected U(a,b) or N(mu,var)")
        return cls(match.group(1).upper(), float(match.group(2)), float(match.group(3)))

    @property
    def tag(self) -> str:
        return f"{self.kind}({self.a:g},{self.b:g})"

    @property
    def mean(self) -> float:
        return 0.5 * (self.a + self.b) if self.kind == "U" else self.a

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == "U":
            return rng.uniform(self.a, self.b, size)
        return rng.normal(self.a, math.sqrt(self.b), size)

    def __str__(self) -> str:
        return self.tag


POSITIVE_MEAN_LAWS = ("U(0,1)", "U(0,2)", "U(1,2)", "U(-1,2)", "N(1,2)")
ZERO_MEAN_LAWS = ("U(-1,1)", "N(0,1)", "N(0,2)")


@dataclass(frozen=True)
class InstanceSpec:
    m: int
    n: int
    density: float
    law: Law
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.law, str):
            object.__setattr__(self, "law", Law.parse(self.law))
        if not self.m > self.n >= 1:
            raise ValueError(f"need m > n >= 1, got m={self.m}, n={self.n}")
        if not 0 < self.density <= 1:
            raise ValueError(f"density must lie in (0, 1], got {self.density}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def _random_rows(spec: InstanceSpec, rng: np.random.Generator, rows: int) -> sp.csr_matrix:
    mask = rng.random((rows, spec.n)) < spec.density
    r, c = np.nonzero(mask)
    vals = spec.law.sample(rng, r.size)
    return sp.csr_matrix((vals, (r, c)), shape=(rows, spec.n))


def generate_instance(spec: InstanceSpec, chunk: int = 1024) -> ConicProblem:
    """``min 1'x  s.t.  A x >= A x0 - eta,  x >= 0`` with a Bernoulli(density)
    sparsity mask, nonzeros from ``spec.law`` and ``x0, eta ~ U(0,1)``."""
    rng = np.random.default_rng(spec.seed)
    blocks = [_random_rows(spec, rng, min(chunk, spec.m - s)) for s in range(0, spec.m, chunk)]
    A = sp.vstack(blocks, format="csr")
    x0 = rng.uniform(0.0, 1.0, spec.n)
    eta = rng.uniform(0.0, 1.0, spec.m)
    b = A @ x0 - eta
    empty = np.flatnonzero((np.diff(A.indptr) == 0) & (b > 0))
    if empty.size:
        # cannot happen while eta > 0; kept as a guard for custom laws
        log.warning("regenerating %d empty rows with positive right-hand side", empty.size)
        A = A.tolil()
        for i in empty:
            while True:
                row = _random_rows(spec, rng, 1)
                if row.nnz:
                    break
            A[i] = row
            b[i] = row @ x0 - eta[i]
        A = A.tocsr()
    return lp_problem(np.ones(spec.n), A, b)


def choose_k(n: int, epsilon: float = 0.2, kappa: float = KAPPA) -> int:
    """``ceil(kappa ln(n) / eps^2)``; ``kappa`` is fitted to the published (n, k) pairs."""
    if n < 2:
        raise ValueError("n must be at least 2")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    return max(1, math.ceil(kappa * math.log(n) / epsilon**2))


@dataclass
class TrialRecord:
    spec: InstanceSpec
    k: int
    torg: float
    tproj: float
    vorg: float
    vproj: float
    ratio: float
    status_pair: tuple[str, str]
    bound_report: BoundReport | None = None
    lp_bound_report: BoundReport | None = None
    factor_grid: dict[float, tuple[float | None, float | None]] = field(default_factory=dict)

    @property
    def usable(self) -> bool:
        return self.status_pair == (OPTIMAL, OPTIMAL) and math.isfinite(self.ratio)


def run_trial(spec: InstanceSpec, epsilon: float = 0.2, solver: SolverConfig | None = None,
              evaluate_bounds: bool = False, k: int | None = None, kappa: float = KAPPA,
              identity_sketch: bool = False,
              epsilon_grid: Sequence[float] = EPSILON_GRID) -> TrialRecord:
    """Solve one generated instance and its sketched relaxation.

    With ``evaluate_bounds`` both value bounds are evaluated (the LP one on
    the basis-transformed instance), and ``factor_grid`` maps each epsilon
    of ``epsilon_grid`` to ``(thm1_factor, thm3_factor)``.
    """
    problem = generate_instance(spec)
    if identity_sketch:
        sketch = SketchBundle.identity_like(spec.m, (), epsilon)
    else:
        if k is None:
            k = choose_k(spec.n, epsilon, kappa)
        k = min(max(k, 1), spec.m - 1)
        sketch = make_sketch(spec.m, (), SketchConfig(k=k, epsilon=epsilon, seed=spec.seed))
    projected = project_problem(problem, sketch)
    orig = solve(problem, solver)
    proj = solve(projected, solver)
    ratio = float("nan")
    if orig.optimal and proj.optimal and orig.value != 0:
        ratio = (orig.value - proj.value) / orig.value
    rec = TrialRecord(spec=spec, k=sketch.k, torg=orig.wall_seconds, tproj=proj.wall_seconds,
                      vorg=orig.value, vproj=proj.value, ratio=ratio,
                      status_pair=(orig.status, proj.status))
    if evaluate_bounds and orig.optimal and proj.optimal:
        transformed = transform_problem(problem, make_transform(problem))
        rec.bound_report = evaluate_theorem1(orig, proj, problem, sketch, epsilon)
        rec.lp_bound_report = evaluate_theorem3(orig, proj, transformed, sketch.k, epsilon)
        for eps in epsilon_grid:
            rec.factor_grid[eps] = (
                evaluate_theorem1(orig, proj, problem, sketch, eps).thm1_factor,
                evaluate_theorem3(orig, proj, transformed, sketch.k, eps).thm3_factor)
    return rec


@dataclass(frozen=True)
class AggregateRow:
    """Means and population variances over the usable trials of one configuration."""

    m: int
    n: int
    k: int
    law: str
    meantorg: float
    stdtorg: float
    meantproj: float
    stdtproj: float
    meanratio: float
    stdratio: float
    trials: int
    excluded: int
    diagnostic: str = ""

    def csv_fields(self) -> list[str]:
        nums = (self.meantorg, self.stdtorg, self.meantproj, self.stdtproj,
                self.meanratio, self.stdratio)
        return [str(self.m), str(self.n), str(self.k), self.law] + [f"{v:.2E}" for v in nums]


def aggregate(records: Sequence[TrialRecord]) -> AggregateRow:
    if not records:
        raise ValueError("no records to aggregate")
    keys = {(r.spec.m, r.spec.n, r.k, r.spec.law.tag) for r in records}
    if len(keys) != 1:
        raise ValueError(f"records mix configurations: {sorted(keys)}")
    m, n, k, law = keys.pop()
    good = [r for r in records if r.usable]
    excluded = len(records) - len(good)
    if not good:
        statuses = sorted({r.status_pair for r in records})
        nan = float("nan")
        return AggregateRow(m, n, k, law, nan, nan, nan, nan, nan, nan, 0, excluded,
                            diagnostic=f"no usable trials; status pairs {statuses}")
    torg = np.array([r.torg for r in good])
    tproj = np.array([r.tproj for r in good])
    ratio = np.array([r.ratio for r in good])
    return AggregateRow(m, n, k, law, float(torg.mean()), float(torg.var()),
                        float(tproj.mean()), float(tproj.var()),
                        float(ratio.mean()), float(ratio.var()), len(good), excluded)


def emit_csv(rows: Iterable[AggregateRow], path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in rows:
            w.writerow(row.csv_fields())
    return path


def emit_series_csv(rows: Iterable[AggregateRow], path) -> Path:
    """Mean ratio against ``n`` per law, for external plotting."""
    path = Path(path)
    ordered = sorted(rows, key=lambda r: (r.law, r.m, r.n))
    with path.open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(SERIES_HEADER)
        for r in ordered:
            w.writerow([r.law, r.m, r.n, r.k, r.trials, f"{r.meanratio:.2E}", f"{r.stdratio:.2E}"])
    return path


def run_benchmark(m: int, ns: Sequence[int], laws: Sequence[str | Law], density: float = 0.1,
                  epsilon: float = 0.2, seeds: Sequence[int] = range(10),
                  solver: SolverConfig | None = None, evaluate_bounds: bool = False,
                  kappa: float = KAPPA) -> tuple[list[AggregateRow], list[TrialRecord]]:
    rows, records = [], []
    for law in laws:
        law = Law.parse(law) if isinstance(law, str) else law
        for n in ns:
            recs = [run_trial(InstanceSpec(m, n, density, law, s), epsilon, solver,
                              evaluate_bounds, kappa=kappa) for s in seeds]
            rows.append(aggregate(recs))
            records.extend(recs)
            log.info("m=%d n=%d law=%s meanratio=%.3g", m, n, law.tag, rows[-1].meanratio)
    return rows, records


# ------------------------------------------------------------------ PSD smoke test


@dataclass(frozen=True)
class SmokeTrial:
    seed: int
    vorg: float
    vproj: float
    ratio: float
    identity_ratio: float
    thm1_factor: float | None
    sandwich: bool
    statuses: tuple[str, str, str]


@dataclass(frozen=True)
class SmokeResult:
    trials: tuple[SmokeTrial, ...]

    @property
    def relaxation_holds(self) -> bool:
        return all(t.vproj <= t.vorg + 1e-6 * abs(t.vorg) for t in self.trials)

    @property
    def max_identity_ratio(self) -> float:
        return max((abs(t.identity_ratio) for t in self.trials), default=0.0)

    @property
    def mean_ratio(self) -> float:
        return float(np.mean([t.ratio for t in self.trials]))


def sdp_instance(p: int, n: int, m: int, seed: int) -> ConicProblem:
    """``min c'x  s.t.  A0 x >= b0,  sum_j x_j A_j - b_1 PSD,  x >= 0`` built around a
    feasible ``x0``: ``b0 = A0 x0 - eta`` and ``b_1 = sum_j x0_j A_j - W`` with ``W`` PSD."""
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((n, p, p))
    A1 = 0.5 * (G + G.transpose(0, 2, 1))
    x0 = rng.uniform(0.0, 1.0, n)
    R = rng.standard_normal((p, p))
    W = R @ R.T / p
    b1 = np.tensordot(x0, A1, axes=1) - W
    A0 = rng.uniform(0.0, 1.0, (m, n))
    b0 = A0 @ x0 - rng.uniform(0.0, 1.0, m)
    c = rng.uniform(0.5, 1.5, n)
    return ConicProblem(c=c, A0=A0, b0=b0, A_psd=(A1,), b_psd=(0.5 * (b1 + b1.T),),
                        B=sp.identity(n, format="csr"), d=np.zeros(n), side_cone="orthant")


def sdp_smoke_experiment(p: int = 20, n: int = 5, k: int = 10, q: int = 10,
                         epsilon: float = 0.2, seeds: Sequence[int] = range(10), m: int = 20,
                         solver: SolverConfig | None = None) -> SmokeResult:
    """Orthant rows plus one ``p x p`` block, compressed to ``k`` rows and a ``q x q`` block.

    Each seed is also solved with identity sketches as a control.
    """
    if q > p:
        raise ValueError("q must not exceed p")
    solver = solver or SolverConfig(backend="clarabel")
    out = []
    for seed in seeds:
        problem = sdp_instance(p, n, m, seed)
        sketch = make_sketch(m, (p,), SketchConfig(k=min(k, m), q=(q,), epsilon=epsilon,
                                                   seed=seed))
        ident = SketchBundle.identity_like(m, (p,), epsilon)
        orig = solve(problem, solver)
        proj = solve(project_problem(problem, sketch), solver)
        ctrl = solve(project_problem(problem, ident), solver)
        nan = float("nan")
        ratio = (orig.value - proj.value) / orig.value if orig.optimal and proj.optimal else nan
        iratio = (orig.value - ctrl.value) / orig.value if orig.optimal and ctrl.optimal else nan
        factor, sandwich = None, False
        if orig.optimal and proj.optimal:
            rep = evaluate_theorem1(orig, proj, problem, sketch, epsilon)
            factor, sandwich = rep.thm1_factor, rep.sandwich
        out.append(SmokeTrial(seed, orig.value, proj.value, ratio, iratio, factor, sandwich,
                              (orig.status, proj.status, ctrl.status)))
    return SmokeResult(tuple(out))
