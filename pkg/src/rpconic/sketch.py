"""Non-negative random sketch operators.

The orthant part of a conic constraint is aggregated with ``S = T o T``
(entrywise square of a Gaussian matrix with variance ``1/k``), so every
entry of ``S`` is non-negative and ``S`` maps the orthant into the orthant.
PSD blocks are compressed by congruence ``M -> T_i M T_i^T``.

Entries are drawn from a counter-based generator (Philox) addressed by
``(seed, role, flat index)``: any sub-block of rows can be regenerated
without drawing the others.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SYMMETRY_TOL = 1e-10


class SketchConfigError(ValueError):
    """Inconsistent sketch dimensions or parameters."""


@dataclass(frozen=True)
class SketchConfig:
    k: int
    q: tuple[int, ...] = ()
    epsilon: float = 0.2
    seed: int = 0
    delta: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "q", tuple(int(v) for v in self.q))
        if self.k < 1:
            raise SketchConfigError(f"k must be >= 1, got {self.k}")
        if any(v < 1 for v in self.q):
            raise SketchConfigError(f"every q_i must be >= 1, got {self.q}")
        if not 0.0 < self.epsilon < 1.0:
            raise SketchConfigError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not 0.0 < self.delta < 0.125:
            raise SketchConfigError(f"delta must lie in (0, 1/8), got {self.delta}")
        if not 0 <= self.seed < 2**64:
            raise SketchConfigError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class ProbabilityConstants:
    """Absolute constants of the concentration bounds.

    No numeric values are known for them; they only scale reported
    sample-size conditions and probabilities, never runtime logic.
    """

    c0: float = 1.0
    c1: float = 1.0
    c2: float = 1.0
    c3: float = 1.0

    def __post_init__(self):
        if min(self.c0, self.c1, self.c2, self.c3) <= 0:
            raise ValueError("probability constants must be strictly positive")

    @property
    def cmax(self) -> float:
        return max(self.c2, self.c3)

    def sample_size_threshold(self, k: int, epsilon: float, delta: float, n: int = 1) -> float:
        """Row count above which the Gram concentration argument applies.

        ``4 C^6 / (C1 eps^2) * (3k + ln n - ln delta)``; with ``n = 1`` this is
        the single-vector version.
        """
        c = self.cmax
        return 4 * c**6 / (self.c1 * epsilon**2) * (3 * k + np.log(n) - np.log(delta))

    def failure_probability(self, m: int, n: int, k: int, epsilon: float, delta: float,
                            p: Sequence[int] = (), q: Sequence[int] = ()) -> float:
        """Upper bound on the probability that the main value bound fails."""
        out = 8 * delta + (8 * m**2 + 2 * m) * (n + 1) * np.exp(-self.c0 * epsilon**2 * k)
        for pi, qi in zip(p, q):
            out += 8 * pi**2 * (n + 1) * np.exp(-self.c0 * epsilon**2 * qi)
        return float(out)


def _philox_key(seed: int, role: int) -> np.ndarray:
    return np.random.SeedSequence([int(seed), int(role)]).generate_state(2, np.uint64)


def gaussian_entries(seed: int, role: int, start: int, count: int) -> np.ndarray:
    """Standard normal values for flat indices ``start .. start+count-1``.

    Entry ``e`` consumes the two 64-bit words ``2e, 2e+1`` of the Philox
    stream keyed by ``(seed, role)`` and is mapped through Box-Muller
    (cosine branch only), so its value depends on nothing but its index.
    """
    if count <= 0:
        return np.empty(0)
    block = start // 2
    skip = 2 * (start % 2)
    nwords = skip + 2 * count
    nblocks = -(-nwords // 4)
    bitgen = np.random.Philox(key=_philox_key(seed, role),
                              counter=np.array([block, 0, 0, 0], dtype=np.uint64))
    raw = bitgen.random_raw(4 * nblocks)[skip:skip + 2 * count]
    u1 = ((raw[0::2] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
    u2 = (raw[1::2] >> np.uint64(11)).astype(np.float64) * 2.0**-53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def gaussian_matrix(seed: int, role: int, rows: int, cols: int, variance: float = 1.0,
                    row_start: int = 0, row_stop: int | None = None) -> np.ndarray:
    """Rows ``row_start:row_stop`` of a ``rows x cols`` N(0, variance) matrix."""
    row_stop = rows if row_stop is None else row_stop
    z = gaussian_entries(seed, role, row_start * cols, (row_stop - row_start) * cols)
    return np.sqrt(variance) * z.reshape(row_stop - row_start, cols)


@dataclass(frozen=True)
class SketchBundle:
    T: np.ndarray
    S: np.ndarray
    blocks: tuple[np.ndarray, ...]
    config: SketchConfig
    identity: bool = field(default=False)

    @property
    def m(self) -> int:
        return self.T.shape[1]

    @property
    def k(self) -> int:
        return self.T.shape[0]

    @property
    def p(self) -> tuple[int, ...]:
        return tuple(b.shape[1] for b in self.blocks)

    @property
    def q(self) -> tuple[int, ...]:
        return tuple(b.shape[0] for b in self.blocks)

    @classmethod
    def identity_like(cls, m: int, p: Sequence[int] = (), epsilon: float = 0.2) -> "SketchBundle":
        """Identity operators (``k = m``, ``q_i = p_i``); the projection is a no-op."""
        eye = np.eye(m)
        config = SketchConfig(k=max(m, 1), q=tuple(p), epsilon=epsilon)
        return cls(T=eye, S=eye.copy(), blocks=tuple(np.eye(pi) for pi in p),
                   config=config, identity=True)

    def to_bytes(self) -> bytes:
        """Serialize to an ``.npz`` container (seed, dims and entries)."""
        buf = io.BytesIO()
        arrays = {
            "seed": np.array(self.config.seed, dtype=np.uint64),
            "k": np.array(self.config.k),
            "q": np.array(self.config.q, dtype=np.int64),
            "m": np.array(self.m),
            "p": np.array(self.p, dtype=np.int64),
            "epsilon": np.array(self.config.epsilon),
            "delta": np.array(self.config.delta),
            "identity": np.array(self.identity),
            "T": self.T,
        }
        for i, b in enumerate(self.blocks):
            arrays[f"block_{i}"] = b
        np.savez(buf, **arrays)
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "SketchBundle":
        with np.load(io.BytesIO(data)) as f:
            config = SketchConfig(k=int(f["k"]), q=tuple(int(v) for v in f["q"]),
                                  epsilon=float(f["epsilon"]), seed=int(f["seed"]),
                                  delta=float(f["delta"]))
            T = np.array(f["T"])
            blocks = tuple(np.array(f[f"block_{i}"]) for i in range(len(f["p"])))
            identity = bool(f["identity"])
        S = T.copy() if identity else T * T
        return cls(T=T, S=S, blocks=blocks, config=config, identity=identity)

    def regenerate(self) -> "SketchBundle":
        """Rebuild from seed and dimensions only."""
        if self.identity:
            return SketchBundle.identity_like(self.m, self.p, self.config.epsilon)
        return make_sketch(self.m, self.p, self.config)


_ROLE_ORTHANT = 0


def make_sketch(m: int, p: Sequence[int], config: SketchConfig) -> SketchBundle:
    """Draw ``T`` (k x m, variance 1/k), ``S = T o T`` and one ``T_i`` (q_i x p_i,
    variance 1/q_i) per PSD block."""
    p = tuple(int(v) for v in p)
    if m < 0:
        raise SketchConfigError(f"m must be non-negative, got {m}")
    if len(p) != len(config.q):
        raise SketchConfigError(
            f"{len(p)} PSD blocks but {len(config.q)} target sizes in config.q")
    for i, (pi, qi) in enumerate(zip(p, config.q)):
        if qi > pi:
            raise SketchConfigError(f"block {i}: q={qi} exceeds p={pi}; nothing to reduce")
    T = gaussian_matrix(config.seed, _ROLE_ORTHANT, config.k, m, variance=1.0 / config.k)
    T.setflags(write=False)
    S = T * T
    S.setflags(write=False)
    blocks = []
    for i, (pi, qi) in enumerate(zip(p, config.q)):
        Ti = gaussian_matrix(config.seed, i + 1, qi, pi, variance=1.0 / qi)
        Ti.setflags(write=False)
        blocks.append(Ti)
    return SketchBundle(T=T, S=S, blocks=tuple(blocks), config=config)


def apply_inequality_sketch(S, y) -> np.ndarray:
    S = np.asarray(S)
    y = np.asarray(y, dtype=float)
    if S.shape[1] != y.shape[0]:
        raise ValueError(f"sketch has {S.shape[1]} columns, vector has {y.shape[0]} entries")
    return S @ y


def check_symmetric(M, tol: float = SYMMETRY_TOL, name: str = "matrix") -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    if M.size and np.max(np.abs(M - M.T)) > tol:
        raise ValueError(f"{name} is not symmetric (max |M - M^T| = {np.max(np.abs(M - M.T)):.3e})")
    return M


def apply_psd_sketch(Tb, M) -> np.ndarray:
    """Congruence ``Tb M Tb^T``, symmetrized."""
    M = check_symmetric(M)
    Tb = np.asarray(Tb)
    if Tb.shape[1] != M.shape[0]:
        raise ValueError(f"block sketch is {Tb.shape}, matrix is {M.shape}")
    R = Tb @ M @ Tb.T
    return 0.5 * (R + R.T)


def diag_embed(y) -> np.ndarray:
    return np.diag(np.asarray(y, dtype=float))


def diag_extract(M) -> np.ndarray:
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("diag_extract needs a square matrix")
    return np.diag(M).copy()


def lemma3_residual(T, y0) -> float:
    """``max |S y0 - diag(T D(y0) T^T)|`` with ``S = T o T``."""
    T = np.asarray(T, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    S = T * T
    return float(np.max(np.abs(S @ y0 - diag_extract(T @ diag_embed(y0) @ T.T)), initial=0.0))


def corollary1_residual(T, y0) -> float:
    """``max |S^T S y0 - diag(T^T D(diag(T D(y0) T^T)) T)|``."""
    T = np.asarray(T, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    S = T * T
    lhs = S.T @ (S @ y0)
    inner = diag_extract(T @ diag_embed(y0) @ T.T)
    rhs = diag_extract(T.T @ diag_embed(inner) @ T)
    return float(np.max(np.abs(lhs - rhs), initial=0.0))
