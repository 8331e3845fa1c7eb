"""Closed-form factors that turn a sketch accuracy ``eps`` into value bounds."""

from __future__ import annotations

import numpy as np


def spread(y) -> float:
    """``(||y||_1 / ||y||_2) * (max|y_i| / min|y_i|)``."""
    a = np.abs(np.asarray(y, dtype=float))
    return float(a.sum() / np.linalg.norm(a) * a.max() / a.min())


def alpha_factor(y0, target, k: int, epsilon: float) -> float:
    """Inner-product distortion multiplier of the non-negative sketch.

    ``16 * max_j(||t_j||_1 / (k ||t_j||_2)) * (spread(y0) (1 + eps)^2 + k)``
    where ``t_j`` ranges over the columns of ``target`` (a single column
    when ``target`` is a vector).
    """
    y0 = np.asarray(y0, dtype=float).ravel()
    if y0.size == 0:
        raise ValueError("y0 is empty")
    zero = np.flatnonzero(y0 == 0)
    if zero.size:
        raise ValueError(f"y0 has a zero component at index {zero[0]}; "
                         "alpha needs every dual orthant component to be non-zero")
    t = np.asarray(target, dtype=float)
    if t.ndim == 1:
        t = t[:, None]
    l1 = np.abs(t).sum(axis=0)
    l2 = np.linalg.norm(t, axis=0)
    if np.any(l2 == 0):
        raise ValueError(f"target column {int(np.flatnonzero(l2 == 0)[0])} is zero")
    col_ratio = float(np.max(l1 / (k * l2)))
    return 16.0 * col_ratio * (spread(y0) * (1.0 + epsilon) ** 2 + k)


def nuclear_ratio(M) -> float:
    """``||M||_* / ||M||_F``, between 1 and sqrt(rank)."""
    s = np.linalg.svd(np.asarray(M, dtype=float), compute_uv=False)
    return float(s.sum() / np.sqrt(np.sum(s * s)))


def general_factor(epsilon: float, alpha_max: float, nuclear_max: float,
                   inv_cos_gamma_max: float, xq_over_x: float, cos_theta: float,
                   cos_beta: float) -> float:
    """Multiplier of ``v(P)`` in the lower bound for the general conic case."""
    rho = max(alpha_max, nuclear_max)
    return float(1.0 - epsilon * rho * (inv_cos_gamma_max * 4.0 * xq_over_x / cos_theta
                                        + 3.0 / cos_beta))


def lp_factor(epsilon: float, m: int, n: int, k: int, y, inv_cos_gamma_max: float,
              cos_beta: float) -> float:
    """Multiplier of ``v(P)`` in the lower bound for ``min c^T x, Ax >= b, x >= 0``
    after the basis transform; ``y`` is the dual of the ``Ax >= b`` rows."""
    a = np.abs(np.asarray(y, dtype=float))
    core = a.sum() / np.linalg.norm(a) * a.max() / (k * a.min()) * (1.0 + epsilon) ** 2 + 1.0
    return float(1.0 - 16.0 * epsilon * np.sqrt(m - n + 1) * core * (
        4.0 * inv_cos_gamma_max + 3.0 / cos_beta))
