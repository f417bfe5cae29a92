"""Step and smoothed rank-correlation objectives and the analytic score.

The step objective counts concordant ordered pairs; its smoothed counterpart
replaces each pair indicator ``I[v_i > v_j]`` by ``Phi(sqrt(n) (v_i - v_j) /
sigma_ij)`` with the pairwise scale ``sigma_ij`` driven by a smoothing matrix.
The score is the exact gradient of the implemented smoothed objective.

Censoring is handled by the partial-rank weights ``delta_j I[yt_i > yt_j]``;
with every event observed these reduce to the uncensored weights, so both
regimes share one code path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .data import Dataset, SmoothingMatrix, as_theta

__all__ = [
    "PairKernelTerm",
    "pair_term",
    "rank_objective",
    "partial_rank_objective",
    "smoothed_objective",
    "smoothed_score",
]

_UNCENSORED_CACHE: dict[int, np.ndarray] = {}


def _all_events(n: int) -> np.ndarray:
    ev = _UNCENSORED_CACHE.get(n)
    if ev is None:
        ev = np.ones(n, dtype=np.uint8)
        ev.setflags(write=False)
        _UNCENSORED_CACHE[n] = ev
    return ev


def _events_u8(data: Dataset) -> np.ndarray:
    if data.censored:
        return data.events.astype(np.uint8)
    return _all_events(data.n)


def _prep(data: Dataset, sigma: SmoothingMatrix):
    if sigma.d != data.d:
        raise ValueError(f"smoothing matrix is {sigma.d}x{sigma.d}, data has d={data.d}")
    x1 = np.ascontiguousarray(data.first_block)
    xL = np.ascontiguousarray(x1 @ sigma.cholesky)
    return x1, xL, math.sqrt(data.n)


@dataclass(frozen=True)
class PairKernelTerm:
    """Per-pair ingredients of the pairwise kernels.

    h is the concordance sign in {-1, 0, +1}; index_delta is x_ij' beta(theta);
    scale is sigma_ij >= 0; first_block_diff is the first-d covariate difference.
    """

    h: float
    index_delta: float
    scale: float
    first_block_diff: np.ndarray


def pair_term(data: Dataset, theta, sigma: SmoothingMatrix, i: int, j: int) -> PairKernelTerm:
    """Materialize the (i, j) pair term; mainly for cross-checking the kernels."""
    th = as_theta(theta, data.d)
    yi, yj = data.responses[i], data.responses[j]
    di, dj = bool(data.events[i]), bool(data.events[j])
    h = float(dj and yi > yj) - float(di and yj > yi)
    u = data.first_block[i] - data.first_block[j]
    w = sigma.cholesky.T @ u
    scale = float(np.sqrt(w @ w))
    index_delta = float(u @ th + (data.anchor[i] - data.anchor[j]))
    return PairKernelTerm(h=h, index_delta=index_delta, scale=scale, first_block_diff=u)


def rank_objective(data: Dataset, theta) -> float:
    """Fraction of ordered pairs with concordant response and index ordering.

    Censoring indicators are ignored: every response participates.
    """
    th = as_theta(theta, data.d)
    v = data.index_values(th)
    return float(_kernels.step_objective(data.responses, _all_events(data.n), v))


def partial_rank_objective(data: Dataset, theta) -> float:
    """Censoring-aware step objective: pairs weighted by delta_j I[yt_i > yt_j]."""
    th = as_theta(theta, data.d)
    v = data.index_values(th)
    return float(_kernels.step_objective(data.responses, _events_u8(data), v))


def smoothed_objective(data: Dataset, theta, sigma: SmoothingMatrix) -> float:
    """Smoothed rank correlation: pair indicators replaced by normal CDFs.

    Degenerate pairs (sigma_ij = 0) contribute the raw indicator
    ``I[index difference > 0]``, the pointwise limit as the scale vanishes.
    Uses the censored weights exactly when ``data.censored``.
    """
    th = as_theta(theta, data.d)
    _, xL, sqrt_n = _prep(data, sigma)
    v = data.index_values(th)
    return float(_kernels.smoothed_objective(data.responses, _events_u8(data), v, xL, sqrt_n))


def smoothed_score(data: Dataset, theta, sigma: SmoothingMatrix) -> np.ndarray:
    """Exact gradient of :func:`smoothed_objective` with respect to theta.

    Degenerate pairs contribute the zero vector (their term is locally
    constant in theta).
    """
    th = as_theta(theta, data.d)
    x1, xL, sqrt_n = _prep(data, sigma)
    v = data.index_values(th)
    _, g = _kernels.smoothed_objective_gradient(
        data.responses, _events_u8(data), v, xL, x1, sqrt_n
    )
    return g


def smoothed_objective_and_score(data: Dataset, theta, sigma: SmoothingMatrix):
    """Fused (objective, gradient) evaluation sharing one pairwise pass."""
    th = as_theta(theta, data.d)
    x1, xL, sqrt_n = _prep(data, sigma)
    v = data.index_values(th)
    f, g = _kernels.smoothed_objective_gradient(
        data.responses, _events_u8(data), v, xL, x1, sqrt_n
    )
    return float(f), g
