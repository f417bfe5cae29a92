"""Core data types: observations, datasets, smoothing matrices, pairwise geometry.

The regression index is ``x' beta(theta)`` where ``beta(theta) = (theta_1, ...,
theta_d, 1)``: the last covariate is the *anchor* whose coefficient is pinned
to 1 for identifiability. All types are immutable after construction and safe
to share across workers.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "DataError",
    "Observation",
    "Dataset",
    "SmoothingMatrix",
    "build_full_coefficients",
    "pair_scale",
    "validate_dataset",
]


class DataError(ValueError):
    """Raised for malformed input data (ragged rows, non-finite values, n < 2...)."""


@dataclass(frozen=True)
class Observation:
    """One subject: response (observed time under censoring), covariates, event flag.

    ``covariates`` has length d+1; the last entry is the anchor covariate.
    ``event`` is the censoring indicator Delta (True = event observed).
    """

    response: float
    covariates: tuple[float, ...]
    event: bool = True

    def __post_init__(self) -> None:
        if len(self.covariates) < 2:
            raise DataError("observation needs at least 2 covariates (d >= 1 plus anchor)")
        if not np.isfinite(self.response):
            raise DataError(f"non-finite response {self.response!r}")
        if not all(np.isfinite(c) for c in self.covariates):
            raise DataError(f"non-finite covariate in {self.covariates!r}")


class Dataset:
    """Immutable estimation sample of n observations with d free coefficients.

    Parameters
    ----------
    responses : (n,) array_like
        Observed responses (or observed times ``min(Y, C)`` under censoring).
    covariates : (n, d+1) array_like
        Covariate rows; the last column is the anchor covariate.
    events : (n,) array_like of bool, optional
        Censoring indicators Delta; omitted means every event was observed.
    """

    __slots__ = ("responses", "covariates", "events", "n", "d", "censored")

    def __init__(self, responses, covariates, events=None):
        y = np.ascontiguousarray(responses, dtype=np.float64)
        x = np.ascontiguousarray(covariates, dtype=np.float64)
        if y.ndim != 1 or x.ndim != 2 or x.shape[0] != y.shape[0]:
            raise DataError(
                f"responses {y.shape} and covariates {x.shape} are inconsistent"
            )
        n, p = x.shape
        if n < 2:
            raise DataError(f"need at least 2 observations, got {n}")
        if p < 2:
            raise DataError("need at least 2 covariate columns (d >= 1 plus anchor)")
        if not np.all(np.isfinite(y)):
            bad = int(np.flatnonzero(~np.isfinite(y))[0])
            raise DataError(f"non-finite response at row {bad}")
        if not np.all(np.isfinite(x)):
            bad = int(np.flatnonzero(~np.isfinite(x).all(axis=1))[0])
            raise DataError(f"non-finite covariate at row {bad}")
        if events is None:
            ev = np.ones(n, dtype=bool)
        else:
            ev = np.ascontiguousarray(events, dtype=bool)
            if ev.shape != (n,):
                raise DataError(f"events shape {ev.shape} does not match n={n}")
        for a in (y, x, ev):
            a.setflags(write=False)
        self._set("responses", y)
        self._set("covariates", x)
        self._set("events", ev)
        self._set("n", n)
        self._set("d", p - 1)
        self._set("censored", bool(not ev.all()))

    def _set(self, name, value):
        object.__setattr__(self, name, value)

    def __setattr__(self, name, value):
        raise AttributeError("Dataset is immutable")

    @property
    def first_block(self) -> np.ndarray:
        """Covariate columns carrying the free coefficients: shape (n, d)."""
        return self.covariates[:, : self.d]

    @property
    def anchor(self) -> np.ndarray:
        """The anchor covariate column: shape (n,)."""
        return self.covariates[:, self.d]

    @property
    def observations(self) -> tuple[Observation, ...]:
        return tuple(
            Observation(float(self.responses[i]), tuple(self.covariates[i]), bool(self.events[i]))
            for i in range(self.n)
        )

    def index_values(self, theta) -> np.ndarray:
        """Regression index ``x' beta(theta)`` for every observation."""
        th = as_theta(theta, self.d)
        return self.first_block @ th + self.anchor

    def __repr__(self) -> str:
        cens = f", censored ({(~self.events).sum()} of {self.n})" if self.censored else ""
        return f"<Dataset n={self.n} d={self.d}{cens}>"


class SmoothingMatrix:
    """Symmetric positive-definite d x d matrix driving the smoothing bandwidth."""

    __slots__ = ("sigma", "cholesky", "d")

    #: relative tolerance for the symmetry check
    SYM_RTOL = 1e-12

    def __init__(self, sigma):
        s = np.atleast_2d(np.asarray(sigma, dtype=np.float64)).copy()
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise DataError(f"smoothing matrix must be square, got shape {s.shape}")
        if not np.all(np.isfinite(s)):
            raise DataError("smoothing matrix has non-finite entries")
        scale = max(float(np.max(np.abs(s))), 1.0)
        if np.max(np.abs(s - s.T)) > self.SYM_RTOL * scale:
            raise DataError("smoothing matrix is not symmetric")
        s = 0.5 * (s + s.T)
        try:
            chol = np.linalg.cholesky(s)
        except np.linalg.LinAlgError:
            raise DataError("smoothing matrix is not positive definite") from None
        if not np.all(np.diag(chol) > 0.0):
            raise DataError("smoothing matrix is not positive definite")
        s.setflags(write=False)
        chol.setflags(write=False)
        object.__setattr__(self, "sigma", s)
        object.__setattr__(self, "cholesky", chol)
        object.__setattr__(self, "d", s.shape[0])

    def __setattr__(self, name, value):
        raise AttributeError("SmoothingMatrix is immutable")

    @classmethod
    def identity(cls, d: int) -> "SmoothingMatrix":
        return cls(np.eye(d))

    def __repr__(self) -> str:
        return f"<SmoothingMatrix d={self.d}>"


def as_theta(theta, d: int) -> np.ndarray:
    """Validate and coerce a parameter vector to a (d,) float array."""
    th = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    if th.shape != (d,):
        raise DataError(f"theta has shape {th.shape}, expected ({d},)")
    if not np.all(np.isfinite(th)):
        raise DataError("theta has non-finite entries")
    return th


def build_full_coefficients(theta) -> np.ndarray:
    """Append the fixed anchor coefficient: ``(theta_1, ..., theta_d, 1)``."""
    th = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    if th.ndim != 1 or th.size < 1:
        raise DataError("theta must be a nonempty vector")
    if not np.all(np.isfinite(th)):
        raise DataError("theta has non-finite entries")
    return np.append(th, 1.0)


def pair_scale(x_i, x_j, sigma: SmoothingMatrix) -> float:
    """Pairwise bandwidth scale ``sqrt(u' Sigma u)`` with u the first-d covariate difference.

    Zero exactly when the first d components of ``x_i - x_j`` vanish.
    """
    xi = np.asarray(x_i, dtype=np.float64)
    xj = np.asarray(x_j, dtype=np.float64)
    if xi.shape != xj.shape or xi.ndim != 1:
        raise DataError(f"covariate vectors must share one shape, got {xi.shape} vs {xj.shape}")
    d = sigma.d
    if xi.shape[0] != d + 1:
        raise DataError(f"covariate vectors have length {xi.shape[0]}, expected d+1={d + 1}")
    u = (xi - xj)[:d]
    w = sigma.cholesky.T @ u
    return float(np.sqrt(w @ w))


def validate_dataset(rows: Iterable[Sequence], events=None) -> Dataset:
    """Build a Dataset from parsed rows, rejecting malformed input.

    Each row is ``(response, x_1, ..., x_{d+1})``; ``events`` is an optional
    parallel sequence of booleans (absent means all events observed). Errors
    name the offending row.
    """
    rows = list(rows)
    if not rows:
        raise DataError("empty input: no rows")
    if len(rows) < 2:
        raise DataError(f"need at least 2 rows, got {len(rows)}")
    width = None
    resp, covs = [], []
    for idx, row in enumerate(rows):
        vals = list(row)
        if width is None:
            width = len(vals)
            if width < 3:
                raise DataError(
                    f"row 0 has {width} fields; need response plus at least 2 covariates"
                )
        elif len(vals) != width:
            raise DataError(f"row {idx} has {len(vals)} fields, expected {width}")
        try:
            nums = [float(v) for v in vals]
        except (TypeError, ValueError):
            raise DataError(f"row {idx} contains a non-numeric value: {vals!r}") from None
        if not all(np.isfinite(nums)):
            raise DataError(f"row {idx} contains a non-finite value: {vals!r}")
        resp.append(nums[0])
        covs.append(nums[1:])
    ev = None
    if events is not None:
        ev = [bool(e) for e in events]
        if len(ev) != len(rows):
            raise DataError(f"{len(ev)} event flags for {len(rows)} rows")
    return Dataset(resp, covs, ev)
