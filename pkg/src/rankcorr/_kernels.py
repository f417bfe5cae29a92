"""Compiled pairwise kernels for the rank-correlation machinery.

All kernels run the exact O(n^2 d) double loop with Kahan-compensated
accumulation and O(1) workspace. Shared argument conventions:

  ytil   (n,)   observed responses (min(Y, C) under censoring)
  delta  (n,)   uint8 event indicators (all ones = uncensored)
  v      (n,)   index values x' beta(theta)
  xL     (n,d)  first-block covariates times chol(Sigma); pairwise scale
                sigma_ij = ||xL_i - xL_j||
  x1     (n,d)  first-block covariates
  sqrt_n        sqrt(n) bandwidth factor

Pair weights: w_ij = delta_j * I[ytil_i > ytil_j] for objectives,
h_ij = delta_j*I[yt_i > yt_j] - delta_i*I[yt_j > yt_i] for curvature/variance.
Degenerate pairs (sigma_ij = 0) fall back to the raw indicator in the
objective and contribute nothing to derivatives.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


@njit(cache=True)
def _norm_cdf(z):
    return 0.5 * math.erfc(-z * _INV_SQRT2)


@njit(cache=True)
def step_objective(ytil, delta, v):
    """Partial rank correlation sum: mean over ordered pairs of
    delta_j * I[yt_i > yt_j] * I[v_i > v_j]."""
    n = ytil.shape[0]
    s = 0.0
    c = 0.0
    for i in range(n):
        yi = ytil[i]
        vi = v[i]
        for j in range(n):
            if j == i:
                continue
            if delta[j] == 1 and yi > ytil[j] and vi > v[j]:
                t = s + 1.0
                c += (s - t) + 1.0
                s = t
    return (s + c) / (n * (n - 1.0))


@njit(cache=True)
def smoothed_objective(ytil, delta, v, xL, sqrt_n):
    n = ytil.shape[0]
    d = xL.shape[1]
    s = 0.0
    c = 0.0
    for i in range(n):
        yi = ytil[i]
        vi = v[i]
        for j in range(n):
            if j == i:
                continue
            if delta[j] == 1 and yi > ytil[j]:
                sig2 = 0.0
                for k in range(d):
                    diff = xL[i, k] - xL[j, k]
                    sig2 += diff * diff
                dv = vi - v[j]
                if sig2 > 0.0:
                    term = _norm_cdf(sqrt_n * dv / math.sqrt(sig2))
                else:
                    term = 1.0 if dv > 0.0 else 0.0
                t = s + term
                c += (s - t) + term
                s = t
    return (s + c) / (n * (n - 1.0))


@njit(cache=True)
def smoothed_objective_gradient(ytil, delta, v, xL, x1, sqrt_n):
    """Fused (objective, exact gradient) evaluation."""
    n = ytil.shape[0]
    d = x1.shape[1]
    s = 0.0
    c = 0.0
    g = np.zeros(d)
    gc = np.zeros(d)
    for i in range(n):
        yi = ytil[i]
        vi = v[i]
        for j in range(n):
            if j == i:
                continue
            if delta[j] == 1 and yi > ytil[j]:
                sig2 = 0.0
                for k in range(d):
                    diff = xL[i, k] - xL[j, k]
                    sig2 += diff * diff
                dv = vi - v[j]
                if sig2 > 0.0:
                    sig = math.sqrt(sig2)
                    z = sqrt_n * dv / sig
                    term = _norm_cdf(z)
                    coef = _INV_SQRT2PI * math.exp(-0.5 * z * z) * sqrt_n / sig
                    for k in range(d):
                        val = coef * (x1[i, k] - x1[j, k])
                        t2 = g[k] + val
                        gc[k] += (g[k] - t2) + val
                        g[k] = t2
                else:
                    term = 1.0 if dv > 0.0 else 0.0
                t = s + term
                c += (s - t) + term
                s = t
    denom = n * (n - 1.0)
    return (s + c) / denom, (g + gc) / denom


@njit(cache=True)
def hessian_matrix(ytil, delta, v, xL, x1, sqrt_n):
    """Second derivative of the smoothed objective:
    (1/(2n(n-1))) sum_{i!=j} h_ij phidot(z_ij) u_ij u_ij'."""
    n = ytil.shape[0]
    d = x1.shape[1]
    a = np.zeros((d, d))
    ac = np.zeros((d, d))
    for i in range(n):
        yi = ytil[i]
        vi = v[i]
        for j in range(n):
            if j == i:
                continue
            hij = 0.0
            if delta[j] == 1 and yi > ytil[j]:
                hij = 1.0
            elif delta[i] == 1 and ytil[j] > yi:
                hij = -1.0
            if hij == 0.0:
                continue
            sig2 = 0.0
            for k in range(d):
                diff = xL[i, k] - xL[j, k]
                sig2 += diff * diff
            if sig2 <= 0.0:
                continue
            dv = vi - v[j]
            z = sqrt_n * dv / math.sqrt(sig2)
            phidot = -z * _INV_SQRT2PI * math.exp(-0.5 * z * z)
            coef = hij * phidot * (sqrt_n * sqrt_n / sig2)
            for k in range(d):
                dk = coef * (x1[i, k] - x1[j, k])
                for l in range(d):
                    val = dk * (x1[i, l] - x1[j, l])
                    t = a[k, l] + val
                    ac[k, l] += (a[k, l] - t) + val
                    a[k, l] = t
    return (a + ac) / (2.0 * n * (n - 1.0))


@njit(cache=True)
def score_variance_matrix(ytil, delta, v, xL, x1, sqrt_n):
    """Hoeffding-projection variance of the score:
    (1/n^3) sum_i psi_i psi_i' with psi_i = sum_{j!=i} h_ij phi(z_ij) u_ij."""
    n = ytil.shape[0]
    d = x1.shape[1]
    out = np.zeros((d, d))
    psi = np.zeros(d)
    comp = np.zeros(d)
    for i in range(n):
        yi = ytil[i]
        vi = v[i]
        for k in range(d):
            psi[k] = 0.0
            comp[k] = 0.0
        for j in range(n):
            if j == i:
                continue
            hij = 0.0
            if delta[j] == 1 and yi > ytil[j]:
                hij = 1.0
            elif delta[i] == 1 and ytil[j] > yi:
                hij = -1.0
            if hij == 0.0:
                continue
            sig2 = 0.0
            for k in range(d):
                diff = xL[i, k] - xL[j, k]
                sig2 += diff * diff
            if sig2 <= 0.0:
                continue
            sig = math.sqrt(sig2)
            z = sqrt_n * (vi - v[j]) / sig
            coef = hij * _INV_SQRT2PI * math.exp(-0.5 * z * z) * sqrt_n / sig
            for k in range(d):
                val = coef * (x1[i, k] - x1[j, k])
                t = psi[k] + val
                comp[k] += (psi[k] - t) + val
                psi[k] = t
        for k in range(d):
            pk = psi[k] + comp[k]
            for l in range(d):
                out[k, l] += pk * (psi[l] + comp[l])
    return out / (float(n) ** 3)
