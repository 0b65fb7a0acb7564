"""Bessel functions of the first kind, orders 0 and 1, on [0, 1e4].

Three regimes, each used where it is accurate in double precision:

* x <= 2: ascending power series (terms fall off factorially, no cancellation).
* 2 < x <= 25: Miller's backward recurrence normalised by
  J0 + 2 (J2 + J4 + ...) = 1.
* x > 25: Hankel asymptotic expansion; the smallest term is ~e^{-2x}, far
  below machine precision. The phase is assembled from cos(x) and sin(x)
  directly so no rounding of x - pi/4 enters.
"""

from __future__ import annotations

import numpy as np

X_MAX = 1e4
_SERIES_MAX = 2.0
_MILLER_MAX = 25.0
_MILLER_START = 70
_HANKEL_TERMS = 30
_SERIES_TERMS = 30


def _series(order: int, x: np.ndarray) -> np.ndarray:
    half = 0.5 * x
    term = half if order == 1 else np.ones_like(x)
    total = term.copy()
    q = -half * half
    for k in range(1, _SERIES_TERMS):
        term = term * q / (k * (k + order))
        total += term
    return total


def _miller(order: int, x: np.ndarray) -> np.ndarray:
    j_next = np.zeros_like(x)
    j_cur = np.full_like(x, 1e-30)
    norm = np.zeros_like(x)
    result = np.zeros_like(x)
    for k in range(_MILLER_START, 0, -1):
        j_prev = (2.0 * k / x) * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
        # j_cur now holds the unnormalised J_{k-1}
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += 2.0 * j_cur
        if k - 1 == order:
            result = j_cur.copy()
        big = np.abs(j_cur) > 1e250
        if np.any(big):
            scale = np.where(big, 1e-250, 1.0)
            j_cur *= scale
            j_next *= scale
            norm *= scale
            result *= scale
    norm += j_cur  # J_0 term
    return result / norm


def _hankel(order: int, x: np.ndarray) -> np.ndarray:
    mu4 = 4.0 * order * order
    p = np.ones_like(x)
    q = np.zeros_like(x)
    term = np.ones_like(x)
    for k in range(1, _HANKEL_TERMS):
        term = term * (mu4 - (2 * k - 1) ** 2) / (k * 8.0 * x)
        if k % 2:
            q += term if (k // 2) % 2 == 0 else -term
        else:
            p += -term if (k // 2) % 2 else term
    c, s = np.cos(x), np.sin(x)
    r = np.sqrt(0.5)
    if order == 0:
        cos_chi, sin_chi = r * (c + s), r * (s - c)
    else:
        cos_chi, sin_chi = r * (s - c), -r * (s + c)
    return np.sqrt(2.0 / (np.pi * x)) * (p * cos_chi - q * sin_chi)


def bessel_j(order: int, x):
    """J_order(x) for order in {0, 1} and 0 <= x <= 1e4 (scalar or array)."""
    if order not in (0, 1):
        raise ValueError(f"only orders 0 and 1 are supported, got {order}")
    arr = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > X_MAX):
        raise ValueError(f"bessel_j domain is [0, {X_MAX:g}]")
    flat = arr.reshape(-1)
    out = np.empty_like(flat)
    small = flat <= _SERIES_MAX
    mid = (flat > _SERIES_MAX) & (flat <= _MILLER_MAX)
    large = flat > _MILLER_MAX
    if small.any():
        out[small] = _series(order, flat[small])
    if mid.any():
        out[mid] = _miller(order, flat[mid])
    if large.any():
        out[large] = _hankel(order, flat[large])
    out = out.reshape(arr.shape)
    return float(out) if out.ndim == 0 else out


def j1_over_x(x):
    """J_1(x)/x with its limit 1/2 at x = 0."""
    arr = np.asarray(x, dtype=float)
    out = np.empty_like(arr)
    tiny = arr < 1e-4
    xt = arr[tiny]
    out[tiny] = 0.5 - xt * xt / 16.0
    if (~tiny).any():
        xs = arr[~tiny]
        out[~tiny] = bessel_j(1, xs) / xs
    return float(out) if out.ndim == 0 else out
