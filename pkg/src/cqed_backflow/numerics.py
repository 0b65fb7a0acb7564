"""Small numerical helpers shared by the analytic series and the oracles."""

from __future__ import annotations

import numpy as np

from .model import TWO_PI, EffectiveParams

FD_DIVISIONS = 512


def fd_step(p: EffectiveParams) -> float:
    """Finite-difference step: 1/512 of the resonator period."""
    return TWO_PI / p.omega / FD_DIVISIONS


def richardson_derivative(func, t, step):
    """Derivative of a vectorised ``func`` at ``t``.

    Central differences at steps h and 2h combined by one Richardson level:
    (4 C(h) - C(2h)) / 3, with an O(h^4) truncation error. ``func`` is called
    once on the stacked stencil and may therefore be evaluated at t < 0.
    """
    t = np.asarray(t, dtype=float)
    h = float(step)
    stencil = np.concatenate([t + h, t - h, t + 2 * h, t - 2 * h])
    vals = np.asarray(func(stencil))
    fp1, fm1, fp2, fm2 = np.split(vals, 4)
    c1 = (fp1 - fm1) / (2 * h)
    c2 = (fp2 - fm2) / (4 * h)
    return (4.0 * c1 - c2) / 3.0


def chunked(func, t, chunk=1 << 16):
    """Evaluate ``func`` over ``t`` in slices to bound temporary memory."""
    t = np.asarray(t, dtype=float)
    if t.size <= chunk:
        return func(t)
    return np.concatenate([func(t[i:i + chunk]) for i in range(0, t.size, chunk)])
