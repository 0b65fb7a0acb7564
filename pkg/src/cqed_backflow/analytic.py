"""Closed-form solution of the two-qubit / two-resonator dephasing model.

Qubit A starts in |+> or |->, qubit B in |g>, and the resonators in coherent
states |alpha e^{i theta}>, |beta e^{i phi}> (or phase-diffused mixtures of
them). The reduced state of qubit A keeps populations 1/2 and carries the
coherence h(t); the trace distance between the two evolutions is D = 2|h|.

Three families of sigma(t) = dD/dt live here, each tagged with a provenance:

* ``sigma_pure_general`` / ``sigma_pure_decoupled``: the printed closed forms,
  evaluated literally.
* ``sigma_from_coherence``: differentiates D = 2|h(t)| numerically; this is the
  authoritative analytic series.
* ``sigma_mixed_printed`` and ``sigma_phase_average`` for phase-diffused modes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import NonConvergence
from .model import EffectiveParams, ModePrep, PrepKind, SimGrid
from .numerics import chunked, fd_step, richardson_derivative
from .special import bessel_j, j1_over_x

SQRT2 = math.sqrt(2.0)


class Provenance(str, Enum):
    ANALYTIC_GENERAL = "AnalyticGeneral"
    ANALYTIC_DECOUPLED = "AnalyticDecoupled"
    FROM_COHERENCE = "FromCoherence"
    ORACLE_BLOCK = "OracleBlock"
    ORACLE_BRUTE = "OracleBrute"
    PHASE_AVERAGE = "PhaseAverage"
    MIXED_PRINTED = "MixedPrinted"


@dataclass(frozen=True, eq=False)
class SigmaSeries:
    """Sampled trace distance D(t) and its time derivative sigma(t)."""

    times: np.ndarray
    trace_distance: np.ndarray
    sigma: np.ndarray
    provenance: Provenance

    def __post_init__(self):
        n = len(self.times)
        if len(self.trace_distance) != n or len(self.sigma) != n:
            raise ValueError("times, trace_distance and sigma must share one length")
        d = np.asarray(self.trace_distance)
        if np.any(d < -1e-9) or np.any(d > 1 + 1e-9):
            raise ValueError("trace distance left [0, 1]")
        object.__setattr__(self, "trace_distance", np.clip(d, 0.0, 1.0))

    def spread(self, other: "SigmaSeries") -> float:
        """Largest pointwise deviation in either D or sigma."""
        return float(max(np.max(np.abs(self.sigma - other.sigma)),
                         np.max(np.abs(self.trace_distance - other.trace_distance))))


@dataclass(frozen=True)
class DerivedConstants:
    xi: float
    lambda_plus: float
    lambda_minus: float
    omega_plus: float
    omega_minus: float
    omega0_prime: float
    chi: float


def derived_constants(p: EffectiveParams) -> DerivedConstants:
    w_plus = p.omega + p.lam
    w_minus = p.omega - p.lam
    xi = p.mu * p.g / w_plus
    return DerivedConstants(
        xi=xi,
        lambda_plus=p.g / (SQRT2 * w_plus),
        lambda_minus=p.g / (SQRT2 * w_minus),
        omega_plus=w_plus,
        omega_minus=w_minus,
        omega0_prime=p.omega0 - 4.0 * p.g * xi,
        chi=4.0 * p.g ** 2 * p.lam / (w_minus * w_plus),
    )


@dataclass(frozen=True)
class CoherentLabels:
    """Normal-mode coherent labels of the two qubit branches at t = 0."""

    z1: complex
    z2: complex
    w1: complex
    w2: complex


def _labels(c: DerivedConstants, a0, b0):
    z1 = (a0 + b0 + 2.0 * c.xi) / SQRT2
    w1 = (b0 - a0) / SQRT2
    return z1, z1 - 2.0 * c.lambda_plus, w1, w1 - 2.0 * c.lambda_minus


def coherent_labels(p: EffectiveParams, prep: ModePrep) -> CoherentLabels:
    if not prep.is_pure:
        raise ValueError("coherent labels need a PureCoherent preparation")
    a0, b0 = prep.amplitudes()
    return CoherentLabels(*_labels(derived_constants(p), a0, b0))


def _overlap_labels(c: DerivedConstants, z1, z2, w1, w2, t):
    ep = np.exp(-1j * c.omega_plus * t)
    em = np.exp(-1j * c.omega_minus * t)
    lp, lm, xi = c.lambda_plus, c.lambda_minus, c.xi
    a1 = (z1 * ep - w2 * em - 2 * lm) / SQRT2 - xi
    a2 = (z2 * ep - w1 * em + 2 * lp) / SQRT2 - xi
    b1 = (z1 * ep + w2 * em + 2 * lm) / SQRT2 - xi
    b2 = (z2 * ep + w1 * em + 2 * lp) / SQRT2 - xi
    return a1, a2, b1, b2


def overlap_labels(p: EffectiveParams, labels: CoherentLabels, t):
    """Lab-frame labels (alpha1, alpha2, beta1, beta2) at time ``t``."""
    c = derived_constants(p)
    t = np.asarray(t, dtype=float)
    return _overlap_labels(c, labels.z1, labels.z2, labels.w1, labels.w2, t)


def coherent_overlap(z, w):
    """<z|w> = exp(-|z|^2/2 - |w|^2/2 + conj(z) w), in the cancellation-free form."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    d = z - w
    return np.exp(-0.5 * (d.real ** 2 + d.imag ** 2) + 1j * np.imag(np.conj(z) * w))


def _gamma_phase(c: DerivedConstants, a0, b0, t):
    lp, lm = c.lambda_plus, c.lambda_minus
    sp, sm = np.sin(c.omega_plus * t), np.sin(c.omega_minus * t)
    cp, cm = np.cos(c.omega_plus * t) - 1.0, np.cos(c.omega_minus * t) - 1.0
    return (
        4.0 * (lp ** 2 * sp - lm ** 2 * sm - SQRT2 * c.xi * lp * sp)
        + SQRT2 * np.imag(a0) * (lp * cp + lm * cm)
        - SQRT2 * np.real(a0) * (lp * sp + lm * sm)
        + SQRT2 * np.imag(b0) * (lp * cp - lm * cm)
        - SQRT2 * np.real(b0) * (lp * sp - lm * sm)
    )


def gamma_phase(p: EffectiveParams, prep: ModePrep, t):
    """The amplitude- and phase-dependent part Gamma(t) of the coherence phase."""
    a0, b0 = prep.amplitudes()
    return _gamma_phase(derived_constants(p), a0, b0, np.asarray(t, dtype=float))


def _coherence(p: EffectiveParams, c: DerivedConstants, a0, b0, t):
    z1, z2, w1, w2 = _labels(c, a0, b0)
    a1, a2, b1, b2 = _overlap_labels(c, z1, z2, w1, w2, t)
    psi = -p.gamma * t + 1j * ((c.chi - c.omega0_prime) * t + _gamma_phase(c, a0, b0, t))
    return 0.5 * np.exp(psi) * coherent_overlap(a2, a1) * coherent_overlap(b2, b1)


def decoherence_factor(p: EffectiveParams, prep: ModePrep, t):
    """Qubit-A coherence h(t) for a pure coherent preparation; |h(0)| = 1/2."""
    if not prep.is_pure:
        raise ValueError("decoherence_factor needs a PureCoherent preparation; "
                         "use coherence_phase_average for phase-diffused modes")
    a0, b0 = prep.amplitudes()
    return _coherence(p, derived_constants(p), a0, b0, np.asarray(t, dtype=float))


# --- printed closed forms for sigma -------------------------------------------

def _trig(p: EffectiveParams, t):
    lt, wt = p.lam * t, p.omega * t
    return np.sin(lt), np.cos(lt), np.sin(wt), np.cos(wt)


def log_envelope(p: EffectiveParams, t):
    """k(t): log of D(t) e^{gamma t} for pure coherent preparations."""
    t = np.asarray(t, dtype=float)
    l, w = p.lam, p.omega
    sl, cl, sw, cw = _trig(p, t)
    num = (l ** 2 + w ** 2) * (1.0 - cl * cw) - 2.0 * l * w * sl * sw
    return -4.0 * p.g ** 2 * num / (l ** 2 - w ** 2) ** 2


def printed_rate(p: EffectiveParams, t):
    """f(t) exactly as printed next to k(t)."""
    t = np.asarray(t, dtype=float)
    l, w = p.lam, p.omega
    sl, cl, sw, cw = _trig(p, t)
    num = p.gamma * (w ** 2 - l ** 2) - 4.0 * p.g ** 2 * (l * sl * cw + w * cl * sw)
    return num / (l ** 2 - w ** 2)


def sigma_pure_general(p: EffectiveParams, t):
    """sigma(t) = e^{k(t) - gamma t} f(t), literal evaluation."""
    t = np.asarray(t, dtype=float)
    return np.exp(log_envelope(p, t) - p.gamma * t) * printed_rate(p, t)


def sigma_pure_decoupled(p: EffectiveParams, t):
    """The printed lambda = 0 form -2[gamma + 4g^2 sin(wt)/w] e^{-2 gamma t - 8g^2[1-cos(wt)]/w^2}."""
    if p.lam != 0.0:
        raise ValueError("sigma_pure_decoupled is only defined for lambda = 0")
    t = np.asarray(t, dtype=float)
    g, w, gam = p.g, p.omega, p.gamma
    return (-2.0 * (gam + 4.0 * g ** 2 * np.sin(w * t) / w)
            * np.exp(-2.0 * gam * t - 8.0 * g ** 2 * (1.0 - np.cos(w * t)) / w ** 2))


def _series(times, d_func, provenance, p):
    d = chunked(d_func, times)
    sigma = chunked(lambda tt: richardson_derivative(d_func, tt, fd_step(p)), times)
    return SigmaSeries(times=times, trace_distance=d, sigma=sigma, provenance=provenance)


def sigma_from_coherence(p: EffectiveParams, prep: ModePrep, grid: SimGrid) -> SigmaSeries:
    """Authoritative pure-state series: D = 2|h(t)|, sigma by Richardson differences."""
    if not prep.is_pure:
        raise ValueError("sigma_from_coherence needs a PureCoherent preparation")
    c = derived_constants(p)
    a0, b0 = prep.amplitudes()

    def d_func(tt):
        return 2.0 * np.abs(_coherence(p, c, a0, b0, tt))

    return _series(grid.times, d_func, Provenance.FROM_COHERENCE, p)


# --- phase-diffused preparations -----------------------------------------------

@dataclass(frozen=True)
class BesselKernels:
    """F1, F2 and the products F2 G1, F1 G2 (finite even where F vanishes), plus G3."""

    F1: np.ndarray
    F2: np.ndarray
    F2G1: np.ndarray
    F1G2: np.ndarray
    G3: np.ndarray


def bessel_kernels(p: EffectiveParams, t) -> BesselKernels:
    """Arguments and weights of the Bessel-function form of sigma_mix.

    The radicands are divided by (lambda^2 - omega^2)^2: with a single power
    the radicand is negative for lambda < omega and alpha F would not be
    dimensionless.
    """
    t = np.asarray(t, dtype=float)
    l, w, g = p.lam, p.omega, p.g
    sl, cl, sw, cw = _trig(p, t)
    den = l ** 2 - w ** 2
    # cos(lt) - cos(wt) in product form; both radicands are sums of squares
    dc = 2 * np.sin(0.5 * (w + l) * t) * np.sin(0.5 * (w - l) * t)
    n1 = 2 * ((l * dc) ** 2 + (w * sl - l * sw) ** 2)
    n2 = 2 * ((w * dc) ** 2 + (l * sl - w * sw) ** 2)
    F1 = 2 * SQRT2 * g * np.sqrt(n1) / abs(den)
    F2 = 2 * SQRT2 * g * np.sqrt(n2) / abs(den)
    F2G1 = 8 * SQRT2 * cl * (l * sl - w * sw) / den
    F1G2 = 8 * SQRT2 * sl * (-cl + cw) / den
    wm, wp = w - l, w + l
    G3 = -p.gamma - 2 * g ** 2 * (np.sin(wm * t) / wm + np.sin(wp * t) / wp)
    return BesselKernels(F1=F1, F2=F2, F2G1=F2G1, F1G2=F1G2, G3=G3)


def _mixed_terms(p, alpha, beta, t):
    k = bessel_kernels(p, t)
    env = np.exp(log_envelope(p, t) - p.gamma * t)
    x_a, x_b = alpha * k.F2, beta * k.F1
    j0a, j0b = bessel_j(0, x_a), bessel_j(0, x_b)
    # alpha J1(alpha F2) G1 = alpha^2 [J1(x)/x] (F2 G1), finite at F2 = 0
    t1 = -SQRT2 * p.g ** 2 * alpha ** 2 * j0b * j1_over_x(x_a) * k.F2G1
    t2 = -SQRT2 * p.g ** 2 * beta ** 2 * j0a * j1_over_x(x_b) * k.F1G2
    return env, k, j0a, j0b, bessel_j(1, x_a), t1, t2


def sigma_mixed_printed(p: EffectiveParams, alpha: float, beta: float, t):
    """sigma_mix(t) evaluated as printed (third term with J1, second without lambda).

    Vanishes identically at alpha = beta = 0 and at t = 0.
    """
    t = np.asarray(t, dtype=float)
    env, k, j0a, j0b, j1a, t1, t2 = _mixed_terms(p, alpha, beta, t)
    return env * (t1 + t2 + j0b * j1a * k.G3)


def sigma_mixed_corrected(p: EffectiveParams, alpha: float, beta: float, t):
    """Time derivative of e^{k - gamma t} J0(alpha F2) J0(beta F1).

    Differs from the printed form by J0 in place of J1 in the last term and an
    extra factor lambda in the second. Equals the phase-averaged series while
    both Bessel arguments stay below the first zero of J0 (2.405).
    """
    t = np.asarray(t, dtype=float)
    env, k, j0a, j0b, _, t1, t2 = _mixed_terms(p, alpha, beta, t)
    return env * (t1 + p.lam * t2 + j0a * j0b * k.G3)


MAX_QUADRATURE = 4096
QUADRATURE_TOL = 1e-9
_QUADRATURE_CHUNK = 1 << 21


def _average_on_grid(p, c, alpha, beta, t, m):
    phases = 2.0 * np.pi * np.arange(m) / m
    a0 = (alpha * np.exp(1j * phases))[:, None, None]
    b0 = (beta * np.exp(1j * phases))[None, :, None]
    step = max(1, _QUADRATURE_CHUNK // (m * m))
    out = np.empty(t.shape, dtype=complex)
    for i in range(0, t.size, step):
        tt = t[i:i + step][None, None, :]
        out[i:i + step] = _coherence(p, c, a0, b0, tt).mean(axis=(0, 1))
    return out


def phase_average_with_order(p, alpha, beta, t, m=4):
    """Like :func:`coherence_phase_average` but also returns the final order."""
    if m < 4 or m % 2:
        raise ValueError("quadrature order must be even and >= 4")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    c = derived_constants(p)
    if alpha == 0.0 and beta == 0.0:
        # vacuum has no phase to average: the pure-state coherence itself
        return _coherence(p, c, 0.0, 0.0, t), m
    current = _average_on_grid(p, c, alpha, beta, t, m)
    while True:
        m *= 2
        if m > MAX_QUADRATURE:
            raise NonConvergence(f"phase average did not converge up to M = {MAX_QUADRATURE}")
        refined = _average_on_grid(p, c, alpha, beta, t, m)
        if np.max(np.abs(refined - current)) < QUADRATURE_TOL:
            return refined, m
        current = refined


def coherence_phase_average(p: EffectiveParams, alpha: float, beta: float, t, m: int = 4):
    """Uniform (theta, phi) average of h(t; theta, phi) on an M x M trapezoid grid.

    M is doubled until successive averages differ by less than 1e-9.
    """
    return phase_average_with_order(p, alpha, beta, t, m)[0]


def sigma_phase_average(p: EffectiveParams, alpha: float, beta: float, grid: SimGrid,
                        m: int = 4) -> SigmaSeries:
    """Phase-diffused series D_mix = 2|h_mix(t)| with Richardson-differenced sigma."""

    def d_func(tt):
        return 2.0 * np.abs(coherence_phase_average(p, alpha, beta, tt, m))

    return _series(grid.times, d_func, Provenance.PHASE_AVERAGE, p)


def mixed_printed_series(p: EffectiveParams, alpha: float, beta: float, grid: SimGrid) -> SigmaSeries:
    """Printed sigma_mix on the grid, paired with the envelope it multiplies."""
    t = grid.times
    k = bessel_kernels(p, t)
    d = (np.exp(log_envelope(p, t) - p.gamma * t)
         * np.abs(bessel_j(0, alpha * k.F2) * bessel_j(0, beta * k.F1)))
    return SigmaSeries(t, d, sigma_mixed_printed(p, alpha, beta, t), Provenance.MIXED_PRINTED)


def authoritative_series(p: EffectiveParams, prep: ModePrep, grid: SimGrid) -> SigmaSeries:
    """The reference analytic series for either preparation kind."""
    if prep.kind is PrepKind.PURE_COHERENT:
        return sigma_from_coherence(p, prep, grid)
    return sigma_phase_average(p, prep.alpha, prep.beta, grid)
