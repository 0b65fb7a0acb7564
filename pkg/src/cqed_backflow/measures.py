"""BLP measure, Markovianity boundaries, trend sweeps and the formula-discrepancy report."""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from . import analytic
from .analytic import Provenance, SigmaSeries
from .errors import NoSignChange
from .evolve import sigma_numeric
from .model import TWO_PI, EffectiveParams, ModePrep, PrepKind, SimGrid, default_window

FORMULAS = ("general", "decoupled", "coherence", "mixed-printed", "phase-average", "oracle")
BOUNDARY_AGREEMENT = 0.02
ANALYTIC_SPREAD_TOL = 1e-10
ORACLE_SPREAD_TOL = 1e-6
ORACLE_AGREEMENT_TOL = 1e-6


def blp_measure(series: SigmaSeries) -> float:
    """Trapezoidal integral of max(sigma, 0) over the series window."""
    pos = np.maximum(series.sigma, 0.0)
    return float(np.trapezoid(pos, series.times)) if pos.any() else 0.0


# --- series dispatch --------------------------------------------------------------

def _printed_general(p, prep, grid):
    t = grid.times
    return SigmaSeries(t, np.exp(analytic.log_envelope(p, t) - p.gamma * t),
                       analytic.sigma_pure_general(p, t), Provenance.ANALYTIC_GENERAL)


def _printed_decoupled(p, prep, grid):
    t = grid.times
    env = np.exp(-2 * p.gamma * t - 8 * p.g ** 2 * (1 - np.cos(p.omega * t)) / p.omega ** 2)
    return SigmaSeries(t, env, analytic.sigma_pure_decoupled(p, t), Provenance.ANALYTIC_DECOUPLED)


def _require_pure(prep, formula):
    if not prep.is_pure:
        raise ValueError(f"formula '{formula}' needs a PureCoherent preparation")


def _require_diffused(prep, formula):
    if prep.is_pure:
        raise ValueError(f"formula '{formula}' needs a PhaseDiffused preparation")


def compute_series(formula: str, p: EffectiveParams, prep: ModePrep, grid: SimGrid) -> SigmaSeries:
    """Evaluate one named sigma implementation on the grid.

    For the printed pure-state formulas the trace distance column is the
    envelope each expression implies (e^{k - gamma t}, or its lambda = 0
    counterpart with the doubled exponent).
    """
    if formula == "general":
        _require_pure(prep, formula)
        return _printed_general(p, prep, grid)
    if formula == "decoupled":
        _require_pure(prep, formula)
        return _printed_decoupled(p, prep, grid)
    if formula == "coherence":
        _require_pure(prep, formula)
        return analytic.sigma_from_coherence(p, prep, grid)
    if formula == "mixed-printed":
        _require_diffused(prep, formula)
        return analytic.mixed_printed_series(p, prep.alpha, prep.beta, grid)
    if formula == "phase-average":
        _require_diffused(prep, formula)
        return analytic.sigma_phase_average(p, prep.alpha, prep.beta, grid)
    if formula == "oracle":
        return sigma_numeric(p, prep, grid)
    raise ValueError(f"unknown formula '{formula}'; choose from {', '.join(FORMULAS)}")


def default_grid(p: EffectiveParams, t_end: float | None = None, fock_dim=None) -> SimGrid:
    return SimGrid.resolving(p, t_end if t_end is not None else default_window(p), fock_dim)


# --- Markovianity boundary --------------------------------------------------------

class BoundaryMethod(str, Enum):
    ANALYTIC_FORMULA = "AnalyticFormula"
    BISECTION = "Bisection"


@dataclass
class BoundaryResult:
    gamma_c: float
    method: BoundaryMethod
    bracket: tuple
    iterations: int
    formula: str = "coherence"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["method"] = self.method.value
        d["bracket"] = list(self.bracket)
        d["gamma_c_mhz"] = self.gamma_c / TWO_PI * 1e3
        d["bracket_mhz"] = [b / TWO_PI * 1e3 for b in self.bracket]
        return d


def markov_boundary_analytic(p: EffectiveParams) -> BoundaryResult:
    """gamma_c = 4 g^2 / omega for decoupled modes."""
    if p.lam != 0.0:
        raise ValueError("the closed-form boundary holds only for lambda = 0")
    gc = 4.0 * p.g ** 2 / p.omega
    return BoundaryResult(gc, BoundaryMethod.ANALYTIC_FORMULA, (gc, gc), 0, "formula")


def is_non_markovian(series: SigmaSeries) -> bool:
    """Strict positivity of sigma somewhere; max = 0 counts as Markovian."""
    return bool(np.max(series.sigma) > 0.0)


def markov_boundary_scan(p: EffectiveParams, prep: ModePrep, bracket: tuple[float, float],
                         tol: float = 1e-3, grid: SimGrid | None = None,
                         formula: str | None = None, max_iter: int = 200) -> BoundaryResult:
    """Bisection in gamma on the verdict max_t sigma(t; gamma) > 0.

    ``formula`` defaults to the authoritative series for the preparation kind.
    Iterates until the bracket width is below ``tol`` times its midpoint.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not (0.0 <= lo < hi) or not math.isfinite(hi):
        raise ValueError(f"bracket must satisfy 0 <= lo < hi, got {bracket}")
    if formula is None:
        formula = "coherence" if prep.is_pure else "phase-average"
    grid = grid or default_grid(p)

    def verdict(gamma):
        return is_non_markovian(compute_series(formula, p.replace(gamma=gamma), prep, grid))

    v_lo, v_hi = verdict(lo), verdict(hi)
    if v_lo == v_hi:
        state = "non-Markovian" if v_lo else "Markovian"
        raise NoSignChange(f"both bracket ends are {state}")
    it = 0
    while hi - lo > tol * 0.5 * (hi + lo) and it < max_iter:
        mid = 0.5 * (lo + hi)
        if verdict(mid) == v_lo:
            lo = mid
        else:
            hi = mid
        it += 1
    return BoundaryResult(0.5 * (lo + hi), BoundaryMethod.BISECTION, (lo, hi), it, formula)


MAX_BRACKET_DOUBLINGS = 10


def default_bracket(p: EffectiveParams, prep: ModePrep | None = None,
                    grid: SimGrid | None = None) -> tuple[float, float]:
    """Starting bracket [0, 8 g^2 / omega_-]: twice the decoupled threshold with omega_- for omega.

    Phase-diffused preparations stay non-Markovian to larger gamma, so for them
    the upper end is doubled until the authoritative series turns Markovian
    (at most ten doublings).
    """
    hi = 8.0 * p.g ** 2 / (p.omega - p.lam)
    if prep is None or prep.is_pure or hi == 0.0:
        return 0.0, hi
    grid = grid or default_grid(p)
    for _ in range(MAX_BRACKET_DOUBLINGS):
        if not is_non_markovian(analytic.authoritative_series(p.replace(gamma=hi), prep, grid)):
            break
        hi *= 2.0
    return 0.0, hi


# --- independence and trends --------------------------------------------------------

@dataclass
class IndependenceResult:
    passed: bool
    spread: float
    tolerance: float
    path: str
    samples: list


def independence_suite(p: EffectiveParams, grid: SimGrid, samples: Sequence[tuple],
                       path: str = "analytic") -> IndependenceResult:
    """Largest pairwise deviation of sigma series across PureCoherent (alpha, theta, beta, phi)."""
    if path == "analytic":
        fn, tol = analytic.sigma_from_coherence, ANALYTIC_SPREAD_TOL
    elif path == "oracle":
        fn, tol = sigma_numeric, ORACLE_SPREAD_TOL
    else:
        raise ValueError("path must be 'analytic' or 'oracle'")
    preps = [ModePrep.pure(alpha=a, theta=th, beta=b, phi=ph) for a, th, b, ph in samples]
    series = [fn(p, pr, grid) for pr in preps]
    spread = max((s1.spread(s2) for s1, s2 in itertools.combinations(series, 2)), default=0.0)
    return IndependenceResult(spread < tol, spread, tol, path, [tuple(s) for s in samples])


@dataclass
class TrendResult:
    parameter: str
    values: list
    blp: list
    expected: str
    monotone: bool
    window_ns: float

    def to_dict(self) -> dict:
        return asdict(self)


def _monotone(seq, direction):
    diffs = np.diff(np.asarray(seq, dtype=float))
    if direction == "non-increasing":
        return bool(np.all(diffs <= 0.0))
    return bool(np.all(diffs >= 0.0))


def amplitude_trend(p: EffectiveParams, alphas: Sequence[float], grid: SimGrid | None = None,
                    series_fn: Callable | None = None) -> TrendResult:
    """BLP of phase-diffused preparations with alpha = beta over the list."""
    grid = grid or default_grid(p)
    fn = series_fn or (lambda pp, pr, gr: analytic.authoritative_series(pp, pr, gr))
    blps = [blp_measure(fn(p, ModePrep.diffused(a, a), grid)) for a in alphas]
    return TrendResult("alpha", list(alphas), blps, "non-decreasing",
                       _monotone(blps, "non-decreasing"), grid.t_end)


def lambda_window(p: EffectiveParams, lambdas: Sequence[float]) -> float:
    """Common window 4 * 2pi / lambda_min over the positive entries (4 * 2pi / omega if none)."""
    positive = [l for l in lambdas if l > 0]
    slow = min(positive) if positive else p.omega
    return 4.0 * TWO_PI / slow


def lambda_trend(p: EffectiveParams, lambdas: Sequence[float], grid: SimGrid | None = None,
                 prep: ModePrep | None = None) -> TrendResult:
    """BLP over inter-mode couplings (rad/ns) on one shared window."""
    prep = prep or ModePrep.pure()
    grid = grid or default_grid(p, lambda_window(p, lambdas))
    blps = [blp_measure(analytic.authoritative_series(p.replace(lam=l), prep, grid)) for l in lambdas]
    return TrendResult("lambda", list(lambdas), blps, "non-increasing",
                       _monotone(blps, "non-increasing"), grid.t_end)


def gamma_trend(p: EffectiveParams, gammas: Sequence[float], grid: SimGrid | None = None,
                prep: ModePrep | None = None) -> TrendResult:
    """BLP over dephasing rates (1/ns)."""
    prep = prep or ModePrep.pure()
    grid = grid or default_grid(p)
    blps = [blp_measure(analytic.authoritative_series(p.replace(gamma=g), prep, grid)) for g in gammas]
    return TrendResult("gamma", list(gammas), blps, "non-increasing",
                       _monotone(blps, "non-increasing"), grid.t_end)


# --- discrepancy report ---------------------------------------------------------------

@dataclass
class VariantDeviation:
    name: str
    max_abs: float
    max_rel: float
    scale_factor: float
    ratio_t0: float | None
    sign_agreement: float
    signs_match: bool


@dataclass
class DiscrepancyReport:
    params_mhz: dict
    prep: dict
    window_ns: float
    n_steps: int
    authoritative: str
    variants: list = field(default_factory=list)
    decoupled_vs_general: dict = field(default_factory=dict)
    g0_exponents: dict = field(default_factory=dict)
    mixed_reduction: dict = field(default_factory=dict)
    mixed_vs_oracle: dict = field(default_factory=dict)
    oracle_vs_coherence: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _deviation(name: str, v: np.ndarray, ref: np.ndarray) -> VariantDeviation:
    diff = np.abs(v - ref)
    scale = float(np.max(np.abs(ref))) or 1.0
    denom = float(np.dot(ref, ref))
    factor = float(np.dot(v, ref) / denom) if denom > 0 else float("nan")
    ratio = float(v[0] / ref[0]) if ref[0] != 0 else None
    floor = 1e-9 * scale
    sv = np.where(np.abs(v) > floor, np.sign(v), 0.0)
    sr = np.where(np.abs(ref) > floor, np.sign(ref), 0.0)
    agree = float(np.mean(sv == sr))
    return VariantDeviation(name, float(diff.max()), float(diff.max() / scale), factor, ratio,
                            agree, agree == 1.0)


def _log_slope(t, sigma):
    mask = np.abs(sigma) > 0
    slope, _ = np.polyfit(t[mask], np.log(np.abs(sigma[mask])), 1)
    return float(slope)


def _g0_exponents(p: EffectiveParams) -> dict:
    """Fit log|sigma| = a - c gamma t at g = 0 over t in [0, 1/gamma] for each pure-state form."""
    if p.gamma == 0.0:
        return {"note": "gamma = 0: no exponential decay to regress"}
    q = p.replace(g=0.0, lam=0.0)
    grid = SimGrid(1.0 / p.gamma, 257)
    t = grid.times
    out = {}
    for name in ("general", "decoupled", "coherence"):
        s = compute_series(name, q, ModePrep.pure(), grid)
        out[name] = -_log_slope(t, s.sigma) / p.gamma
    out["ratio_decoupled_to_coherence"] = out["decoupled"] / out["coherence"]
    out["ratio_general_to_coherence"] = out["general"] / out["coherence"]
    return out


def discrepancy_report(p: EffectiveParams, prep: ModePrep, grid: SimGrid,
                       include_oracle: bool = True, thresholds: bool = True) -> DiscrepancyReport:
    """Compare every printed form and both oracles with the authoritative series."""
    pure = ModePrep.pure() if not prep.is_pure else prep
    auth_pure = analytic.sigma_from_coherence(p, pure, grid)
    t = grid.times
    rep = DiscrepancyReport(
        params_mhz=p.as_mhz(), prep={"kind": prep.kind.value, "alpha": prep.alpha, "beta": prep.beta,
                                     "theta": prep.theta, "phi": prep.phi},
        window_ns=grid.t_end, n_steps=grid.n_steps,
        authoritative="coherence" if prep.is_pure else "phase-average",
    )

    gen = analytic.sigma_pure_general(p, t)
    rep.variants.append(_deviation("general", gen, auth_pure.sigma))
    if p.lam == 0.0:
        dec = analytic.sigma_pure_decoupled(p, t)
        rep.variants.append(_deviation("decoupled", dec, auth_pure.sigma))
        rep.decoupled_vs_general = {
            "ratio_t0": float(dec[0] / gen[0]) if gen[0] != 0 else None,
            "scale_factor_decoupled": rep.variants[-1].scale_factor,
            "note": "decoupled form equals d(D^2)/dt: prefactor 2 and exponent 2 gamma t "
                    "relative to D = 2|h|",
        }
    rep.g0_exponents = _g0_exponents(p)

    # the printed phase-diffused form at alpha = beta = 0 should reduce to the pure series
    mix0 = analytic.sigma_mixed_printed(p, 0.0, 0.0, t)
    denom = float(np.max(np.abs(auth_pure.sigma))) or 1.0
    rep.mixed_reduction = {
        "max_abs_printed": float(np.max(np.abs(mix0))),
        "relative_deviation": float(np.max(np.abs(mix0 - auth_pure.sigma)) / denom),
        "reduces_to_pure": bool(np.max(np.abs(mix0 - auth_pure.sigma)) <= 1e-6 * denom),
    }

    if not prep.is_pure:
        pa = analytic.sigma_phase_average(p, prep.alpha, prep.beta, grid)
        pr = analytic.sigma_mixed_printed(p, prep.alpha, prep.beta, t)
        co = analytic.sigma_mixed_corrected(p, prep.alpha, prep.beta, t)
        scale = float(np.max(np.abs(pa.sigma))) or 1.0
        rep.mixed_vs_oracle = {
            "printed": asdict(_deviation("mixed-printed", pr, pa.sigma)),
            "corrected": asdict(_deviation("mixed-corrected", co, pa.sigma)),
            "printed_matches": bool(np.max(np.abs(pr - pa.sigma)) <= ORACLE_AGREEMENT_TOL * max(scale, 1.0)),
            "corrected_matches": bool(np.max(np.abs(co - pa.sigma)) <= ORACLE_AGREEMENT_TOL * max(scale, 1.0)),
        }

    if include_oracle:
        auth = auth_pure if prep.is_pure else analytic.sigma_phase_average(p, prep.alpha, prep.beta, grid)
        orc = sigma_numeric(p, prep, grid)
        dd = float(np.max(np.abs(orc.trace_distance - auth.trace_distance)))
        ds = float(np.max(np.abs(orc.sigma - auth.sigma)))
        rep.oracle_vs_coherence = {"max_abs_trace_distance": dd, "max_abs_sigma": ds,
                                   "tolerance": ORACLE_AGREEMENT_TOL,
                                   "passed": bool(dd < ORACLE_AGREEMENT_TOL)}

    if thresholds and p.lam == 0.0 and p.g > 0.0:
        rep.thresholds = threshold_agreement(p, include_oracle=include_oracle)
    return rep


def threshold_agreement(p: EffectiveParams, include_oracle: bool = True,
                        tol: float = 1e-3) -> dict:
    """gamma_c from each pure-state variant by bisection, against 4 g^2 / omega."""
    exact = markov_boundary_analytic(p).gamma_c
    grid = default_grid(p)
    bracket = default_bracket(p)
    names = ["general", "decoupled", "coherence"] + (["oracle"] if include_oracle else [])
    out = {"formula_gamma_c": exact, "formula_gamma_c_mhz": exact / TWO_PI * 1e3}
    rel = {}
    for name in names:
        res = markov_boundary_scan(p, ModePrep.pure(), bracket, tol=tol, grid=grid, formula=name)
        out[name] = res.gamma_c
        rel[name] = abs(res.gamma_c - exact) / exact if exact > 0 else float("nan")
    out["relative_deviation"] = rel
    out["all_within_2pct"] = bool(all(r <= BOUNDARY_AGREEMENT for r in rel.values()))
    return out
