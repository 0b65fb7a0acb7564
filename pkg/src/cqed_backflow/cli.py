"""Command-line entry point: sigma series, figure presets, verification and scans.

Exit codes: 0 success, 2 validation error, 3 verification tolerance failure,
4 scan bracket without a sign change.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import analytic, measures
from .errors import ConfigError, NoSignChange, TruncationTooSmall
from .evolve import sigma_numeric
from .hilbert import verify_ising_form
from .model import (
    TWO_PI,
    EffectiveParams,
    ModePrep,
    SimGrid,
    mhz_to_rad_per_ns,
    validate_and_normalize,
)

__version__ = "0.1.0"

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_VERIFICATION = 3
EXIT_NO_SIGN_CHANGE = 4

CSV_HEADER = "t_ns,trace_distance,sigma_per_ns"
CROSSCHECK_TOL = 1e-6

FIG_OMEGA_MHZ = 10000.0
FIG_G_MHZ = 50.0
PRESETS = ("fig-dephasing", "fig-surface", "fig-modecoupling", "fig-amplitudes", "fig-mixed-dephasing")


# --- output plumbing ---------------------------------------------------------------

_UMASK = os.umask(0)
os.umask(_UMASK)

def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.chmod(tmp, 0o666 & ~_UMASK)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_rows(columns) -> str:
    cols = [np.asarray(c, dtype=float) for c in columns]
    return "".join(",".join("%.17g" % v for v in row) + "\n" for row in zip(*cols))


def series_csv(series: analytic.SigmaSeries) -> str:
    return CSV_HEADER + "\n" + format_rows((series.times, series.trace_distance, series.sigma))


def dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    if hasattr(o, "value"):
        return o.value
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


@dataclasses.dataclass
class RunManifest:
    command: str
    parameters: dict
    outputs: list = dataclasses.field(default_factory=list)
    flags: dict = dataclasses.field(default_factory=dict)
    tool_version: str = __version__
    duration_s: float = 0.0

    def write(self, out_dir: Path, started: float, stem: str | None = None) -> Path:
        """Write ``<stem>.manifest.json`` (stem defaults to the command name)."""
        self.duration_s = time.perf_counter() - started
        missing = [p for p in self.outputs if not (out_dir / p).exists()]
        if missing:
            raise RuntimeError(f"manifest lists missing outputs: {missing}")
        path = out_dir / f"{stem or self.command}.manifest.json"
        _atomic_write(path, dump_json(dataclasses.asdict(self)))
        return path


def _params_dict(p: EffectiveParams, prep: ModePrep | None = None, grid: SimGrid | None = None) -> dict:
    d = {"effective_mhz": p.as_mhz()}
    if prep is not None:
        d["prep"] = {"kind": prep.kind.value, "alpha": prep.alpha, "theta": prep.theta,
                     "beta": prep.beta, "phi": prep.phi}
    if grid is not None:
        d["grid"] = {"t_end_ns": grid.t_end, "n_steps": grid.n_steps, "fock_dim": grid.fock_dim}
    return d


# --- config handling -----------------------------------------------------------------

def load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError([("--config", f"file not found: {path}")])
    except json.JSONDecodeError as exc:
        raise ConfigError([("--config", f"not valid JSON: {exc}")])
    if not isinstance(data, dict):
        raise ConfigError([("--config", "top level must be an object")])
    return data


def _resolve(args):
    p, prep, grid = validate_and_normalize(load_config(args.config))
    return p, prep, _override_grid(p, grid, args)


def _override_grid(p, grid, args):
    window = getattr(args, "window", None)
    steps = getattr(args, "steps", None)
    fock = getattr(args, "fock", None)
    if window is None and steps is None and fock is None:
        return grid
    t_end = window if window is not None else grid.t_end
    fock = fock if fock is not None else grid.fock_dim
    try:
        if steps is not None:
            return SimGrid(t_end=t_end, n_steps=steps, fock_dim=fock)
        if window is not None:
            return SimGrid.resolving(p, t_end, fock)
        return SimGrid(t_end=t_end, n_steps=grid.n_steps, fock_dim=fock)
    except ConfigError as exc:
        raise ConfigError([("--" + k.split(".")[-1], m) for k, m in exc.issues])


def _parse_bracket(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(x) for x in text.split(","))
    except ValueError:
        raise ConfigError([("--bracket", f"expected 'lo,hi' in MHz, got {text!r}")])
    if not (0.0 <= lo < hi):
        raise ConfigError([("--bracket", "need 0 <= lo < hi")])
    return mhz_to_rad_per_ns(lo), mhz_to_rad_per_ns(hi)


def _map(threads: int, fn, items):
    items = list(items)
    if threads and threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


# --- commands ------------------------------------------------------------------------

def cmd_sigma(args) -> int:
    started = time.perf_counter()
    p, prep, grid = _resolve(args)
    try:
        series = measures.compute_series(args.formula, p, prep, grid)
    except TruncationTooSmall as exc:
        raise ConfigError([("grid.fock_dim", str(exc))])
    except ValueError as exc:
        raise ConfigError([("--formula", str(exc))])
    out = Path(args.out)
    name = "sigma.csv"
    _atomic_write(out / name, series_csv(series))
    man = RunManifest("sigma", _params_dict(p, prep, grid), [name],
                      {"formula": args.formula, "provenance": series.provenance.value,
                       "blp": measures.blp_measure(series)})
    man.write(out, started)
    return EXIT_OK


def _fig_params(gamma_mhz=0.3, lambda_mhz=0.0) -> EffectiveParams:
    return EffectiveParams.from_mhz(omega_mhz=FIG_OMEGA_MHZ, g_mhz=FIG_G_MHZ,
                                    gamma_mhz=gamma_mhz, lambda_mhz=lambda_mhz)


def _tag(x: float) -> str:
    return ("%g" % x).replace("-", "m")


def _crosscheck(p: EffectiveParams, prep: ModePrep, series: analytic.SigmaSeries,
                periods: int = 4) -> float:
    """max |D_oracle - D_analytic| over the first few resonator periods of the curve."""
    t_end = min(series.times[-1], periods * TWO_PI / p.omega)
    grid = SimGrid.resolving(p, t_end)
    ref = analytic.authoritative_series(p, prep, grid)
    return float(np.max(np.abs(sigma_numeric(p, prep, grid).trace_distance - ref.trace_distance)))


def _curve_grid(p, window, steps):
    return SimGrid(t_end=window, n_steps=steps) if steps else SimGrid.resolving(p, window)


def cmd_figure(args) -> int:
    started = time.perf_counter()
    preset = args.preset
    out = Path(args.out)
    curves = []  # (filename, params, prep, label)
    period = TWO_PI / mhz_to_rad_per_ns(FIG_OMEGA_MHZ)
    window = args.window if args.window is not None else 4 * period
    flags = {"preset": preset}

    if preset == "fig-dephasing":
        for gm in (0.3, 1.0, 1.5):
            curves.append((f"{preset}_gamma{_tag(gm)}mhz.csv", _fig_params(gm), ModePrep.pure()))
    elif preset == "fig-modecoupling":
        for lm in (10.0, 50.0):
            p = _fig_params(0.3, lm)
            w = args.window if args.window is not None else 2 * TWO_PI / p.lam
            curves.append((f"{preset}_lambda{_tag(lm)}mhz.csv", p, ModePrep.pure(), w))
    elif preset == "fig-amplitudes":
        for a in (0.0, 1.0, 2.0):
            curves.append((f"{preset}_alpha{_tag(a)}.csv", _fig_params(0.3), ModePrep.diffused(a, a)))
    elif preset == "fig-mixed-dephasing":
        a = args.alpha
        flags["alpha"] = a
        for gm in (0.3, 5.0, 10.0):
            curves.append((f"{preset}_gamma{_tag(gm)}mhz.csv", _fig_params(gm), ModePrep.diffused(a, a)))
    elif preset == "fig-surface":
        return _figure_surface(args, out, window, started)
    else:  # argparse restricts choices; kept for direct calls
        raise ConfigError([("preset", f"unknown preset {preset!r}")])

    def run(curve):
        name, p, prep = curve[:3]
        w = curve[3] if len(curve) > 3 else window
        grid = _curve_grid(p, w, args.steps)
        series = analytic.authoritative_series(p, prep, grid)
        _atomic_write(out / name, series_csv(series))
        check = _crosscheck(p, prep, series) if not args.no_check else None
        return name, p, prep, grid, series, check

    results = _map(args.threads, run, curves)
    outputs, per_curve, failed = [], {}, False
    for name, p, prep, grid, series, check in results:
        outputs.append(name)
        ok = check is None or check < CROSSCHECK_TOL
        failed |= not ok
        per_curve[name] = {**_params_dict(p, prep, grid), "blp": measures.blp_measure(series),
                           "provenance": series.provenance.value,
                           "oracle_max_abs_trace_distance": check, "crosscheck_passed": ok}
    flags["crosscheck_tolerance"] = CROSSCHECK_TOL
    flags["passed"] = not failed
    RunManifest("figure", {"curves": per_curve}, outputs, flags).write(out, started, stem=preset)
    return EXIT_VERIFICATION if failed else EXIT_OK


SURFACE_POINTS = 64
SURFACE_GAMMA_MAX_MHZ = 2.0


def _figure_surface(args, out: Path, window: float, started: float) -> int:
    gammas = np.linspace(0.0, SURFACE_GAMMA_MAX_MHZ, SURFACE_POINTS)
    base = _fig_params(0.3)
    grid = _curve_grid(base, window, args.steps)
    prep = ModePrep.pure()

    def run(gm):
        return analytic.sigma_from_coherence(base.replace(gamma=mhz_to_rad_per_ns(gm)), prep, grid)

    rows = _map(args.threads, run, gammas)
    t = grid.times
    cols = [np.repeat(gammas, t.size), np.tile(t, gammas.size),
            np.concatenate([s.trace_distance for s in rows]), np.concatenate([s.sigma for s in rows])]
    name = "fig-surface.csv"
    _atomic_write(out / name, "gamma_mhz,t_ns,trace_distance,sigma_per_ns\n" + format_rows(cols))
    check = None if args.no_check else _crosscheck(base, prep, rows[0])
    ok = check is None or check < CROSSCHECK_TOL
    flags = {"preset": "fig-surface", "gamma_points": SURFACE_POINTS,
             "gamma_max_mhz": SURFACE_GAMMA_MAX_MHZ, "oracle_max_abs_trace_distance": check,
             "crosscheck_tolerance": CROSSCHECK_TOL, "passed": ok}
    RunManifest("figure", _params_dict(base, prep, grid), [name], flags).write(out, started,
                                                                             stem="fig-surface")
    return EXIT_OK if ok else EXIT_VERIFICATION


def cmd_verify_transforms(args) -> int:
    started = time.perf_counter()
    p, _, _ = validate_and_normalize(load_config(args.config))
    target = None
    if args.target_lambda_mhz is not None:
        try:
            target = p.replace(lam=mhz_to_rad_per_ns(args.target_lambda_mhz))
        except ConfigError as exc:
            raise ConfigError([("--target-lambda-mhz", m) for _, m in exc.issues])
    N = args.fock if args.fock is not None else 24
    try:
        report = verify_ising_form(p, N, args.guard, target=target)
    except (TruncationTooSmall, ValueError) as exc:
        raise ConfigError([("--fock", str(exc))])
    out = Path(args.out)
    _atomic_write(out / "verify-transforms.txt", report.to_text())
    _atomic_write(out / "verify-transforms.json", dump_json(report.to_dict()))
    sys.stdout.write(report.to_text())
    RunManifest("verify-transforms", _params_dict(p),
                ["verify-transforms.txt", "verify-transforms.json"],
                {"N": N, "guard": args.guard, "passed": report.passed}).write(out, started)
    return EXIT_OK if report.passed else EXIT_VERIFICATION


def cmd_scan_boundary(args) -> int:
    started = time.perf_counter()
    p, prep, grid = _resolve(args)
    bracket = _parse_bracket(args.bracket) if args.bracket else measures.default_bracket(p, prep, grid)
    out = Path(args.out)
    try:
        res = measures.markov_boundary_scan(p, prep, bracket, tol=args.tol, grid=grid)
    except NoSignChange as exc:
        body = {"error": "NoSignChange", "message": str(exc),
                "bracket_mhz": [b / TWO_PI * 1e3 for b in bracket]}
        _atomic_write(out / "scan-boundary.json", dump_json(body))
        RunManifest("scan-boundary", _params_dict(p, prep, grid), ["scan-boundary.json"],
                    {"passed": False}).write(out, started)
        sys.stderr.write(f"scan-boundary: {exc}\n")
        return EXIT_NO_SIGN_CHANGE
    body = res.to_dict()
    if p.lam == 0.0 and prep.is_pure:
        body["analytic_gamma_c_mhz"] = measures.markov_boundary_analytic(p).gamma_c / TWO_PI * 1e3
    _atomic_write(out / "scan-boundary.json", dump_json(body))
    sys.stdout.write(f"gamma_c/2pi = {body['gamma_c_mhz']:.6f} MHz\n")
    RunManifest("scan-boundary", _params_dict(p, prep, grid), ["scan-boundary.json"],
                {"passed": True, "tol": args.tol}).write(out, started)
    return EXIT_OK


def cmd_report_discrepancy(args) -> int:
    started = time.perf_counter()
    p, prep, grid = _resolve(args)
    rep = measures.discrepancy_report(p, prep, grid, include_oracle=not args.no_oracle)
    out = Path(args.out)
    _atomic_write(out / "report-discrepancy.json", dump_json(rep.to_dict()))
    flags = {"oracle_passed": rep.oracle_vs_coherence.get("passed"),
             "thresholds_within_2pct": rep.thresholds.get("all_within_2pct")}
    RunManifest("report-discrepancy", _params_dict(p, prep, grid), ["report-discrepancy.json"],
                flags).write(out, started)
    return EXIT_OK


# --- parser ----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cqed-backflow",
                                 description="Trace-distance backflow in a two-qubit circuit-QED dephasing model.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True, help="JSON configuration file")
        sp.add_argument("--out", default=".", help="output directory (default: .)")
        sp.add_argument("--threads", type=int, default=1, help="worker threads for independent curves")

    def gridflags(sp):
        sp.add_argument("--window", type=float, help="time window t_end in ns")
        sp.add_argument("--steps", type=int, help="number of time samples")
        sp.add_argument("--fock", type=int, help="Fock truncation per mode for the oracle")

    sp = sub.add_parser("sigma", help="trace distance and sigma(t) from one formula or oracle")
    common(sp)
    gridflags(sp)
    sp.add_argument("--formula", choices=measures.FORMULAS, default="coherence")
    sp.set_defaults(func=cmd_sigma)

    sp = sub.add_parser("figure", help="CSV data for a figure preset")
    sp.add_argument("preset", choices=PRESETS)
    common(sp, config=False)
    sp.add_argument("--window", type=float, help="time window t_end in ns")
    sp.add_argument("--steps", type=int, help="number of time samples per curve")
    sp.add_argument("--alpha", type=float, default=1.0,
                    help="alpha = beta for fig-mixed-dephasing (default 1)")
    sp.add_argument("--no-check", action="store_true", help="skip the oracle cross-check")
    sp.set_defaults(func=cmd_figure)

    sp = sub.add_parser("verify-transforms", help="check that T''T'T brings H to Ising form")
    common(sp)
    sp.add_argument("--fock", type=int, help="Fock truncation per mode (default 24)")
    sp.add_argument("--guard", type=int, default=6, help="excluded boundary shells (default 6)")
    sp.add_argument("--target-lambda-mhz", type=float,
                    help="compare against this lambda instead of the configured one")
    sp.set_defaults(func=cmd_verify_transforms)

    sp = sub.add_parser("scan-boundary", help="bisection for the Markovianity boundary in gamma")
    common(sp)
    gridflags(sp)
    sp.add_argument("--bracket", help="gamma/2pi bracket 'lo,hi' in MHz")
    sp.add_argument("--tol", type=float, default=1e-3, help="relative bracket width (default 1e-3)")
    sp.set_defaults(func=cmd_scan_boundary)

    sp = sub.add_parser("report-discrepancy", help="compare printed formulas with the oracles")
    common(sp)
    gridflags(sp)
    sp.add_argument("--no-oracle", action="store_true", help="skip the block-oracle comparison")
    sp.set_defaults(func=cmd_report_discrepancy)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "steps", None) is not None and args.steps < 2:
        sys.stderr.write("error: --steps: must be >= 2\n")
        return EXIT_VALIDATION
    if args.threads < 1:
        sys.stderr.write("error: --threads: must be >= 1\n")
        return EXIT_VALIDATION
    try:
        return args.func(args)
    except ConfigError as exc:
        for key, msg in exc.issues:
            sys.stderr.write(f"error: {key}: {msg}\n")
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
