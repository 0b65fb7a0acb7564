"""Physical parameters, unit conventions and configuration validation.

Internally every angular frequency is in rad/ns and every time in ns.
User-facing configuration quotes linear frequencies in MHz, so that a
resonator at 10 GHz is written ``omega_mhz = 10000`` and a dephasing rate
quoted as gamma/2pi = 0.3 MHz is written ``gamma_mhz = 0.3``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Mapping

from .errors import ConfigError, DegeneracyPoint, NonzeroMixingAngle

TWO_PI = 2.0 * math.pi

# omega0 and mu only enter global phases of the qubit-A coherence, never
# its modulus; these defaults sit inside the quoted device ranges.
DEFAULT_OMEGA0_MHZ = 8000.0
DEFAULT_MU = 0.02

THETA_TOL = 1e-6
FLUX_TOL = 1e-9
DENOMINATOR_TOL = 1e-6
SAMPLES_PER_PERIOD = 256


def mhz_to_rad_per_ns(nu_mhz: float) -> float:
    """Linear frequency in MHz to angular frequency in rad/ns."""
    return TWO_PI * nu_mhz * 1e-3


def rad_per_ns_to_mhz(omega: float) -> float:
    return omega / TWO_PI * 1e3


def _param_issues(omega0, omega, lam, g, gamma, mu, keys=None):
    keys = keys or {
        "omega0": "omega0",
        "omega": "omega",
        "lam": "lambda",
        "g": "g",
        "gamma": "gamma",
        "mu": "mu",
    }
    issues = []
    values = dict(omega0=omega0, omega=omega, lam=lam, g=g, gamma=gamma, mu=mu)
    for name, value in values.items():
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            issues.append((keys[name], f"must be a finite number, got {value!r}"))
    if issues:
        return issues
    if omega <= 0:
        issues.append((keys["omega"], "resonator frequency must be positive"))
    if g < 0:
        issues.append((keys["g"], "coupling must be non-negative"))
    if gamma < 0:
        issues.append((keys["gamma"], "dephasing rate must be non-negative"))
    if lam < 0:
        issues.append((keys["lam"], "inter-mode coupling must be non-negative"))
    if omega > 0 and lam >= 0:
        if abs(omega - lam) / omega <= DENOMINATOR_TOL:
            issues.append((keys["lam"], "lambda equals omega: (omega^2 - lambda^2) denominators vanish"))
        elif lam > omega:
            issues.append((keys["lam"], "lambda must stay below omega so that omega - lambda > 0"))
    return issues


@dataclass(frozen=True)
class EffectiveParams:
    """The six constants of the effective model (rad/ns, 1/ns, unitless mu)."""

    omega0: float
    omega: float
    lam: float
    g: float
    gamma: float
    mu: float

    def __post_init__(self):
        issues = _param_issues(self.omega0, self.omega, self.lam, self.g, self.gamma, self.mu)
        if issues:
            raise ConfigError(issues)

    @classmethod
    def from_mhz(
        cls,
        *,
        omega_mhz: float,
        g_mhz: float,
        gamma_mhz: float,
        lambda_mhz: float = 0.0,
        omega0_mhz: float = DEFAULT_OMEGA0_MHZ,
        mu: float = DEFAULT_MU,
    ) -> "EffectiveParams":
        return cls(
            omega0=mhz_to_rad_per_ns(omega0_mhz),
            omega=mhz_to_rad_per_ns(omega_mhz),
            lam=mhz_to_rad_per_ns(lambda_mhz),
            g=mhz_to_rad_per_ns(g_mhz),
            gamma=mhz_to_rad_per_ns(gamma_mhz),
            mu=mu,
        )

    def replace(self, **changes) -> "EffectiveParams":
        return dataclasses.replace(self, **changes)

    def as_mhz(self) -> dict:
        return {
            "omega0_mhz": rad_per_ns_to_mhz(self.omega0),
            "omega_mhz": rad_per_ns_to_mhz(self.omega),
            "lambda_mhz": rad_per_ns_to_mhz(self.lam),
            "g_mhz": rad_per_ns_to_mhz(self.g),
            "gamma_mhz": rad_per_ns_to_mhz(self.gamma),
            "mu": self.mu,
        }


@dataclass(frozen=True)
class DeviceParams:
    """Charge-qubit device description. All energies share one frequency unit."""

    E_C: float
    E_Jmax: float
    n_g: float
    flux_ratio: float
    coupling_g: float
    omega_res: float
    lam: float
    gamma: float

    def issues(self) -> list:
        out = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                out.append((f.name, f"must be a finite number, got {v!r}"))
        if out:
            return out
        if not 0.0 < self.n_g < 1.0:
            out.append(("n_g", "gate charge must lie strictly between 0 and 1"))
        if self.E_C <= 0:
            out.append(("E_C", "charging energy must be positive"))
        keys = {"omega0": "E_C", "omega": "omega_res", "lam": "lambda", "g": "coupling_g",
                "gamma": "gamma", "mu": "n_g"}
        out.extend(_param_issues(1.0, self.omega_res, self.lam, self.coupling_g, self.gamma,
                                 1.0 - 2.0 * self.n_g, keys))
        return out

    def mixing_angle(self) -> float:
        """Residual mixing angle, using the printed arctan[E_J / (E_C (1 - 2 n_g))]."""
        e_j = self.E_Jmax * math.cos(math.pi * self.flux_ratio)
        return math.atan(e_j / (self.E_C * (1.0 - 2.0 * self.n_g)))


def near_half_integer_flux(flux_ratio: float, tol: float = FLUX_TOL) -> bool:
    return abs((flux_ratio - 0.5) - round(flux_ratio - 0.5)) <= tol


def device_to_effective(dev: DeviceParams) -> tuple[EffectiveParams, float]:
    """Convert a device description into effective model constants.

    Returns ``(params, theta)``. The mixing angle follows the printed
    arctan[E_J / (E_C (1 - 2 n_g))] literally, without the factor 4 that
    appears in the electrostatic energy; the model is only exact at
    theta = 0, so anything above ``THETA_TOL`` is refused.
    """
    issues = dev.issues()
    if issues:
        raise ConfigError([(f"device.{k}", m) for k, m in issues])
    mu = 1.0 - 2.0 * dev.n_g
    if abs(mu) < 1e-12:
        raise DegeneracyPoint("n_g = 1/2: mu = 1 - 2 n_g vanishes and theta is undefined")
    e_el = 4.0 * dev.E_C * mu
    e_j = dev.E_Jmax * math.cos(math.pi * dev.flux_ratio)
    omega0 = math.hypot(e_j, e_el)
    theta = math.atan(e_j / (dev.E_C * mu))
    if abs(theta) > THETA_TOL:
        raise NonzeroMixingAngle(
            f"mixing angle theta = {theta:.3e} rad exceeds {THETA_TOL:g}; "
            "tune flux_ratio to k + 1/2"
        )
    params = EffectiveParams(
        omega0=omega0,
        omega=dev.omega_res,
        lam=dev.lam,
        g=dev.coupling_g,
        gamma=dev.gamma,
        mu=mu,
    )
    return params, theta


class PrepKind(str, Enum):
    PURE_COHERENT = "PureCoherent"
    PHASE_DIFFUSED = "PhaseDiffused"


@dataclass(frozen=True)
class ModePrep:
    """Initial resonator preparation.

    Phases are ignored (and must be zero) for phase-diffused preparations.
    """

    kind: PrepKind
    alpha: float = 0.0
    beta: float = 0.0
    theta: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        issues = _prep_issues(self.kind, self.alpha, self.beta, self.theta, self.phi)
        if issues:
            raise ConfigError(issues)

    @classmethod
    def pure(cls, alpha=0.0, theta=0.0, beta=0.0, phi=0.0) -> "ModePrep":
        return cls(PrepKind.PURE_COHERENT, alpha, beta, theta % TWO_PI, phi % TWO_PI)

    @classmethod
    def diffused(cls, alpha=0.0, beta=0.0) -> "ModePrep":
        return cls(PrepKind.PHASE_DIFFUSED, alpha, beta)

    @property
    def is_pure(self) -> bool:
        return self.kind is PrepKind.PURE_COHERENT

    def amplitudes(self) -> tuple[complex, complex]:
        """Complex coherent amplitudes alpha e^{i theta}, beta e^{i phi}."""
        return (
            complex(self.alpha * math.cos(self.theta), self.alpha * math.sin(self.theta)),
            complex(self.beta * math.cos(self.phi), self.beta * math.sin(self.phi)),
        )


def _prep_issues(kind, alpha, beta, theta, phi):
    issues = []
    if not isinstance(kind, PrepKind):
        return [("prep.kind", f"unknown preparation kind {kind!r}")]
    for key, v in (("prep.alpha", alpha), ("prep.beta", beta)):
        if not isinstance(v, (int, float)) or not math.isfinite(v):
            issues.append((key, f"must be a finite number, got {v!r}"))
        elif v < 0:
            issues.append((key, "amplitude must be non-negative"))
    for key, v in (("prep.theta", theta), ("prep.phi", phi)):
        if not isinstance(v, (int, float)) or not math.isfinite(v):
            issues.append((key, f"must be a finite number, got {v!r}"))
        elif not 0.0 <= v < TWO_PI:
            issues.append((key, "phase must lie in [0, 2pi)"))
        elif kind is PrepKind.PHASE_DIFFUSED and v != 0.0:
            issues.append((key, "phase-diffused preparations carry no phase"))
    return issues


@dataclass(frozen=True)
class SimGrid:
    """Uniform time grid t_k = k t_end / (n_steps - 1) and Fock truncation.

    ``fock_dim = None`` lets the oracles pick the truncation rule's value.
    """

    t_end: float
    n_steps: int
    fock_dim: int | None = None

    def __post_init__(self):
        issues = _grid_issues(self.t_end, self.n_steps, self.fock_dim)
        if issues:
            raise ConfigError(issues)

    @property
    def times(self):
        import numpy as np

        return np.linspace(0.0, self.t_end, self.n_steps)

    @classmethod
    def resolving(cls, p: EffectiveParams, t_end: float, fock_dim=None,
                  samples_per_period: int = SAMPLES_PER_PERIOD) -> "SimGrid":
        """Grid with at least ``samples_per_period`` points per 2pi/omega."""
        period = TWO_PI / p.omega
        n = int(math.ceil(samples_per_period * t_end / period)) + 1
        return cls(t_end=t_end, n_steps=max(n, 2), fock_dim=fock_dim)


def _grid_issues(t_end, n_steps, fock_dim):
    issues = []
    if not isinstance(t_end, (int, float)) or not math.isfinite(t_end) or t_end <= 0:
        issues.append(("grid.t_end_ns", f"must be a positive number, got {t_end!r}"))
    if not isinstance(n_steps, int) or isinstance(n_steps, bool) or n_steps < 2:
        issues.append(("grid.n_steps", f"must be an integer >= 2, got {n_steps!r}"))
    if fock_dim is not None and (
        not isinstance(fock_dim, int) or isinstance(fock_dim, bool) or fock_dim < 2
    ):
        issues.append(("grid.fock_dim", f"must be an integer >= 2, got {fock_dim!r}"))
    return issues


def default_window(p: EffectiveParams) -> float:
    """Four periods of the slowest relevant oscillation: 2pi/omega, or 2pi/lambda if lambda > 0."""
    slow = p.lam if p.lam > 0 else p.omega
    return 4.0 * TWO_PI / slow


# --- configuration documents -------------------------------------------------

EFFECTIVE_KEYS = ("omega0_mhz", "omega_mhz", "lambda_mhz", "g_mhz", "gamma_mhz", "mu")
PREP_KEYS = ("prep.kind", "prep.alpha", "prep.theta", "prep.beta", "prep.phi")
GRID_KEYS = ("grid.t_end_ns", "grid.n_steps", "grid.fock_dim")
DEVICE_KEYS = tuple(
    "device." + k
    for k in ("E_C", "E_Jmax", "n_g", "flux_ratio", "coupling_g", "omega_res", "lambda", "gamma")
)
KNOWN_KEYS = frozenset(EFFECTIVE_KEYS + PREP_KEYS + GRID_KEYS + DEVICE_KEYS)


def flatten(cfg: Mapping[str, Any], prefix: str = "") -> dict:
    """Flatten nested mappings into dotted keys; flat documents pass through."""
    out = {}
    for key, value in cfg.items():
        full = f"{prefix}{key}"
        if isinstance(value, Mapping):
            out.update(flatten(value, full + "."))
        else:
            out[full] = value
    return out


def _number(flat, key, issues, default=None, integer=False):
    if key not in flat:
        if default is None:
            issues.append((key, "required key is missing"))
        return default
    v = flat[key]
    if integer:
        if isinstance(v, bool) or not isinstance(v, int):
            if isinstance(v, float) and v.is_integer():
                return int(v)
            issues.append((key, f"must be an integer, got {v!r}"))
            return default
        return v
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        issues.append((key, f"must be a finite number, got {v!r}"))
        return default
    return float(v)


def _device_from_flat(flat, issues):
    values = {}
    for key in DEVICE_KEYS:
        values[key] = _number(flat, key, issues, default=None)
    if any(v is None for v in values.values()):
        return None
    mhz = mhz_to_rad_per_ns
    return DeviceParams(
        E_C=mhz(values["device.E_C"]),
        E_Jmax=mhz(values["device.E_Jmax"]),
        n_g=values["device.n_g"],
        flux_ratio=values["device.flux_ratio"],
        coupling_g=mhz(values["device.coupling_g"]),
        omega_res=mhz(values["device.omega_res"]),
        lam=mhz(values["device.lambda"]),
        gamma=mhz(values["device.gamma"]),
    )


def validate_and_normalize(cfg: Mapping[str, Any]) -> tuple[EffectiveParams, ModePrep, SimGrid]:
    """Validate a configuration document and convert it to internal units.

    Every violated invariant is collected and reported together in one
    :class:`ConfigError`, each issue naming its offending key.
    """
    flat = flatten(cfg)
    issues = [(k, "unknown key") for k in sorted(flat) if k not in KNOWN_KEYS]

    has_device = any(k.startswith("device.") for k in flat)
    params = None
    if has_device:
        clash = [k for k in EFFECTIVE_KEYS if k in flat]
        issues.extend((k, "give either device.* or effective parameters, not both") for k in clash)
        dev = _device_from_flat(flat, issues)
        if dev is not None and not clash:
            dev_issues = dev.issues()
            if dev_issues:
                issues.extend((f"device.{k}", m) for k, m in dev_issues)
            else:
                try:
                    params, _ = device_to_effective(dev)
                except (DegeneracyPoint, NonzeroMixingAngle) as exc:
                    key = "device.n_g" if isinstance(exc, DegeneracyPoint) else "device.flux_ratio"
                    issues.append((key, str(exc)))
                except ConfigError as exc:
                    issues.extend(exc.issues)
    else:
        nu = {k: _number(flat, k, issues, default=d) for k, d in (
            ("omega_mhz", None), ("g_mhz", None), ("gamma_mhz", None),
            ("lambda_mhz", 0.0), ("omega0_mhz", DEFAULT_OMEGA0_MHZ),
        )}
        mu = _number(flat, "mu", issues, default=DEFAULT_MU)
        complete = all(v is not None for v in nu.values()) and mu is not None
        # placeholders for missing values let the remaining keys still be checked
        if nu["lambda_mhz"] is None:
            nu["lambda_mhz"] = 0.0
        if nu["omega_mhz"] is None:
            nu["omega_mhz"] = 2.0 * abs(nu["lambda_mhz"]) + 1.0
        for k in ("g_mhz", "gamma_mhz", "omega0_mhz"):
            if nu[k] is None:
                nu[k] = 0.0
        mu = DEFAULT_MU if mu is None else mu
        vals = dict(
            omega0=mhz_to_rad_per_ns(nu["omega0_mhz"]),
            omega=mhz_to_rad_per_ns(nu["omega_mhz"]),
            lam=mhz_to_rad_per_ns(nu["lambda_mhz"]),
            g=mhz_to_rad_per_ns(nu["g_mhz"]),
            gamma=mhz_to_rad_per_ns(nu["gamma_mhz"]),
            mu=mu,
        )
        keys = {"omega0": "omega0_mhz", "omega": "omega_mhz", "lam": "lambda_mhz",
                "g": "g_mhz", "gamma": "gamma_mhz", "mu": "mu"}
        p_issues = _param_issues(**vals, keys=keys)
        if p_issues:
            issues.extend(p_issues)
        elif complete:
            params = EffectiveParams(**vals)

    kind_raw = flat.get("prep.kind", PrepKind.PURE_COHERENT.value)
    try:
        kind = PrepKind(kind_raw)
    except ValueError:
        issues.append(("prep.kind", f"must be one of {[k.value for k in PrepKind]}, got {kind_raw!r}"))
        kind = None
    alpha = _number(flat, "prep.alpha", issues, default=0.0)
    beta = _number(flat, "prep.beta", issues, default=0.0)
    theta = _number(flat, "prep.theta", issues, default=0.0)
    phi = _number(flat, "prep.phi", issues, default=0.0)
    prep = None
    if kind is not None and None not in (alpha, beta, theta, phi):
        if kind is PrepKind.PURE_COHERENT:
            theta, phi = theta % TWO_PI, phi % TWO_PI
        prep_issues = _prep_issues(kind, alpha, beta, theta, phi)
        if prep_issues:
            issues.extend(prep_issues)
        else:
            prep = ModePrep(kind, alpha, beta, theta, phi)

    grid = None
    t_end = _number(flat, "grid.t_end_ns", issues, default=0.0) if "grid.t_end_ns" in flat else None
    n_steps = _number(flat, "grid.n_steps", issues, default=0, integer=True) if "grid.n_steps" in flat else None
    fock = _number(flat, "grid.fock_dim", issues, default=0, integer=True) if "grid.fock_dim" in flat else None
    if params is not None:
        t_end = default_window(params) if t_end is None else t_end
        if n_steps is None and isinstance(t_end, float) and t_end > 0:
            n_steps = SimGrid.resolving(params, t_end).n_steps
    # without parameters the defaults are unknown; check whatever was given
    g_issues = [(k, m) for k, m in _grid_issues(1.0 if t_end is None else t_end,
                                               2 if n_steps is None else n_steps, fock)]
    issues.extend(g_issues)
    if params is not None and not g_issues:
        grid = SimGrid(t_end=t_end, n_steps=n_steps, fock_dim=fock)

    if issues:
        seen, unique = set(), []
        for key, msg in issues:
            if key not in seen:
                seen.add(key)
                unique.append((key, msg))
        raise ConfigError(unique)
    return params, prep, grid
