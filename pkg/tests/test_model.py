import math

import pytest
from hypothesis import assume, given, strategies as st

from cqed_backflow.errors import ConfigError, DegeneracyPoint, NonzeroMixingAngle
from cqed_backflow.model import (
    TWO_PI,
    DeviceParams,
    EffectiveParams,
    ModePrep,
    PrepKind,
    SimGrid,
    default_window,
    device_to_effective,
    mhz_to_rad_per_ns,
    near_half_integer_flux,
    validate_and_normalize,
)

BASE = {"omega_mhz": 10000, "g_mhz": 50, "gamma_mhz": 0.3}


def _keys(exc):
    return [k for k, _ in exc.value.issues]


def test_unit_conversion():
    assert mhz_to_rad_per_ns(10000) == pytest.approx(TWO_PI * 10)
    p, _, _ = validate_and_normalize(BASE)
    assert p.omega == pytest.approx(TWO_PI * 10, rel=1e-15)
    assert p.gamma == pytest.approx(TWO_PI * 0.3e-3, rel=1e-15)


def test_effective_invariants():
    ok = dict(omega0=1.0, omega=1.0, lam=0.0, g=0.1, gamma=0.0, mu=0.0)
    EffectiveParams(**ok)
    for field, value in [("omega", 0.0), ("g", -1e-3), ("gamma", -1.0), ("lam", -0.1),
                         ("lam", 1.0), ("lam", 1.0 - 1e-7), ("lam", 2.0), ("omega", float("nan"))]:
        with pytest.raises(ConfigError):
            EffectiveParams(**{**ok, field: value})


def test_lambda_equal_omega_is_reported_under_its_key():
    with pytest.raises(ConfigError) as exc:
        validate_and_normalize({**BASE, "lambda_mhz": 10000})
    assert _keys(exc) == ["lambda_mhz"]


def test_negative_gamma():
    with pytest.raises(ConfigError) as exc:
        validate_and_normalize({**BASE, "gamma_mhz": -1})
    assert _keys(exc) == ["gamma_mhz"]


def test_all_issues_collected_one_per_key():
    cfg = {"omega_mhz": 10000, "gamma_mhz": -1, "bogus": 1, "prep.alpha": -2, "grid.n_steps": 1}
    with pytest.raises(ConfigError) as exc:
        validate_and_normalize(cfg)
    keys = _keys(exc)
    assert set(keys) == {"g_mhz", "gamma_mhz", "bogus", "prep.alpha", "grid.n_steps"}
    assert len(keys) == len(set(keys))


def test_nested_and_flat_documents_agree():
    flat = {**BASE, "prep.kind": "PureCoherent", "prep.alpha": 1.0, "grid.t_end_ns": 0.2}
    nested = {**BASE, "prep": {"kind": "PureCoherent", "alpha": 1.0}, "grid": {"t_end_ns": 0.2}}
    assert validate_and_normalize(flat) == validate_and_normalize(nested)


def test_phases_are_normalised():
    _, prep, _ = validate_and_normalize({**BASE, "prep.theta": 7.0, "prep.phi": -1.0})
    assert prep.theta == pytest.approx(7.0 - TWO_PI)
    assert prep.phi == pytest.approx(TWO_PI - 1.0)


def test_diffused_rejects_phases():
    with pytest.raises(ConfigError) as exc:
        validate_and_normalize({**BASE, "prep.kind": "PhaseDiffused", "prep.theta": 1.0})
    assert _keys(exc) == ["prep.theta"]


def test_grid_defaults_resolve_the_resonator():
    p, _, grid = validate_and_normalize(BASE)
    assert grid.t_end == pytest.approx(default_window(p)) == pytest.approx(0.4)
    assert grid.n_steps == 1025
    assert grid.fock_dim is None
    t = grid.times
    assert t[0] == 0.0 and t[-1] == pytest.approx(grid.t_end)
    assert SimGrid(1.0, 5).times.tolist() == [0.0, 0.25, 0.5, 0.75, 1.0]


def test_default_window_uses_lambda_when_coupled():
    p = EffectiveParams.from_mhz(omega_mhz=10000, g_mhz=50, gamma_mhz=0.3, lambda_mhz=10)
    assert default_window(p) == pytest.approx(400.0)


def test_device_flux_half_gives_zero_theta():
    dev = DeviceParams(E_C=5, E_Jmax=123.0, n_g=0.45, flux_ratio=0.5, coupling_g=0.05,
                       omega_res=10.0, lam=0.0, gamma=1e-3)
    p, theta = device_to_effective(dev)
    assert abs(theta) < 1e-12
    assert p.omega0 == pytest.approx(abs(4 * 5 * (1 - 2 * 0.45)), rel=1e-12)


def test_device_worked_example():
    dev = DeviceParams(E_C=5, E_Jmax=8, n_g=0.45, flux_ratio=0.5, coupling_g=0.05,
                       omega_res=10.0, lam=0.0, gamma=1e-3)
    p, _ = device_to_effective(dev)
    assert p.omega0 == pytest.approx(2.0, rel=1e-12)
    assert p.mu == pytest.approx(0.1, rel=1e-12)


def test_degeneracy_point():
    dev = DeviceParams(5, 8, 0.5, 0.5, 0.05, 10.0, 0.0, 1e-3)
    with pytest.raises(DegeneracyPoint):
        device_to_effective(dev)


def test_nonzero_mixing_angle():
    dev = DeviceParams(5, 8, 0.45, 0.4, 0.05, 10.0, 0.0, 1e-3)
    with pytest.raises(NonzeroMixingAngle):
        device_to_effective(dev)


def test_device_block_in_config():
    cfg = {"device": {"E_C": 5000, "E_Jmax": 8000, "n_g": 0.45, "flux_ratio": 1.5,
                      "coupling_g": 50, "omega_res": 10000, "lambda": 0, "gamma": 0.3}}
    p, _, _ = validate_and_normalize(cfg)
    assert p.omega0 == pytest.approx(mhz_to_rad_per_ns(2000), rel=1e-12)
    assert p.mu == pytest.approx(0.1)
    with pytest.raises(ConfigError) as exc:
        validate_and_normalize({**cfg, "omega_mhz": 1})
    assert "omega_mhz" in _keys(exc)
    bad = {"device": {**cfg["device"], "n_g": 0.5}}
    with pytest.raises(ConfigError) as exc:
        validate_and_normalize(bad)
    assert _keys(exc) == ["device.n_g"]


@given(
    n_g=st.floats(0.001, 0.999),
    k=st.integers(-3, 3),
    e_c=st.floats(0.01, 100.0),
    e_j=st.floats(0.0, 100.0),
    omega=st.floats(0.1, 100.0),
    lam_frac=st.floats(0.0, 0.99),
    g=st.floats(0.0, 1.0),
    gamma=st.floats(0.0, 1.0),
)
def test_device_round_trip_never_breaks_effective_invariants(n_g, k, e_c, e_j, omega, lam_frac, g, gamma):
    assume(abs(1 - 2 * n_g) > 1e-9)
    dev = DeviceParams(e_c, e_j, n_g, k + 0.5, g, omega, lam_frac * omega, gamma)
    assume(not dev.issues())
    p, theta = device_to_effective(dev)
    again = EffectiveParams(p.omega0, p.omega, p.lam, p.g, p.gamma, p.mu)
    assert again == p
    assert p.mu == 1 - 2 * n_g
    assert abs(theta) <= 1e-6
    assert near_half_integer_flux(k + 0.5)


def test_mode_prep_constructors():
    pure = ModePrep.pure(1.0, 7.0, 0.5, 0.1)
    assert pure.kind is PrepKind.PURE_COHERENT and 0 <= pure.theta < TWO_PI
    a0, b0 = pure.amplitudes()
    assert abs(a0) == pytest.approx(1.0) and abs(b0) == pytest.approx(0.5)
    assert not ModePrep.diffused(1.0, 1.0).is_pure
    with pytest.raises(ConfigError):
        ModePrep.diffused(-1.0, 0.0)
    with pytest.raises(ConfigError):
        ModePrep(PrepKind.PURE_COHERENT, 1.0, 0.0, theta=math.tau)
