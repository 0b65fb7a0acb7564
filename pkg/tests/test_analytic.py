import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cqed_backflow import analytic as an
from cqed_backflow.errors import NonConvergence
from cqed_backflow.evolve import initial_block_state, propagator, reduced_series
from cqed_backflow.hilbert import fock_dim_for
from cqed_backflow.model import TWO_PI, EffectiveParams, ModePrep, SimGrid

from conftest import fig_params, periods_grid

SQRT2 = math.sqrt(2.0)

params_st = st.builds(
    lambda w, gr, lr, gam, mu: EffectiveParams(omega0=8.0, omega=w, lam=lr * w, g=gr * w,
                                               gamma=gam, mu=mu),
    st.floats(1.0, 80.0), st.floats(0.0, 0.02), st.floats(0.0, 0.9),
    st.floats(0.0, 0.05), st.floats(-0.2, 0.2),
)
prep_st = st.builds(ModePrep.pure, st.floats(0, 2), st.floats(0, 6.28), st.floats(0, 2), st.floats(0, 6.28))


# --- derived constants and labels ------------------------------------------------------

def test_chi_vanishes_without_mode_coupling(fig3):
    assert an.derived_constants(fig3).chi == 0.0


def test_mu_zero_removes_displacement():
    p = fig_params(mu=0.0)
    c = an.derived_constants(p)
    assert c.xi == 0.0 and c.omega0_prime == p.omega0


def test_chi_magnitude_at_17_mhz():
    c = an.derived_constants(fig_params(lambda_mhz=17.0))
    # 4 g^2 lam / (w^2 - lam^2) in MHz: 4*50^2*17 / (10000^2 - 17^2)
    expect = 4 * 50 ** 2 * 17 / (10000 ** 2 - 17 ** 2)
    assert c.chi / TWO_PI * 1e3 == pytest.approx(expect, rel=1e-12)
    assert c.chi / TWO_PI * 1e3 == pytest.approx(1.700e-3, rel=1e-3)


@given(params_st)
def test_derived_constant_identities(p):
    c = an.derived_constants(p)
    assert c.omega_plus == pytest.approx(p.omega + p.lam)
    assert c.omega_minus > 0
    if p.lam == 0 or p.g == 0:
        assert c.chi == 0
    assert c.chi >= 0


def test_labels_vacuum():
    p = fig_params(mu=0.0)
    c = an.derived_constants(p)
    lab = an.coherent_labels(p, ModePrep.pure())
    assert lab.z1 == 0 and lab.w1 == 0
    assert lab.z2 == pytest.approx(-2 * c.lambda_plus)
    assert lab.w2 == pytest.approx(-2 * c.lambda_minus)


def test_labels_equal_amplitudes_cancel_w1(fig3):
    lab = an.coherent_labels(fig3, ModePrep.pure(1.3, 0.4, 1.3, 0.4))
    assert abs(lab.w1) < 1e-15


def test_labels_single_mode():
    p = fig_params(mu=0.0)
    lab = an.coherent_labels(p, ModePrep.pure(1.0, 0.0, 0.0, 0.0))
    assert lab.z1 == pytest.approx(1 / SQRT2)
    assert lab.w1 == pytest.approx(-1 / SQRT2)
    c = an.derived_constants(p)
    assert lab.z1 - lab.z2 == pytest.approx(2 * c.lambda_plus)
    assert lab.w2 - lab.w1 == pytest.approx(-2 * c.lambda_minus)


def test_labels_reject_diffused(fig3):
    with pytest.raises(ValueError):
        an.coherent_labels(fig3, ModePrep.diffused(1, 1))


@given(params_st, prep_st)
def test_overlap_labels_coincide_at_t0(p, prep):
    a1, a2, b1, b2 = an.overlap_labels(p, an.coherent_labels(p, prep), 0.0)
    assert abs(a1 - a2) < 1e-12 and abs(b1 - b2) < 1e-12


def test_overlap_labels_coincide_without_coupling():
    p = fig_params(lambda_mhz=20.0).replace(g=0.0)
    t = np.linspace(0, 3, 50)
    a1, a2, b1, b2 = an.overlap_labels(p, an.coherent_labels(p, ModePrep.pure(1, 0.2, 0.5, 3)), t)
    assert np.max(np.abs(a1 - a2)) == 0 and np.max(np.abs(b1 - b2)) == 0


# --- coherent overlap ------------------------------------------------------------------

complex_st = st.complex_numbers(max_magnitude=6.0, allow_nan=False, allow_infinity=False)


def test_overlap_trivial():
    assert an.coherent_overlap(0, 0) == 1


@given(complex_st, complex_st)
def test_overlap_identities(z, w):
    assert abs(an.coherent_overlap(z, z) - 1) < 1e-12
    assert abs(an.coherent_overlap(0, w)) == pytest.approx(math.exp(-abs(w) ** 2 / 2), rel=1e-12)
    ov = an.coherent_overlap(z, w)
    assert abs(ov) ** 2 == pytest.approx(math.exp(-abs(z - w) ** 2), rel=1e-10, abs=1e-300)
    naive = np.exp(-abs(z) ** 2 / 2 - abs(w) ** 2 / 2 + np.conj(z) * w)
    assert abs(ov - naive) <= 1e-10 * max(1.0, abs(naive))


# --- decoherence factor --------------------------------------------------------------

def test_h_at_zero_is_half(fig5):
    h = an.decoherence_factor(fig5, ModePrep.pure(1, 0.2, 0.5, 1.0), 0.0)
    assert abs(h) == pytest.approx(0.5, rel=1e-15)


def test_h_without_coupling(fig3):
    p = fig3.replace(g=0.0)
    t = np.linspace(0, 50, 101)
    h = an.decoherence_factor(p, ModePrep.pure(1, 0, 1, 0), t)
    assert np.allclose(np.abs(h), np.exp(-p.gamma * t) / 2, rtol=1e-14, atol=0)


@given(params_st, prep_st, st.floats(0, 50))
def test_h_bounded_by_dephasing_envelope(p, prep, t):
    h = an.decoherence_factor(p, prep, t)
    assert abs(h) <= math.exp(-p.gamma * t) / 2 * (1 + 1e-12)


@pytest.mark.parametrize("lam_mhz", [0.0, 50.0])
def test_h_matches_block_oracle_including_phase(lam_mhz):
    # the oracle coherence rho_A[e, g](t) of the + evolution is h(t) itself
    p = fig_params(lambda_mhz=lam_mhz)
    prep = ModePrep.pure(1.0, 0.3, 0.5, 1.1)
    N = fock_dim_for(p, prep)
    t = np.linspace(0, 1.0, 301)
    oracle = reduced_series(propagator(p, N), initial_block_state(prep, p, N, +1), t)[:, 0, 1]
    h = an.decoherence_factor(p, prep, t)
    assert np.max(np.abs(h - oracle)) < 1e-8


def test_gamma_phase_term_by_term_against_oracle(fig5):
    # Gamma(t) = arg h - (chi - w0') t - arg(<a2|a1><b2|b1>), reading arg h from the oracle
    prep = ModePrep.pure(1.0, 0.3, 0.5, 1.1)
    N = fock_dim_for(fig5, prep)
    t = np.linspace(0, 0.6, 241)
    h_orc = reduced_series(propagator(fig5, N), initial_block_state(prep, fig5, N, +1), t)[:, 0, 1]
    c = an.derived_constants(fig5)
    a1, a2, b1, b2 = an.overlap_labels(fig5, an.coherent_labels(fig5, prep), t)
    ovl = an.coherent_overlap(a2, a1) * an.coherent_overlap(b2, b1)
    resid = h_orc / (0.5 * np.exp(-fig5.gamma * t) * ovl)
    phase = np.unwrap(np.angle(resid)) - (c.chi - c.omega0_prime) * t
    gam = an.gamma_phase(fig5, prep, t)
    assert np.max(np.abs(phase - gam)) < 1e-8
    # derivative check: numerically differentiated oracle phase vs Gamma'(t)
    dphase = np.gradient(phase, t)
    dgam = np.gradient(gam, t)
    assert np.max(np.abs(dphase - dgam)) < 1e-6 * max(1.0, np.max(np.abs(dgam)))


def test_decoherence_factor_rejects_diffused(fig3):
    with pytest.raises(ValueError):
        an.decoherence_factor(fig3, ModePrep.diffused(1, 1), 0.1)


# --- printed pure-state sigma ----------------------------------------------------------

@given(params_st)
def test_general_at_t0_is_minus_gamma(p):
    assert an.sigma_pure_general(p, 0.0) == pytest.approx(-p.gamma, abs=1e-15)
    assert an.log_envelope(p, 0.0) == 0.0


def test_general_without_coupling(fig5):
    p = fig5.replace(g=0.0)
    t = np.linspace(0, 100, 57)
    assert np.allclose(an.sigma_pure_general(p, t), -p.gamma * np.exp(-p.gamma * t), rtol=1e-14)


def test_decoupled_at_t0(fig3):
    assert an.sigma_pure_decoupled(fig3, 0.0) == pytest.approx(-2 * fig3.gamma)


def test_decoupled_rejects_lambda(fig5):
    with pytest.raises(ValueError):
        an.sigma_pure_decoupled(fig5, 0.1)


def test_decoupled_markovian_above_threshold(window4):
    t = window4.times
    assert np.all(an.sigma_pure_decoupled(fig_params(1.5), t) <= 0)
    assert np.max(an.sigma_pure_decoupled(fig_params(0.3), t)) > 0


@pytest.mark.parametrize("g_mhz,w_mhz", [(10, 5000), (50, 10000), (80, 9000), (20, 2500)])
def test_printed_forms_share_threshold(g_mhz, w_mhz):
    gc_mhz = 4 * g_mhz ** 2 / w_mhz
    for factor, expect in [(0.9, True), (1.1, False)]:
        p = EffectiveParams.from_mhz(omega_mhz=w_mhz, g_mhz=g_mhz, gamma_mhz=factor * gc_mhz)
        t = periods_grid(p).times
        for sig in (an.sigma_pure_general(p, t), an.sigma_pure_decoupled(p, t),
                    an.sigma_from_coherence(p, ModePrep.pure(), periods_grid(p)).sigma):
            assert (np.max(sig) > 0) == expect


def test_rate_sign_differs_from_true_derivative(fig3, window4):
    # the printed f(t) flips the sign of the omega term; the true rate is -gamma - 4g^2 sin(wt)/w
    t = window4.times
    s = an.sigma_from_coherence(fig3, ModePrep.pure(), window4)
    g, w = fig3.g, fig3.omega
    true = (-fig3.gamma - 4 * g ** 2 * np.sin(w * t) / w) * s.trace_distance
    assert np.max(np.abs(s.sigma - true)) < 1e-10
    printed = an.sigma_pure_general(fig3, t)
    assert np.max(np.abs(printed - true)) > 1e-3


def test_decoupled_is_derivative_of_squared_distance(fig3, window4):
    s = an.sigma_from_coherence(fig3, ModePrep.pure(), window4)
    dec = an.sigma_pure_decoupled(fig3, window4.times)
    assert np.max(np.abs(dec - 2 * s.trace_distance * s.sigma)) < 1e-10


# --- coherence-derived series -----------------------------------------------------------

def test_from_coherence_starts_at_one(fig5):
    s = an.sigma_from_coherence(fig5, ModePrep.pure(0.7, 1, 0.2, 2), periods_grid(fig5))
    assert s.trace_distance[0] == pytest.approx(1.0, abs=1e-15)
    assert s.provenance is an.Provenance.FROM_COHERENCE


def test_from_coherence_without_coupling():
    p = fig_params(2.0).replace(g=0.0)
    grid = SimGrid(200.0, 401)
    s = an.sigma_from_coherence(p, ModePrep.pure(), grid)
    t = grid.times
    assert np.max(np.abs(s.trace_distance - np.exp(-p.gamma * t))) < 1e-14
    assert np.max(np.abs(s.sigma + p.gamma * np.exp(-p.gamma * t))) < 1e-8


def test_from_coherence_independence(fig3, window4):
    s0 = an.sigma_from_coherence(fig3, ModePrep.pure(0, 0, 0, 0), window4)
    s1 = an.sigma_from_coherence(fig3, ModePrep.pure(2, 1.1, 1.5, 0.7), window4)
    assert s0.spread(s1) < 1e-10


@given(params_st, prep_st)
def test_trace_distance_in_unit_interval(p, prep):
    s = an.sigma_from_coherence(p, prep, SimGrid(2.0, 64))
    assert s.trace_distance[0] == pytest.approx(1.0)
    assert np.all((s.trace_distance >= 0) & (s.trace_distance <= 1))


def test_sigma_series_validation():
    t = np.linspace(0, 1, 3)
    with pytest.raises(ValueError):
        an.SigmaSeries(t, np.ones(2), np.zeros(3), an.Provenance.FROM_COHERENCE)
    with pytest.raises(ValueError):
        an.SigmaSeries(t, np.array([1, 1.5, 1]), np.zeros(3), an.Provenance.FROM_COHERENCE)


# --- phase-diffused preparations ----------------------------------------------------------

@given(params_st)
def test_bessel_arguments_vanish_at_t0(p):
    k = an.bessel_kernels(p, 0.0)
    assert abs(k.F1) < 1e-12 * max(1.0, p.g / p.omega) and abs(k.F2) < 1e-12


@given(params_st, st.floats(0, 2), st.floats(0, 2))
def test_mixed_printed_vanishes_at_t0(p, a, b):
    assert an.sigma_mixed_printed(p, a, b, 0.0) == 0.0


def test_mixed_printed_vanishes_for_vacuum(fig5, window4):
    assert np.all(an.sigma_mixed_printed(fig5, 0.0, 0.0, window4.times) == 0.0)


def test_phase_average_of_vacuum_is_exact(fig5):
    t = np.linspace(0, 2, 77)
    assert np.array_equal(an.coherence_phase_average(fig5, 0.0, 0.0, t, m=4),
                          an.decoherence_factor(fig5, ModePrep.pure(), t))


@given(params_st, st.floats(0, 2), st.floats(0, 2), st.floats(0, 20))
def test_phase_average_bounded(p, a, b, t):
    h = an.coherence_phase_average(p, a, b, t)
    assert abs(h[0]) <= math.exp(-p.gamma * t) / 2 * (1 + 1e-12)


def test_phase_average_order_checks(fig3):
    with pytest.raises(ValueError):
        an.coherence_phase_average(fig3, 1, 1, 0.1, m=5)
    with pytest.raises(ValueError):
        an.coherence_phase_average(fig3, 1, 1, 0.1, m=2)


def test_phase_average_nonconvergence(fig3, monkeypatch):
    monkeypatch.setattr(an, "MAX_QUADRATURE", 8)
    with pytest.raises(NonConvergence):
        an.coherence_phase_average(fig3.replace(g=0.3 * fig3.omega), 2.0, 2.0, np.linspace(0, 0.1, 5))


def test_phase_average_converges_to_bessel_form(fig3, window4):
    # uniform phase averaging of the coherent-state overlaps produces J0 factors
    t = window4.times
    k = an.bessel_kernels(fig3, t)
    for a in (0.5, 1.0, 2.0):
        h = an.coherence_phase_average(fig3, a, a, t)
        closed = np.exp(an.log_envelope(fig3, t) - fig3.gamma * t) * np.abs(
            an.bessel_j(0, a * k.F2) * an.bessel_j(0, a * k.F1))
        assert np.max(np.abs(2 * np.abs(h) - closed)) < 1e-12


@pytest.mark.parametrize("lam_mhz", [0.0, 30.0])
def test_corrected_mixed_form_matches_phase_average(lam_mhz):
    p = fig_params(lambda_mhz=lam_mhz)
    grid = SimGrid.resolving(p, 0.4)
    for a, b in [(1.0, 1.0), (0.5, 1.5)]:
        ref = an.sigma_phase_average(p, a, b, grid)
        got = an.sigma_mixed_corrected(p, a, b, grid.times)
        assert np.max(np.abs(got - ref.sigma)) < 1e-9


def test_mixed_printed_differs_from_phase_average(fig3, window4):
    ref = an.sigma_phase_average(fig3, 1.0, 1.0, window4)
    got = an.sigma_mixed_printed(fig3, 1.0, 1.0, window4.times)
    assert np.max(np.abs(got - ref.sigma)) > 1e-3


def test_authoritative_dispatch(fig3, window4):
    assert an.authoritative_series(fig3, ModePrep.pure(), window4).provenance is an.Provenance.FROM_COHERENCE
    assert an.authoritative_series(fig3, ModePrep.diffused(1, 1), window4).provenance is an.Provenance.PHASE_AVERAGE
