import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chiralqed.core_model import SystemParams, build_basis, build_hamiltonian_undriven, build_liouvillian
from chiralqed.dynamics import DensityOperator, directionality, emission_budget, evolve
from chiralqed.single_excitation import (
    DegenerateParametersError,
    OneQuantumAmplitudes,
    adiabatic_cavity_amplitudes,
    adiabatic_emission_probabilities,
    amplitude_emission_budget,
    amplitude_matrix,
    amplitude_rhs,
    dark_state,
    dark_state_ket,
    dark_state_overlap,
    effective_rates,
    evolve_amplitudes,
    evolve_amplitudes_adiabatic,
    ideal_directionality,
    ideal_emission_probabilities,
    ideal_mode_amplitudes,
    ideal_solution,
    integrate_adiabatic_emission,
)
from conftest import fig3_params
from strategies import params as param_strategy

ideal_g = st.floats(0.005, 0.1)


def ideal(g_q, g_a, **kw):
    return SystemParams(g_q=g_q, g_a=g_a, **kw)


# --- amplitude equations -----------------------------------------------------

def test_uncoupled_qd_decays_alone():
    p = SystemParams(gamma_q=0.2, delta_q=0.3)
    d = amplitude_rhs(OneQuantumAmplitudes(Q=1), p)
    assert d.Q == pytest.approx(-(0.1 + 0.3j))
    assert d.A == d.B == d.alpha == d.beta == 0


@given(param_strategy(), st.complex_numbers(max_magnitude=3))
def test_rhs_is_linear(p, c):
    s = OneQuantumAmplitudes(0.3, 0.2j, -0.1, 0.4, 0.1 - 0.2j)
    lhs = amplitude_rhs(c * s, p).to_vector()
    np.testing.assert_allclose(lhs, c * amplitude_rhs(s, p).to_vector(), atol=1e-12)


@given(param_strategy())
def test_generator_is_minus_i_effective_hamiltonian(p):
    # the one-quantum block of H - i/2 sum rate L^+L, in the ordering (Q, A, B, alpha, beta)
    basis = build_basis(1)
    h = build_hamiltonian_undriven(p, basis)
    idx = [basis.index(1, 0, 0, 0), basis.index(0, 1, 0, 0), basis.index(0, 2, 0, 0),
           basis.index(0, 0, 1, 0), basis.index(0, 0, 0, 1)]
    h1 = h[np.ix_(idx, idx)].astype(complex)
    h1 -= 0.5j * np.diag([p.gamma_q, p.gamma_a, p.gamma_a, 2 * p.kappa, 2 * p.kappa])
    np.testing.assert_allclose(amplitude_matrix(p), -1j * h1, atol=1e-14)


def test_fig3_spectrum_is_damped():
    assert np.linalg.eigvals(amplitude_matrix(fig3_params())).real.max() <= 0


def test_unitary_limit_keeps_norm():
    p = SystemParams(kappa=0.0)
    s = evolve_amplitudes(OneQuantumAmplitudes(Q=1), p, np.linspace(0, 100, 11))
    np.testing.assert_allclose(np.abs(s["Q"]), 1, atol=1e-12)


def test_initial_norm_checked():
    with pytest.raises(ValueError, match="norm"):
        evolve_amplitudes(OneQuantumAmplitudes(Q=1, A=0.5), SystemParams(), [0, 1])


SPOTS = [(ga, gq) for ga in (0.01, 0.05, 0.25) for gq in (0.01, 0.05, 0.25)]


@pytest.mark.parametrize("g_a, g_q", SPOTS)
def test_amplitudes_match_master_equation(g_a, g_q):
    p = fig3_params(g_a=g_a, g_q=g_q, delta_b=0.05)
    t = np.linspace(0, 200, 41)
    amp = evolve_amplitudes(OneQuantumAmplitudes(Q=1), p, t, rtol=1e-10, atol=1e-12)
    L = build_liouvillian(p, driven=False)
    me = evolve(DensityOperator.basis_state(L.basis, qd=1), L, t, rtol=1e-10, atol=1e-12)
    pops = amp.populations
    for k, name in enumerate(("p_q", "p_plus", "p_minus", "n_a", "n_b")):
        np.testing.assert_allclose(pops[:, k], me[name].real, atol=1e-8, err_msg=name)
    for name in ("P_a", "P_b", "P_spont_q", "P_spont_atom"):
        np.testing.assert_allclose(getattr(amp, name), me[name], atol=1e-8, err_msg=name)


@pytest.mark.parametrize("g_a, g_q", [(0.25, 0.05), (0.05, 0.25), (0.5, 0.1)])
def test_budgets_agree(g_a, g_q):
    p = fig3_params(g_a=g_a, g_q=g_q, delta_b=0.1)
    a, m = amplitude_emission_budget(p), emission_budget(p)
    for name in ("P_a", "P_b", "P_spont_q", "P_spont_atom"):
        assert getattr(a, name) == pytest.approx(getattr(m, name), abs=1e-6)


@settings(max_examples=15)
@given(param_strategy(), st.sampled_from([0, 1, 2]))
def test_norm_monotone_and_decomposition(p, start):
    x0 = np.zeros(5, dtype=complex)
    x0[start] = 1
    s = evolve_amplitudes(x0, p, np.linspace(0, 60, 121), rtol=1e-10, atol=1e-12)
    assert np.all(np.diff(s.norm_sq) <= 1e-10)
    channels = s.P_a + s.P_b + s.P_spont_q + s.P_spont_atom
    np.testing.assert_allclose(s.decayed, channels, atol=1e-6)


# --- adiabatic elimination ---------------------------------------------------

def test_cavity_amplitudes_from_emitters():
    p = SystemParams(g_q=0.05, g_a=0.2, g_b=0.1, kappa=0.5)
    assert adiabatic_cavity_amplitudes(1, 0, 0, p) == pytest.approx((-0.1j, -0.1j))
    alpha, _ = adiabatic_cavity_amplitudes(1, -p.g_q / p.g_a, 0, p)
    assert abs(alpha) < 1e-15
    with pytest.raises(ZeroDivisionError):
        adiabatic_cavity_amplitudes(1, 0, 0, p.replace(kappa=0.0))


def test_enhanced_rates():
    p = SystemParams(g_q=0.05, g_a=0.25, g_b=0.04, gamma_q=0.003, gamma_a=0.002)
    r = effective_rates(p)
    assert r.Gamma_q_enh == pytest.approx(p.gamma_q / 2 * (1 + 4 * p.g_q**2 / (p.gamma_q * p.kappa)))
    assert r.Gamma_a_enh >= p.gamma_a / 2 and r.Gamma_b_enh >= p.gamma_a / 2
    assert r.lambda_minus <= r.lambda_plus <= 0
    assert effective_rates(p, gamma_b=0.0).Gamma_b_enh == pytest.approx(p.g_b**2)


@given(ideal_g, ideal_g, st.floats(0, 20))
def test_reduced_equals_ideal_solution(g_q, g_a, t_scale):
    p = ideal(g_q, g_a)
    t = t_scale / effective_rates(p).Gamma_tilde_q
    red = evolve_amplitudes_adiabatic([1, 0, 0], p, [t])
    q, a = ideal_solution(t, p)
    assert abs(red.Q[0] - q) < 1e-10 and abs(red.A[0] - a) < 1e-10
    assert abs(red.B[0]) < 1e-12


def test_reduced_tracks_full_amplitudes():
    p = SystemParams(g_q=0.05, g_a=0.05, g_b=0.05 / math.sqrt(45), gamma_q=1e-3, gamma_a=1e-3)
    t = np.linspace(0, 5 / effective_rates(p).Gamma_tilde_q, 101)
    red = evolve_amplitudes_adiabatic([1, 0, 0], p, t)
    full = evolve_amplitudes(OneQuantumAmplitudes(Q=1), p, t, rtol=1e-10, atol=1e-12)
    err = np.abs(np.abs(red.Q) - np.abs(full["Q"]))
    assert err.max() < 0.02 * np.abs(full["Q"]).max()


def test_elimination_error_shrinks_with_coupling():
    errs = []
    for g in (0.2, 0.1, 0.05):
        p = SystemParams(g_q=g, g_a=g, g_b=g / math.sqrt(45), gamma_q=1e-3, gamma_a=1e-3)
        t = np.linspace(0, 5 / effective_rates(p).Gamma_tilde_q, 201)
        red = evolve_amplitudes_adiabatic([1, 0, 0], p, t)
        full = evolve_amplitudes(OneQuantumAmplitudes(Q=1), p, t, rtol=1e-10, atol=1e-12)
        errs.append(np.abs(np.abs(red.Q) - np.abs(full["Q"])).max())
    assert errs[0] > errs[1] > errs[2]


# --- ideal closed forms ------------------------------------------------------

def test_ideal_solution_start_and_end():
    p = ideal(0.05, 0.1)
    assert ideal_solution(0.0, p) == pytest.approx((1, 0))
    q, a = ideal_solution(1e6, p)
    assert abs(q) < 1e-12 and abs(a) < 1e-12
    with pytest.raises(DegenerateParametersError):
        ideal_solution(1.0, ideal(0.0, 0.0))


def test_equal_ideal_rates_eigenvalues():
    # g_a^2 = 2 g_q^2 makes both ideal rates equal
    p = ideal(0.05, 0.05 * math.sqrt(2))
    r = effective_rates(p)
    gam = r.Gamma_tilde_a
    assert r.Gamma_tilde_q == pytest.approx(gam)
    assert r.lambda_plus == pytest.approx(gam * (-2 + math.sqrt(2)) / 2)
    assert r.lambda_minus == pytest.approx(gam * (-2 - math.sqrt(2)) / 2)
    assert ideal_emission_probabilities(p) == pytest.approx((0.25, 0.75))
    assert ideal_directionality(p) == pytest.approx(0.5)


def test_ideal_solution_against_reduced_propagation():
    p = ideal(0.05, 0.5)
    t = 1 / effective_rates(p).Gamma_tilde_a
    red = evolve_amplitudes_adiabatic([1, 0, 0], p, [t])
    q, a = ideal_solution(t, p)
    assert abs(red.Q[0] - q) < 1e-10 and abs(red.A[0] - a) < 1e-10


@settings(max_examples=20)
@given(ideal_g, ideal_g, st.floats(0, 10))
def test_mode_amplitudes_identity(g_q, g_a, t_scale):
    p = ideal(g_q, g_a)
    t = t_scale / effective_rates(p).Gamma_tilde_a
    q, a = ideal_solution(t, p)
    expected = adiabatic_cavity_amplitudes(q, a, 0.0, p)
    got = ideal_mode_amplitudes(t, p)
    assert abs(got[0] - expected[0]) < 1e-12 and abs(got[1] - expected[1]) < 1e-12


def test_mode_amplitudes_at_three_over_gamma_a():
    p = ideal(0.05, 0.2)
    t = 3 / effective_rates(p).Gamma_tilde_a
    q, a = ideal_solution(t, p)
    np.testing.assert_allclose(ideal_mode_amplitudes(t, p), adiabatic_cavity_amplitudes(q, a, 0, p), atol=1e-12)


def test_interference_suppresses_mode_a():
    p = ideal(0.02, 0.2)
    gam = effective_rates(p).Gamma_tilde_a
    # the fast eigenmode (rate ~1.01 Gamma_tilde_a) still contributes at t = 2/Gamma_tilde_a
    alpha, beta = ideal_mode_amplitudes(2 / gam, p)
    assert abs(alpha) / abs(beta) == pytest.approx(0.12784, abs=1e-4)
    for s in (3, 5, 10, 50):
        alpha, beta = ideal_mode_amplitudes(s / gam, p)
        assert abs(alpha) / abs(beta) < 0.1


def test_no_atom_emits_symmetrically():
    p = ideal(0.05, 0.0)
    t = np.linspace(0, 500, 11)
    alpha, beta = ideal_mode_amplitudes(t, p)
    np.testing.assert_allclose(alpha, beta, atol=1e-15)
    assert ideal_emission_probabilities(p) == (0.5, 0.5)


@given(ideal_g, ideal_g)
def test_ideal_probabilities_properties(g_q, g_a):
    p = ideal(g_q, g_a)
    pa, pb = ideal_emission_probabilities(p)
    assert pa + pb == pytest.approx(1, abs=1e-15)
    assert pb >= pa
    d = ideal_directionality(p)
    assert 0 <= d < 1
    assert d == pytest.approx(directionality(pa, pb), abs=1e-14)


def test_ideal_directionality_ratio_ten():
    assert ideal_directionality(ideal(0.01, 0.1)) == pytest.approx(100 / 102)


def test_ideal_probabilities_by_quadrature():
    p = ideal(0.05, 0.5)
    pa, pb = ideal_emission_probabilities(p)
    assert integrate_adiabatic_emission(p) == pytest.approx((pa, pb), abs=1e-6)
    assert adiabatic_emission_probabilities(p) == pytest.approx((pa, pb), abs=1e-12)


@settings(max_examples=15)
@given(st.floats(0.01, 0.05), st.floats(0.01, 0.05))
def test_reduced_integration_reaches_closed_forms(g_q, g_a):
    p = ideal(g_q, g_a)
    pa, pb = ideal_emission_probabilities(p)
    got = integrate_adiabatic_emission(p)
    assert got[0] == pytest.approx(pa, abs=1e-6) and got[1] == pytest.approx(pb, abs=1e-6)


def test_detuning_b_improves_directionality():
    # detuning the weak transition suppresses the leak into the dark configuration
    base = fig3_params()
    d0 = emission_budget(base).D
    d1 = emission_budget(base.replace(delta_b=0.1)).D
    assert d1 > d0


# --- cavity-dark state -------------------------------------------------------

def test_dark_state_special_cases():
    np.testing.assert_allclose(dark_state(SystemParams(g_q=0.1, g_a=0.2)), [0, 0, 1], atol=1e-15)
    np.testing.assert_allclose(dark_state(SystemParams(g_q=0.1, g_a=0.1, g_b=0.1)),
                               np.array([1, -1, 1]) / math.sqrt(3), atol=1e-15)
    with pytest.raises(DegenerateParametersError):
        dark_state(SystemParams(g_q=0.1))
    assert dark_state_overlap(SystemParams(g_q=0.1, g_a=0.2)) == 0
    assert dark_state_overlap(SystemParams(g_q=0.1, g_a=0.1, g_b=0.1)) == pytest.approx(1 / 3)


def dark_checks(p):
    basis = build_basis(1)
    h = build_hamiltonian_undriven(p, basis)
    ket = dark_state_ket(p, basis)
    residual = np.linalg.norm(h @ ket)
    overlap = abs(np.vdot(ket, basis.ket(1, 0))) ** 2
    return residual, overlap


def test_dark_state_fig3():
    p = fig3_params()
    residual, overlap = dark_checks(p)
    assert residual < 1e-12
    assert overlap == pytest.approx(dark_state_overlap(p), abs=1e-12)


@given(st.floats(0.01, 0.6), st.floats(0.01, 0.6), st.floats(0.01, 0.6))
def test_dark_state_random(g_q, g_a, g_b):
    p = SystemParams(g_q=g_q, g_a=g_a, g_b=g_b)
    residual, overlap = dark_checks(p)
    assert residual < 1e-12
    assert abs(overlap - dark_state_overlap(p)) < 1e-12
    assert 0 <= dark_state_overlap(p) < 1


@given(st.floats(0.01, 0.5), st.floats(0.01, 0.5), st.floats(0.01, 0.5), st.floats(1.01, 2))
def test_dark_overlap_monotone(g_q, g_a, g_b, f):
    p = SystemParams(g_q=g_q, g_a=g_a, g_b=g_b)
    assert dark_state_overlap(p.replace(g_a=g_a * f)) > dark_state_overlap(p)
    assert dark_state_overlap(p.replace(g_b=g_b * f)) > dark_state_overlap(p)
