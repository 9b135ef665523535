import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chiralqed.core_model import SystemParams, build_liouvillian, elementary_operators
from chiralqed.correlations import (
    EG, GG, GM, GP,
    ResonantDenominatorError,
    TwoQuantumAmplitudes,
    ZeroPhotonError,
    conditional_state,
    default_tau_grid,
    eliminated_mode_operators,
    g2_full_me,
    g2_purestate_tau,
    g2_zero_closed,
    reduced_master_rhs,
    reduced_operators,
    reduced_steady_state,
    two_quantum_residual,
    two_quantum_steady,
    two_quantum_steady_numeric,
)
from chiralqed.dynamics import steady_state
from chiralqed.weak_drive import cooperativities, no_atom_params, steady_means_closed
from conftest import bad_cavity, fig4_params
from strategies import random_hermitian, seeds


def enhanced(p):
    return (p.gamma_q / 2 + 2 * p.g_q**2 / p.kappa, p.gamma_a / 2 + p.g_a**2 / p.kappa,
            p.gamma_a / 2 + p.g_b**2 / p.kappa)


@st.composite
def weak(draw):
    gamma = draw(st.floats(1e-3, 0.05))
    return fig4_params(g_q=draw(st.floats(0.01, 0.6)), g_a=draw(st.floats(0.01, 0.6)),
                       g_b=draw(st.floats(0.01, 0.6)), gamma_q=gamma, gamma_a=gamma,
                       omega=draw(st.floats(1e-5, 1e-3)))


# --- full master equation ------------------------------------------------------

@pytest.mark.parametrize("scale", [0.5, 0.2, 0.1])
def test_single_emitter_is_antibunched(scale):
    # bad-cavity scaled Fig. 4 couplings without the atom; Omega fixed at 0.005 kappa
    p = no_atom_params(bad_cavity(fig4_params(), scale)).replace(omega=0.005)
    for mode in ("a", "b"):
        assert g2_full_me(p, mode, [0.0]).g2[0] < 0.05


def test_single_emitter_antibunching_degrades_at_strong_coupling():
    # at g_q = 0.5 kappa two photons can share a mode before leaking out
    values = [g2_full_me(no_atom_params(bad_cavity(fig4_params(), s)).replace(omega=0.005), "b", [0.0]).g2[0]
              for s in (0.1, 0.5, 1.0)]
    assert values[0] < values[1] < values[2]
    assert values[2] == pytest.approx(0.1126, abs=1e-3)


def test_fig4_detuned_mode_b_antibunched_and_mode_a_bunched():
    p = fig4_params(delta_b=0.1, omega=0.002)
    rho = steady_state(build_liouvillian(p))
    gb = g2_full_me(p, "b", [0.0], rho_ss=rho).g2[0]
    ga = g2_full_me(p, "a", [0.0], rho_ss=rho).g2[0]
    assert gb < 1
    assert ga / gb > 100


@pytest.mark.parametrize("mode", ["a", "b"])
def test_zero_delay_equals_normal_ordered_moment(mode):
    p = fig4_params(delta_b=0.1, omega=0.002)
    L = build_liouvillian(p)
    rho = steady_state(L)
    ops = elementary_operators(L.basis)
    c = ops.a if mode == "a" else ops.b
    cd = c.conj().T
    expected = np.trace(cd @ cd @ c @ c @ rho.matrix).real / np.trace(cd @ c @ rho.matrix).real ** 2
    got = g2_full_me(p, mode, [0.0], rho_ss=rho).g2[0]
    assert abs(got - expected) < 1e-8 * max(1, expected)


def test_long_delay_tends_to_one():
    p = fig4_params(delta_b=0.1, omega=0.002)
    curve = g2_full_me(p, "b")
    assert np.all(curve.g2 >= 0)
    assert curve.g2[-1] == pytest.approx(1, rel=0.05)
    assert curve.method == "full_me" and not curve.ill_conditioned


def test_full_me_input_checks():
    with pytest.raises(ValueError, match="n_max"):
        g2_full_me(fig4_params(n_max=1), "b", [0.0])
    with pytest.raises(ValueError, match="mode"):
        g2_full_me(fig4_params(), "c", [0.0])
    with pytest.raises(ZeroPhotonError):
        g2_full_me(fig4_params(omega=0.0), "b", [0.0])


def test_tiny_photon_number_flagged():
    curve = g2_full_me(fig4_params(omega=1e-6), "a", [0.0])
    assert curve.ill_conditioned


# --- reduced master equation ---------------------------------------------------

@given(seeds)
def test_reduced_rhs_is_traceless(seed):
    drho = reduced_master_rhs(random_hermitian(seed, 6), fig4_params(delta_b=0.1, omega=0.02))
    assert abs(np.trace(drho)) < 1e-12
    assert np.abs(drho - drho.conj().T).max() < 1e-12


def test_reduced_ground_state_is_stationary():
    ground = np.zeros((6, 6))
    ground[GG, GG] = 1
    assert np.abs(reduced_master_rhs(ground, fig4_params(omega=0.0))).max() == 0


def test_reduced_steady_polarization_matches_linear_theory():
    p = fig4_params(omega=1e-4)
    rho = reduced_steady_state(p)
    sq = reduced_operators()["sigma_q"]
    assert np.trace(sq @ rho) == pytest.approx(steady_means_closed(p).mean_sigma_q, rel=0.01)


def test_reduced_model_matches_full_me_in_bad_cavity_limit():
    p = bad_cavity(fig4_params(omega=2e-3, delta_b=0.1), 0.1)
    rho_r = reduced_steady_state(p)
    red = reduced_operators()
    L = build_liouvillian(p)
    rho = steady_state(L)
    ops = elementary_operators(L.basis)
    pairs = [(red["sigma_q"], ops.sigma_q_minus), (red["sigma_a"], ops.sigma_a_minus),
             (red["sigma_b"], ops.sigma_b_minus)]
    for r_op, f_op in pairs:
        assert np.trace(r_op @ rho_r) == pytest.approx(rho.expect(f_op), rel=0.02)
    a_eff, b_eff = eliminated_mode_operators(None, p)
    for eff, n in ((a_eff, ops.n_a), (b_eff, ops.n_b)):
        flux_reduced = 2 * p.kappa * np.trace(eff.conj().T @ eff @ rho_r).real
        assert flux_reduced == pytest.approx(2 * p.kappa * rho.expect(n).real, rel=0.02)


def test_eliminated_operators():
    p = fig4_params(g_a=0.0)
    ops = reduced_operators()
    a_eff, b_eff = eliminated_mode_operators(ops, p)
    np.testing.assert_allclose(a_eff, -1j * p.g_q * ops["sigma_q"] / p.kappa)
    ket = np.zeros(6)
    ket[EG] = 1
    out = a_eff @ ket
    assert out[GG] == pytest.approx(-1j * p.g_q / p.kappa)
    assert np.count_nonzero(out) == 1


# --- two-quantum pure state ----------------------------------------------------

def test_no_atom_amplitudes():
    p = fig4_params(g_a=0.0, g_b=0.0)
    amps = two_quantum_steady(p)
    assert amps.c_Eg == pytest.approx(-1j * p.omega / enhanced(p)[0])
    assert amps.c_Gp == amps.c_Gm == amps.c_Ep == amps.c_Em == 0


@given(weak())
def test_amplitude_ratio_and_residual(p):
    amps = two_quantum_steady(p)
    _, ga, _ = enhanced(p)
    assert amps.c_Gp / amps.c_Eg == pytest.approx(-p.g_a * p.g_q / (ga * p.kappa), rel=1e-12)
    assert two_quantum_residual(amps, p) < 1e-12 * max(1, abs(p.omega))
    num = two_quantum_steady_numeric(p)
    np.testing.assert_allclose(num.to_vector(), amps.to_vector(), rtol=1e-9, atol=1e-20)


def test_fig4_residual():
    p = fig4_params()
    assert two_quantum_residual(two_quantum_steady(p), p) < 1e-12


@given(weak())
def test_drive_scaling(p):
    a1 = two_quantum_steady(p).to_vector()
    a2 = two_quantum_steady(p.replace(omega=p.omega / 2)).to_vector()
    np.testing.assert_allclose(a2[[EG, GP, GM]], a1[[EG, GP, GM]] / 2, rtol=1e-12)
    np.testing.assert_allclose(a2[4:], a1[4:] / 4, rtol=1e-12)


def test_resonant_denominator():
    with pytest.raises(ResonantDenominatorError):
        two_quantum_steady(fig4_params(gamma_q=0.0, gamma_a=0.0, g_b=0.0))
    with pytest.raises(ValueError, match="detunings"):
        two_quantum_steady(fig4_params(delta_b=0.1))


@given(weak(), st.sampled_from(["a", "b"]))
def test_conditional_state_identities(p, mode):
    amps = two_quantum_steady(p)
    cs = conditional_state(p, amps, mode)
    assert cs.norm == pytest.approx(1, abs=1e-14)
    op = eliminated_mode_operators(None, p)[0 if mode == "a" else 1]
    v = amps.to_vector()
    assert cs.normalizer == pytest.approx(np.vdot(op @ v, op @ v).real, rel=1e-12)
    c = cooperativities(p)
    c_i = c.C_a if mode == "a" else c.C_b
    unnormalized = cs.ground_amplitude * math.sqrt(cs.normalizer)
    assert unnormalized == pytest.approx(-1j * p.g_q / p.kappa * amps.c_Eg / (1 + 2 * c_i), rel=1e-10)


def test_mode_b_conditional_state_mostly_ground():
    cs = conditional_state(fig4_params(), mode="b")
    assert abs(cs.ground_amplitude) ** 2 > 0.9


def test_zero_photon_amplitude():
    with pytest.raises(ZeroPhotonError):
        conditional_state(fig4_params(omega=0.0), mode="a")


# --- closed forms and pure-state curves --------------------------------------------

def test_no_atom_closed_forms_vanish():
    p = fig4_params(g_a=0.0, g_b=0.0)
    assert g2_zero_closed(p) == (0.0, 0.0)
    assert g2_zero_closed(p, "finite") == pytest.approx((0.0, 0.0), abs=1e-20)


def test_finite_form_converges_to_limit():
    p = fig4_params(omega=1e-4)
    assert g2_zero_closed(p, "finite")[1] == pytest.approx(g2_zero_closed(p)[1], rel=1e-3)
    # mode a converges as Omega^2 from a larger offset
    p = fig4_params(omega=1e-6)
    assert g2_zero_closed(p, "finite")[0] == pytest.approx(g2_zero_closed(p)[0], rel=1e-3)


def test_bunching_regime():
    # 2C_q = 2C_a = 50 >> 1 > C_b = 0.09
    ga, gb = g2_zero_closed(fig4_params(g_b=0.03))
    assert ga > 1e4
    assert gb < 1


def test_closed_form_preconditions():
    with pytest.raises(ValueError):
        g2_zero_closed(fig4_params(gamma_a=0.02))
    with pytest.raises(ValueError):
        g2_zero_closed(fig4_params(delta_b=0.1))
    with pytest.raises(ValueError):
        g2_zero_closed(fig4_params(), form="other")


def test_fig4_closed_form_vs_full_me():
    # closed forms assume the modes are eliminated; at g = 0.5 kappa this is outside their validity
    p = fig4_params(omega=0.002)
    closed = g2_zero_closed(p)[1]
    full = g2_full_me(p, "b", [0.0]).g2[0]
    assert full == pytest.approx(closed, rel=0.10)


def test_bad_cavity_closed_form_vs_full_me():
    p = bad_cavity(fig4_params(omega=0.002), 0.1)
    closed = g2_zero_closed(p)[1]
    full = g2_full_me(p, "b", [0.0]).g2[0]
    assert full == pytest.approx(closed, rel=0.10)


@pytest.mark.parametrize("mode", ["a", "b"])
def test_purestate_zero_delay_consistency(mode):
    p = fig4_params(delta_b=0.1)
    curve = g2_purestate_tau(p, mode)
    assert curve.g2[0] == pytest.approx(g2_zero_closed(p, "finite")[0 if mode == "a" else 1], rel=1e-10)
    # the slowest enhanced rate (Gamma_b here) sets the relaxation of both conditional states
    late = curve.tau >= 10 / min(enhanced(p))
    assert np.all(np.abs(curve.g2[late] - 1) < 0.05)
    assert np.all(curve.g2 >= 0)


def test_purestate_tracks_full_me_in_bad_cavity_limit():
    p = bad_cavity(fig4_params(omega=0.002), 0.1)
    gq = enhanced(p)[0]
    tau = np.linspace(0, 5 / gq, 11)
    ps = g2_purestate_tau(p, "b", tau).g2
    me = g2_full_me(p, "b", tau).g2
    np.testing.assert_allclose(me, ps, rtol=0.15)


def test_single_emitter_recovery():
    p = fig4_params(g_a=0.0, g_b=0.0)
    curve = g2_purestate_tau(p, "b")
    assert curve.g2[0] == pytest.approx(0, abs=1e-20)
    assert curve.g2[-1] == pytest.approx(1, abs=1e-3)


def test_default_tau_grid():
    p = fig4_params()
    tau = default_tau_grid(p)
    assert tau.size == 200 and tau[0] == 0 and np.all(np.diff(tau) > 0)
    assert tau[-1] == pytest.approx(20 / min(enhanced(p)))
