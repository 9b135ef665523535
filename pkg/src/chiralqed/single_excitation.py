"""Single-excitation dynamics: amplitude equations, cavity elimination, closed forms, dark state.

With no drive and one initial quantum, the system either sits in the
one-quantum pure state

    Q |E,g> + A |G,+> + B |G,-> + alpha |G,g,1,0> + beta |G,g,0,1>

(evolving under the non-Hermitian Hamiltonian) or has already decayed to the
ground state.  The population lost from the pure state is distributed over
the four decay channels in proportion to their rate-weighted populations,
which is how the emission probabilities are recovered here.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm, solve_continuous_lyapunov

from .core_model import CompositeBasis, SystemParams
from .dynamics import (
    DEFAULT_ATOL,
    DEFAULT_RTOL,
    HORIZON_TARGET,
    HORIZON_WARN,
    EmissionBudget,
    IntegrationError,
    auto_horizon,
    directionality,
)

__all__ = [
    "OneQuantumAmplitudes",
    "AmplitudeSeries",
    "ReducedSeries",
    "EffectiveRates",
    "DegenerateParametersError",
    "effective_rates",
    "amplitude_matrix",
    "amplitude_rhs",
    "evolve_amplitudes",
    "amplitude_emission_budget",
    "adiabatic_cavity_amplitudes",
    "reduced_matrix",
    "evolve_amplitudes_adiabatic",
    "adiabatic_emission_probabilities",
    "integrate_adiabatic_emission",
    "ideal_solution",
    "ideal_mode_amplitudes",
    "ideal_emission_probabilities",
    "ideal_directionality",
    "dark_state",
    "dark_state_ket",
    "dark_state_overlap",
]

# amplitude vector ordering used throughout this module
Q, A, B, ALPHA, BETA = range(5)


class DegenerateParametersError(ValueError):
    pass


@dataclass(frozen=True)
class OneQuantumAmplitudes:
    Q: complex = 0j
    A: complex = 0j
    B: complex = 0j
    alpha: complex = 0j
    beta: complex = 0j

    @classmethod
    def from_vector(cls, vec) -> "OneQuantumAmplitudes":
        vec = np.asarray(vec, dtype=complex)
        return cls(*(complex(v) for v in vec[:5]))

    def to_vector(self) -> np.ndarray:
        return np.array([self.Q, self.A, self.B, self.alpha, self.beta], dtype=complex)

    @property
    def norm_sq(self) -> float:
        return float(np.vdot(self.to_vector(), self.to_vector()).real)

    def __mul__(self, c):
        return OneQuantumAmplitudes.from_vector(c * self.to_vector())

    __rmul__ = __mul__

    def __add__(self, other):
        return OneQuantumAmplitudes.from_vector(self.to_vector() + other.to_vector())


@dataclass(frozen=True)
class EffectiveRates:
    Gamma_q_enh: float
    Gamma_a_enh: float
    Gamma_b_enh: float
    g_prime_a: float
    g_prime_b: float
    Gamma_tilde_a: float
    Gamma_tilde_q: float
    lambda_plus: float
    lambda_minus: float


def effective_rates(params: SystemParams, gamma_b: float | None = None) -> EffectiveRates:
    """Cavity-enhanced rates and effective couplings after eliminating the modes."""
    k = params.kappa
    if k <= 0:
        raise ZeroDivisionError("cavity elimination needs kappa > 0")
    gb = params.gamma_a if gamma_b is None else gamma_b
    gt_a = params.g_a**2 / k
    gt_q = 2 * params.g_q**2 / k
    root = math.sqrt(gt_a**2 + gt_q**2)
    return EffectiveRates(
        Gamma_q_enh=params.gamma_q / 2 + 2 * params.g_q**2 / k,
        Gamma_a_enh=params.gamma_a / 2 + params.g_a**2 / k,
        Gamma_b_enh=gb / 2 + params.g_b**2 / k,
        g_prime_a=params.g_q * params.g_a / k,
        g_prime_b=params.g_q * params.g_b / k,
        Gamma_tilde_a=gt_a,
        Gamma_tilde_q=gt_q,
        lambda_plus=(-(gt_a + gt_q) + root) / 2,
        lambda_minus=(-(gt_a + gt_q) - root) / 2,
    )


def amplitude_matrix(params: SystemParams, gamma_b: float | None = None) -> np.ndarray:
    """Generator M of d/dt (Q, A, B, alpha, beta) = M (Q, A, B, alpha, beta)."""
    gb = params.gamma_a if gamma_b is None else gamma_b
    p = params
    m = np.zeros((5, 5), dtype=complex)
    m[Q, Q] = -(p.gamma_q / 2 + 1j * p.delta_q)
    m[Q, ALPHA] = m[Q, BETA] = -1j * p.g_q
    m[A, A] = -(p.gamma_a / 2 + 1j * p.delta_a)
    m[A, ALPHA] = -1j * p.g_a
    m[B, B] = -(gb / 2 + 1j * p.delta_b)
    m[B, BETA] = -1j * p.g_b
    m[ALPHA, ALPHA] = -p.kappa
    m[ALPHA, Q] = -1j * p.g_q
    m[ALPHA, A] = -1j * p.g_a
    m[BETA, BETA] = -p.kappa
    m[BETA, Q] = -1j * p.g_q
    m[BETA, B] = -1j * p.g_b
    return m


def amplitude_rhs(state: OneQuantumAmplitudes, params: SystemParams, gamma_b: float | None = None) -> OneQuantumAmplitudes:
    return OneQuantumAmplitudes.from_vector(amplitude_matrix(params, gamma_b) @ state.to_vector())


def _channel_weights(params: SystemParams, gamma_b: float | None) -> np.ndarray:
    """Per-amplitude decay weights for channels (P_a, P_b, P_spont_q, P_spont_atom)."""
    gb = params.gamma_a if gamma_b is None else gamma_b
    w = np.zeros((4, 5))
    w[0, ALPHA] = 2 * params.kappa
    w[1, BETA] = 2 * params.kappa
    w[2, Q] = params.gamma_q
    w[3, A] = params.gamma_a
    w[3, B] = gb
    return w


@dataclass
class AmplitudeSeries:
    times: np.ndarray
    amplitudes: np.ndarray  # shape (n_t, 5), ordering (Q, A, B, alpha, beta)
    P_a: np.ndarray
    P_b: np.ndarray
    P_spont_q: np.ndarray
    P_spont_atom: np.ndarray

    def __getitem__(self, name: str) -> np.ndarray:
        return self.amplitudes[:, ("Q", "A", "B", "alpha", "beta").index(name)]

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def norm_sq(self) -> np.ndarray:
        return self.populations.sum(axis=1)

    @property
    def decayed(self) -> np.ndarray:
        """P(t) = 1 - ||psi(t)||^2 for a normalized initial state."""
        return self.norm_sq[0] - self.norm_sq

    def at(self, k: int) -> OneQuantumAmplitudes:
        return OneQuantumAmplitudes.from_vector(self.amplitudes[k])

    def columns(self) -> dict[str, np.ndarray]:
        out = {"t": self.times}
        for k, name in enumerate(("Q", "A", "B", "alpha", "beta")):
            out[f"{name}_re"] = self.amplitudes[:, k].real
            out[f"{name}_im"] = self.amplitudes[:, k].imag
        out.update(P_a=self.P_a, P_b=self.P_b, P_spont_q=self.P_spont_q, P_spont_atom=self.P_spont_atom)
        return out


def _linear_ode(m: np.ndarray, w: np.ndarray):
    """Real-valued ODE for dx/dt = m x plus running integrals w @ |x|^2, with its Jacobian.

    State layout: (Re x, Im x, integrals).
    """
    n, k = m.shape[0], w.shape[0]
    lin = np.zeros((2 * n + k, 2 * n + k))
    lin[:n, :n] = m.real
    lin[:n, n:2 * n] = -m.imag
    lin[n:2 * n, :n] = m.imag
    lin[n:2 * n, n:2 * n] = m.real

    def rhs(t, y):
        out = lin @ y
        out[2 * n:] = w @ (y[:n] ** 2 + y[n:2 * n] ** 2)
        return out

    def jac(t, y):
        j = lin.copy()
        j[2 * n:, :n] = 2 * w * y[:n]
        j[2 * n:, n:2 * n] = 2 * w * y[n:2 * n]
        return j

    return rhs, jac


def _solve_linear(m, w, x0, t_span, t_eval, rtol, atol, method, events=None):
    rhs, jac = _linear_ode(m, w)
    y0 = np.concatenate([x0.real, x0.imag, np.zeros(w.shape[0])])
    kwargs = {"jac": jac} if method in ("BDF", "Radau", "LSODA") else {}
    sol = solve_ivp(rhs, t_span, y0, method=method, t_eval=t_eval, rtol=rtol, atol=atol,
                    events=events, **kwargs)
    if sol.status == -1:
        last = float(sol.t[-1]) if sol.t.size else float(t_span[0])
        raise IntegrationError(f"amplitude integration failed: {sol.message}", last)
    return sol


def _solve_amplitudes(params, gamma_b, x0, t_span, t_eval, rtol, atol, method, events=None):
    m = amplitude_matrix(params, gamma_b)
    return _solve_linear(m, _channel_weights(params, gamma_b), x0, t_span, t_eval, rtol, atol, method, events)


def _split(y):
    """(amplitudes, channel integrals) from real ODE states of shape (14, n)."""
    return (y[:5] + 1j * y[5:10]).T, y[10:].T


def _initial(state0) -> np.ndarray:
    vec = state0.to_vector() if isinstance(state0, OneQuantumAmplitudes) else np.asarray(state0, dtype=complex)
    if np.vdot(vec, vec).real > 1 + 1e-9:
        raise ValueError("initial amplitudes have norm > 1")
    return vec


def evolve_amplitudes(
    state0,
    params: SystemParams,
    t_grid,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    gamma_b: float | None = None,
    method: str = "RK45",
) -> AmplitudeSeries:
    """Integrate the five coupled amplitude equations (cavity modes kept).

    The cumulative channel integrals are carried in the ODE state.  RK45
    keeps the sampled norm monotone; DOP853's dense output does not.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be a non-empty strictly increasing 1-d array")
    x0 = _initial(state0)
    if t_grid.size == 1:
        amps, cum = x0[None, :], np.zeros((1, 4))
    else:
        sol = _solve_amplitudes(params, gamma_b, x0, (t_grid[0], t_grid[-1]), t_grid, rtol, atol, method)
        amps, cum = _split(sol.y)
    return AmplitudeSeries(t_grid, amps, cum[:, 0], cum[:, 1], cum[:, 2], cum[:, 3])


def amplitude_emission_budget(
    params: SystemParams,
    state0=None,
    T_final: float | None = None,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    gamma_b: float | None = None,
    method: str = "Radau",
) -> EmissionBudget:
    """Channel-resolved emission probabilities from the amplitude equations.

    Uses the same stopping rule as the master-equation budget: stop once
    the pure-state norm falls below 1e-6, capped by ``auto_horizon``.
    """
    x0 = _initial(OneQuantumAmplitudes(Q=1) if state0 is None else state0)
    events = None
    if T_final is None:
        T_final = auto_horizon(params)

        def remaining(t, y):
            return float(y[:10] @ y[:10]) - HORIZON_TARGET

        remaining.terminal = True
        remaining.direction = -1
        events = remaining
    sol = _solve_amplitudes(params, gamma_b, x0, (0.0, T_final), None, rtol, atol, method, events)
    amps, cum = _split(sol.y[:, -1:])
    residual = float(np.vdot(amps[0], amps[0]).real)
    if residual > HORIZON_WARN:
        warnings.warn(f"integration horizon T={sol.t[-1]:.4g} too short: residual excitation {residual:.3g}",
                      RuntimeWarning, stacklevel=2)
    c = cum[0]
    return EmissionBudget(float(c[0]), float(c[1]), float(c[2]), float(c[3]),
                          horizon=float(sol.t[-1]), residual=residual, method="amplitude")


def adiabatic_cavity_amplitudes(Q, A, B, params: SystemParams):
    """Cavity amplitudes slaved to the emitter amplitudes (bad-cavity limit)."""
    if params.kappa == 0:
        raise ZeroDivisionError("cavity elimination needs kappa > 0")
    alpha = -1j * (params.g_q * np.asarray(Q) + params.g_a * np.asarray(A)) / params.kappa
    beta = -1j * (params.g_q * np.asarray(Q) + params.g_b * np.asarray(B)) / params.kappa
    return alpha, beta


def reduced_matrix(params: SystemParams, gamma_b: float | None = None) -> np.ndarray:
    """Generator of d/dt (Q, A, B) after adiabatic elimination of both modes."""
    r = effective_rates(params, gamma_b)
    p = params
    return np.array([
        [-(r.Gamma_q_enh + 1j * p.delta_q), -r.g_prime_a, -r.g_prime_b],
        [-r.g_prime_a, -(r.Gamma_a_enh + 1j * p.delta_a), 0],
        [-r.g_prime_b, 0, -(r.Gamma_b_enh + 1j * p.delta_b)],
    ], dtype=complex)


@dataclass
class ReducedSeries:
    times: np.ndarray
    Q: np.ndarray
    A: np.ndarray
    B: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray


def evolve_amplitudes_adiabatic(state0, params: SystemParams, t_grid, gamma_b: float | None = None) -> ReducedSeries:
    """Exact propagation of the reduced (Q, A, B) system by matrix exponential."""
    if isinstance(state0, OneQuantumAmplitudes):
        x0 = state0.to_vector()[:3]
    else:
        x0 = np.asarray(state0, dtype=complex)[:3]
    m = reduced_matrix(params, gamma_b)
    t_grid = np.atleast_1d(np.asarray(t_grid, dtype=float))
    xs = np.array([expm(m * t) @ x0 for t in t_grid])
    alpha, beta = adiabatic_cavity_amplitudes(xs[:, 0], xs[:, 1], xs[:, 2], params)
    return ReducedSeries(t_grid, xs[:, 0], xs[:, 1], xs[:, 2], alpha, beta)


def _gramian(m: np.ndarray, x0: np.ndarray) -> np.ndarray:
    """Integral over [0, inf) of x(t) x(t)^+ for dx/dt = m x.

    Components never reached from the support of x0 are dropped first, so
    that undamped but unexcited levels do not spoil the solve.
    """
    n = len(x0)
    reached = set(np.flatnonzero(x0))
    frontier = list(reached)
    while frontier:
        j = frontier.pop()
        for i in np.flatnonzero(m[:, j]):
            if i not in reached:
                reached.add(int(i))
                frontier.append(int(i))
    idx = np.array(sorted(reached), dtype=int)
    mr = m[np.ix_(idx, idx)]
    if np.linalg.eigvals(mr).real.max() >= 0:
        raise ValueError("amplitudes do not decay; emission integrals diverge")
    xr = x0[idx]
    gr = solve_continuous_lyapunov(mr, -np.outer(xr, xr.conj()))
    g = np.zeros((n, n), dtype=complex)
    g[np.ix_(idx, idx)] = gr
    return g


def adiabatic_emission_probabilities(params: SystemParams, state0=None, gamma_b: float | None = None):
    """(P_a, P_b) = 2 kappa * integral of |alpha|^2, |beta|^2 for the reduced dynamics."""
    x0 = np.array([1, 0, 0], dtype=complex) if state0 is None else np.asarray(state0, dtype=complex)[:3]
    gram = _gramian(reduced_matrix(params, gamma_b), x0)
    k = params.kappa
    ca = np.array([params.g_q, params.g_a, 0]) / k
    cb = np.array([params.g_q, 0, params.g_b]) / k
    P_a = 2 * k * (ca @ gram @ ca).real
    P_b = 2 * k * (cb @ gram @ cb).real
    return float(P_a), float(P_b)


def integrate_adiabatic_emission(
    params: SystemParams,
    state0=None,
    T_final: float | None = None,
    rtol: float = 1e-10,
    atol: float = 1e-13,
    gamma_b: float | None = None,
    method: str = "Radau",
) -> tuple[float, float]:
    """(P_a, P_b) of the reduced dynamics by adaptive integration with running quadratures.

    Same quantity as ``adiabatic_emission_probabilities``, obtained by time
    integration until the reduced norm falls below 1e-12 (or ``T_final``).
    """
    x0 = np.array([1, 0, 0], dtype=complex) if state0 is None else np.asarray(state0, dtype=complex)[:3]
    k = params.kappa
    ca = np.array([params.g_q, params.g_a, 0]) / k
    cb = np.array([params.g_q, 0, params.g_b]) / k
    m = reduced_matrix(params, gamma_b)
    # alpha, beta are linear in (Q, A, B); carrying them as extra states keeps the quadrature diagonal
    big = np.zeros((5, 5), dtype=complex)
    big[:3, :3] = m
    big[3, :3] = ca @ m
    big[4, :3] = cb @ m
    w = np.zeros((2, 5))
    w[0, 3] = w[1, 4] = 2 * k
    y0 = np.concatenate([x0, [ca @ x0, cb @ x0]])
    events = None
    if T_final is None:
        T_final = auto_horizon(params)

        def remaining(t, y):
            return float(y[:3] @ y[:3] + y[5:8] @ y[5:8]) - 1e-12

        remaining.terminal = True
        remaining.direction = -1
        events = remaining
    sol = _solve_linear(big, w, y0, (0.0, T_final), None, rtol, atol, method, events)
    return float(sol.y[-2, -1]), float(sol.y[-1, -1])


def _ideal_rates(params: SystemParams):
    r = effective_rates(params)
    if r.Gamma_tilde_a == 0 and r.Gamma_tilde_q == 0:
        raise DegenerateParametersError("ideal solution undefined for g_a = g_q = 0")
    return r


def ideal_solution(t, params: SystemParams):
    """Closed-form (Q(t), A(t)) for g_b = 0, zero detunings and no spontaneous emission."""
    r = _ideal_rates(params)
    ga, gt = r.Gamma_tilde_a, r.Gamma_tilde_q
    root = math.sqrt(ga**2 + gt**2)
    t = np.asarray(t, dtype=float)
    ep, em = np.exp(r.lambda_plus * t), np.exp(r.lambda_minus * t)
    ratio = (ga - gt) / root
    q = 0.5 * (1 + ratio) * ep + 0.5 * (1 - ratio) * em
    a = math.sqrt(gt * ga / (2 * root**2)) * (em - ep)
    return q, a


def ideal_mode_amplitudes(t, params: SystemParams):
    """Closed-form cavity amplitudes (alpha(t), beta(t)) in the ideal case."""
    r = _ideal_rates(params)
    gq, ga, k = params.g_q, params.g_a, params.kappa
    s = math.sqrt(ga**4 + 4 * gq**4)
    t = np.asarray(t, dtype=float)
    ep, em = np.exp(r.lambda_plus * t), np.exp(r.lambda_minus * t)
    pre = -1j * gq / (2 * k)
    alpha = pre * ((1 - (ga**2 + 2 * gq**2) / s) * ep + (1 + (ga**2 + 2 * gq**2) / s) * em)
    beta = pre * ((1 + (ga**2 - 2 * gq**2) / s) * ep + (1 - (ga**2 - 2 * gq**2) / s) * em)
    return alpha, beta


def ideal_emission_probabilities(params: SystemParams) -> tuple[float, float]:
    r = _ideal_rates(params)
    total = r.Gamma_tilde_a + r.Gamma_tilde_q
    return 0.5 * r.Gamma_tilde_q / total, (r.Gamma_tilde_a + 0.5 * r.Gamma_tilde_q) / total


def ideal_directionality(params: SystemParams) -> float:
    r = _ideal_rates(params)
    return r.Gamma_tilde_a / (r.Gamma_tilde_a + r.Gamma_tilde_q)


def dark_state(params: SystemParams) -> np.ndarray:
    """Cavity-dark eigenstate as amplitudes on (|G,+>, |E,g>, |G,->), cavity in vacuum."""
    gq, ga, gb = params.g_q, params.g_a, params.g_b
    vec = np.array([gq * gb, -ga * gb, gq * ga], dtype=complex)
    norm = np.linalg.norm(vec)
    if norm == 0:
        raise DegenerateParametersError("dark state undefined: all coupling products vanish")
    return vec / norm


def dark_state_ket(params: SystemParams, basis: CompositeBasis) -> np.ndarray:
    c = dark_state(params)
    return c[0] * basis.ket(0, 1) + c[1] * basis.ket(1, 0) + c[2] * basis.ket(0, 2)


def dark_state_overlap(params: SystemParams) -> float:
    """Population of the dark state in the initial state |E,g,0,0>."""
    gq, ga, gb = params.g_q, params.g_a, params.g_b
    den = gq**2 * gb**2 + ga**2 * gb**2 + gq**2 * ga**2
    if den == 0:
        raise DegenerateParametersError("dark-state overlap undefined: all coupling products vanish")
    return ga**2 * gb**2 / den

