"""Second-order photon correlations.

Two routes:

* full master equation: g2(tau) by quantum regression, propagating
  ``a rho_ss a^+`` under the Liouvillian;
* weak-drive pure state: with both modes eliminated, the QD and atom stay
  in the pure state ``|G,g> + c_Eg|E,g> + c_Gp|G,+> + c_Gm|G,-> + c_Ep|E,+>
  + c_Em|E,->`` to second order in the drive.  Photon detection applies the
  eliminated mode operator, and the conditional state is then propagated.

The reduced (emitter-only) space is QD (2) x atom (3), index ``3*qd + atom``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .core_model import SystemParams, build_basis, build_liouvillian, elementary_operators, lindblad_dissipator
from .dynamics import DEFAULT_ATOL, DEFAULT_RTOL, DensityOperator, propagate_operator, steady_state

__all__ = [
    "TwoQuantumAmplitudes",
    "ConditionalState",
    "G2Curve",
    "ResonantDenominatorError",
    "ZeroPhotonError",
    "reduced_operators",
    "eliminated_mode_operators",
    "reduced_hamiltonian",
    "reduced_liouvillian",
    "reduced_master_rhs",
    "reduced_steady_state",
    "effective_hamiltonian",
    "two_quantum_steady",
    "two_quantum_steady_numeric",
    "two_quantum_residual",
    "conditional_state",
    "g2_zero_closed",
    "g2_purestate_tau",
    "g2_full_me",
    "default_tau_grid",
]

# reduced basis indices
GG, GP, GM, EG, EP, EM = 0, 1, 2, 3, 4, 5
ONE = [EG, GP, GM]
TWO = [EP, EM]
CONDITIONING_THRESHOLD = 1e-10


class ResonantDenominatorError(ZeroDivisionError):
    pass


class ZeroPhotonError(ValueError):
    pass


@dataclass(frozen=True)
class TwoQuantumAmplitudes:
    """Amplitudes relative to a unit |G,g> amplitude."""

    c_Eg: complex = 0j
    c_Gp: complex = 0j
    c_Gm: complex = 0j
    c_Ep: complex = 0j
    c_Em: complex = 0j

    def to_vector(self, ground: complex = 1.0) -> np.ndarray:
        """Vector on the reduced 6-dim basis."""
        v = np.zeros(6, dtype=complex)
        v[GG] = ground
        v[EG], v[GP], v[GM], v[EP], v[EM] = self.c_Eg, self.c_Gp, self.c_Gm, self.c_Ep, self.c_Em
        return v

    @classmethod
    def from_vector(cls, vec) -> "TwoQuantumAmplitudes":
        v = np.asarray(vec, dtype=complex)
        return cls(complex(v[EG]), complex(v[GP]), complex(v[GM]), complex(v[EP]), complex(v[EM]))


@dataclass(frozen=True)
class ConditionalState:
    vector: np.ndarray  # normalized, reduced 6-dim basis
    mode: str
    normalizer: float  # n_a or n_b: squared norm before normalization

    @property
    def ground_amplitude(self) -> complex:
        return complex(self.vector[GG])

    @property
    def amplitudes(self) -> TwoQuantumAmplitudes:
        return TwoQuantumAmplitudes.from_vector(self.vector)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))


@dataclass
class G2Curve:
    tau: np.ndarray
    g2: np.ndarray
    mode: str
    method: str  # "full_me" or "pure_state"
    ill_conditioned: bool = False

    def columns(self) -> dict:
        n = len(self.tau)
        return {"tau": self.tau, "g2": self.g2, "method": [self.method] * n, "mode": [self.mode] * n}


def _check_mode(mode: str) -> str:
    if mode not in ("a", "b"):
        raise ValueError(f"mode must be 'a' or 'b', got {mode!r}")
    return mode


# --- reduced emitter space ----------------------------------------------------

def reduced_operators() -> dict[str, np.ndarray]:
    """Lowering operators on the 6-dim QD x atom space."""
    sq = np.zeros((2, 2))
    sq[0, 1] = 1
    sa = np.zeros((3, 3))
    sa[0, 1] = 1
    sb = np.zeros((3, 3))
    sb[0, 2] = 1
    return {
        "sigma_q": np.kron(sq, np.eye(3)).astype(complex),
        "sigma_a": np.kron(np.eye(2), sa).astype(complex),
        "sigma_b": np.kron(np.eye(2), sb).astype(complex),
    }


def _cavity_response(params: SystemParams) -> complex:
    """kappa + i delta_c; the eliminated mode follows the emitters with this response."""
    if params.kappa <= 0:
        raise ZeroDivisionError("cavity elimination needs kappa > 0")
    return params.kappa + 1j * params.delta_c


def _collective(params: SystemParams, ops: dict) -> tuple[np.ndarray, np.ndarray]:
    la = params.g_q * ops["sigma_q"] + params.g_a * ops["sigma_a"]
    lb = params.g_q * ops["sigma_q"] + params.g_b * ops["sigma_b"]
    return la, lb


def eliminated_mode_operators(emitter_ops: dict | None, params: SystemParams) -> tuple[np.ndarray, np.ndarray]:
    """a = -i(g_q sigma_q + g_a sigma_a)/kappa and b likewise (vacuum input dropped)."""
    ops = reduced_operators() if emitter_ops is None else emitter_ops
    la, lb = _collective(params, ops)
    k = _cavity_response(params)
    return -1j * la / k, -1j * lb / k


def reduced_hamiltonian(params: SystemParams, ops: dict | None = None) -> np.ndarray:
    """Emitter Hamiltonian in the drive frame, including the cavity-induced shift at finite delta_c."""
    ops = reduced_operators() if ops is None else ops
    sq, sa, sb = ops["sigma_q"], ops["sigma_a"], ops["sigma_b"]
    omega = complex(params.omega)
    h = (
        params.delta_q * sq.conj().T @ sq
        + params.delta_a * sa.conj().T @ sa
        + params.delta_b * sb.conj().T @ sb
        + omega * sq.conj().T
        + np.conj(omega) * sq
    )
    if params.delta_c:
        shift = -params.delta_c / abs(_cavity_response(params)) ** 2
        for l in _collective(params, ops):
            h = h + shift * l.conj().T @ l
    return h


def _reduced_channels(params: SystemParams, ops: dict) -> list[tuple[float, np.ndarray]]:
    k = _cavity_response(params)
    rate = params.kappa / abs(k) ** 2
    la, lb = _collective(params, ops)
    return [
        (params.gamma_q / 2, ops["sigma_q"]),
        (params.gamma_a / 2, ops["sigma_a"]),
        (params.gamma_a / 2, ops["sigma_b"]),
        (rate, la),
        (rate, lb),
    ]


def reduced_liouvillian(params: SystemParams) -> np.ndarray:
    """Dense 36x36 generator of the emitter master equation after cavity elimination."""
    ops = reduced_operators()
    h = reduced_hamiltonian(params, ops)
    eye = np.eye(6)
    gen = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for rate, op in _reduced_channels(params, ops):
        if rate:
            gen = gen + rate * lindblad_dissipator(op).toarray()
    return gen


def reduced_master_rhs(rho_r: np.ndarray, params: SystemParams) -> np.ndarray:
    rho_r = np.asarray(rho_r, dtype=complex)
    if rho_r.shape != (6, 6):
        raise ValueError("reduced density operator must be 6x6")
    return (reduced_liouvillian(params) @ rho_r.reshape(36)).reshape(6, 6)


def reduced_steady_state(params: SystemParams) -> np.ndarray:
    gen = reduced_liouvillian(params)
    gen[0, :] = np.eye(6).reshape(36)
    rhs = np.zeros(36, dtype=complex)
    rhs[0] = 1
    rho = np.linalg.solve(gen, rhs).reshape(6, 6)
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho)


# --- weak-drive pure state -----------------------------------------------------

def effective_hamiltonian(params: SystemParams) -> np.ndarray:
    """Non-Hermitian generator of the no-jump evolution, i d|psi>/dt = H_eff |psi>."""
    ops = reduced_operators()
    h = reduced_hamiltonian(params, ops).astype(complex)
    for rate, op in _reduced_channels(params, ops):
        # the factor-2 dissipator convention puts rate * O^+ O (no 1/2) in the anti-Hermitian part
        h = h - 1j * rate * (op.conj().T @ op)
    return h


def _enhanced_rates(params: SystemParams) -> tuple[float, float, float]:
    k = params.kappa
    return (
        params.gamma_q / 2 + 2 * params.g_q**2 / k,
        params.gamma_a / 2 + params.g_a**2 / k,
        params.gamma_a / 2 + params.g_b**2 / k,
    )


def two_quantum_steady(params: SystemParams) -> TwoQuantumAmplitudes:
    """Closed-form steady amplitudes to leading order in the drive (zero detunings)."""
    if any((params.delta_c, params.delta_q, params.delta_a, params.delta_b)):
        raise ValueError("closed-form two-quantum amplitudes need zero detunings; use two_quantum_steady_numeric")
    k, omega = params.kappa, complex(params.omega)
    gq, ga, gb = params.g_q, params.g_a, params.g_b
    Gq, Ga, Gb = _enhanced_rates(params)
    if min(Ga, Gb) <= 0:
        raise ResonantDenominatorError("atomic rates vanish: Gamma_a or Gamma_b is zero")
    den = Gq - (gq**2 / k**2) * (ga**2 / Ga + gb**2 / Gb)
    if abs(den) <= 1e-14 * max(Gq, 1e-300):
        raise ResonantDenominatorError("resonant denominator in the one-quantum amplitudes")
    alpha = -1j * omega / den
    beta = -ga * gq / (Ga * k) * alpha
    eta = -gb * gq / (Gb * k) * alpha
    zeta = 1j * omega / (Gq + Ga) * ga * gq / (Ga * k) * alpha
    xi = 1j * omega / (Gq + Gb) * gb * gq / (Gb * k) * alpha
    return TwoQuantumAmplitudes(alpha, beta, eta, zeta, xi)


def _perturbative_blocks(params: SystemParams):
    h = effective_hamiltonian(params)
    return h[np.ix_(ONE, [GG])][:, 0], h[np.ix_(ONE, ONE)], h[np.ix_(TWO, ONE)], h[np.ix_(TWO, TWO)]


def two_quantum_steady_numeric(params: SystemParams) -> TwoQuantumAmplitudes:
    """Same hierarchy solved as linear systems (any detunings)."""
    drive, h11, h21, h22 = _perturbative_blocks(params)
    c1 = np.linalg.solve(h11, -drive)
    c2 = np.linalg.solve(h22, -h21 @ c1)
    return TwoQuantumAmplitudes(c1[0], c1[1], c1[2], c2[0], c2[1])


def two_quantum_residual(amps: TwoQuantumAmplitudes, params: SystemParams) -> float:
    """Largest residual of the five steady amplitude equations (ground amplitude held at 1)."""
    drive, h11, h21, h22 = _perturbative_blocks(params)
    v = amps.to_vector()
    c1, c2 = v[ONE], v[TWO]
    r1 = drive + h11 @ c1
    r2 = h21 @ c1 + h22 @ c2
    return float(np.max(np.abs(np.concatenate([r1, r2]))))


def _steady(params: SystemParams) -> TwoQuantumAmplitudes:
    try:
        return two_quantum_steady(params)
    except ValueError:
        return two_quantum_steady_numeric(params)


def _mode_op(params: SystemParams, mode: str) -> np.ndarray:
    a_eff, b_eff = eliminated_mode_operators(None, params)
    return a_eff if _check_mode(mode) == "a" else b_eff


def conditional_state(params: SystemParams, amps: TwoQuantumAmplitudes | None = None, mode: str = "a") -> ConditionalState:
    """State right after a photon is detected in the given mode.

    The normalizer is the squared norm of the detection operator applied to
    the steady pure state with unit ground amplitude.
    """
    amps = _steady(params) if amps is None else amps
    u = _mode_op(params, mode) @ amps.to_vector()
    n = float(np.vdot(u, u).real)
    if n <= 0:
        raise ZeroPhotonError(f"no photon amplitude in mode {mode}")
    return ConditionalState(u / math.sqrt(n), mode, n)


def g2_zero_closed(params: SystemParams, form: str = "limit") -> tuple[float, float]:
    """Zero-delay g2 of both modes in the weak-drive pure-state theory.

    ``form="finite"`` evaluates the detection quotient with the finite-drive
    amplitudes; ``form="limit"`` is its drive-to-zero closed form in terms of
    the cooperativities (needs equal emitter linewidths and zero detunings).
    Both include the factor 4 from the two ways of annihilating the doubly
    excited state.
    """
    if form == "finite":
        amps = _steady(params)
        out = []
        for mode in ("a", "b"):
            op = _mode_op(params, mode)
            v = amps.to_vector()
            one = op @ v
            n = float(np.vdot(one, one).real)
            if n <= 0:
                raise ZeroPhotonError(f"no photon amplitude in mode {mode}")
            two = op @ one
            out.append(float(np.vdot(two, two).real) / n**2)
        return out[0], out[1]
    if form != "limit":
        raise ValueError("form must be 'finite' or 'limit'")
    if any((params.delta_c, params.delta_q, params.delta_a, params.delta_b)):
        raise ValueError("limit form needs zero detunings")
    if params.gamma_q != params.gamma_a or params.gamma_q <= 0:
        raise ValueError("limit form needs gamma_q == gamma_a > 0")
    gamma, k = params.gamma_q, params.kappa
    Cq, Ca, Cb = (g**2 / (k * gamma) for g in (params.g_q, params.g_a, params.g_b))
    Gq, Ga, Gb = _enhanced_rates(params)
    if Gq + Ga <= 0 or Gq + Gb <= 0:
        raise ResonantDenominatorError("degenerate enhanced rates")
    bracket = (1 + 2 * Cq * (1 / (1 + 2 * Ca) + 1 / (1 + 2 * Cb))) ** 2
    g2a = 4 * Ca**2 * (1 + 2 * Ca) ** 2 * gamma**2 / (Gq + Ga) ** 2 * bracket
    g2b = 4 * Cb**2 * (1 + 2 * Cb) ** 2 * gamma**2 / (Gq + Gb) ** 2 * bracket
    return float(g2a), float(g2b)


def default_tau_grid(params: SystemParams, n: int = 200) -> np.ndarray:
    """0 followed by log-spaced delays up to 20 / min(Gamma_q, Gamma_a, Gamma_b)."""
    rates = [r for r in _enhanced_rates(params) if r > 0]
    if not rates:
        raise ResonantDenominatorError("no positive decay rate to set the delay scale")
    t_max = 20.0 / min(rates)
    t_min = min(1e-2 / max(rates + [params.kappa]), t_max / 10)
    return np.concatenate([[0.0], np.geomspace(t_min, t_max, n - 1)])


def g2_purestate_tau(params: SystemParams, mode: str = "b", tau_grid=None) -> G2Curve:
    """g2(tau) from the conditional state propagated with the no-jump generator.

    The ground amplitude is held fixed during propagation (it changes only
    at second order in the drive), so the excited amplitudes relax back to
    their steady ratios and g2 tends to 1.
    """
    tau = default_tau_grid(params) if tau_grid is None else np.asarray(tau_grid, dtype=float)
    amps = _steady(params)
    op = _mode_op(params, mode)
    v_ss = amps.to_vector()
    n_ss = float(np.vdot(op @ v_ss, op @ v_ss).real)
    if n_ss <= 0:
        raise ZeroPhotonError(f"no photon amplitude in mode {mode}")
    u0 = op @ v_ss
    drive, h11, h21, h22 = _perturbative_blocks(params)
    # inhomogeneous linear system for the excited amplitudes, ground amplitude as a constant input
    gen = np.zeros((6, 6), dtype=complex)
    gen[:3, :3] = -1j * h11
    gen[3:5, :3] = -1j * h21
    gen[3:5, 3:5] = -1j * h22
    gen[:3, 5] = -1j * drive * u0[GG]
    x0 = np.concatenate([u0[ONE], u0[TWO], [1.0]])
    g2 = np.empty(tau.size)
    for k, t in enumerate(tau):
        x = expm(gen * t) @ x0
        u = np.zeros(6, dtype=complex)
        u[GG] = u0[GG]
        u[ONE], u[TWO] = x[:3], x[3:5]
        w = op @ u
        g2[k] = float(np.vdot(w, w).real) / n_ss**2
    return G2Curve(tau, g2, mode, "pure_state")


# --- full master equation -----------------------------------------------------

def g2_full_me(
    params: SystemParams,
    mode: str = "b",
    tau_grid=None,
    rtol: float = DEFAULT_RTOL,
    atol: float | None = None,
    rho_ss: DensityOperator | None = None,
    method: str = "DOP853",
) -> G2Curve:
    """g2(tau) by quantum regression on the full master equation.

    ``X(0) = c rho_ss c^+`` (c the chosen mode) is propagated under the
    Liouvillian and ``tr[c^+ c X(tau)] / <c^+ c>_ss^2`` is reported.  The
    curve is flagged ill-conditioned when <c^+ c>_ss < 1e-10.  Unless
    given, ``atol`` is scaled by <c^+ c>_ss.
    """
    _check_mode(mode)
    if params.n_max < 2:
        raise ValueError("g2 from the master equation needs n_max >= 2")
    tau = default_tau_grid(params) if tau_grid is None else np.asarray(tau_grid, dtype=float)
    L = build_liouvillian(params, build_basis(params.n_max), driven=True)
    rho = steady_state(L) if rho_ss is None else rho_ss
    ops = elementary_operators(L.basis)
    c = ops.a if mode == "a" else ops.b
    number = c.conj().T @ c
    # products accumulated with math.fsum so cancellation in tiny numbers is controlled
    n_ss = math.fsum((number.T * rho.matrix).real.ravel())
    if n_ss <= 0:
        raise ZeroPhotonError(f"steady-state photon number in mode {mode} is zero")
    x0 = c @ rho.matrix @ c.conj().T
    # default atol is relative to the conditioned operator, whose trace is n_ss
    atol = DEFAULT_ATOL * n_ss if atol is None else atol
    stack = propagate_operator(x0, L, tau, rtol=rtol, atol=atol, method=method)
    num = np.array([math.fsum((number.T * x).real.ravel()) for x in stack])
    return G2Curve(tau, num / n_ss**2, mode, "full_me", ill_conditioned=n_ss < CONDITIONING_THRESHOLD)
