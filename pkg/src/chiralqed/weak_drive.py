"""Linearized weak-drive theory of the coherently driven QD.

For weak driving the emitters stay close to their ground states
(<sigma_z> ~ -1), which closes the Heisenberg equations for the five
amplitudes <sigma_q->, <sigma_a->, <sigma_b->, <a>, <b> into a linear
system driven only through the QD.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core_model import SystemParams

__all__ = [
    "SteadyMeans",
    "Cooperativities",
    "FluxReport",
    "ClosedFormConditionError",
    "SingularSystemError",
    "ZeroFluxError",
    "cooperativities",
    "linearized_matrix",
    "linearized_drive",
    "linearized_rhs",
    "steady_means_closed",
    "steady_means_numeric",
    "no_atom_params",
    "flux_report",
    "qd_polarization_enhancement",
]

# ordering of the linear system
SQ, SA, SB, MA, MB = range(5)


class ClosedFormConditionError(ValueError):
    """Closed forms need equal emitter linewidths and zero detunings."""


class SingularSystemError(np.linalg.LinAlgError):
    pass


class ZeroFluxError(ValueError):
    pass


@dataclass(frozen=True)
class SteadyMeans:
    mean_sigma_q: complex = 0j
    mean_sigma_a: complex = 0j
    mean_sigma_b: complex = 0j
    mean_a: complex = 0j
    mean_b: complex = 0j

    @classmethod
    def from_vector(cls, vec) -> "SteadyMeans":
        return cls(*(complex(v) for v in np.asarray(vec, dtype=complex)[:5]))

    def to_vector(self) -> np.ndarray:
        return np.array(
            [self.mean_sigma_q, self.mean_sigma_a, self.mean_sigma_b, self.mean_a, self.mean_b],
            dtype=complex,
        )

    def __add__(self, other: "SteadyMeans") -> "SteadyMeans":
        return SteadyMeans.from_vector(self.to_vector() + other.to_vector())

    def __mul__(self, c) -> "SteadyMeans":
        return SteadyMeans.from_vector(c * self.to_vector())

    __rmul__ = __mul__


@dataclass(frozen=True)
class Cooperativities:
    C_q: float
    C_a: float
    C_b: float


@dataclass(frozen=True)
class FluxReport:
    Phi_a: float
    Phi_b: float
    Phi_a0: float
    Phi_b0: float
    R_a: float
    R_b: float
    D_ss: float
    mode: str  # "coherent" uses |<a>|^2, "full" uses master-equation photon numbers

    def as_dict(self) -> dict:
        return {
            "Phi_a": self.Phi_a, "Phi_b": self.Phi_b, "Phi_a0": self.Phi_a0, "Phi_b0": self.Phi_b0,
            "R_a": self.R_a, "R_b": self.R_b, "D_ss": self.D_ss, "flux_mode": self.mode,
        }


def _common_gamma(params: SystemParams) -> float:
    if params.gamma_q != params.gamma_a:
        raise ClosedFormConditionError(
            f"closed forms need gamma_q == gamma_a (got {params.gamma_q} and {params.gamma_a})"
        )
    if params.gamma_q <= 0 or params.kappa <= 0:
        raise ClosedFormConditionError("closed forms need gamma > 0 and kappa > 0")
    return params.gamma_q


def cooperativities(params: SystemParams) -> Cooperativities:
    """C_i = g_i^2 / (kappa gamma) for a common emitter linewidth gamma."""
    g = _common_gamma(params)
    k = params.kappa
    return Cooperativities(params.g_q**2 / (k * g), params.g_a**2 / (k * g), params.g_b**2 / (k * g))


def linearized_matrix(params: SystemParams) -> np.ndarray:
    """Homogeneous part M of d/dt m = M m + f, with m ordered (sigma_q, sigma_a, sigma_b, a, b)."""
    p = params
    m = np.zeros((5, 5), dtype=complex)
    m[SQ, SQ] = -(p.gamma_q / 2 + 1j * p.delta_q)
    m[SQ, MA] = m[SQ, MB] = -1j * p.g_q
    m[SA, SA] = -(p.gamma_a / 2 + 1j * p.delta_a)
    m[SA, MA] = -1j * p.g_a
    m[SB, SB] = -(p.gamma_a / 2 + 1j * p.delta_b)
    m[SB, MB] = -1j * p.g_b
    m[MA, MA] = m[MB, MB] = -(p.kappa + 1j * p.delta_c)
    m[MA, SQ] = m[MB, SQ] = -1j * p.g_q
    m[MA, SA] = -1j * p.g_a
    m[MB, SB] = -1j * p.g_b
    return m


def linearized_drive(params: SystemParams) -> np.ndarray:
    """Inhomogeneous term f: the drive enters only the QD equation."""
    f = np.zeros(5, dtype=complex)
    f[SQ] = -1j * complex(params.omega)
    return f


def linearized_rhs(means: SteadyMeans, params: SystemParams) -> SteadyMeans:
    return SteadyMeans.from_vector(linearized_matrix(params) @ means.to_vector() + linearized_drive(params))


def steady_means_closed(params: SystemParams) -> SteadyMeans:
    """Closed-form fixed point for equal linewidths and zero detunings."""
    if any((params.delta_c, params.delta_q, params.delta_a, params.delta_b)):
        raise ClosedFormConditionError("closed forms need all detunings equal to zero")
    gamma = _common_gamma(params)
    c = cooperativities(params)
    k, omega = params.kappa, complex(params.omega)
    bracket = 1 + 2 * c.C_q * (1 / (1 + 2 * c.C_a) + 1 / (1 + 2 * c.C_b))
    sq = -2j * omega / (gamma * bracket)
    mean_a = -1j * params.g_q * sq / (k * (1 + 2 * c.C_a))
    mean_b = -1j * params.g_q * sq / (k * (1 + 2 * c.C_b))
    sa = -2 * params.g_a * params.g_q * sq / (k * gamma * (1 + 2 * c.C_a))
    sb = -2 * params.g_b * params.g_q * sq / (k * gamma * (1 + 2 * c.C_b))
    return SteadyMeans(sq, sa, sb, mean_a, mean_b)


def steady_means_numeric(params: SystemParams) -> SteadyMeans:
    """Fixed point of the linear system for arbitrary linewidths and detunings."""
    m = linearized_matrix(params)
    if np.linalg.cond(m) > 1e14:
        raise SingularSystemError("linearized mean-value system is singular")
    return SteadyMeans.from_vector(np.linalg.solve(m, -linearized_drive(params)))


def no_atom_params(params: SystemParams) -> SystemParams:
    """Reference scenario with the atom decoupled from both modes."""
    return params.replace(g_a=0.0, g_b=0.0)


def _means(params: SystemParams) -> SteadyMeans:
    try:
        return steady_means_closed(params)
    except ClosedFormConditionError:
        return steady_means_numeric(params)


def flux_report(
    params: SystemParams,
    means: SteadyMeans | None = None,
    n_a: float | None = None,
    n_b: float | None = None,
    reference: tuple[float, float] | None = None,
) -> FluxReport:
    """Output fluxes, flux ratios to the no-atom reference, and steady-state directionality.

    Parameters
    ----------
    means
        Linearized means; computed from ``params`` if omitted.
    n_a, n_b
        Photon numbers from the master equation.  When given they replace
        the coherent estimate |<a>|^2 and the report is labelled "full".
    reference
        No-atom photon numbers (n_a0, n_b0).  Defaults to the coherent
        estimate from the linearized no-atom means.
    """
    k = params.kappa
    if (n_a is None) != (n_b is None):
        raise ValueError("pass both n_a and n_b, or neither")
    if n_a is None:
        means = _means(params) if means is None else means
        n_a, n_b = abs(means.mean_a) ** 2, abs(means.mean_b) ** 2
        mode = "coherent"
    else:
        mode = "full"
    if reference is None:
        ref = _means(no_atom_params(params))
        reference = (abs(ref.mean_a) ** 2, abs(ref.mean_b) ** 2)
    phi_a, phi_b = 2 * k * float(n_a), 2 * k * float(n_b)
    phi_a0, phi_b0 = 2 * k * float(reference[0]), 2 * k * float(reference[1])
    if phi_a0 + phi_b0 <= 0:
        raise ZeroFluxError("no-atom reference flux is zero")
    if phi_a + phi_b <= 0:
        raise ZeroFluxError("total output flux is zero")
    total0 = phi_a0 + phi_b0
    return FluxReport(
        Phi_a=phi_a, Phi_b=phi_b, Phi_a0=phi_a0, Phi_b0=phi_b0,
        R_a=phi_a / total0, R_b=phi_b / total0,
        D_ss=(phi_b - phi_a) / (phi_b + phi_a),
        mode=mode,
    )


def qd_polarization_enhancement(params: SystemParams, margin: float = 10.0) -> tuple[float, float]:
    """QD polarization with the atom relative to without it.

    Returns ``(exact, limit)``: the ratio of the closed-form <sigma_q-> values,
    and the large-cooperativity limit 2(1 + 2 C_b).  A warning is issued when
    the limit's preconditions (2C_q, 2C_a >> 1 and C_q, C_a >> C_b) fail by
    the given ``margin``.
    """
    c = cooperativities(params)
    soft = {
        "2C_q >> 1": 2 * c.C_q >= margin,
        "2C_a >> 1": 2 * c.C_a >= margin,
        "C_q >> C_b": c.C_q >= margin * c.C_b,
        "C_a >> C_b": c.C_a >= margin * c.C_b,
    }
    failed = [name for name, ok in soft.items() if not ok]
    if failed:
        warnings.warn("enhancement limit outside its regime: " + ", ".join(failed), RuntimeWarning, stacklevel=2)
    drive = params.replace(omega=1.0)
    with_atom = steady_means_closed(drive).mean_sigma_q
    without = steady_means_closed(no_atom_params(drive)).mean_sigma_q
    exact = abs(with_atom / without)
    return float(exact), 2 * (1 + 2 * c.C_b)
