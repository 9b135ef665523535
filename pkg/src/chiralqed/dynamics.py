"""Time evolution, steady states and emission observables of the full master equation."""

from __future__ import annotations

import functools
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .core_model import (
    CompositeBasis,
    Liouvillian,
    Operators,
    SystemParams,
    build_basis,
    build_liouvillian,
    elementary_operators,
    excitation_number,
)

log = logging.getLogger(__name__)

__all__ = [
    "DensityOperator",
    "TimeSeries",
    "EmissionBudget",
    "IntegrationError",
    "DegenerateSteadyStateError",
    "UndefinedDirectionalityError",
    "evolve",
    "steady_state",
    "output_fluxes",
    "emission_budget",
    "directionality",
    "auto_horizon",
]

DEFAULT_RTOL = 1e-8
DEFAULT_ATOL = 1e-10
HORIZON_TARGET = 1e-6
HORIZON_WARN = 1e-4


class IntegrationError(RuntimeError):
    def __init__(self, message: str, last_time: float):
        super().__init__(f"{message} (last good time t={last_time:.6g})")
        self.last_time = last_time


class DegenerateSteadyStateError(RuntimeError):
    def __init__(self, dimension: int):
        super().__init__(f"stationary subspace is not unique: null-space dimension {dimension}")
        self.dimension = dimension


class UndefinedDirectionalityError(ValueError):
    pass


@dataclass(frozen=True)
class DensityOperator:
    matrix: np.ndarray
    basis: CompositeBasis

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.basis.dim, self.basis.dim):
            raise ValueError(f"matrix shape {m.shape} does not match basis dimension {self.basis.dim}")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_ket(cls, ket: np.ndarray, basis: CompositeBasis) -> "DensityOperator":
        ket = np.asarray(ket, dtype=complex)
        ket = ket / np.linalg.norm(ket)
        return cls(np.outer(ket, ket.conj()), basis)

    @classmethod
    def basis_state(cls, basis: CompositeBasis, qd=0, atom=0, n_a=0, n_b=0) -> "DensityOperator":
        return cls(basis.projector(qd, atom, n_a, n_b), basis)

    def expect(self, op: np.ndarray) -> complex:
        return complex(np.trace(op @ self.matrix))

    def defects(self) -> dict[str, float]:
        """Trace error, anti-Hermitian part and most negative eigenvalue."""
        m = self.matrix
        herm = 0.5 * (m + m.conj().T)
        return {
            "trace_error": abs(np.trace(m) - 1.0),
            "hermiticity_error": float(np.abs(m - m.conj().T).max()),
            "min_eigenvalue": float(np.linalg.eigvalsh(herm).min()),
        }

    def validate(self, herm_tol=1e-10, trace_tol=1e-10, eig_tol=1e-8) -> None:
        d = self.defects()
        problems = []
        if d["trace_error"] > trace_tol:
            problems.append(f"trace off by {d['trace_error']:.3g}")
        if d["hermiticity_error"] > herm_tol:
            problems.append(f"non-Hermitian by {d['hermiticity_error']:.3g}")
        if d["min_eigenvalue"] < -eig_tol:
            problems.append(f"negative eigenvalue {d['min_eigenvalue']:.3g}")
        if problems:
            raise ValueError("invalid density operator: " + ", ".join(problems))


OBSERVABLES = (
    "n_a", "n_b", "p_q", "p_plus", "p_minus",
    "a", "b", "sigma_q", "sigma_a", "sigma_b", "trace",
)
CUMULATIVE = ("P_a", "P_b", "P_spont_q", "P_spont_atom")


@dataclass
class TimeSeries:
    """Sampled observables of a master-equation run.

    ``values`` maps observable names (see ``OBSERVABLES``) to complex arrays
    and the cumulative emission channels (``CUMULATIVE``) to real arrays.
    ``defects`` holds per-sample trace error, Hermiticity error and minimum
    eigenvalue.
    """

    times: np.ndarray
    values: dict[str, np.ndarray]
    defects: dict[str, np.ndarray] = field(default_factory=dict)
    states: np.ndarray | None = None

    def __getitem__(self, key: str) -> np.ndarray:
        return self.values[key]

    def columns(self) -> dict[str, np.ndarray]:
        """Flat real-valued columns (complex observables split into re/im)."""
        out = {"t": self.times}
        for name in OBSERVABLES:
            v = self.values[name]
            if name in ("a", "b", "sigma_q", "sigma_a", "sigma_b"):
                out[f"{name}_re"] = v.real
                out[f"{name}_im"] = v.imag
            else:
                out[name] = v.real
        for name in CUMULATIVE:
            out[name] = self.values[name]
        return out


def _row(op: np.ndarray) -> np.ndarray:
    # tr(O rho) = vec(O^T) . vec(rho) for row-major vec
    return np.asarray(op, dtype=complex).T.reshape(-1)


def _observable_rows(ops: Operators) -> np.ndarray:
    mats = {
        "n_a": ops.n_a, "n_b": ops.n_b, "p_q": ops.p_q,
        "p_plus": ops.p_plus, "p_minus": ops.p_minus,
        "a": ops.a, "b": ops.b, "sigma_q": ops.sigma_q_minus,
        "sigma_a": ops.sigma_a_minus, "sigma_b": ops.sigma_b_minus,
        "trace": ops.identity,
    }
    return np.array([_row(mats[k]) for k in OBSERVABLES])


def _channel_rows(params: SystemParams, ops: Operators) -> np.ndarray:
    """Rows whose product with vec(rho) gives the instantaneous decay flux per channel."""
    return np.array([
        2 * params.kappa * _row(ops.n_a),
        2 * params.kappa * _row(ops.n_b),
        params.gamma_q * _row(ops.p_q),
        params.gamma_a * _row(ops.p_plus + ops.p_minus),
    ])


@functools.cache
def _hermitian_coordinates(d: int) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Maps between real coordinates and row-major vec(rho) for Hermitian rho.

    Coordinates are the diagonal, then Re and Im of the strict upper triangle.
    Returns ``(T, S)`` with ``vec = T @ x`` and ``x = (S @ vec).real``.
    """
    iu, ju = np.triu_indices(d, 1)
    m = iu.size
    diag = np.arange(d) * (d + 1)
    up, lo = iu * d + ju, ju * d + iu
    k_diag = np.arange(d)
    k_re, k_im = d + np.arange(m), d + m + np.arange(m)
    rows = np.concatenate([diag, up, lo, up, lo])
    cols = np.concatenate([k_diag, k_re, k_re, k_im, k_im])
    vals = np.concatenate([np.ones(d), np.ones(m), np.ones(m), 1j * np.ones(m), -1j * np.ones(m)])
    T = sp.csr_matrix((vals, (rows, cols)), shape=(d * d, d * d))
    S = sp.csr_matrix(
        (np.concatenate([np.ones(d), 0.5 * np.ones(2 * m), -0.5j * np.ones(m), 0.5j * np.ones(m)]),
         (np.concatenate([k_diag, k_re, k_re, k_im, k_im]), np.concatenate([diag, up, lo, up, lo]))),
        shape=(d * d, d * d),
    )
    return T, S


def _augmented(L: Liouvillian, ops: Operators) -> sp.csr_matrix:
    """Real generator on (Hermitian coordinates of rho, running channel integrals).

    L maps Hermitian operators to Hermitian operators, so integrating in
    real Hermitian coordinates keeps every sample exactly Hermitian.
    """
    T, S = _hermitian_coordinates(L.dim)
    core = (S @ L.matrix @ T).real
    w = (sp.csr_matrix(_channel_rows(L.params, ops)) @ T).real
    n = len(CUMULATIVE)
    top = sp.hstack([core, sp.csr_matrix((core.shape[0], n))])
    bottom = sp.hstack([w, sp.csr_matrix((n, n))])
    return sp.vstack([top, bottom], format="csr")


def _initial_vector(rho0: "DensityOperator") -> np.ndarray:
    _, S = _hermitian_coordinates(rho0.basis.dim)
    return np.concatenate([(S @ rho0.matrix.reshape(-1)).real, np.zeros(len(CUMULATIVE))])


def _to_vec(coords: np.ndarray, d: int) -> np.ndarray:
    """Hermitian coordinates (rows) back to row-major vec(rho) (rows)."""
    T, _ = _hermitian_coordinates(d)
    return (T @ coords.T).T


def _integrate(gen, y0, t_span, t_eval, rtol, atol, method, events=None):
    implicit = method in ("BDF", "Radau", "LSODA")
    kwargs = {"jac": gen} if implicit else {}
    sol = solve_ivp(
        lambda t, y: gen @ y,
        t_span,
        y0,
        method=method,
        t_eval=t_eval,
        rtol=rtol,
        atol=atol,
        events=events,
        **kwargs,
    )
    if sol.status == -1:
        last = float(sol.t[-1]) if sol.t.size else float(t_span[0])
        raise IntegrationError(f"integrator failed: {sol.message}", last)
    return sol


def _state_defects(states: np.ndarray, d: int) -> dict[str, np.ndarray]:
    tr, herm, mins = [], [], []
    for vec in states:
        m = vec.reshape(d, d)
        tr.append(abs(np.trace(m) - 1.0))
        herm.append(np.abs(m - m.conj().T).max())
        mins.append(np.linalg.eigvalsh(0.5 * (m + m.conj().T)).min())
    return {"trace_error": np.array(tr), "hermiticity_error": np.array(herm), "min_eigenvalue": np.array(mins)}


def evolve(
    rho0: DensityOperator,
    L: Liouvillian,
    t_grid,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    method: str = "RK45",
    keep_states: bool = False,
    check: bool = True,
) -> TimeSeries:
    """Integrate the master equation and sample observables on ``t_grid``.

    The running emission integrals are part of the ODE state, so their
    accuracy is governed by the same adaptive error control as rho.
    The state is integrated in real Hermitian coordinates, so samples are
    exactly Hermitian. RK45 is the default because DOP853's dense output,
    used for the samples, breaks positivity at the 1e-8 level.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be a non-empty strictly increasing 1-d array")
    if rho0.basis != L.basis:
        raise ValueError("initial state and Liouvillian live on different bases")
    if check:
        rho0.validate()
    d = L.dim
    ops = elementary_operators(L.basis)
    gen = _augmented(L, ops)
    y0 = _initial_vector(rho0)
    if t_grid.size == 1:
        ys = y0[None, :]
    else:
        sol = _integrate(gen, y0, (t_grid[0], t_grid[-1]), t_grid, rtol, atol, method)
        ys = sol.y.T
    rho_part = _to_vec(ys[:, : d * d], d)
    obs = rho_part @ _observable_rows(ops).T
    values = {name: obs[:, k] for k, name in enumerate(OBSERVABLES)}
    for k, name in enumerate(CUMULATIVE):
        values[name] = ys[:, d * d + k].real
    defects = _state_defects(rho_part, d) if check else {}
    return TimeSeries(
        times=t_grid,
        values=values,
        defects=defects,
        states=rho_part.reshape(-1, d, d) if keep_states else None,
    )


def propagate_operator(X0: np.ndarray, L: Liouvillian, t_grid, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL,
                       method="DOP853") -> np.ndarray:
    """Propagate an arbitrary operator (not necessarily a state) under ``L``.

    Returns the stack of propagated matrices on ``t_grid``.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    d = L.dim
    y0 = np.asarray(X0, dtype=complex).reshape(-1)
    if t_grid.size == 1:
        return y0.reshape(1, d, d)
    sol = _integrate(L.matrix, y0, (t_grid[0], t_grid[-1]), t_grid, rtol, atol, method)
    return sol.y.T.reshape(-1, d, d)


def _null_space_dimension(L: Liouvillian, tol: float = 1e-9) -> int:
    s = np.linalg.svd(L.dense(), compute_uv=False)
    return int(np.sum(s <= tol * max(s[0], 1.0)))


def _slowest_rate(params: SystemParams) -> float:
    rates = [r for r in (params.kappa, params.gamma_q / 2, params.gamma_a / 2) if r > 0]
    return min(rates) if rates else 0.0


def steady_state(L: Liouvillian, residual_tol: float = 1e-10) -> DensityOperator:
    """Unique stationary state of ``L`` from a sparse null-space solve.

    One diagonal equation (redundant because L is trace preserving) is
    replaced by the normalization ``tr rho = 1``.  If the direct solve is
    ill-conditioned the state is relaxed by time evolution instead.
    """
    d = L.dim
    A = L.matrix.tolil(copy=True)
    A[0, :] = np.eye(d).reshape(1, -1)
    rhs = np.zeros(d * d, dtype=complex)
    rhs[0] = 1.0
    try:
        lu = spla.splu(A.tocsc())
        vec = lu.solve(rhs)
        # one step of iterative refinement
        vec = vec + lu.solve(rhs - A @ vec)
    except RuntimeError:
        raise DegenerateSteadyStateError(_null_space_dimension(L)) from None
    if not np.all(np.isfinite(vec)):
        raise DegenerateSteadyStateError(_null_space_dimension(L))
    rho = vec.reshape(d, d)
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho)
    resid = np.linalg.norm(L.matrix @ rho.reshape(-1))
    if resid > residual_tol:
        log.warning("null-space solve residual %.3g above %.1g; relaxing by time evolution", resid, residual_tol)
        rate = _slowest_rate(L.params)
        if rate <= 0:
            raise DegenerateSteadyStateError(_null_space_dimension(L))
        rho0 = DensityOperator.basis_state(L.basis)
        T = 100.0 / rate
        final = propagate_operator(rho0.matrix, L, [0.0, T], rtol=1e-10, atol=1e-13, method="BDF")[-1]
        rho = 0.5 * (final + final.conj().T)
        rho = rho / np.trace(rho)
    return DensityOperator(rho, L.basis)


def output_fluxes(rho: DensityOperator, params: SystemParams) -> tuple[float, float]:
    """Output photon fluxes (2 kappa <a^+a>, 2 kappa <b^+b>)."""
    ops = elementary_operators(rho.basis)
    phi_a = 2 * params.kappa * rho.expect(ops.n_a).real
    phi_b = 2 * params.kappa * rho.expect(ops.n_b).real
    return max(phi_a, 0.0), max(phi_b, 0.0)


def directionality(P_a: float, P_b: float) -> float:
    total = P_a + P_b
    if total <= 0:
        raise UndefinedDirectionalityError(f"directionality undefined for P_a={P_a!r}, P_b={P_b!r}")
    return (P_b - P_a) / total


@dataclass(frozen=True)
class EmissionBudget:
    """Probabilities of losing the excitation through each channel."""

    P_a: float
    P_b: float
    P_spont_q: float
    P_spont_atom: float
    horizon: float = math.inf
    residual: float = 0.0
    method: str = "full_me"
    defects: dict = field(default_factory=dict, compare=False)

    @property
    def total(self) -> float:
        return self.P_a + self.P_b + self.P_spont_q + self.P_spont_atom

    @property
    def D(self) -> float:
        return directionality(self.P_a, self.P_b)


def auto_horizon(params: SystemParams) -> float:
    """Hard cap on the integration time for single-excitation emission runs."""
    scales = []
    if params.g_q > 0:
        scales.append(params.kappa / (2 * params.g_q**2))
    if params.g_a > 0:
        scales.append(params.kappa / params.g_a**2)
    if params.gamma_q > 0:
        scales.append(1 / params.gamma_q)
    if not scales:
        scales.append(1 / params.kappa if params.kappa > 0 else 1.0)
    return 50.0 * max(scales)


def emission_budget(
    params: SystemParams,
    rho0: DensityOperator | None = None,
    T_final: float | None = None,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    method: str = "BDF",
    check: bool = True,
) -> EmissionBudget:
    """Emission probabilities into each loss channel from the undriven master equation.

    Without ``T_final`` the run stops once the remaining excitation drops
    below 1e-6, or at the hard cap from ``auto_horizon``.

    Returns
    -------
    EmissionBudget
        ``residual`` is the excitation left in the system at the horizon.
    """
    if params.omega != 0:
        raise ValueError("emission_budget needs an undriven system (omega = 0)")
    basis = build_basis(params.n_max)
    ops = elementary_operators(basis)
    if rho0 is None:
        rho0 = DensityOperator.basis_state(basis, qd=1)
    if check:
        rho0.validate()
    L = build_liouvillian(params, basis, driven=False)
    d = basis.dim
    nrow = _row(excitation_number(ops))
    if nrow @ rho0.matrix.reshape(-1) > 1 + 1e-9:
        raise ValueError("initial state must lie in the <=1-excitation manifold")
    gen = _augmented(L, ops)
    y0 = _initial_vector(rho0)
    nrow = (_hermitian_coordinates(d)[0].T @ nrow).real
    events = None
    if T_final is None:
        T_final = auto_horizon(params)

        def remaining(t, y):
            return (nrow @ y[: d * d]).real - HORIZON_TARGET

        remaining.terminal = True
        remaining.direction = -1
        events = remaining
    sol = _integrate(gen, y0, (0.0, T_final), None, rtol, atol, method, events=events)
    y_end = sol.y[:, -1]
    rho_end = _to_vec(y_end[: d * d], d).reshape(d, d)
    residual = float((nrow @ y_end[: d * d]).real)
    if residual > HORIZON_WARN:
        warnings.warn(
            f"integration horizon T={sol.t[-1]:.4g} too short: residual excitation {residual:.3g}",
            RuntimeWarning,
            stacklevel=2,
        )
    defects = DensityOperator(rho_end, basis).defects() if check else {}
    integrals = y_end[d * d:].real
    return EmissionBudget(
        P_a=float(integrals[0]),
        P_b=float(integrals[1]),
        P_spont_q=float(integrals[2]),
        P_spont_atom=float(integrals[3]),
        horizon=float(sol.t[-1]),
        residual=residual,
        method="full_me",
        defects=defects,
    )
