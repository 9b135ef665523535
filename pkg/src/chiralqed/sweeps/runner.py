"""Evaluate scenario grids point by point, optionally in worker processes."""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from threadpoolctl import threadpool_limits

from ..core_model import SystemParams, build_liouvillian, elementary_operators
from ..correlations import g2_full_me, g2_zero_closed
from ..dynamics import directionality, emission_budget, steady_state
from ..single_excitation import adiabatic_emission_probabilities, amplitude_emission_budget, dark_state_overlap
from ..weak_drive import flux_report, no_atom_params
from .config import ScenarioConfig, SolverOptions

log = logging.getLogger(__name__)

_BUDGET = {
    "P_a": "probability of emission through mode a",
    "P_b": "probability of emission through mode b",
    "P_spont_q": "probability of QD spontaneous emission",
    "P_spont_atom": "probability of atomic spontaneous emission",
    "budget_total": "sum of the four channel probabilities",
    "D": "directionality (P_b - P_a)/(P_b + P_a)",
    "residual": "excitation left at the end of the integration",
    "horizon": "integration end time (1/kappa)",
    "P_a_adiabatic": "P_a with both modes eliminated (exact integral of the reduced dynamics)",
    "P_b_adiabatic": "P_b with both modes eliminated",
    "dark_overlap": "population of the cavity-dark state in |E,g,0,0>",
}

OBSERVABLES = {
    "single_excitation": _BUDGET,
    "full_me": _BUDGET,
    "weak_drive": {
        "n_a": "steady-state <a^+ a> (master equation)",
        "n_b": "steady-state <b^+ b> (master equation)",
        "n_a0": "no-atom reference <a^+ a> (master equation)",
        "n_b0": "no-atom reference <b^+ b> (master equation)",
        "Phi_a": "output flux 2 kappa n_a",
        "Phi_b": "output flux 2 kappa n_b",
        "R_a": "Phi_a / (Phi_a0 + Phi_b0)",
        "R_b": "Phi_b / (Phi_a0 + Phi_b0)",
        "D_ss": "steady-state directionality from fluxes",
        "R_a_coherent": "R_a from linearized means |<a>|^2",
        "R_b_coherent": "R_b from linearized means |<b>|^2",
        "D_ss_coherent": "D_ss from linearized means",
        "g2_a0": "zero-delay g2 of mode a (master equation)",
        "g2_b0": "zero-delay g2 of mode b (master equation)",
        "g2_b0_purestate": "zero-delay g2 of mode b (weak-drive pure state, finite drive)",
        "mean_sigma_q_re": "Re <sigma_q-> (master equation)",
        "mean_sigma_q_im": "Im <sigma_q-> (master equation)",
        "ss_residual": "norm of L(rho_ss)",
    },
    "correlations": {
        "n_a": "steady-state <a^+ a> (master equation)",
        "n_b": "steady-state <b^+ b> (master equation)",
        "g2_a0": "zero-delay g2 of mode a (master equation)",
        "g2_b0": "zero-delay g2 of mode b (master equation)",
        "g2_a0_purestate": "zero-delay g2 of mode a (weak-drive pure state, finite drive)",
        "g2_b0_purestate": "zero-delay g2 of mode b (weak-drive pure state, finite drive)",
        "g2_a0_limit": "zero-delay g2 of mode a (vanishing-drive closed form; nan if not applicable)",
        "g2_b0_limit": "zero-delay g2 of mode b (vanishing-drive closed form)",
        "ill_conditioned": "1 if a steady photon number is below 1e-10",
        "ss_residual": "norm of L(rho_ss)",
    },
}


@dataclass
class PointResult:
    index: int
    params: SystemParams
    values: dict
    error: str
    wall_time: float

    @property
    def ok(self) -> bool:
        return not self.error


def _budget_row(params: SystemParams, solver: SolverOptions, use_me: bool) -> dict:
    if use_me:
        b = emission_budget(params, T_final=solver.horizon, rtol=solver.rtol, atol=solver.atol)
    else:
        b = amplitude_emission_budget(params, T_final=solver.horizon, rtol=solver.rtol, atol=solver.atol)
    row = {"P_a": b.P_a, "P_b": b.P_b, "P_spont_q": b.P_spont_q, "P_spont_atom": b.P_spont_atom,
           "budget_total": b.total, "residual": b.residual, "horizon": b.horizon}
    row["D"] = directionality(b.P_a, b.P_b) if b.P_a + b.P_b > 0 else math.nan
    try:
        row["P_a_adiabatic"], row["P_b_adiabatic"] = adiabatic_emission_probabilities(params)
    except (ValueError, ZeroDivisionError):
        row["P_a_adiabatic"] = row["P_b_adiabatic"] = math.nan
    try:
        row["dark_overlap"] = dark_state_overlap(params)
    except ValueError:
        row["dark_overlap"] = math.nan
    return row


def _steady(params: SystemParams):
    L = build_liouvillian(params)
    rho = steady_state(L)
    ops = elementary_operators(L.basis)
    resid = float(np.linalg.norm(L.matrix @ rho.matrix.reshape(-1)))
    return rho, ops, resid


def _weak_drive_row(params: SystemParams, solver: SolverOptions) -> dict:
    rho, ops, resid = _steady(params)
    ref, ref_ops, _ = _steady(no_atom_params(params))
    n_a, n_b = rho.expect(ops.n_a).real, rho.expect(ops.n_b).real
    n_a0, n_b0 = ref.expect(ref_ops.n_a).real, ref.expect(ref_ops.n_b).real
    full = flux_report(params, n_a=n_a, n_b=n_b, reference=(n_a0, n_b0))
    coh = flux_report(params)
    sq = rho.expect(ops.sigma_q_minus)
    try:
        g2b_ps = g2_zero_closed(params, "finite")[1]
    except (ValueError, ZeroDivisionError):
        g2b_ps = math.nan
    return {
        "n_a": n_a, "n_b": n_b, "n_a0": n_a0, "n_b0": n_b0, "Phi_a": full.Phi_a, "Phi_b": full.Phi_b,
        "R_a": full.R_a, "R_b": full.R_b, "D_ss": full.D_ss,
        "R_a_coherent": coh.R_a, "R_b_coherent": coh.R_b, "D_ss_coherent": coh.D_ss,
        "g2_a0": g2_full_me(params, "a", [0.0], rho_ss=rho).g2[0],
        "g2_b0": g2_full_me(params, "b", [0.0], rho_ss=rho).g2[0],
        "g2_b0_purestate": g2b_ps,
        "mean_sigma_q_re": sq.real, "mean_sigma_q_im": sq.imag, "ss_residual": resid,
    }


def _correlations_row(params: SystemParams, solver: SolverOptions) -> dict:
    rho, ops, resid = _steady(params)
    ca = g2_full_me(params, "a", [0.0], rho_ss=rho)
    cb = g2_full_me(params, "b", [0.0], rho_ss=rho)
    row = {"n_a": rho.expect(ops.n_a).real, "n_b": rho.expect(ops.n_b).real,
           "g2_a0": ca.g2[0], "g2_b0": cb.g2[0]}
    try:
        row["g2_a0_purestate"], row["g2_b0_purestate"] = g2_zero_closed(params, "finite")
    except (ValueError, ZeroDivisionError):
        row["g2_a0_purestate"] = row["g2_b0_purestate"] = math.nan
    try:
        row["g2_a0_limit"], row["g2_b0_limit"] = g2_zero_closed(params, "limit")
    except (ValueError, ZeroDivisionError):
        row["g2_a0_limit"] = row["g2_b0_limit"] = math.nan
    row["ill_conditioned"] = int(ca.ill_conditioned or cb.ill_conditioned)
    row["ss_residual"] = resid
    return row


def evaluate(mode: str, params: SystemParams, solver: SolverOptions) -> dict:
    """Observables of one grid point (raises on solver failure)."""
    if mode == "single_excitation":
        return _budget_row(params, solver, use_me=False)
    if mode == "full_me":
        return _budget_row(params, solver, use_me=True)
    if mode == "weak_drive":
        return _weak_drive_row(params, solver)
    if mode == "correlations":
        return _correlations_row(params, solver)
    raise ValueError(f"unknown mode {mode!r}")


def _evaluate_point(task) -> PointResult:
    index, mode, params, solver = task
    start = time.perf_counter()
    # single BLAS thread so results do not depend on how many workers share the machine
    with threadpool_limits(limits=1):
        try:
            values = evaluate(mode, params, solver)
            error = ""
        except Exception as exc:  # crash isolation: the row records the failure
            values = {}
            error = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    return PointResult(index, params, values, error, time.perf_counter() - start)


def run_sweep(config: ScenarioConfig, workers: int | None = None) -> Iterator[PointResult]:
    """Yield one PointResult per grid point, in grid order whatever the worker count."""
    workers = config.workers if workers is None else workers
    tasks = [(k, config.mode, p, config.solver) for k, p in enumerate(config.grid())]
    total = len(tasks)
    if workers <= 1 or total <= 1:
        results = map(_evaluate_point, tasks)
        for res in results:
            _log_point(res, total)
            yield res
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for res in pool.map(_evaluate_point, tasks, chunksize=1):
            _log_point(res, total)
            yield res


def _log_point(res: PointResult, total: int) -> None:
    status = "ok" if res.ok else f"error ({res.error})"
    log.info("point %d/%d %s in %.3fs", res.index + 1, total, status, res.wall_time)
