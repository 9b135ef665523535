"""Parameters, composite basis, operators, Hamiltonians and Liouvillian.

The composite space is QD (2) x atom (3) x mode a (n_max+1) x mode b
(n_max+1), flattened row-major in that order.  Density operators are
vectorized row-major as well, so ``vec(A X B) = kron(A, B.T) @ vec(X)``.
"""

from __future__ import annotations

import dataclasses
import itertools
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "SystemParams",
    "CompositeBasis",
    "Operators",
    "Liouvillian",
    "build_basis",
    "elementary_operators",
    "excitation_number",
    "build_hamiltonian_driven",
    "build_hamiltonian_undriven",
    "lindblad_dissipator",
    "build_liouvillian",
    "QD_LEVELS",
    "ATOM_LEVELS",
]

QD_LEVELS = ("G", "E")
ATOM_LEVELS = ("g", "+", "-")

_RATE_FIELDS = ("g_q", "g_a", "g_b", "kappa", "gamma_q", "gamma_a")
_DETUNING_FIELDS = ("delta_c", "delta_q", "delta_a", "delta_b")


@dataclass(frozen=True)
class SystemParams:
    """All physical inputs of one scenario.

    Rates are in angular-frequency units (the usual choice is kappa = 1).
    ``omega`` may be complex.  ``gamma_a`` is applied to both atomic
    transitions.
    """

    g_q: float = 0.0
    g_a: float = 0.0
    g_b: float = 0.0
    kappa: float = 1.0
    gamma_q: float = 0.0
    gamma_a: float = 0.0
    delta_c: float = 0.0
    delta_q: float = 0.0
    delta_a: float = 0.0
    delta_b: float = 0.0
    omega: complex = 0.0
    n_max: int = 1

    def __post_init__(self):
        problems = self.validation_errors()
        if problems:
            raise ValueError("invalid SystemParams: " + "; ".join(problems))

    def validation_errors(self) -> list[str]:
        errors = []
        for name in _RATE_FIELDS:
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                errors.append(f"{name} must be finite and >= 0 (got {value!r})")
        for name in _DETUNING_FIELDS:
            if not np.isfinite(getattr(self, name)):
                errors.append(f"{name} must be finite")
        if not np.isfinite(complex(self.omega)):
            errors.append("omega must be finite")
        if isinstance(self.n_max, bool) or int(self.n_max) != self.n_max or self.n_max < 1:
            errors.append(f"n_max must be an integer >= 1 (got {self.n_max!r})")
        return errors

    def replace(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in dataclasses.fields(cls))


@dataclass(frozen=True)
class CompositeBasis:
    n_max: int
    dims: tuple[int, int, int, int] = field(init=False)

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError(f"n_max must be an integer >= 1, got {self.n_max!r}")
        n = int(self.n_max) + 1
        object.__setattr__(self, "dims", (2, 3, n, n))

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def index(self, qd: int, atom: int, n_a: int, n_b: int) -> int:
        """Flat index of ``|qd, atom, n_a, n_b>`` (QD: 0=G, 1=E; atom: 0=g, 1=+, 2=-)."""
        for value, size in zip((qd, atom, n_a, n_b), self.dims):
            if not 0 <= value < size:
                raise IndexError(f"label {(qd, atom, n_a, n_b)} outside dims {self.dims}")
        return int(np.ravel_multi_index((qd, atom, n_a, n_b), self.dims))

    def labels(self, index: int) -> tuple[int, int, int, int]:
        if not 0 <= index < self.dim:
            raise IndexError(f"index {index} outside basis of dimension {self.dim}")
        return tuple(int(i) for i in np.unravel_index(index, self.dims))

    def __iter__(self) -> Iterator[tuple[int, int, int, int]]:
        return itertools.product(*(range(d) for d in self.dims))

    def ket(self, qd: int, atom: int, n_a: int = 0, n_b: int = 0) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=complex)
        vec[self.index(qd, atom, n_a, n_b)] = 1.0
        return vec

    def projector(self, qd: int, atom: int, n_a: int = 0, n_b: int = 0) -> np.ndarray:
        vec = self.ket(qd, atom, n_a, n_b)
        return np.outer(vec, vec.conj())

    def name(self, index: int) -> str:
        q, at, na, nb = self.labels(index)
        return f"|{QD_LEVELS[q]},{ATOM_LEVELS[at]},{na},{nb}>"


def build_basis(n_max: int) -> CompositeBasis:
    return CompositeBasis(n_max)


@dataclass(frozen=True)
class Operators:
    """Lowering operators embedded in the composite space."""

    basis: CompositeBasis
    a: np.ndarray
    b: np.ndarray
    sigma_q_minus: np.ndarray
    sigma_a_minus: np.ndarray
    sigma_b_minus: np.ndarray

    @property
    def identity(self) -> np.ndarray:
        return np.eye(self.basis.dim, dtype=complex)

    @property
    def n_a(self) -> np.ndarray:
        return self.a.conj().T @ self.a

    @property
    def n_b(self) -> np.ndarray:
        return self.b.conj().T @ self.b

    @property
    def p_q(self) -> np.ndarray:
        """Projector onto the QD excited level."""
        return self.sigma_q_minus.conj().T @ self.sigma_q_minus

    @property
    def p_plus(self) -> np.ndarray:
        return self.sigma_a_minus.conj().T @ self.sigma_a_minus

    @property
    def p_minus(self) -> np.ndarray:
        return self.sigma_b_minus.conj().T @ self.sigma_b_minus


def _embed(local: np.ndarray, slot: int, dims) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for k, d in enumerate(dims):
        out = np.kron(out, local if k == slot else np.eye(d))
    return out


def elementary_operators(basis: CompositeBasis) -> Operators:
    dims = basis.dims
    n = dims[2]
    sq = np.zeros((2, 2))
    sq[0, 1] = 1.0
    sa = np.zeros((3, 3))
    sa[0, 1] = 1.0
    sb = np.zeros((3, 3))
    sb[0, 2] = 1.0
    ladder = np.diag(np.sqrt(np.arange(1, n)), k=1)
    return Operators(
        basis=basis,
        a=_embed(ladder, 2, dims),
        b=_embed(ladder, 3, dims),
        sigma_q_minus=_embed(sq, 0, dims),
        sigma_a_minus=_embed(sa, 1, dims),
        sigma_b_minus=_embed(sb, 1, dims),
    )


def excitation_number(ops: Operators) -> np.ndarray:
    return ops.p_q + ops.p_plus + ops.p_minus + ops.n_a + ops.n_b


def _coupling(params: SystemParams, ops: Operators) -> np.ndarray:
    sqp = ops.sigma_q_minus.conj().T
    sap = ops.sigma_a_minus.conj().T
    sbp = ops.sigma_b_minus.conj().T
    v = (
        params.g_q * sqp @ (ops.a + ops.b)
        + params.g_a * sap @ ops.a
        + params.g_b * sbp @ ops.b
    )
    return v + v.conj().T


def build_hamiltonian_driven(params: SystemParams, basis: CompositeBasis | None = None) -> np.ndarray:
    """Hamiltonian in the frame of the drive laser.

    Contains the cavity detuning, the three emitter detunings, the
    Jaynes-Cummings couplings and the coherent drive of the QD.
    """
    basis = basis or build_basis(params.n_max)
    ops = elementary_operators(basis)
    omega = complex(params.omega)
    sqp = ops.sigma_q_minus.conj().T
    h = (
        params.delta_c * (ops.n_a + ops.n_b)
        + params.delta_q * ops.p_q
        + params.delta_a * ops.p_plus
        + params.delta_b * ops.p_minus
        + _coupling(params, ops)
        + omega * sqp
        + np.conj(omega) * ops.sigma_q_minus
    )
    return h.astype(complex)


def build_hamiltonian_undriven(params: SystemParams, basis: CompositeBasis | None = None) -> np.ndarray:
    """Hamiltonian in the cavity frame, without drive; ``params.omega`` and
    ``params.delta_c`` are ignored."""
    basis = basis or build_basis(params.n_max)
    ops = elementary_operators(basis)
    h = (
        params.delta_q * ops.p_q
        + params.delta_a * ops.p_plus
        + params.delta_b * ops.p_minus
        + _coupling(params, ops)
    )
    return h.astype(complex)


def _spre(op) -> sp.csr_matrix:
    return sp.kron(sp.csr_matrix(op), sp.identity(op.shape[0], format="csr"), format="csr")


def _spost(op) -> sp.csr_matrix:
    return sp.kron(sp.identity(op.shape[0], format="csr"), sp.csr_matrix(op).T, format="csr")


def lindblad_dissipator(op: np.ndarray) -> sp.csr_matrix:
    """Superoperator of ``D[O] rho = 2 O rho O^+ - O^+ O rho - rho O^+ O``.

    Note the factor 2 on the jump term (no 1/2 on the anticommutator).
    """
    op = np.asarray(op, dtype=complex)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ValueError("dissipator needs a square operator")
    od = op.conj().T
    odo = od @ op
    jump = sp.kron(sp.csr_matrix(op), sp.csr_matrix(op.conj()), format="csr")
    return (2.0 * jump - _spre(odo) - _spost(odo)).tocsr()


def hamiltonian_superoperator(h: np.ndarray) -> sp.csr_matrix:
    return (-1j * (_spre(h) - _spost(h))).tocsr()


@dataclass(frozen=True)
class Liouvillian:
    """Generator of the master equation acting on row-major vectorized rho."""

    matrix: sp.csr_matrix
    basis: CompositeBasis
    params: SystemParams
    driven: bool

    @property
    def dim(self) -> int:
        return self.basis.dim

    def apply(self, rho: np.ndarray) -> np.ndarray:
        d = self.dim
        return (self.matrix @ np.asarray(rho, dtype=complex).reshape(d * d)).reshape(d, d)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def trace_defect(self) -> float:
        """Largest trace-functional component of the generator, relative to its norm."""
        d = self.dim
        trace_row = np.eye(d).reshape(d * d)
        leak = np.abs(self.matrix.T @ trace_row).max() if self.matrix.nnz else 0.0
        scale = spla.norm(self.matrix) if self.matrix.nnz else 1.0
        return float(leak / scale)


def collapse_channels(params: SystemParams, ops: Operators) -> list[tuple[float, np.ndarray]]:
    """(rate, operator) pairs with the prefactors multiplying ``D[.]``."""
    return [
        (params.kappa, ops.a),
        (params.kappa, ops.b),
        (params.gamma_q / 2, ops.sigma_q_minus),
        (params.gamma_a / 2, ops.sigma_a_minus),
        (params.gamma_a / 2, ops.sigma_b_minus),
    ]


def build_liouvillian(
    params: SystemParams, basis: CompositeBasis | None = None, driven: bool = True
) -> Liouvillian:
    basis = basis or build_basis(params.n_max)
    ops = elementary_operators(basis)
    h = build_hamiltonian_driven(params, basis) if driven else build_hamiltonian_undriven(params, basis)
    gen = hamiltonian_superoperator(h)
    for rate, op in collapse_channels(params, ops):
        if rate:
            gen = gen + rate * lindblad_dissipator(op)
    gen = sp.csr_matrix(gen, dtype=complex)
    gen.eliminate_zeros()
    return Liouvillian(matrix=gen, basis=basis, params=params, driven=driven)
