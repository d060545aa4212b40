"""Channel-state duality.

A channel ``E`` from dimension ``d_in`` to ``d_out`` is stored as the state
``(E (x) 1)(|omega><omega|)`` on head (output, subsystem 0) and tail (input,
subsystem 1). The trace-one normalization of ``|omega>`` is kept and the
factor ``d_in`` is restored when the channel is applied.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (ATOL, EIG_ATOL, DensityOperator, KrausChannel, PureState,
                   QuantumError, Unitary, partial_trace_matrix)


@dataclass(frozen=True, eq=False)
class ChoiState:
    """Dual state of a channel on ``head (x) tail``.

    ``vector`` is set for rank-one (unitary or isometry) programs and is what
    the state-vector protocols consume.
    """

    operator: DensityOperator
    purity_hint: bool = False
    vector: PureState | None = None

    def __post_init__(self):
        if len(self.operator.dims) != 2:
            raise QuantumError("a Choi state has exactly two subsystems (head, tail)")
        d_in = self.d_in
        tail = partial_trace_matrix(self.operator.matrix, self.operator.dims, [1])
        if np.abs(tail - np.eye(d_in) / d_in).max() > 1e-9:
            raise QuantumError("tail marginal is not maximally mixed: not trace preserving")
        if self.purity_hint and self.operator.purity() < 1 - EIG_ATOL:
            raise QuantumError("purity_hint set on a mixed Choi state")

    @classmethod
    def from_vector(cls, vec, d_out: int, d_in: int) -> "ChoiState":
        psi = vec if isinstance(vec, PureState) else PureState(vec, (d_out, d_in))
        psi = PureState(psi.amplitudes, (d_out, d_in))
        return cls(psi.density(), True, psi)

    @property
    def d_out(self) -> int:
        return self.operator.dims[0]

    @property
    def d_in(self) -> int:
        return self.operator.dims[1]

    @property
    def matrix(self) -> np.ndarray:
        return self.operator.matrix

    @property
    def is_pure(self) -> bool:
        return self.vector is not None

    def __repr__(self):
        kind = "pure" if self.is_pure else "mixed"
        return f"ChoiState({kind}, head={self.d_out}, tail={self.d_in})"


def _omega(d: int) -> np.ndarray:
    return np.eye(d).reshape(-1) / np.sqrt(d)


def choi_of_channel(e: KrausChannel) -> ChoiState:
    omega = _omega(e.d_in)
    vecs = [np.kron(k, np.eye(e.d_in)) @ omega for k in e.kraus_ops]
    m = sum(np.outer(v, v.conj()) for v in vecs)
    m = (m + m.conj().T) / 2
    op = DensityOperator(m, (e.d_out, e.d_in))
    if e.rank == 1:
        return ChoiState(op, True, PureState(vecs[0], (e.d_out, e.d_in)))
    return ChoiState(op)


def choi_of_unitary(u: Unitary) -> ChoiState:
    """``|U> = (U (x) 1)|omega>``."""
    if not isinstance(u, Unitary):
        u = Unitary(u)
    d = u.dim
    return ChoiState.from_vector(np.kron(u.matrix, np.eye(d)) @ _omega(d), d, d)


def choi_of_map(fn, d_in: int, d_out: int | None = None) -> np.ndarray:
    """Choi matrix of an arbitrary linear map given by its action ``fn``.

    ``fn`` receives ``|i><j|`` matrices. Returns the raw array so that
    non-physical maps can be inspected too.
    """
    blocks = {}
    for i in range(d_in):
        for j in range(d_in):
            e = np.zeros((d_in, d_in), dtype=complex)
            e[i, j] = 1
            blocks[i, j] = np.asarray(fn(e))
    d_out = blocks[0, 0].shape[0] if d_out is None else d_out
    m = np.zeros((d_out * d_in, d_out * d_in), dtype=complex)
    for (i, j), b in blocks.items():
        m += np.kron(b, np.outer(np.eye(d_in)[i], np.eye(d_in)[j]))
    return m / d_in


def kraus_from_choi(w: ChoiState, atol: float = EIG_ATOL) -> KrausChannel:
    """Kraus operators from the eigen-decomposition of a Choi state.

    Eigenvector ``v`` (flat index ``out * d_in + in``) becomes
    ``sqrt(lambda * d_in) * v.reshape(d_out, d_in)``. Eigenvalues at or below
    ``atol`` are dropped and the remaining set is re-normalized so it is
    exactly trace preserving.
    """
    d_out, d_in = w.d_out, w.d_in
    tail = partial_trace_matrix(w.matrix, (d_out, d_in), [1])
    if np.abs(tail - np.eye(d_in) / d_in).max() > 1e-9:
        raise QuantumError("Choi state violates trace preservation")
    vals, vecs = np.linalg.eigh(w.matrix)
    order = np.argsort(-vals)
    ops = [np.sqrt(vals[i] * d_in) * vecs[:, i].reshape(d_out, d_in)
           for i in order if vals[i] > atol]
    s = sum(k.conj().T @ k for k in ops)
    ws, vs = np.linalg.eigh(s)
    fix = (vs / np.sqrt(ws)) @ vs.conj().T
    return KrausChannel(tuple(k @ fix for k in ops))


def apply_choi_matrix(choi: np.ndarray, m: np.ndarray, d_out: int, d_in: int) -> np.ndarray:
    """``d_in * tr_tail[choi (1 (x) m^t)]`` for any operator ``m``."""
    c = np.asarray(choi).reshape(d_out, d_in, d_out, d_in)
    return d_in * np.einsum("aibj,ij->ab", c, m)


def apply_via_choi(w: ChoiState, rho: DensityOperator) -> DensityOperator:
    """Run the stored channel on ``rho`` through the readout identity."""
    if rho.dim != w.d_in:
        raise QuantumError(f"program expects input dimension {w.d_in}, got {rho.dim}")
    out = apply_choi_matrix(w.matrix, rho.matrix, w.d_out, w.d_in)
    return DensityOperator((out + out.conj().T) / 2)


def is_cptp_choi(m: np.ndarray, d_out: int, d_in: int, atol: float = EIG_ATOL) -> bool:
    """PSD, unit trace and maximally mixed tail marginal."""
    m = np.asarray(m)
    if np.abs(m - m.conj().T).max() > atol:
        return False
    if np.linalg.eigvalsh((m + m.conj().T) / 2).min() < -atol:
        return False
    tail = partial_trace_matrix(m, (d_out, d_in), [1])
    return bool(np.abs(tail - np.eye(d_in) / d_in).max() <= atol)


def unitary_from_choi(w: ChoiState) -> np.ndarray:
    """Recover ``U`` (up to global phase) from a pure Choi state."""
    if not w.is_pure:
        raise QuantumError("only pure Choi states encode a unitary")
    return np.sqrt(w.d_in) * w.vector.amplitudes.reshape(w.d_out, w.d_in)


__all__ = [
    "ChoiState", "choi_of_channel", "choi_of_unitary", "choi_of_map", "kraus_from_choi",
    "apply_via_choi", "apply_choi_matrix", "is_cptp_choi", "unitary_from_choi", "ATOL",
]
