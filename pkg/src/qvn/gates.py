"""Standard gates and unitary error bases."""
from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

from .core import QuantumError, Unitary

_s2 = 1 / np.sqrt(2)

I2 = Unitary(np.eye(2), "I")
X = Unitary([[0, 1], [1, 0]], "X")
Y = Unitary([[0, -1j], [1j, 0]], "Y")
Z = Unitary([[1, 0], [0, -1]], "Z")
H = Unitary([[_s2, _s2], [_s2, -_s2]], "H")
S = Unitary([[1, 0], [0, 1j]], "S")
T = Unitary([[1, 0], [0, np.exp(1j * np.pi / 4)]], "T")
CNOT = Unitary([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], "CNOT", (2, 2))
CZ = Unitary(np.diag([1, 1, 1, -1]), "CZ", (2, 2))
SWAP = Unitary([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], "SWAP", (2, 2))
TOFFOLI = Unitary(np.block([[np.eye(6), np.zeros((6, 2))],
                            [np.zeros((2, 6)), X.matrix]]), "TOFFOLI", (2, 2, 2))

PAULIS = (I2, X, Y, Z)

_NAMED = {g.label: g for g in (I2, X, Y, Z, H, S, T, CNOT, CZ, SWAP, TOFFOLI)}
_NAMED["CX"] = CNOT
_NAMED["TOF"] = TOFFOLI


def gate(name: str) -> Unitary:
    """Look up a named gate (case-insensitive)."""
    try:
        return _NAMED[name.upper()]
    except KeyError:
        raise QuantumError(f"unknown gate {name!r}") from None


def gate_names() -> list[str]:
    return sorted(_NAMED)


def rz(theta: float) -> Unitary:
    return Unitary(np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)]), f"Rz({theta:g})")


def identity(d: int) -> Unitary:
    return Unitary(np.eye(d), "I" if d == 2 else f"I{d}")


def controlled(u: np.ndarray) -> np.ndarray:
    """``|0><0| (x) 1 + |1><1| (x) u``."""
    u = np.asarray(u)
    d = u.shape[0]
    out = np.eye(2 * d, dtype=complex)
    out[d:, d:] = u
    return out


def swap_matrix(d1: int, d2: int) -> np.ndarray:
    """Permutation ``|a,b> -> |b,a>`` from ``C^d1 (x) C^d2`` to ``C^d2 (x) C^d1``."""
    p = np.zeros((d1 * d2, d1 * d2))
    for a in range(d1):
        for b in range(d2):
            p[b * d1 + a, a * d2 + b] = 1
    return p


@lru_cache(maxsize=None)
def _error_basis(d: int) -> tuple:
    n = int(round(np.log2(d)))
    if 2 ** n == d:
        ops = []
        for idx in itertools.product(range(4), repeat=n):
            m = np.ones((1, 1))
            for k in idx:
                m = np.kron(m, PAULIS[k].matrix)
            ops.append(Unitary(m, "".join("IXYZ"[k] for k in idx)))
        return tuple(ops)
    # Weyl-Heisenberg X^a Z^b for other dimensions
    w = np.exp(2j * np.pi / d)
    shift = np.roll(np.eye(d), 1, axis=0)
    clock = np.diag(w ** np.arange(d))
    return tuple(Unitary(np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b),
                         f"W{a}{b}")
                 for a in range(d) for b in range(d))


def error_basis(d: int) -> tuple:
    """Unitary error basis of ``d*d`` operators, element 0 the identity.

    Pauli strings when ``d`` is a power of two, Weyl operators otherwise.
    The operators are orthogonal under the Hilbert-Schmidt inner product.
    """
    return _error_basis(int(d))


def bell_basis(d: int) -> np.ndarray:
    """Columns are ``(sigma_i (x) 1)|omega>`` for the error basis of dimension ``d``."""
    omega = np.eye(d).reshape(-1) / np.sqrt(d)
    return np.stack([np.kron(s.matrix, np.eye(d)) @ omega for s in error_basis(d)], axis=1)
