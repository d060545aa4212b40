"""JSON encoding of complex matrices: row-major lists of ``[re, im]`` pairs."""
from __future__ import annotations

import numpy as np

from .core import QuantumError


def matrix_to_json(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def matrix_from_json(rows) -> np.ndarray:
    try:
        a = np.asarray(rows, dtype=float)
    except (TypeError, ValueError) as exc:
        raise QuantumError(f"malformed matrix: {exc}") from None
    if a.ndim != 3 or a.shape[2] != 2 or a.shape[0] != a.shape[1]:
        raise QuantumError(f"matrix must be square rows of [re, im] pairs, got shape {a.shape}")
    return a[..., 0] + 1j * a[..., 1]


def vector_to_json(v) -> list:
    return [[float(z.real), float(z.imag)] for z in np.asarray(v, dtype=complex).reshape(-1)]


def vector_from_json(items) -> np.ndarray:
    a = np.asarray(items, dtype=float)
    if a.ndim != 2 or a.shape[1] != 2:
        raise QuantumError("vector must be a list of [re, im] pairs")
    return a[:, 0] + 1j * a[:, 1]


def clean(x):
    """Recursively convert numpy scalars/arrays into JSON-native values."""
    if isinstance(x, dict):
        return {str(k): clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return clean(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x
