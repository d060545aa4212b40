"""Wire-addressed state-vector simulator used by the protocol modules.

A :class:`Register` holds one pure state over named wires. Wires are added
when a resource (program state, ebit, ancilla) is brought in and removed when
measured, which makes the number of simultaneously live qubits a by-product
of the simulation rather than a separate bookkeeping exercise.
"""
from __future__ import annotations

import math

import numpy as np

from .core import ZERO_BRANCH, PureState, QuantumError, as_rng


def qubits_of(d: int) -> int:
    return int(math.ceil(math.log2(d))) if d > 1 else 0


class Register:
    def __init__(self, rng=None):
        self._t = np.ones((), dtype=complex)
        self.wires: list[str] = []
        self.dims: dict[str, int] = {}
        self.rng = as_rng(rng)
        self.peak = 0
        self.events: list[dict] = []
        self._uncounted: set[str] = set()

    # -- bookkeeping -------------------------------------------------------- #

    @property
    def qubits(self) -> int:
        """Live qubits, excluding wires marked as simulation-only."""
        return sum(qubits_of(self.dims[w]) for w in self.wires if w not in self._uncounted)

    def _touch(self, operation: str, wires, **info):
        self.peak = max(self.peak, self.qubits)
        event = {"operation": operation, "wires": list(wires), "qubits_in_use": self.qubits}
        event.update(info)
        self.events.append(event)

    def _axes(self, labels) -> list[int]:
        try:
            return [self.wires.index(w) for w in labels]
        except ValueError:
            raise QuantumError(f"unknown wire in {list(labels)}; live wires {self.wires}") from None

    def copy(self) -> "Register":
        r = Register.__new__(Register)
        r._t = self._t.copy()
        r.wires = list(self.wires)
        r.dims = dict(self.dims)
        r.rng = self.rng
        r.peak = self.peak
        r.events = list(self.events)
        r._uncounted = set(self._uncounted)
        return r

    # -- state manipulation ------------------------------------------------- #

    def add(self, labels, state, dims=None, counted: bool = True):
        """Tensor a new pure state onto fresh wires ``labels``."""
        labels = [labels] if isinstance(labels, str) else list(labels)
        if isinstance(state, PureState):
            vec, dims = state.amplitudes, state.dims if dims is None else dims
        else:
            vec = np.asarray(state, dtype=complex).reshape(-1)
        if dims is None:
            if len(labels) != 1:
                raise QuantumError("dims required when adding several wires")
            dims = (len(vec),)
        dims = tuple(int(d) for d in dims)
        if len(dims) != len(labels) or int(np.prod(dims)) != len(vec):
            raise QuantumError(f"dims {dims} inconsistent with wires {labels}")
        for w in labels:
            if w in self.dims:
                raise QuantumError(f"wire {w!r} already live")
        self._t = np.tensordot(self._t, vec.reshape(dims), axes=0)
        self.wires.extend(labels)
        self.dims.update(zip(labels, dims))
        if not counted:
            self._uncounted.update(labels)
        self._touch("allocate", labels)

    def apply(self, op, labels, name: str = ""):
        labels = [labels] if isinstance(labels, str) else list(labels)
        m = op.matrix if hasattr(op, "matrix") else np.asarray(op, dtype=complex)
        axes = self._axes(labels)
        dt = int(np.prod([self.dims[w] for w in labels]))
        if m.shape != (dt, dt):
            raise QuantumError(f"operator of shape {m.shape} cannot act on {labels}")
        t = np.moveaxis(self._t, axes, range(len(axes)))
        shape = t.shape
        t = (m @ t.reshape(dt, -1)).reshape(shape)
        self._t = np.moveaxis(t, range(len(axes)), axes)
        self._touch("gate", labels, gate=name or getattr(op, "label", ""))

    def apply_map(self, fn, labels, name: str = "black-box"):
        """Apply a linear action given only as ``fn(vector) -> vector``."""
        labels = [labels] if isinstance(labels, str) else list(labels)
        axes = self._axes(labels)
        dt = int(np.prod([self.dims[w] for w in labels]))
        t = np.moveaxis(self._t, axes, range(len(axes)))
        shape = t.shape
        cols = t.reshape(dt, -1)
        out = np.stack([np.asarray(fn(c), dtype=complex) for c in cols.T], axis=1)
        self._t = np.moveaxis(out.reshape(shape), range(len(axes)), axes)
        self._touch("gate", labels, gate=name)

    def _amplitudes(self, labels, basis):
        axes = self._axes(labels)
        dt = int(np.prod([self.dims[w] for w in labels]))
        t = np.moveaxis(self._t, axes, range(len(axes)))
        rest_shape = t.shape[len(axes):]
        flat = t.reshape(dt, -1)
        b = np.eye(dt) if basis is None else np.asarray(basis, dtype=complex)
        if b.shape[0] != dt:
            raise QuantumError(f"basis of dimension {b.shape[0]} cannot measure {labels}")
        return b, b.conj().T @ flat, rest_shape, axes

    def probabilities(self, labels, basis=None) -> np.ndarray:
        """Outcome distribution of measuring ``labels`` in ``basis`` (columns)."""
        labels = [labels] if isinstance(labels, str) else list(labels)
        _, amps, _, _ = self._amplitudes(labels, basis)
        return np.sum(np.abs(amps) ** 2, axis=1)

    def _pick(self, probs, force):
        if force is None:
            return self.rng.choice(probs / probs.sum())
        k = int(force)
        if probs[k] < ZERO_BRANCH:
            raise QuantumError(f"forced outcome {k} has zero probability")
        return k

    def measure(self, labels, basis=None, force=None, keep: bool = False,
                name: str = "measure") -> tuple[int, float]:
        """Rank-one projective measurement of ``labels``.

        ``basis`` holds the measurement vectors as columns (computational by
        default). The measured wires are removed unless ``keep`` is set.
        ``force`` selects an outcome instead of sampling it.
        """
        labels = [labels] if isinstance(labels, str) else list(labels)
        b, amps, rest_shape, axes = self._amplitudes(labels, basis)
        probs = np.sum(np.abs(amps) ** 2, axis=1)
        k = self._pick(probs, force)
        p = float(probs[k])
        post = amps[k] / np.sqrt(p)
        if keep:
            t = np.tensordot(b[:, k].reshape([self.dims[w] for w in labels]),
                             post.reshape(rest_shape), axes=0)
            self._t = np.moveaxis(t, range(len(axes)), axes)
        else:
            self._t = post.reshape(rest_shape)
            for w in labels:
                self.wires.remove(w)
                del self.dims[w]
                self._uncounted.discard(w)
        self._touch(name, labels, outcome=k, probability=p)
        return k, p

    def project(self, labels, projectors, force=None, name: str = "pvm") -> tuple[int, float]:
        """General projective measurement that keeps the wires."""
        labels = [labels] if isinstance(labels, str) else list(labels)
        axes = self._axes(labels)
        dt = int(np.prod([self.dims[w] for w in labels]))
        t = np.moveaxis(self._t, axes, range(len(axes)))
        shape = t.shape
        flat = t.reshape(dt, -1)
        posts = [np.asarray(p) @ flat for p in projectors]
        probs = np.array([np.vdot(v, v).real for v in posts])
        k = self._pick(probs, force)
        p = float(probs[k])
        t = (posts[k] / np.sqrt(p)).reshape(shape)
        self._t = np.moveaxis(t, range(len(axes)), axes)
        self._touch(name, labels, outcome=k, probability=p)
        return k, p

    def discard(self, labels, name: str = "discard"):
        """Remove wires that are in a product state with the rest."""
        labels = [labels] if isinstance(labels, str) else list(labels)
        rho = self.reduced(labels)
        if abs(np.trace(rho @ rho).real - 1) > 1e-8:
            raise QuantumError(f"wires {labels} are entangled with the register")
        w, v = np.linalg.eigh(rho)
        self.measure(labels, basis=v[:, ::-1], force=0, name=name)

    # -- read-out ----------------------------------------------------------- #

    def vector(self, labels) -> np.ndarray:
        """State vector in the wire order ``labels``; must cover every wire."""
        labels = list(labels)
        if sorted(labels) != sorted(self.wires):
            raise QuantumError(f"vector() needs all live wires {self.wires}")
        t = np.transpose(self._t, self._axes(labels))
        return t.reshape(-1).copy()

    def reduced(self, labels) -> np.ndarray:
        labels = [labels] if isinstance(labels, str) else list(labels)
        axes = self._axes(labels)
        dt = int(np.prod([self.dims[w] for w in labels]))
        t = np.moveaxis(self._t, axes, range(len(axes))).reshape(dt, -1)
        return t @ t.conj().T
