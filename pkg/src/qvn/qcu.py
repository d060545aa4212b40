"""Quantum control unit.

Controlling an unknown gate is impossible without extra knowledge, because
the gate is only defined up to a global phase. A known eigenpair (the flag)
fixes that phase: the data is swapped onto the flag wire when the control is
on, the gate acts on whatever sits on the flag wire, and the swap is undone.
When the control is off the gate acts on its own eigenstate and contributes
the known eigenvalue, which is compensated on the control qubit.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from . import gates
from .core import PureState, QuantumError, Unitary, as_rng
from .memory import ProgramSlot
from .register import Register

FLAG_TOL = 1e-6
DETERMINISTIC = "deterministic-input"


class BlackBox:
    """Opaque gate: usable only through :meth:`apply`.

    The matrix is captured in a closure so protocol code cannot read it;
    tests build their oracles from the matrix they passed in.
    """

    def __init__(self, action, dim: int | None = None, label: str = "U"):
        if isinstance(action, Unitary):
            m = action.matrix
            action, dim = (lambda v: m @ v), m.shape[0]
        elif not callable(action):
            m = np.asarray(action, dtype=complex)
            action, dim = (lambda v: m @ v), m.shape[0]
        if dim is None:
            raise QuantumError("dimension required for a callable black box")
        self._action: Callable = action
        self.dim = int(dim)
        self.label = label
        self.calls = 0

    @classmethod
    def from_slot(cls, slot: ProgramSlot) -> "BlackBox":
        """Ideal execution of a stored pure program through its Choi state."""
        if not slot.choi.is_pure:
            raise QuantumError("only unitary programs can act as black boxes")
        slot.check_available()
        a = np.sqrt(slot.d_in) * slot.choi.vector.amplitudes.reshape(slot.d_out, slot.d_in)
        return cls(lambda v: a @ v, slot.d_in, slot.label)

    def apply(self, vec) -> np.ndarray:
        v = np.asarray(vec, dtype=complex)
        if v.shape[0] != self.dim:
            raise QuantumError(f"black box acts on dimension {self.dim}, got {v.shape[0]}")
        self.calls += 1
        return self._action(v)

    def __repr__(self):
        return f"BlackBox({self.label}, d={self.dim})"


@dataclass(frozen=True, eq=False)
class FlagSpec:
    eigenvalue: complex
    eigenstate: PureState

    def __post_init__(self):
        if abs(abs(self.eigenvalue) - 1) > 1e-9:
            raise QuantumError("flag eigenvalue must have unit modulus")

    def residual(self, u: BlackBox) -> float:
        v = self.eigenstate.amplitudes
        return float(np.linalg.norm(u.apply(v) - self.eigenvalue * v))

    @classmethod
    def from_unitary(cls, u: Unitary, which: int = 0) -> "FlagSpec":
        """Eigenpair of a known matrix, for preparing tests and demos."""
        w, v = np.linalg.eig(u.matrix)
        order = np.argsort(np.angle(w))
        k = order[which]
        return cls(complex(w[k] / abs(w[k])), PureState.normalized(v[:, k]))


@dataclass(frozen=True)
class ControlSignal:
    """Deterministic control input: a classical bit or qubit amplitudes."""

    kind: str
    alpha: complex
    beta: complex
    provenance: str = DETERMINISTIC

    def __post_init__(self):
        if self.provenance != DETERMINISTIC:
            raise QuantumError("control signals must be deterministic inputs, "
                               "not outcomes of a random measurement")
        if self.kind not in ("bit", "qubit"):
            raise QuantumError(f"unknown control kind {self.kind!r}")
        if abs(abs(self.alpha) ** 2 + abs(self.beta) ** 2 - 1) > 1e-10:
            raise QuantumError("control amplitudes are not normalized")

    @classmethod
    def bit(cls, b: int) -> "ControlSignal":
        return cls("bit", complex(1 - b), complex(b))

    @classmethod
    def qubit(cls, alpha, beta) -> "ControlSignal":
        return cls("qubit", complex(alpha), complex(beta))

    @classmethod
    def from_measurement(cls, *args, **kw):
        raise QuantumError("a control signal cannot come from a measurement branch; "
                           "it must be supplied as deterministic input")

    @property
    def state(self) -> PureState:
        return PureState(np.array([self.alpha, self.beta]))


class ControlledResult(NamedTuple):
    state: PureState  # control (x) data
    flag_purity: float
    flag_fidelity: float
    qubits_used: int
    probability: float = 1.0
    success: bool = True


def _cswap(d: int) -> np.ndarray:
    sw = gates.swap_matrix(d, d)
    return np.kron(np.diag([1, 0]), np.eye(d * d)) + np.kron(np.diag([0, 1]), sw)


def _check_flag(u: BlackBox, flag: FlagSpec):
    if flag.eigenstate.dim != u.dim:
        raise QuantumError("flag dimension does not match the gate")
    r = flag.residual(u)
    if r > FLAG_TOL:
        raise QuantumError(f"bad flag: |U l - lambda l| = {r:.3g} exceeds {FLAG_TOL}")


def _flag_stats(reg: Register, wire: str, flag: FlagSpec) -> tuple[float, float]:
    rho = reg.reduced(wire)
    v = flag.eigenstate.amplitudes
    return float(np.trace(rho @ rho).real), float(np.real(v.conj() @ rho @ v))


def controlled_unknown(u: BlackBox, flag: FlagSpec, control: ControlSignal,
                       data: PureState) -> ControlledResult:
    """Apply ``|0><0| (x) 1 + |1><1| (x) U`` using only black-box calls to ``u``."""
    if not isinstance(u, BlackBox):
        u = BlackBox(u)
    _check_flag(u, flag)
    d = u.dim
    if data.dim != d:
        raise QuantumError("data dimension does not match the gate")
    reg = Register()
    reg.add("c", control.state)
    reg.add("data", data)
    reg.add("flag", flag.eigenstate)
    cs = _cswap(d)
    reg.apply(cs, ["c", "data", "flag"], "cswap")
    reg.apply_map(u.apply, ["flag"], u.label)
    reg.apply(cs, ["c", "data", "flag"], "cswap")
    reg.apply(np.diag([1 / flag.eigenvalue, 1]), ["c"], "phase(1/lambda)")
    purity, fid = _flag_stats(reg, "flag", flag)
    reg.discard("flag")
    return ControlledResult(PureState(reg.vector(["c", "data"]), (2, d)), purity, fid,
                            reg.peak)


def controlled_program(slot: ProgramSlot, flag: FlagSpec, control: ControlSignal,
                       data: PureState, rng=None, force=None) -> ControlledResult:
    """Controlled execution of a stored program state.

    The flag wire is teleported into the program by projecting (flag,
    program tail) onto ``|omega>``; the program head becomes the new flag
    wire. Only outcome 0 (probability ``1/d^2``) is usable for an unknown
    program; other outcomes are reported with ``success=False``.
    """
    slot.check_available()
    if not slot.choi.is_pure:
        raise QuantumError("controlled execution needs a pure program state")
    d = slot.d_in
    # simulation-side flag check against the stored state
    _check_flag(BlackBox.from_slot(slot), flag)
    reg = Register(as_rng(rng))
    reg.add("c", control.state)
    reg.add("data", data)
    reg.add("flag", flag.eigenstate)
    reg.add(["ph", "pt"], slot.choi.vector)
    cs = _cswap(d)
    reg.apply(cs, ["c", "data", "flag"], "cswap")
    k, p = reg.measure(["flag", "pt"], basis=gates.bell_basis(d), force=force, name="bell")
    slot.consumed = True
    reg.apply(cs, ["c", "data", "ph"], "cswap")
    reg.apply(np.diag([1 / flag.eigenvalue, 1]), ["c"], "phase(1/lambda)")
    purity, fid = _flag_stats(reg, "ph", flag)
    if k == 0:
        reg.discard("ph")
        state = PureState(reg.vector(["c", "data"]), (2, d))
    else:
        rho = reg.reduced(["c", "data"])
        w, v = np.linalg.eigh(rho)
        state = PureState.normalized(v[:, -1], (2, d))
    return ControlledResult(state, purity, fid, reg.peak, p, k == 0)


class LCUBranch(NamedTuple):
    outcome: str
    probability: float
    state: PureState | None
    success: bool


def lcu_two(u1, u2, signal: ControlSignal, psi: PureState, flag1: FlagSpec | None = None,
            flag2: FlagSpec | None = None) -> list[LCUBranch]:
    """Probabilistic ``alpha U1 + beta U2`` on ``psi`` from two flagged gates.

    ``u1``/``u2`` are black boxes or flagged program slots. The control is
    prepared in ``(alpha, beta)``, selects U1 when 0 and U2 when 1, and is
    measured in the X basis; outcome ``+`` succeeds with probability
    ``|alpha U1 psi + beta U2 psi|^2 / 2``. Both branches are returned.
    """
    boxes, flags = [], []
    for u, f in ((u1, flag1), (u2, flag2)):
        if isinstance(u, ProgramSlot):
            f = f if f is not None else u.flag
            u = BlackBox.from_slot(u)
        if f is None:
            raise QuantumError("every program in a linear combination needs a flag")
        _check_flag(u, f)
        boxes.append(u)
        flags.append(f)
    d = psi.dim
    if any(b.dim != d for b in boxes):
        raise QuantumError("programs and input must share a dimension")
    reg = Register()
    reg.add("c", signal.state)
    reg.add("data", psi)
    reg.add("f1", flags[0].eigenstate)
    reg.add("f2", flags[1].eigenstate)
    cs = _cswap(d)
    anti = np.kron(gates.X.matrix, np.eye(d * d)) @ cs @ np.kron(gates.X.matrix, np.eye(d * d))
    reg.apply(anti, ["c", "data", "f1"], "anti-cswap")
    reg.apply(cs, ["c", "data", "f2"], "cswap")
    reg.apply_map(boxes[0].apply, ["f1"], boxes[0].label)
    reg.apply_map(boxes[1].apply, ["f2"], boxes[1].label)
    reg.apply(anti, ["c", "data", "f1"], "anti-cswap")
    reg.apply(cs, ["c", "data", "f2"], "cswap")
    reg.apply(np.diag([1 / flags[1].eigenvalue, 1 / flags[0].eigenvalue]), ["c"], "phase")
    reg.discard("f1")
    reg.discard("f2")
    probs = reg.probabilities("c", gates.H.matrix)
    out = []
    for k, name in enumerate("+-"):
        if probs[k] < 1e-13:
            out.append(LCUBranch(name, 0.0, None, k == 0))
            continue
        r = reg.copy()
        _, p = r.measure("c", basis=gates.H.matrix, force=k)
        out.append(LCUBranch(name, p, PureState(r.vector(["data"])), k == 0))
    return out


def disentangle_check(state: PureState, control_wires, data_wires,
                      atol: float = 1e-8) -> tuple[bool, float]:
    """Whether the control part is unentangled; returns ``1 - purity`` as measure."""
    control_wires, data_wires = list(control_wires), list(data_wires)
    if sorted(control_wires + data_wires) != list(range(len(state.dims))):
        raise QuantumError("control and data wires must partition the state")
    reg = Register()
    names = [str(i) for i in range(len(state.dims))]
    reg.add(names, state)
    rho = reg.reduced([names[i] for i in control_wires])
    measure = max(0.0, 1 - float(np.trace(rho @ rho).real))
    return measure <= atol, measure
