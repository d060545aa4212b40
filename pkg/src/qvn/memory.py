"""Quantum memory unit: programs stored as Choi states.

Writing injects an input state at the tail of a stored program with a binary
projective measurement; reading measures the head. Injection consumes the
program, and :func:`refresh` restores it from its white-box description or by
re-downloading it.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from .core import (DensityOperator, KrausChannel, PureState, PVM, QuantumError, Unitary,
                   as_rng, measure_pvm, partial_trace_matrix)
from .duality import ChoiState, choi_of_channel, choi_of_unitary
from .jsonio import matrix_from_json, matrix_to_json
from .register import Register, qubits_of

log = logging.getLogger(__name__)

ACCEPT = 0
COMPLEMENT = 1  # the "0-bar" outcome of the binary injection PVM


class ConsumedProgramError(QuantumError):
    """A consumed program was used before being refreshed."""


class NoCloningError(QuantumError):
    """Copying a program whose classical description is unknown."""


@dataclass
class ProgramSlot:
    choi: ChoiState
    label: str
    whitebox: Unitary | KrausChannel | None = None
    flag: object = None  # qcu.FlagSpec
    consumed: bool = False
    encoding: str = "quantum"
    source: Callable[[], ChoiState] | None = field(default=None, repr=False)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.whitebox is not None:
            ref = _choi_of(self.whitebox)
            if np.abs(ref.matrix - self.choi.matrix).max() > 1e-9:
                raise QuantumError(f"slot {self.label!r}: Choi state does not match its white box")

    @property
    def d_out(self) -> int:
        return self.choi.d_out

    @property
    def d_in(self) -> int:
        return self.choi.d_in

    @property
    def qubits(self) -> int:
        """Qubits needed to hold the program state (head plus tail)."""
        return qubits_of(self.d_out) + qubits_of(self.d_in)

    @property
    def unitary(self) -> Unitary | None:
        return self.whitebox if isinstance(self.whitebox, Unitary) else None

    def check_available(self):
        if self.consumed:
            raise ConsumedProgramError(f"program {self.label!r} was consumed; refresh it first")

    def clone(self, label: str) -> "ProgramSlot":
        """Fresh copy, possible only when the classical description is known."""
        if self.whitebox is None:
            raise NoCloningError(f"program {self.label!r} has no classical description "
                                 "and cannot be cloned")
        return ProgramSlot(_choi_of(self.whitebox), label, self.whitebox, self.flag,
                           encoding=self.encoding, source=self.source)


def _choi_of(desc) -> ChoiState:
    if isinstance(desc, ChoiState):
        return desc
    if isinstance(desc, Unitary):
        return choi_of_unitary(desc)
    if isinstance(desc, KrausChannel):
        return choi_of_channel(desc)
    raise QuantumError(f"cannot store a {type(desc).__name__} as a program")


class MemoryUnit:
    """Ordered collection of program slots plus a supply of ebits.

    Pool ebits are drawn on demand and only count towards the live-qubit
    budget once they are in use.
    """

    def __init__(self, ebit_pool: int = 64):
        if ebit_pool < 0:
            raise QuantumError("ebit pool cannot be negative")
        self.slots: dict[str, ProgramSlot] = {}
        self.ebit_pool = ebit_pool

    def store(self, desc, label: str, flag=None, encoding: str = "quantum",
              source=None) -> ProgramSlot:
        if label in self.slots:
            raise QuantumError(f"label {label!r} already stored")
        whitebox = desc if isinstance(desc, (Unitary, KrausChannel)) else None
        slot = ProgramSlot(_choi_of(desc), label, whitebox, flag, encoding=encoding,
                           source=source)
        self.slots[label] = slot
        log.debug("stored %s using %d qubits", label, slot.qubits)
        return slot

    def put(self, slot: ProgramSlot) -> ProgramSlot:
        if slot.label in self.slots:
            raise QuantumError(f"label {slot.label!r} already stored")
        self.slots[slot.label] = slot
        return slot

    def __getitem__(self, label: str) -> ProgramSlot:
        try:
            return self.slots[label]
        except KeyError:
            raise QuantumError(f"no program labelled {label!r}") from None

    def __contains__(self, label):
        return label in self.slots

    def remove(self, label: str) -> ProgramSlot:
        return self.slots.pop(label)

    def take_ebit(self) -> PureState:
        if self.ebit_pool <= 0:
            raise QuantumError("ebit pool is empty")
        self.ebit_pool -= 1
        return PureState(np.eye(2).reshape(-1) / np.sqrt(2), (2, 2))

    @property
    def qubits_in_use(self) -> int:
        """Qubits held by unconsumed programs."""
        return sum(s.qubits for s in self.slots.values() if not s.consumed)

    def load_library(self, path) -> list[ProgramSlot]:
        return [self.store(u, label) for label, u in load_program_library(path)]


def store_program(memory: MemoryUnit, desc, label: str, **kw) -> ProgramSlot:
    return memory.store(desc, label, **kw)


# --------------------------------------------------------------------------- #
#                                write / read                                 #
# --------------------------------------------------------------------------- #

class InjectionBranch(NamedTuple):
    outcome: int
    probability: float
    head_state: object  # PureState | DensityOperator | None


def _injection_branches(choi: ChoiState, psi: PureState) -> list[InjectionBranch]:
    if psi.dim != choi.d_in:
        raise QuantumError(f"input of dimension {psi.dim} cannot be injected into a tail "
                           f"of dimension {choi.d_in}")
    pvm = PVM.binary(psi.conj())
    dims = (choi.d_out, choi.d_in)
    state = choi.vector if choi.is_pure else choi.operator
    out = []
    for k, b in enumerate(measure_pvm(state, pvm, targets=[1])):
        if b.zero:
            out.append(InjectionBranch(k, 0.0, None))
            continue
        if k == ACCEPT and isinstance(b.state, PureState):
            head = b.state.amplitudes.reshape(dims) @ psi.amplitudes
            out.append(InjectionBranch(k, b.probability, PureState.normalized(head)))
            continue
        m = b.state.matrix if isinstance(b.state, DensityOperator) else \
            np.outer(b.state.amplitudes, b.state.amplitudes.conj())
        red = partial_trace_matrix(m, dims, [0])
        out.append(InjectionBranch(k, b.probability,
                                   DensityOperator((red + red.conj().T) / 2)))
    return out


def write_inject(slot: ProgramSlot, psi: PureState) -> list[InjectionBranch]:
    """Inject ``psi`` at the tail of ``slot`` and enumerate both outcomes.

    The tail is measured with ``{|psi*><psi*|, 1 - |psi*><psi*|}``. The
    accept outcome leaves ``E(|psi><psi|)`` on the head (``U|psi>`` for a
    unitary program) with probability ``1/d``; the complement outcome leaves
    the program applied to ``(1 - |psi><psi|)/(d - 1)``. The slot is consumed.
    """
    slot.check_available()
    branches = _injection_branches(slot.choi, psi)
    slot.consumed = True
    return branches


def read_out(head_state, readout: PVM) -> np.ndarray:
    """Outcome probabilities ``tr(P_i rho)`` of the readout PVM on the head."""
    if head_state.dim != readout.dim:
        raise QuantumError(f"readout of dimension {readout.dim} on a head of dimension "
                           f"{head_state.dim}")
    if isinstance(head_state, PureState):
        v = head_state.amplitudes
        return np.array([np.real(v.conj() @ p @ v) for p in readout.projectors])
    return np.array([np.real(np.trace(p @ head_state.matrix)) for p in readout.projectors])


def recover_probability(outcome: int, measured: float, d: int, eps: float = 1e-9) -> float:
    """Probability ``p_i`` for the injected state from either injection branch.

    On the complement branch the head carries ``(1 - |psi><psi|)/(d-1)``, so
    the measured ``q_i`` equals ``(1 - p_i)/(d - 1)``; for qubits this is
    ``1 - p_i``.
    """
    if not -eps <= measured <= 1 + eps:
        raise QuantumError(f"measured probability {measured} outside [0, 1]")
    p = measured if outcome == ACCEPT else 1 - (d - 1) * measured
    if not -eps <= p <= 1 + eps:
        raise QuantumError(f"recovered probability {p} is inconsistent")
    return float(np.clip(p, 0.0, 1.0))


def estimate_probabilities(slot: ProgramSlot, psi: PureState, readout: PVM, shots: int,
                           rng, keep_complement: bool = True) -> dict:
    """Multi-shot estimate of ``p_i`` with a refresh after every shot.

    With ``keep_complement`` the complement-branch shots contribute through
    :func:`recover_probability`; otherwise they are discarded.
    """
    rng = as_rng(rng)
    d = slot.d_in
    counts = {ACCEPT: np.zeros(readout.dim), COMPLEMENT: np.zeros(readout.dim)}
    for _ in range(shots):
        refresh(slot)
        branches = write_inject(slot, psi)
        k = rng.choice([b.probability for b in branches])
        probs = read_out(branches[k].head_state, readout)
        counts[k][rng.choice(probs)] += 1
    refresh(slot)
    n_acc, n_comp = counts[ACCEPT].sum(), counts[COMPLEMENT].sum()
    est_acc = counts[ACCEPT] / n_acc if n_acc else None
    if keep_complement and n_comp:
        q = counts[COMPLEMENT] / n_comp
        est_comp = 1 - (d - 1) * q
        if est_acc is None:
            est = est_comp
        else:
            est = (n_acc * est_acc + n_comp * est_comp) / (n_acc + n_comp)
    else:
        est = est_acc
    return {"estimate": est, "accept_shots": int(n_acc), "complement_shots": int(n_comp),
            "mode": "keep" if keep_complement else "discard"}


# --------------------------------------------------------------------------- #
#                          circuit-level injection                            #
# --------------------------------------------------------------------------- #

@dataclass
class InjectionCircuit:
    ops: list
    qubits_total: int
    ancilla_required: bool
    toffoli_required: bool
    branches: list  # InjectionBranch with head density operators


def _rotation_to_zero(v: np.ndarray) -> np.ndarray:
    """Unitary ``B`` with ``B v = |0>``."""
    d = len(v)
    m = np.eye(d, dtype=complex)
    m[:, 0] = v
    q, r = np.linalg.qr(m)
    q[:, 0] *= r[0, 0] / abs(r[0, 0])
    return q.conj().T


def parity_injection_gadget(slot: ProgramSlot, psi: PureState,
                            use_ancilla: bool | None = None) -> InjectionCircuit:
    """Gate-level realization of :func:`write_inject`.

    The tail is rotated so ``|psi*>`` becomes ``|0...0>``. A multi-controlled
    NOT (controls on zero) copies the "all zeros" parity to an ancilla, the
    ancilla is measured, and the rotation is undone. A single-qubit tail needs
    no ancilla because both injection projectors are rank one; pass
    ``use_ancilla=True`` to build the general circuit anyway.

    Both branches are simulated by forcing the ancilla outcome; the slot is
    not consumed.
    """
    slot.check_available()
    choi = slot.choi
    d = choi.d_in
    if psi.dim != d:
        raise QuantumError("input dimension does not match the program tail")
    if not choi.is_pure:
        raise QuantumError("the gate-level gadget simulates pure program states only")
    n_tail = qubits_of(d)
    ancilla = n_tail > 1 if use_ancilla is None else use_ancilla
    b = _rotation_to_zero(psi.conj().amplitudes)

    reg = Register()
    reg.add(["head", "tail"], choi.vector)
    reg.apply(b, ["tail"], "basis")
    ops = [f"basis_rotation(tail, {n_tail}q)"]
    branches = []
    if ancilla:
        reg.add("anc", [1, 0])
        p0 = np.zeros((d, d))
        p0[0, 0] = 1
        mcx = np.kron(p0, [[0, 1], [1, 0]]) + np.kron(np.eye(d) - p0, np.eye(2))
        reg.apply(mcx, ["tail", "anc"], "MCX0")
        ops += ["MCX(controls=tail==0..0, target=anc)", "measure(anc)", "basis_rotation^dag(tail)"]
        probs = reg.probabilities("anc")
        for outcome, anc_value in ((ACCEPT, 1), (COMPLEMENT, 0)):
            if probs[anc_value] < 1e-13:
                branches.append(InjectionBranch(outcome, 0.0, None))
                continue
            r = reg.copy()
            _, p = r.measure("anc", force=anc_value)
            r.apply(b.conj().T, ["tail"])
            branches.append(InjectionBranch(outcome, p, DensityOperator(r.reduced("head"))))
    else:
        ops += ["measure(tail)"]
        probs = reg.probabilities("tail")
        for outcome in (ACCEPT, COMPLEMENT):
            p = float(probs[0] if outcome == ACCEPT else probs[1:].sum())
            heads = []
            for k in ([0] if outcome == ACCEPT else range(1, d)):
                if probs[k] < 1e-13:
                    continue
                r = reg.copy()
                r.measure("tail", force=k)
                heads.append(probs[k] * r.reduced("head"))
            head = DensityOperator(sum(heads) / p) if p > 1e-13 else None
            branches.append(InjectionBranch(outcome, p, head))
    toffoli = ancilla and n_tail >= 2
    return InjectionCircuit(ops, reg.peak, ancilla, toffoli, branches)


def refresh(slot: ProgramSlot) -> ProgramSlot:
    """Restore a consumed program from its white box or its download source."""
    if not slot.consumed:
        return slot
    if slot.whitebox is not None:
        slot.choi = _choi_of(slot.whitebox)
    elif slot.source is not None:
        slot.choi = slot.source()
    else:
        raise QuantumError(f"program {slot.label!r} has neither a white box nor a source")
    slot.consumed = False
    return slot


# --------------------------------------------------------------------------- #
#                               program library                               #
# --------------------------------------------------------------------------- #

def load_program_library(path) -> list[tuple[str, Unitary]]:
    """Read ``[{label, matrix, dims}, ...]`` with matrices as ``[re, im]`` rows."""
    entries = json.loads(Path(path).read_text())
    if not isinstance(entries, list):
        raise QuantumError("program library must be a JSON list")
    out = []
    for i, e in enumerate(entries):
        try:
            label, matrix = e["label"], e["matrix"]
        except (KeyError, TypeError):
            raise QuantumError(f"library entry {i} needs 'label' and 'matrix'") from None
        m = matrix_from_json(matrix)
        dims = tuple(e.get("dims", [m.shape[0]]))
        out.append((label, Unitary(m, label, dims)))
    return out


def dump_program_library(programs, path):
    data = [{"label": label, "matrix": matrix_to_json(u.matrix), "dims": list(u.dims)}
            for label, u in programs]
    Path(path).write_text(json.dumps(data, indent=1))
