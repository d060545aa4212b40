"""Program composition by teleportation.

Two stored programs ``|U>`` (earlier) and ``|V>`` (later) are composed by a
Bell measurement between the head of the earlier program and the tail of the
later one. The result lives on (later head, earlier tail) and equals
``|V s^dag U>`` for the measured error-basis element ``s``. The composition
modes differ in how that byproduct is handled:

postselect
    keep outcome 0 only (probability ``1/d^2``)
deterministic
    correct every outcome through a white-box program (``2 log2 d`` bits)
covariant
    extract only "trivial vs nontrivial" to an ancilla (1 bit) and undo the
    nontrivial class with the affine form of the later program
switch
    a pre-composed gadget that can still skip the program
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import gates
from .core import (PureState, PVM, QuantumError, Unitary, as_rng, ket)
from .duality import ChoiState, choi_of_unitary
from .memory import (ACCEPT, MemoryUnit, ProgramSlot, read_out, recover_probability,
                     refresh, write_inject)
from .register import Register, qubits_of


class BellOutcome(NamedTuple):
    index: int
    byproduct: Unitary

    @property
    def trivial(self) -> bool:
        return self.index == 0


@dataclass
class CompositionResult:
    choi: ChoiState
    byproduct: Unitary
    corrected: bool
    ancilla_bits_used: int
    qubits_used: int
    outcome: int = 0
    probability: float = 1.0
    events: list = field(default_factory=list)

    def as_slot(self, label: str, whitebox: Unitary | None = None) -> ProgramSlot:
        return ProgramSlot(self.choi, label, whitebox if self.corrected else None)


@dataclass
class AffineForm:
    matrix: np.ndarray
    source: Unitary


def _unitary_of(slot: ProgramSlot) -> Unitary | None:
    wb = slot.whitebox
    if isinstance(wb, Unitary):
        return wb
    if wb is not None and getattr(wb, "rank", 0) == 1:
        return Unitary(wb.kraus_ops[0])
    return None


def _require_pure(*slots):
    for s in slots:
        s.check_available()
        if not s.choi.is_pure:
            raise QuantumError(f"program {s.label!r} is not a pure (unitary) program state")


def _outcome_bits(d: int) -> int:
    return int(math.ceil(math.log2(d * d)))


# --------------------------------------------------------------------------- #
#                              Bell measurement                               #
# --------------------------------------------------------------------------- #

def bell_measure(state, wire_a, wire_b, rng=None, force=None):
    """Measure two wires of equal dimension in the basis ``(s_i (x) 1)|omega>``.

    ``state`` is either a :class:`Register` (updated in place; returns the
    outcome) or a :class:`PureState` with integer subsystem indices (returns
    the outcome and the post-measurement state of the remaining subsystems).
    """
    if isinstance(state, Register):
        d = state.dims[wire_a]
        if state.dims[wire_b] != d:
            raise QuantumError("Bell measurement needs wires of equal dimension")
        k, _ = state.measure([wire_a, wire_b], basis=gates.bell_basis(d), force=force,
                             name="bell")
        return BellOutcome(k, gates.error_basis(d)[k])
    reg = Register(rng)
    names = [str(i) for i in range(len(state.dims))]
    reg.add(names, state)
    out = bell_measure(reg, names[wire_a], names[wire_b], force=force)
    rest = [n for n in names if n in reg.wires]
    dims = tuple(reg.dims[n] for n in rest)
    return out, PureState(reg.vector(rest), dims)


# --------------------------------------------------------------------------- #
#                                composition                                  #
# --------------------------------------------------------------------------- #

def _pair_register(earlier: ProgramSlot, later: ProgramSlot, rng) -> Register:
    if earlier.d_out != later.d_in:
        raise QuantumError(f"head of {earlier.label!r} ({earlier.d_out}) does not match "
                           f"tail of {later.label!r} ({later.d_in})")
    reg = Register(rng)
    reg.add(["h1", "t1"], earlier.choi.vector)
    reg.add(["h2", "t2"], later.choi.vector)
    return reg


def _finish(reg: Register, earlier, later) -> ChoiState:
    return ChoiState.from_vector(reg.vector(["h2", "t1"]), later.d_out, earlier.d_in)


def compose_postselect(earlier: ProgramSlot, later: ProgramSlot, rng=None,
                       force=None) -> CompositionResult:
    """Compose without corrections; only outcome 0 yields ``|later earlier>``."""
    _require_pure(earlier, later)
    reg = _pair_register(earlier, later, as_rng(rng))
    out = bell_measure(reg, "h1", "t2", force=force)
    prob = reg.events[-1]["probability"]
    earlier.consumed = later.consumed = True
    return CompositionResult(_finish(reg, earlier, later), out.byproduct.dagger(),
                             out.trivial, _outcome_bits(earlier.d_out), reg.peak,
                             out.index, prob, reg.events)


def compose_deterministic(earlier: ProgramSlot, later: ProgramSlot, rng=None,
                          force=None) -> CompositionResult:
    """Compose and correct every Bell outcome using a white-box program.

    The correction ``V s V^dag`` acts on the later head when ``V`` is known;
    otherwise ``(U^dag s U)^t`` acts on the earlier tail.
    """
    _require_pure(earlier, later)
    v, u = _unitary_of(later), _unitary_of(earlier)
    if v is None and u is None:
        raise QuantumError("deterministic composition needs a white-box program; "
                           "use compose_postselect for two black boxes")
    reg = _pair_register(earlier, later, as_rng(rng))
    out = bell_measure(reg, "h1", "t2", force=force)
    prob = reg.events[-1]["probability"]
    s = out.byproduct.matrix
    if v is not None:
        reg.apply(v.matrix @ s @ v.matrix.conj().T, ["h2"], "correct(V s V^dag)")
    else:
        reg.apply((u.matrix.conj().T @ s @ u.matrix).T, ["t1"], "correct((U^dag s U)^t)")
    earlier.consumed = later.consumed = True
    return CompositionResult(_finish(reg, earlier, later), gates.identity(later.d_in), True,
                             _outcome_bits(earlier.d_out), reg.peak, out.index, prob,
                             reg.events)


def affine_form(u: Unitary) -> AffineForm:
    """Rotation ``R_ab = tr(s_a U s_b U^dag)/2`` over the Pauli order (X, Y, Z)."""
    if not isinstance(u, Unitary):
        u = Unitary(u)
    if u.dim != 2:
        raise QuantumError("affine_form is defined for qubit gates; use adjoint_form")
    m = u.matrix
    paulis = [p.matrix for p in gates.PAULIS[1:]]
    r = np.array([[np.trace(a @ m @ b @ m.conj().T) / 2 for b in paulis] for a in paulis])
    assert np.abs(r.imag).max() < 1e-9
    return AffineForm(r.real, u)


def adjoint_form(u: Unitary) -> np.ndarray:
    """Conjugation action on the non-identity error basis of any dimension."""
    m = u.matrix if isinstance(u, Unitary) else np.asarray(u)
    d = m.shape[0]
    basis = [s.matrix for s in gates.error_basis(d)[1:]]
    return np.array([[np.trace(a.conj().T @ m @ b @ m.conj().T) / d for b in basis]
                     for a in basis])


def _affine_correction(r: np.ndarray) -> np.ndarray:
    """Two-qubit unitary acting as ``1 (+) R`` on the Bell basis."""
    b = gates.bell_basis(2)
    block = np.eye(4, dtype=complex)
    block[1:, 1:] = r
    return b @ block @ b.conj().T


def compose_covariant(earlier: ProgramSlot, later: ProgramSlot, rng=None,
                      force=None) -> CompositionResult:
    """Qubit composition that communicates a single outcome bit.

    The Bell pair is rotated to the computational frame and a zero-controlled
    Toffoli copies "outcome is trivial" onto an ancilla, which is measured.
    For the nontrivial class the pair, still unmeasured, is rotated by the
    affine form of the later program (turning ``V s_i U`` into ``s_j V U``)
    and the remaining Pauli is removed coherently, leaving the pair in a
    product state. ``force`` selects the class: 0 trivial, 1 nontrivial.
    """
    _require_pure(earlier, later)
    if earlier.d_out != 2 or later.d_in != 2:
        raise QuantumError("covariant composition is implemented for qubit programs; "
                           "use compose_deterministic for qudits")
    v = _unitary_of(later)
    if v is None:
        raise QuantumError("covariant composition needs the later program as a white box")
    reg = _pair_register(earlier, later, as_rng(rng))
    reg.add("anc", ket(0))
    bell = gates.bell_basis(2)
    reg.apply(bell.conj().T, ["h1", "t2"], "bell->computational")
    p00 = np.diag([1, 0, 0, 0])
    mcx0 = np.kron(p00, gates.X.matrix) + np.kron(np.eye(4) - p00, np.eye(2))
    reg.apply(mcx0, ["h1", "t2", "anc"], "toffoli(pair==00 -> anc)")
    anc_force = None if force is None else (1 if force == 0 else 0)
    bit, prob = reg.measure("anc", force=anc_force)
    nontrivial = bit == 0
    reg.apply(bell, ["h1", "t2"], "computational->bell")
    if nontrivial:
        r = affine_form(v).matrix
        reg.apply(_affine_correction(r), ["h1", "t2"], "affine(V)")
        paulis = gates.error_basis(2)
        ctrl = sum(np.kron(np.outer(bell[:, j], bell[:, j].conj()), paulis[j].matrix)
                   for j in range(4))
        reg.apply(ctrl, ["h1", "t2", "h2"], "controlled-pauli")
    reg.discard(["h1", "t2"])
    earlier.consumed = later.consumed = True
    return CompositionResult(_finish(reg, earlier, later), gates.identity(2), True, 1,
                             reg.peak, int(nontrivial), prob, reg.events)


COMPOSERS = {
    "postselect": compose_postselect,
    "deterministic": compose_deterministic,
    "covariant": compose_covariant,
}


# --------------------------------------------------------------------------- #
#                              switchable gadget                              #
# --------------------------------------------------------------------------- #

ON_PATH = ("1", "2", "3", "4", "5")
OFF_PATH = ("1", "4", "5")


@dataclass
class SwitchGadget:
    """Pre-composed program waiting for an on/off decision.

    Wires: ``0``/``1`` tail/head of the previous program, ``2``/``3`` tail/head
    of the stored program, ``4``/``5`` tail/head of the attached ebit.
    """

    slot: ProgramSlot
    register: Register
    prev_d_in: int
    cz_pattern: list
    paths: dict
    prev_unitary: Unitary | None = None
    selected: bool = False


def switch_attach(slot: ProgramSlot, prev, memory: MemoryUnit | None = None,
                  rng=None) -> SwitchGadget:
    """Attach an ebit to ``slot`` and entangle it with a CZ (in an H frame).

    ``prev`` is the previous program (slot or Choi state); its head is wire 1.
    No path wire is measured, so both paths stay available.
    """
    _require_pure(slot)
    if slot.d_in != 2 or slot.d_out != 2:
        raise QuantumError("the switch gadget is built for qubit programs")
    prev_choi = prev.choi if isinstance(prev, ProgramSlot) else prev
    if isinstance(prev, ProgramSlot):
        _require_pure(prev)
    if prev_choi.d_out != 2:
        raise QuantumError("previous program must output a qubit")
    ebit = memory.take_ebit() if memory is not None else PureState(
        np.eye(2).reshape(-1) / np.sqrt(2), (2, 2))
    reg = Register(rng)
    reg.add(["1", "0"], prev_choi.vector)
    reg.add(["3", "2"], slot.choi.vector)
    reg.add(["5", "4"], ebit)
    pattern = [("H", "4"), ("CZ", "3", "4"), ("H", "4")]
    reg.apply(gates.H, ["4"])
    reg.apply(gates.CZ, ["3", "4"])
    reg.apply(gates.H, ["4"])
    slot.consumed = True
    if isinstance(prev, ProgramSlot):
        prev.consumed = True
    prev_u = _unitary_of(prev) if isinstance(prev, ProgramSlot) else None
    return SwitchGadget(slot, reg, prev_choi.d_in, pattern,
                        {"on": ON_PATH, "off": OFF_PATH}, prev_u)


def switch_select(gadget: SwitchGadget, on: bool, rng=None, force=None) -> CompositionResult:
    """Complete one path and close the other with measurements.

    ``force`` optionally fixes the Bell outcomes: ``(i_34, i_12)`` for ON,
    ``(m2, m3, i_14)`` for OFF.
    """
    if gadget.selected:
        raise QuantumError("switch already selected")
    gadget.selected = True
    reg = gadget.register
    if rng is not None:
        reg.rng = as_rng(rng)
    cnot = gates.CNOT.matrix
    paulis = gates.error_basis(2)
    u = _unitary_of(gadget.slot)
    if on:
        f34, f12 = force if force is not None else (None, None)
        k34, _ = reg.measure(["3", "4"], basis=cnot @ gates.bell_basis(2), force=f34,
                             name="bell(3,4)")
        k12, _ = reg.measure(["1", "2"], basis=gates.bell_basis(2), force=f12,
                             name="bell(1,2)")
        a34, a12 = paulis[k34].matrix, paulis[k12].matrix
        # head 5 now carries a34^dag U a12^dag P
        if u is not None:
            reg.apply(u.matrix @ a12 @ u.matrix.conj().T @ a34, ["5"], "correct")
            byproduct, corrected = gates.identity(2), True
        else:
            reg.apply(a34, ["5"], "correct(pauli)")
            byproduct, corrected = Unitary(a12.conj().T), False
        outcome = 4 * k34 + k12
    else:
        f2, f3, f14 = force if force is not None else (None, None, None)
        reg.measure("2", force=f2, name="close(2)")
        m3, _ = reg.measure("3", force=f3, name="close(3)")
        k14, _ = reg.measure(["1", "4"], basis=gates.bell_basis(2), force=f14,
                             name="bell(1,4)")
        a14 = paulis[k14].matrix
        xm = np.linalg.matrix_power(gates.X.matrix, m3)
        reg.apply(a14 @ xm, ["5"], "correct(pauli)")
        byproduct, corrected = gates.identity(2), True
        outcome = k14
    choi = ChoiState.from_vector(reg.vector(["5", "0"]), 2, gadget.prev_d_in)
    return CompositionResult(choi, byproduct, corrected, 4, reg.peak, outcome, 1.0,
                             reg.events)


# --------------------------------------------------------------------------- #
#                         H/T sequence approximation                          #
# --------------------------------------------------------------------------- #

def phase_distance(u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Operator-norm distance between qubit unitaries minimized over global phase.

    Broadcasts over leading axes of ``w``.
    """
    m = np.conj(np.swapaxes(w, -1, -2)) @ u
    lam = np.linalg.eigvals(m)
    delta = np.abs(np.angle(lam[..., 0] * np.conj(lam[..., 1])))
    return 2 * np.sin(delta / 4)


def _phase_key(m: np.ndarray) -> bytes:
    k = int(np.argmax(np.abs(m.reshape(-1)) > 1e-6))
    z = m.reshape(-1)[k]
    return np.round(m * (abs(z) / z), 8).tobytes()


def approximate_rotation(target: Unitary, max_depth: int) -> tuple[str, float]:
    """Shortest best non-empty H/T word (matrix-product order) of at most
    ``max_depth`` letters.

    Breadth-first enumeration; words with ``HH`` or eight consecutive ``T``
    are skipped, and group elements already reached by a shorter word are
    pruned. The empty word only seeds the search, so a target close to the
    identity is matched by the shortest word that multiplies out to it.
    """
    if not 1 <= max_depth <= 20:
        raise QuantumError("exhaustive search depth must lie in 1..20")
    u = target.matrix if isinstance(target, Unitary) else np.asarray(target)
    hm, tm = gates.H.matrix, gates.T.matrix
    words = [""]
    mats = np.eye(2, dtype=complex)[None]
    seen: set[bytes] = set()
    best_word, best = "", np.inf
    for _ in range(max_depth):
        new_words, new_mats = [], []
        for w, m in zip(words, mats):
            for letter, g in (("H", hm), ("T", tm)):
                if letter == "H" and w.endswith("H"):
                    continue
                if letter == "T" and w.endswith("T" * 7):
                    continue
                nm = m @ g
                key = _phase_key(nm)
                if key in seen:
                    continue
                seen.add(key)
                new_words.append(w + letter)
                new_mats.append(nm)
        if not new_words:
            break
        words, mats = new_words, np.array(new_mats)
        dist = phase_distance(u, mats)
        i = int(np.argmin(dist))
        if dist[i] < best - 1e-12:
            best_word, best = words[i], float(dist[i])
    return best_word, max(best, 0.0)


def word_unitary(word: str) -> Unitary:
    m = np.eye(2, dtype=complex)
    for letter in word:
        m = m @ gates.gate(letter).matrix
    return Unitary(m, word or "I")


# --------------------------------------------------------------------------- #
#                              program sequences                              #
# --------------------------------------------------------------------------- #

@dataclass
class SequenceResult:
    probabilities: np.ndarray
    transcript: list
    choi: ChoiState
    injection_outcome: int
    peak_qubits: int


def _fetch(memory: MemoryUnit, label: str, transcript: list) -> ProgramSlot:
    slot = memory[label]
    if slot.consumed:
        refresh(slot)
        transcript.append({"operation": "refresh", "outcome": None, "correction": None,
                           "qubits_in_use": slot.qubits, "label": label})
    return slot


def run_program_sequence(memory: MemoryUnit, labels, psi: PureState, readout: PVM,
                         mode: str = "deterministic", rng=None, force=None) -> SequenceResult:
    """Compose the programs in time order, inject ``psi`` and read out.

    ``labels`` lists programs in the order they act. In ``switch`` mode an
    entry may be a ``(label, on)`` pair. Consumed programs are refreshed
    before reuse. The returned probabilities are recovered from whichever
    injection branch occurred.
    """
    rng = as_rng(rng)
    transcript: list[dict] = []
    peak = 0

    def log(operation, result: CompositionResult | None = None, **kw):
        ev = {"step": len(transcript), "operation": operation,
              "outcome": None, "correction": None, "qubits_in_use": 0}
        if result is not None:
            ev.update(outcome=result.outcome,
                      correction="applied" if result.corrected else
                      f"uncorrected:{result.byproduct.label or 'byproduct'}",
                      qubits_in_use=result.qubits_used,
                      outcome_bits=result.ancilla_bits_used)
        ev.update(kw)
        transcript.append(ev)

    identity_choi = choi_of_unitary(gates.identity(psi.dim))
    if mode == "switch":
        memory.take_ebit()
        current = ProgramSlot(identity_choi, "_id", gates.identity(psi.dim))
        log("allocate_ebit", qubits_in_use=2)
        for entry in labels:
            label, on = (entry, True) if isinstance(entry, str) else entry
            slot = _fetch(memory, label, transcript)
            gadget = switch_attach(slot, current, memory, rng)
            res = switch_select(gadget, bool(on), rng)
            wb = None
            if current.whitebox is not None and res.corrected:
                wb = (_unitary_of(slot) @ current.whitebox) if on else current.whitebox
            current = res.as_slot("_acc", wb)
            peak = max(peak, res.qubits_used)
            log(f"switch_{'on' if on else 'off'}:{label}", res)
    else:
        if mode not in COMPOSERS:
            raise QuantumError(f"unknown mode {mode!r}")
        compose = COMPOSERS[mode]
        if not labels:
            memory.take_ebit()
            current = ProgramSlot(identity_choi, "_id", gates.identity(psi.dim))
            log("allocate_ebit", qubits_in_use=qubits_of(psi.dim) * 2)
        else:
            first = _fetch(memory, labels[0], transcript)
            current = ProgramSlot(first.choi, "_acc", first.whitebox)
            first.consumed = True
            for label in labels[1:]:
                slot = _fetch(memory, label, transcript)
                res = compose(current, slot, rng)
                wb = None
                if current.whitebox is not None and _unitary_of(slot) is not None \
                        and res.corrected:
                    wb = _unitary_of(slot) @ current.whitebox
                current = res.as_slot("_acc", wb)
                peak = max(peak, res.qubits_used)
                log(f"compose_{mode}:{label}", res)
    branches = write_inject(current, psi)
    k = rng.choice([b.probability for b in branches])
    measured = read_out(branches[k].head_state, readout)
    probs = np.array([recover_probability(k, q, psi.dim) for q in measured])
    peak = max(peak, current.qubits)
    log("inject", outcome=int(k), qubits_in_use=current.qubits,
        branch="accept" if k == ACCEPT else "complement")
    log("read_out", qubits_in_use=qubits_of(psi.dim))
    return SequenceResult(probs, transcript, current.choi, int(k), peak)


def transcript_json(transcript) -> list[dict]:
    """Events reduced to ``{step, operation, outcome, correction, qubits_in_use}``."""
    keys = ("step", "operation", "outcome", "correction", "qubits_in_use")
    return [{k: ev.get(k) for k in keys} | {"step": i} for i, ev in enumerate(transcript)]
