"""Host-to-user program transfer over a simulated quantum network.

Four download schemes are provided:

1. qubits -> bits: BB84 key, one-time-padded gate list
2. ebits -> bits: as 1 with the key drawn from measured Bell pairs
3. qubits -> qubits: carriers holding the program state, teleported into memory
4. ebits -> qubits: the host steers shared ebits into the program state by
   injecting ``|0...0>`` after applying ``V^t``

plus BB84 key exchange and sample-budgeted behavioural verification.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import gates
from .core import (DensityOperator, PureState, PVM, QuantumError, Unitary, as_rng, embed,
                   fidelity, ket)
from .duality import ChoiState, apply_via_choi
from .memory import (ACCEPT, MemoryUnit, ProgramSlot, read_out, write_inject,
                     _rotation_to_zero)
from .jsonio import clean
from .register import Register, qubits_of

QBER_THRESHOLD = 0.11
MAX_RETRIES = 64


# --------------------------------------------------------------------------- #
#                               channel models                                #
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class ChannelModel:
    kind: str = "ideal"
    p: float = 0.0
    f: float = 0.0

    def __post_init__(self):
        if self.kind not in ("ideal", "depolarizing", "eavesdropper"):
            raise QuantumError(f"unknown channel kind {self.kind!r}")
        if not (0 <= self.p <= 1 and 0 <= self.f <= 1):
            raise QuantumError("channel parameters must lie in [0, 1]")

    @classmethod
    def ideal(cls):
        return cls()

    @classmethod
    def depolarizing(cls, p: float):
        return cls("depolarizing", p=p)

    @classmethod
    def eavesdropper(cls, f: float = 1.0):
        return cls("eavesdropper", f=f)

    @classmethod
    def from_dict(cls, d: dict | None) -> "ChannelModel":
        if not d:
            return cls()
        return cls(d.get("kind", "ideal"), float(d.get("p", 0.0)), float(d.get("f", 0.0)))

    def qubit_map(self, rho: np.ndarray) -> np.ndarray:
        """Average single-qubit action on ``(..., 2, 2)`` density matrices.

        Intercept-resend in a uniformly random Z or X basis averages to the
        mean of the two dephasing maps.
        """
        if self.kind == "ideal":
            return rho
        eye = np.eye(2) / 2
        if self.kind == "depolarizing":
            tr = np.trace(rho, axis1=-2, axis2=-1)[..., None, None]
            return (1 - self.p) * rho + self.p * tr * eye
        deph_z = rho * np.eye(2)
        hm = gates.H.matrix
        deph_x = hm @ ((hm @ rho @ hm) * np.eye(2)) @ hm
        return (1 - self.f) * rho + self.f * (deph_z + deph_x) / 2


def _apply_qubitwise(m: np.ndarray, n: int, channel: ChannelModel, skip=()) -> np.ndarray:
    """Apply the average channel map to each of ``n`` qubits of a density matrix."""
    if channel.kind == "ideal":
        return m
    for q in range(n):
        if q in skip:
            continue
        t = m.reshape([2] * (2 * n))
        t = np.moveaxis(t, [q, n + q], [-2, -1])
        t = channel.qubit_map(t)
        m = np.moveaxis(t, [-2, -1], [q, n + q]).reshape(m.shape)
    return m


# --------------------------------------------------------------------------- #
#                                   BB84                                      #
# --------------------------------------------------------------------------- #

_BASIS = np.stack([np.eye(2), gates.H.matrix])  # columns are the basis kets


@dataclass
class KeyExchange:
    key: np.ndarray
    qber: float
    abort: bool
    n_raw: int
    n_sifted: int
    n_tested: int
    errors: int


def _sample_outcomes(rho: np.ndarray, bases: np.ndarray, g) -> np.ndarray:
    """Projective measurement of each qubit in its Z (0) or X (1) basis."""
    vec1 = _BASIS[bases][:, :, 1]
    p1 = np.einsum("ni,nij,nj->n", vec1.conj(), rho, vec1).real
    return (g.random(len(bases)) < p1).astype(np.int8)


def _projectors(bits: np.ndarray, bases: np.ndarray) -> np.ndarray:
    v = _BASIS[bases][np.arange(len(bits)), :, bits]
    return np.einsum("ni,nj->nij", v, v.conj())


def _transmit(rho: np.ndarray, channel: ChannelModel, g) -> np.ndarray:
    if channel.kind == "eavesdropper":
        hit = g.random(len(rho)) < channel.f
        idx = np.flatnonzero(hit)
        if len(idx):
            eve = g.integers(0, 2, len(idx))
            seen = _sample_outcomes(rho[idx], eve, g)
            rho = rho.copy()
            rho[idx] = _projectors(seen, eve)
        return rho
    return channel.qubit_map(rho)


def _sift_and_test(a_bits, a_bases, b_bits, b_bases, g, test_fraction, threshold):
    keep = a_bases == b_bases
    a, b = a_bits[keep], b_bits[keep]
    test = g.random(len(a)) < test_fraction
    errors = int(np.sum(a[test] != b[test]))
    n_test = int(test.sum())
    qber = errors / n_test if n_test else 0.0
    return a[~test], b[~test], int(keep.sum()), n_test, errors, qber > threshold, qber


def bb84_exchange(n_raw: int, channel: ChannelModel, rng, threshold: float = QBER_THRESHOLD,
                  test_fraction: float = 0.5) -> KeyExchange:
    """Prepare-and-measure key exchange with random Z/X bases.

    Half of the sifted positions (by default) are disclosed to estimate the
    QBER; the rest form the key. The exchange aborts above ``threshold``.
    """
    if n_raw < 100:
        raise QuantumError("BB84 needs at least 100 raw qubits")
    g = as_rng(rng).generator
    a_bits = g.integers(0, 2, n_raw).astype(np.int8)
    a_bases = g.integers(0, 2, n_raw)
    rho = _transmit(_projectors(a_bits, a_bases), channel, g)
    b_bases = g.integers(0, 2, n_raw)
    b_bits = _sample_outcomes(rho, b_bases, g)
    key, _, n_sift, n_test, errors, abort, qber = _sift_and_test(
        a_bits, a_bases, b_bits, b_bases, g, test_fraction, threshold)
    return KeyExchange(key, qber, abort, n_raw, n_sift, n_test, errors)


def entangled_key_exchange(n_pairs: int, channel: ChannelModel, rng,
                           threshold: float = QBER_THRESHOLD,
                           test_fraction: float = 0.5) -> KeyExchange:
    """Key from measured ``|Phi+>`` pairs whose second half travels to the user.

    For ``|Phi+>`` a measurement of the host half in basis Z or X leaves the
    user half in the same basis state, so sampling the host outcome first
    and then transmitting the conditional state is exact.
    """
    if n_pairs < 100:
        raise QuantumError("key exchange needs at least 100 pairs")
    g = as_rng(rng).generator
    a_bases = g.integers(0, 2, n_pairs)
    a_bits = g.integers(0, 2, n_pairs).astype(np.int8)
    rho = _transmit(_projectors(a_bits, a_bases), channel, g)
    b_bases = g.integers(0, 2, n_pairs)
    b_bits = _sample_outcomes(rho, b_bases, g)
    key, _, n_sift, n_test, errors, abort, qber = _sift_and_test(
        a_bits, a_bases, b_bits, b_bases, g, test_fraction, threshold)
    return KeyExchange(key, qber, abort, n_pairs, n_sift, n_test, errors)


def detection_probability(n_tested: int, f: float, threshold: float = QBER_THRESHOLD) -> float:
    """Probability that ``n_tested`` disclosed bits exceed the abort threshold."""
    from scipy.stats import binom
    k = int(math.floor(threshold * n_tested))
    return float(binom.sf(k, n_tested, f / 4))


# --------------------------------------------------------------------------- #
#                          gate-list serialization                            #
# --------------------------------------------------------------------------- #

_OPCODES = {name: i for i, name in enumerate(gates.gate_names())}
_NAMES = {i: name for name, i in _OPCODES.items()}


def _normalize(instr) -> tuple[str, tuple]:
    if isinstance(instr, Unitary):
        instr = instr.label
    if isinstance(instr, str):
        name, wires = instr, None
    else:
        name, wires = instr[0], instr[1]
        wires = (wires,) if isinstance(wires, int) else tuple(wires)
    arity = qubits_of(gates.gate(name).dim)
    wires = tuple(range(arity)) if wires is None else wires
    if len(wires) != arity:
        raise QuantumError(f"gate {name} acts on {arity} qubits, got wires {wires}")
    return name, wires


def serialize_gates(program) -> np.ndarray:
    """8-bit opcode followed by one 8-bit index per target wire."""
    bits = []
    for instr in program:
        name, wires = _normalize(instr)
        for value in (_OPCODES[name], *wires):
            bits.extend((value >> k) & 1 for k in range(7, -1, -1))
    return np.array(bits, dtype=np.int8)


def deserialize_gates(bits) -> list[tuple[str, tuple]]:
    bits = np.asarray(bits, dtype=np.int64)
    if len(bits) % 8:
        raise QuantumError("bit string length is not a multiple of 8")
    values = [int("".join(map(str, bits[i:i + 8])), 2) for i in range(0, len(bits), 8)]
    out, i = [], 0
    while i < len(values):
        if values[i] not in _NAMES:
            raise QuantumError(f"unknown opcode {values[i]}")
        name = _NAMES[values[i]]
        arity = qubits_of(gates.gate(name).dim)
        out.append((name, tuple(values[i + 1:i + 1 + arity])))
        i += 1 + arity
    return out


def gate_list_unitary(program, n_qubits: int | None = None) -> np.ndarray:
    """Matrix of a gate list in execution order (first gate acts first)."""
    prog = [_normalize(p) for p in program]
    n = n_qubits or max([max(w) + 1 for _, w in prog] + [1])
    m = np.eye(2 ** n, dtype=complex)
    for name, wires in prog:
        m = embed(gates.gate(name).matrix, [2] * n, list(wires)) @ m
    return m


class SealedTape:
    """Execute-only handle on an encrypted gate list.

    The ciphertext and the pad are held privately; the user can run the
    program or install it into memory but cannot list its gates.
    """

    __slots__ = ("_run", "n_qubits", "bits_length")

    def __init__(self, ciphertext: np.ndarray, pad: np.ndarray):
        cipher, key = ciphertext.copy(), pad.copy()
        program = deserialize_gates(cipher ^ key)
        n = max([max(w) + 1 for _, w in program] + [1])
        matrix = gate_list_unitary(program, n)
        self._run = lambda v: matrix @ v
        self.n_qubits = n
        self.bits_length = len(cipher)

    @property
    def dim(self) -> int:
        return 2 ** self.n_qubits

    def run(self, state: PureState) -> PureState:
        if state.dim != self.dim:
            raise QuantumError(f"tape acts on {self.n_qubits} qubits")
        return PureState(self._run(state.amplitudes), state.dims)

    def choi(self) -> ChoiState:
        d = self.dim
        om = np.eye(d).reshape(-1) / np.sqrt(d)
        v = np.stack([self._run(c) for c in om.reshape(d, d).T], axis=1).reshape(-1)
        return ChoiState.from_vector(v, d, d)

    def install(self, memory: MemoryUnit, label: str) -> ProgramSlot:
        """Store the program state; refreshing replays the tape."""
        slot = ProgramSlot(self.choi(), label, None, encoding="sealed-tape", source=self.choi)
        return memory.put(slot)

    def __repr__(self):
        return f"SealedTape({self.n_qubits} qubits, {self.bits_length} bits)"


# --------------------------------------------------------------------------- #
#                                transcripts                                  #
# --------------------------------------------------------------------------- #

@dataclass
class TranscriptRecord:
    scheme: int
    qubits_transmitted: int = 0
    bits_transmitted: int = 0
    ebits_consumed: int = 0
    qber: float = 0.0
    outcome: str = "success"
    program_qubits: int = 0
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scheme not in (1, 2, 3, 4):
            raise QuantumError(f"scheme id must be 1..4, got {self.scheme}")
        for name in ("qubits_transmitted", "bits_transmitted", "ebits_consumed"):
            if getattr(self, name) < 0:
                raise QuantumError(f"{name} must be non-negative")

    def to_dict(self) -> dict:
        return clean(asdict(self))


DOWNLOAD_SCHEMES = {1: "qubits->bits", 2: "ebits->bits", 3: "qubits->qubits",
                    4: "ebits->qubits"}


class SchemeAbort(QuantumError):
    """Key exchange aborted on a high error rate."""


def _key_for(n_bits: int, exchange, channel, rng, threshold):
    key = np.zeros(0, dtype=np.int8)
    used, last = [], None
    while len(key) < n_bits:
        n = max(100, 5 * (n_bits - len(key)))
        last = exchange(n, channel, rng, threshold)
        used.append(last)
        if last.abort:
            return None, used
        key = np.concatenate([key, last.key])
    return key[:n_bits], used


def _send_bits(scheme: int, program, channel, rng, threshold):
    rng = as_rng(rng)
    plain = serialize_gates(program)
    exchange = bb84_exchange if scheme == 1 else entangled_key_exchange
    key, rounds = _key_for(len(plain), exchange, channel, rng, threshold)
    n_raw = sum(r.n_raw for r in rounds)
    n_sifted = sum(r.n_sifted for r in rounds)
    errors = sum(r.errors for r in rounds)
    tested = sum(r.n_tested for r in rounds)
    qber = errors / tested if tested else 0.0
    rec = TranscriptRecord(scheme, qubits_transmitted=n_raw if scheme == 1 else 0,
                           bits_transmitted=len(plain) if key is not None else 0,
                           ebits_consumed=n_sifted if scheme == 2 else 0, qber=qber,
                           outcome="abort" if key is None else "success",
                           details={"key_rounds": len(rounds), "sifted": n_sifted,
                                    "tested": tested})
    if scheme == 2:
        rec.qubits_transmitted = n_raw  # halves of the pairs
        rec.details["ebits_discarded"] = n_raw - n_sifted
    if key is None:
        return None, rec
    return SealedTape(plain ^ key, key), rec


def scheme1_send_bits(program, channel: ChannelModel, rng,
                      threshold: float = QBER_THRESHOLD):
    """One-time-pad the serialized gate list with a BB84 key."""
    return _send_bits(1, program, channel, rng, threshold)


def scheme2_send_bits(program, channel: ChannelModel, rng,
                      threshold: float = QBER_THRESHOLD):
    """As scheme 1 with the key taken from measured Bell pairs."""
    return _send_bits(2, program, channel, rng, threshold)


def _program_qubit_wires(slot: ProgramSlot) -> tuple[int, int]:
    nh, nt = qubits_of(slot.d_out), qubits_of(slot.d_in)
    if 2 ** nh != slot.d_out or 2 ** nt != slot.d_in:
        raise QuantumError("network transfer needs qubit-register programs")
    return nh, nt


def scheme3_send_qubits(slot: ProgramSlot, channel: ChannelModel, rng,
                        memory: MemoryUnit | None = None, label: str | None = None):
    """Send the program state on carrier qubits and teleport it into memory.

    Channel noise makes the carriers mixed; they are purified with
    simulation-only environment wires so that the user-side teleportation
    runs on a pure register. Those wires do not count as qubits.
    """
    slot.check_available()
    rng = as_rng(rng)
    nh, nt = _program_qubit_wires(slot)
    n = nh + nt
    m = _apply_qubitwise(slot.choi.matrix, n, channel)
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    keep = w > 1e-12
    w, v = w[keep], v[:, keep]
    carriers = [f"c{k}" for k in range(n)]
    reg = Register(rng)
    purified = (v * np.sqrt(w / w.sum())).reshape(-1)
    reg.add(carriers + ["env"], purified, [2] * n + [len(w)])
    reg._uncounted.add("env")
    corrections = []
    for k, c in enumerate(carriers):
        reg.add([f"m{k}", f"l{k}"], np.eye(2).reshape(-1) / np.sqrt(2), (2, 2))
    for k, c in enumerate(carriers):
        out, _ = reg.measure([c, f"l{k}"], basis=gates.bell_basis(2), name="bell")
        reg.apply(gates.error_basis(2)[out], [f"m{k}"], "correct")
        corrections.append(gates.error_basis(2)[out].label)
    mem = [f"m{k}" for k in range(n)]
    rho = reg.reduced(mem)
    choi = ChoiState(DensityOperator((rho + rho.conj().T) / 2, (slot.d_out, slot.d_in)))
    if w.size == 1:
        choi = ChoiState.from_vector(_vector_of(reg, mem), slot.d_out, slot.d_in)
    fid = _choi_fidelity(choi, slot.choi)
    label = label or f"{slot.label}@user"
    user = ProgramSlot(choi, label, None, encoding="downloaded",
                       source=_redownload(slot, scheme3_send_qubits, rng),
                       metadata={"scheme": 3, "fidelity": fid, "corrections": corrections})
    if memory is not None:
        memory.put(user)
    rec = TranscriptRecord(3, qubits_transmitted=n, bits_transmitted=2 * n,
                           ebits_consumed=n, program_qubits=n,
                           details={"fidelity": fid, "peak_qubits": reg.peak})
    return user, rec


def _vector_of(reg: Register, wires) -> np.ndarray:
    rho = reg.reduced(wires)
    w, v = np.linalg.eigh(rho)
    return v[:, -1]


def _choi_fidelity(a: ChoiState, b: ChoiState) -> float:
    if b.is_pure:
        return fidelity(a.operator, b.vector)
    return fidelity(a.operator, b.operator)


def _redownload(host_slot: ProgramSlot, scheme, rng):
    """Refresh source: a fresh ideal-channel download from the host."""
    child = rng.spawn(1)[0]

    def source() -> ChoiState:
        from .memory import refresh
        refresh(host_slot)
        user, _ = scheme(host_slot, ChannelModel(), child)
        return user.choi

    return source


def scheme4_send_via_ebits(slot: ProgramSlot, channel: ChannelModel, rng,
                           prep: Unitary | None = None, memory: MemoryUnit | None = None,
                           label: str | None = None, max_retries: int = MAX_RETRIES):
    """Steer shared ebits into the program state from the host side.

    With ``|U> = V|0...0>`` the host applies ``V^t`` to his halves of ``N``
    ebits and injects ``|0...0>`` (multi-controlled NOT on an ancilla,
    accept probability ``2^-N``). On acceptance the user halves hold
    ``|U>`` and are teleported into memory with local ebits. Rejections
    are retried with fresh ebits.
    """
    slot.check_available()
    if not slot.choi.is_pure:
        raise QuantumError("scheme 4 needs a pure program state")
    rng = as_rng(rng)
    nh, nt = _program_qubit_wires(slot)
    n = nh + nt
    target = slot.choi.vector.amplitudes
    if prep is None:
        prep = Unitary(_rotation_to_zero(target).conj().T)
    if np.abs(prep.matrix[:, 0] - target).max() > 1e-9:
        raise QuantumError("preparation unitary does not map |0...0> to the program state")
    host = [f"h{k}" for k in range(n)]
    user = [f"u{k}" for k in range(n)]
    ebit = np.eye(2).reshape(-1) / np.sqrt(2)
    p00 = np.zeros((2 ** n, 2 ** n))
    p00[0, 0] = 1
    mcx0 = np.kron(p00, gates.X.matrix) + np.kron(np.eye(2 ** n) - p00, np.eye(2))
    peak = 0
    for attempt in range(1, max_retries + 1):
        reg = Register(rng)
        for k in range(n):
            reg.add([host[k], user[k]], ebit, (2, 2))
        for k in range(n):
            _transmit_wire(reg, user[k], channel)
        for k in range(n):
            reg.add([f"m{k}", f"l{k}"], ebit, (2, 2))
        reg.apply(prep.matrix.T, host, "V^t")
        reg.add("anc", ket(0))
        reg.apply(mcx0, host + ["anc"], "MCX(host==0..0)")
        bit, _ = reg.measure("anc", name="inject")
        peak = max(peak, reg.peak)
        if bit == 1:
            break
    else:
        rec = TranscriptRecord(4, ebits_consumed=2 * n * max_retries, outcome="abort",
                               program_qubits=n, details={"attempts": max_retries})
        return None, rec
    for k in range(n):
        reg.measure(host[k], name="discard-host")
    corrections = []
    for k in range(n):
        out, _ = reg.measure([user[k], f"l{k}"], basis=gates.bell_basis(2), name="bell")
        reg.apply(gates.error_basis(2)[out], [f"m{k}"], "correct")
        corrections.append(gates.error_basis(2)[out].label)
    mem = [f"m{k}" for k in range(n)]
    choi = ChoiState.from_vector(reg.vector(mem), slot.d_out, slot.d_in)
    fid = _choi_fidelity(choi, slot.choi)
    label = label or f"{slot.label}@user"
    user_slot = ProgramSlot(choi, label, None, encoding="downloaded",
                            source=_redownload(slot, scheme4_send_via_ebits, rng),
                            metadata={"scheme": 4, "fidelity": fid, "attempts": attempt,
                                      "corrections": corrections})
    if memory is not None:
        memory.put(user_slot)
    rec = TranscriptRecord(4, qubits_transmitted=n * attempt, bits_transmitted=2 * n,
                           ebits_consumed=n * attempt + n, program_qubits=n,
                           details={"fidelity": fid, "attempts": attempt, "peak_qubits": peak})
    return user_slot, rec


def _transmit_wire(reg: Register, wire: str, channel: ChannelModel):
    """Quantum-trajectory version of the channel on one wire of a register."""
    g = reg.rng
    if channel.kind == "depolarizing":
        if g.random() < channel.p:
            reg.apply(gates.PAULIS[int(g.integers(0, 4))], [wire], "noise")
    elif channel.kind == "eavesdropper":
        if g.random() < channel.f:
            basis = _BASIS[int(g.integers(0, 2))]
            reg.measure(wire, basis=basis, keep=True, name="intercept")


# --------------------------------------------------------------------------- #
#                                verification                                 #
# --------------------------------------------------------------------------- #

def sample_count(epsilon: float, delta: float) -> int:
    """``ceil((1/epsilon) ln(1/delta))`` with unit constant."""
    if not (0 < epsilon < 1 and 0 < delta < 1):
        raise QuantumError("epsilon and delta must lie in (0, 1)")
    return max(1, math.ceil((1 / epsilon) * math.log(1 / delta) - 1e-9))


@dataclass(frozen=True)
class VerificationPlan:
    epsilon: float
    delta: float
    n_samples: int = 0

    def __post_init__(self):
        n = sample_count(self.epsilon, self.delta)
        if self.n_samples and self.n_samples != n:
            raise QuantumError(f"n_samples must equal {n} for this plan")
        object.__setattr__(self, "n_samples", n)


@dataclass
class VerificationResult:
    accepted: bool
    failures: int
    tests: int
    fidelity_bound: float
    outcomes: list


_PAULI_STATES = np.array([[1, 0], [0, 1], [1, 1], [1, -1], [1, 1j], [1, -1j]],
                         dtype=complex) / np.array([1, 1, np.sqrt(2), np.sqrt(2),
                                                    np.sqrt(2), np.sqrt(2)])[:, None]


def _random_probe(n_qubits: int, g) -> PureState:
    v = np.ones(1, dtype=complex)
    for _ in range(n_qubits):
        v = np.kron(v, _PAULI_STATES[int(g.integers(0, 6))])
    return PureState(v)


def verify_program(samples, plan: VerificationPlan, claimed: Unitary, rng) -> VerificationResult:
    """Behavioural acceptance test over ``plan.n_samples`` program copies.

    Each copy receives a random tensor product of Pauli eigenstates through
    the injection PVM and the head is tested against the claimed program:
    ``U|phi>`` on the accept branch, the complement ``U(1 - |phi><phi|)U^dag``
    on the other. Any failure rejects; with zero failures the infidelity is
    below ``epsilon`` at confidence ``1 - delta``.
    """
    samples = list(samples)
    n = plan.n_samples
    if len(samples) < n:
        raise QuantumError(f"verification needs N = {n} samples, got {len(samples)}")
    rng = as_rng(rng)
    g = rng.generator
    d = claimed.dim
    nq = qubits_of(d)
    failures, outcomes = 0, []
    for slot in samples[:n]:
        phi = _random_probe(nq, g)
        branches = write_inject(slot, phi)
        k = rng.choice([b.probability for b in branches])
        up = claimed.matrix @ phi.amplitudes
        p = np.outer(up, up.conj())
        test = PVM((p, np.eye(d) - p)) if k == ACCEPT else PVM((np.eye(d) - p, p))
        probs = read_out(branches[k].head_state, test)
        passed = rng.choice(probs) == 0
        failures += not passed
        outcomes.append({"branch": int(k), "passed": bool(passed)})
    accepted = failures == 0
    bound = 1 - plan.epsilon if accepted else 1 - failures / n
    return VerificationResult(accepted, failures, n, bound, outcomes)


def behavioural_statistics(slot_or_tape, n_qubits: int) -> np.ndarray:
    """Readout probabilities for every standard-basis input and Pauli readout."""
    d = 2 ** n_qubits
    bases = [np.eye(2), gates.H.matrix, np.array([[1, 1], [1j, -1j]]) / np.sqrt(2)]
    out = []
    for i in range(d):
        psi = PureState(np.eye(d)[i])
        if isinstance(slot_or_tape, SealedTape):
            head = slot_or_tape.run(psi)
        else:
            head = apply_via_choi(slot_or_tape.choi, psi.density())
        for combo in np.ndindex(*([3] * n_qubits)):
            b = np.ones((1, 1))
            for c in combo:
                b = np.kron(b, bases[c])
            out.append(read_out(head, PVM.from_basis(b.T)))
    return np.array(out)
