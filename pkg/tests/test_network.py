import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import _oracles as orc
from qvn import gates
from qvn.core import QuantumError, RandomSource, Unitary
from qvn.duality import choi_of_unitary
from qvn.memory import MemoryUnit, NoCloningError, ProgramSlot
from qvn.network import ChannelModel, SealedTape, TranscriptRecord, VerificationPlan, \
    bb84_exchange, behavioural_statistics, deserialize_gates, detection_probability, \
    entangled_key_exchange, gate_list_unitary, sample_count, scheme1_send_bits, \
    scheme2_send_bits, scheme3_send_qubits, scheme4_send_via_ebits, serialize_gates, \
    verify_program

T = np.diag([1, np.exp(1j * np.pi / 4)])
CZ = np.diag([1, 1, 1, -1])
IDEAL = ChannelModel.ideal()


def slot_of(u, label="p"):
    u = u if isinstance(u, Unitary) else Unitary(u)
    return ProgramSlot(choi_of_unitary(u), label, u)


def intercept_resend_error_rate():
    """Average over Alice basis, bit, Eve basis; Bob measures in Alice's basis."""
    bases = [np.eye(2), orc.HAD]
    total = 0.0
    for a_basis, bit, e_basis in itertools.product(range(2), range(2), range(2)):
        sent = bases[a_basis][:, bit]
        for e_bit in range(2):
            p_eve = abs(np.vdot(bases[e_basis][:, e_bit], sent)) ** 2
            resent = bases[e_basis][:, e_bit]
            p_err = abs(np.vdot(bases[a_basis][:, 1 - bit], resent)) ** 2
            total += p_eve * p_err / 8
    return total


def depolarized_error_rate(p):
    bases = [np.eye(2), orc.HAD]
    total = 0.0
    for a_basis, bit in itertools.product(range(2), range(2)):
        v = bases[a_basis][:, bit]
        rho = (1 - p) * np.outer(v, v.conj()) + p * np.eye(2) / 2
        w = bases[a_basis][:, 1 - bit]
        total += np.vdot(w, rho @ w).real / 4
    return total


def depolarized_choi_fidelity(u, p):
    v = orc.unitary_ket(u)
    m = np.outer(v, v.conj())
    for q in range(2):
        t = m.reshape(2, 2, 2, 2)
        t = np.moveaxis(t, [q, 2 + q], [0, 1])
        tr = np.trace(t, axis1=0, axis2=1)
        t = (1 - p) * t + p * np.eye(2)[:, :, None, None] * tr[None, None] / 2
        m = np.moveaxis(t, [0, 1], [q, 2 + q]).reshape(4, 4)
    return np.vdot(v, m @ v).real


def test_oracle_error_rates():
    assert abs(intercept_resend_error_rate() - 0.25) < 1e-12
    assert abs(depolarized_error_rate(0.2) - 0.1) < 1e-12


def test_bb84_ideal_has_no_errors():
    ex = bb84_exchange(2000, IDEAL, RandomSource(0))
    assert ex.qber == 0 and not ex.abort
    sigma = np.sqrt(0.25 / ex.n_raw)
    assert abs(ex.n_sifted / ex.n_raw - 0.5) < 4 * sigma
    assert len(ex.key) == ex.n_sifted - ex.n_tested


def test_bb84_intercept_resend_statistics():
    ex = bb84_exchange(100_000, ChannelModel.eavesdropper(1.0), RandomSource(1))
    ref = intercept_resend_error_rate()
    assert abs(ex.qber - ref) <= 3 * np.sqrt(ref * (1 - ref) / ex.n_tested)
    assert ex.abort


@pytest.mark.parametrize("p", [0.05, 0.1, 0.3])
def test_bb84_depolarizing_statistics(p):
    ex = bb84_exchange(40_000, ChannelModel.depolarizing(p), RandomSource(2))
    ref = depolarized_error_rate(p)
    assert abs(ex.qber - ref) <= 3 * np.sqrt(ref * (1 - ref) / ex.n_tested)


def test_entangled_exchange_sees_eve():
    ok = entangled_key_exchange(4000, IDEAL, RandomSource(3))
    bad = entangled_key_exchange(4000, ChannelModel.eavesdropper(1.0), RandomSource(3))
    assert ok.qber == 0 and not ok.abort
    assert bad.qber > 0.15 and bad.abort


def test_small_exchanges_rejected():
    with pytest.raises(QuantumError):
        bb84_exchange(99, IDEAL, RandomSource(0))
    with pytest.raises(QuantumError):
        ChannelModel.depolarizing(1.5)
    with pytest.raises(QuantumError):
        ChannelModel("lossy")


def test_detection_probability_against_binomial_sum():
    for n in (10, 40, 200):
        k = math.floor(0.11 * n)
        q = 0.25
        ref = 1 - sum(math.comb(n, j) * q ** j * (1 - q) ** (n - j) for j in range(k + 1))
        assert abs(detection_probability(n, 1.0) - ref) < 1e-12
    values = [detection_probability(n, 0.6) for n in (50, 100, 200, 400, 800)]
    assert all(a < b for a, b in zip(values, values[1:]))
    assert values[-1] > 0.99


def test_scheme1_replays_hadamard():
    tape, rec = scheme1_send_bits(["H"], IDEAL, RandomSource(4))
    assert rec.outcome == "success" and rec.qber == 0
    assert orc.overlap2(tape.choi().vector.amplitudes, orc.unitary_ket(orc.HAD)) > 1 - 1e-12


def test_scheme1_gate_order():
    prog = [("H", (0,)), ("T", (0,)), ("CZ", (0, 1))]
    tape, _ = scheme1_send_bits(prog, IDEAL, RandomSource(5))
    ref = CZ @ np.kron(T @ orc.HAD, np.eye(2))
    assert np.abs(gate_list_unitary(prog) - ref).max() < 1e-12
    stats = behavioural_statistics(tape, 2)
    assert np.abs(stats - orc.pauli_readout_stats(ref, 2)).max() < 1e-12


def test_scheme1_aborts_under_full_interception():
    tape, rec = scheme1_send_bits(["H", "T", "S"], ChannelModel.eavesdropper(1.0),
                                  RandomSource(6))
    assert tape is None and rec.outcome == "abort" and rec.bits_transmitted == 0


def test_scheme2_matches_scheme1_and_counts_ebits():
    prog = [("H", (0,)), ("CNOT", (0, 1))]
    t1, r1 = scheme1_send_bits(prog, IDEAL, RandomSource(7))
    t2, r2 = scheme2_send_bits(prog, IDEAL, RandomSource(8))
    assert np.abs(behavioural_statistics(t1, 2) - behavioural_statistics(t2, 2)).max() < 1e-12
    assert r2.ebits_consumed == r2.details["sifted"]
    assert r1.ebits_consumed == 0 and r1.bits_transmitted == len(serialize_gates(prog))
    _, bad = scheme2_send_bits(prog, ChannelModel.eavesdropper(1.0), RandomSource(9))
    assert bad.outcome == "abort" and bad.qber > 0.11


def test_sealed_tape_is_execute_only():
    tape, _ = scheme1_send_bits(["H"], IDEAL, RandomSource(10))
    assert isinstance(tape, SealedTape)
    with pytest.raises(AttributeError):
        tape.program = "peek"
    assert not any(hasattr(tape, a) for a in ("program", "gates", "ciphertext", "key"))
    slot = tape.install(MemoryUnit(), "H")
    assert slot.whitebox is None


def test_serialization_round_trip_and_errors():
    prog = [("H", (0,)), ("CNOT", (1, 0)), ("T", (2,))]
    bits = serialize_gates(prog)
    assert len(bits) == 8 * (2 + 3 + 2)
    assert deserialize_gates(bits) == prog
    with pytest.raises(QuantumError):
        deserialize_gates(bits[:-1])
    with pytest.raises(QuantumError):
        deserialize_gates(np.ones(8, dtype=int))
    with pytest.raises(QuantumError):
        serialize_gates([("CNOT", (0,))])


def test_scheme3_ideal_and_resources():
    user, rec = scheme3_send_qubits(slot_of(orc.HAD, "H"), IDEAL, RandomSource(11))
    assert user.metadata["fidelity"] > 1 - 1e-9
    assert rec.qubits_transmitted == 2 and rec.ebits_consumed == 2
    assert rec.bits_transmitted == 4 and rec.program_qubits == 2
    with pytest.raises(NoCloningError):
        user.clone("copy")


def test_scheme3_noise_lowers_fidelity_monotonically():
    fids = []
    for p in (0.05, 0.1, 0.2):
        user, _ = scheme3_send_qubits(slot_of(orc.HAD, "H"), ChannelModel.depolarizing(p),
                                      RandomSource(12))
        fids.append(user.metadata["fidelity"])
        assert abs(fids[-1] - depolarized_choi_fidelity(orc.HAD, p)) < 1e-9
    assert fids[0] > fids[1] > fids[2] and fids[0] < 1


def test_scheme4_budgets_and_fidelity():
    user, rec = scheme4_send_via_ebits(slot_of(T, "T"), IDEAL, RandomSource(13))
    assert rec.details["peak_qubits"] == 9
    assert orc.overlap2(user.choi.vector.amplitudes, orc.unitary_ket(T)) > 1 - 1e-9
    u2 = orc.ginibre_unitary(4, np.random.default_rng(13))
    user2, rec2 = scheme4_send_via_ebits(slot_of(u2, "U"), IDEAL, RandomSource(14))
    assert rec2.details["peak_qubits"] == 17
    assert orc.overlap2(user2.choi.vector.amplitudes, orc.unitary_ket(u2)) > 1 - 1e-9
    assert rec2.details["attempts"] >= 1 and rec2.outcome == "success"


def test_scheme4_rejects_wrong_preparation():
    with pytest.raises(QuantumError):
        scheme4_send_via_ebits(slot_of(T, "T"), IDEAL, RandomSource(0),
                               prep=Unitary(np.eye(4)))


def test_bits_versus_qubits_accounting():
    _, r1 = scheme1_send_bits(["T"], IDEAL, RandomSource(15))
    _, r3 = scheme3_send_qubits(slot_of(T, "T"), IDEAL, RandomSource(15))
    _, r4 = scheme4_send_via_ebits(slot_of(T, "T"), IDEAL, RandomSource(15))
    assert r1.program_qubits == 0 and r1.bits_transmitted > 0
    for rec in (r3, r4):
        assert rec.program_qubits == 2 and rec.bits_transmitted == 4


def test_transcript_contract():
    with pytest.raises(QuantumError):
        TranscriptRecord(5)
    with pytest.raises(QuantumError):
        TranscriptRecord(1, qubits_transmitted=-1)
    rec = TranscriptRecord(3, qubits_transmitted=2, details={"fidelity": np.float64(1.0)})
    assert json.loads(json.dumps(rec.to_dict()))["scheme"] == 3


def test_sample_count_examples():
    assert sample_count(0.1, 0.05) == math.ceil(10 * math.log(20)) == 30
    assert sample_count(0.5, 0.5) == 2
    assert sample_count(1 - 1e-12, 1 / math.e) == 1
    for bad in ((0, 0.5), (0.5, 1), (1.2, 0.1)):
        with pytest.raises(QuantumError):
            sample_count(*bad)
    assert VerificationPlan(0.1, 0.05).n_samples == 30
    with pytest.raises(QuantumError):
        VerificationPlan(0.1, 0.05, n_samples=10)


def test_verification_accepts_and_rejects():
    plan = VerificationPlan(0.1, 0.05)
    good = verify_program([slot_of(orc.HAD, f"h{i}") for i in range(30)], plan, gates.H,
                          RandomSource(16))
    assert good.accepted and good.failures == 0 and good.tests == 30
    fake = verify_program([slot_of(orc.PAULI[3], f"z{i}") for i in range(30)], plan, gates.H,
                          RandomSource(17))
    assert not fake.accepted and fake.failures > 0
    with pytest.raises(QuantumError, match="30"):
        verify_program([slot_of(orc.HAD)], plan, gates.H, RandomSource(0))


seeds = st.integers(0, 2**32 - 1)
names = st.sampled_from(["H", "X", "Z", "S", "T", "CNOT", "CZ", "SWAP"])


@settings(max_examples=40, deadline=None)
@given(prog=st.lists(st.tuples(names, st.permutations([0, 1, 2])), min_size=1, max_size=6))
def test_serialization_round_trip_property(prog):
    prog = [(n, tuple(w[:2] if n in ("CNOT", "CZ", "SWAP") else w[:1])) for n, w in prog]
    assert deserialize_gates(serialize_gates(prog)) == prog


@settings(max_examples=10, deadline=None)
@given(seed=seeds)
def test_all_schemes_agree_on_ideal_channel(seed):
    u = orc.ginibre_unitary(2, np.random.default_rng(seed))
    ref = orc.pauli_readout_stats(u, 1)
    for send in (scheme3_send_qubits, scheme4_send_via_ebits):
        user, _ = send(slot_of(u), IDEAL, RandomSource(seed))
        assert np.abs(behavioural_statistics(user, 1) - ref).max() < 1e-9
    prog = ["H", "T", "S"]
    tape, _ = scheme2_send_bits(prog, IDEAL, RandomSource(seed))
    ref = orc.pauli_readout_stats(gate_list_unitary(prog), 1)
    assert np.abs(behavioural_statistics(tape, 1) - ref).max() < 1e-12
