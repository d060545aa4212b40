import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import _oracles as orc
from qvn.core import DensityOperator, KrausChannel, QuantumError, RandomSource, Unitary, \
    bell_state, fidelity, haar_random_unitary, random_kraus_channel
from qvn.duality import ChoiState, apply_via_choi, choi_of_channel, choi_of_unitary, \
    is_cptp_choi, kraus_from_choi, unitary_from_choi

X = orc.PAULI[1]


def test_identity_channel_choi_is_omega():
    w = choi_of_channel(KrausChannel((np.eye(2),)))
    omega = bell_state(2).amplitudes
    assert np.abs(w.matrix - np.outer(omega, omega)).max() < 1e-12
    assert w.is_pure


def test_fully_depolarizing_choi_is_maximally_mixed():
    kraus = [s / 2 for s in orc.PAULI]
    w = choi_of_channel(KrausChannel(tuple(kraus)))
    assert np.abs(w.matrix - orc.choi_by_blocks(kraus, 2)).max() < 1e-12
    assert np.abs(w.matrix - np.eye(4) / 4).max() < 1e-12


def test_x_channel_choi_is_pure():
    w = choi_of_channel(KrausChannel((X,)))
    ref = np.kron(X, np.eye(2)) @ bell_state(2).amplitudes
    assert abs(np.trace(w.matrix @ w.matrix) - 1) < 1e-12
    assert fidelity(w.operator, w.vector) > 1 - 1e-12
    assert abs(abs(np.vdot(w.vector.amplitudes, ref)) - 1) < 1e-12


def test_hadamard_choi_amplitudes_pin_wire_order():
    # index = head * 2 + tail, so |00>,|01>,|10>,|11> carry H[0,0],H[0,1],H[1,0],H[1,1]
    w = choi_of_unitary(Unitary(orc.HAD))
    expected = np.array([1, 1, 1, -1]) / 2
    assert np.abs(w.vector.amplitudes - expected).max() < 1e-12
    assert np.abs(w.vector.amplitudes - orc.unitary_ket(orc.HAD)).max() < 1e-12


def test_identity_unitary_choi_and_global_phase():
    assert np.abs(choi_of_unitary(Unitary(np.eye(3))).vector.amplitudes
                  - bell_state(3).amplitudes).max() < 1e-12
    u = haar_random_unitary(2, RandomSource(4))
    a = choi_of_unitary(u)
    b = choi_of_unitary(Unitary(np.exp(0.7j) * u.matrix))
    assert abs(fidelity(a.vector, b.vector) - 1) < 1e-12
    assert np.abs(a.matrix - b.matrix).max() < 1e-12


def test_kraus_from_pure_choi_is_single_operator():
    k = kraus_from_choi(choi_of_unitary(Unitary(np.eye(2))))
    assert k.rank == 1
    op = k.kraus_ops[0]
    assert np.abs(op - op[0, 0] * np.eye(2)).max() < 1e-12
    kx = kraus_from_choi(choi_of_unitary(Unitary(X))).kraus_ops
    assert len(kx) == 1
    phase = kx[0][0, 1]
    assert abs(abs(phase) - 1) < 1e-12 and np.abs(kx[0] - phase * X).max() < 1e-12


def test_kraus_from_maximally_mixed_acts_like_depolarizer():
    w = ChoiState(DensityOperator(np.eye(4) / 4, (2, 2)))
    k = kraus_from_choi(w)
    assert k.rank == 4
    for i in range(2):
        for j in range(2):
            e = np.zeros((2, 2))
            e[i, j] = 1
            ref = orc.kraus_apply([s / 2 for s in orc.PAULI], e)
            assert np.abs(orc.kraus_apply(k.kraus_ops, e) - ref).max() < 1e-12


def test_apply_via_choi_examples():
    out = apply_via_choi(choi_of_unitary(Unitary(X)), DensityOperator(np.diag([1.0, 0.0])))
    assert np.abs(out.matrix - np.diag([0, 1])).max() < 1e-12
    g = np.random.default_rng(1)
    rho = orc.random_rho(2, g)
    ident = choi_of_channel(KrausChannel((np.eye(2),)))
    assert np.abs(apply_via_choi(ident, DensityOperator(rho)).matrix - rho).max() < 1e-12
    u = orc.ginibre_unitary(4, g)
    rho4 = orc.random_rho(4, g)
    out = apply_via_choi(choi_of_unitary(Unitary(u)), DensityOperator(rho4)).matrix
    assert np.abs(out - u @ rho4 @ u.conj().T).max() < 1e-12


def test_transpose_is_needed_in_readout():
    g = np.random.default_rng(7)
    u = orc.ginibre_unitary(2, g)
    rho = orc.random_rho(2, g)
    w = choi_of_unitary(Unitary(u))
    c = w.matrix.reshape(2, 2, 2, 2)
    # readout without the transpose on the input
    wrong = 2 * np.einsum("aibj,ji->ab", c, rho)
    right = u @ rho @ u.conj().T
    assert np.abs(apply_via_choi(w, DensityOperator(rho)).matrix - right).max() < 1e-12
    assert np.abs(wrong - right).max() > 1e-3


def test_non_trace_preserving_choi_rejected():
    m = np.zeros((4, 4))
    m[0, 0] = 1
    with pytest.raises(QuantumError):
        ChoiState(DensityOperator(m, (2, 2)))
    assert not is_cptp_choi(m, 2, 2)


def test_unitary_from_choi_recovers_gate():
    g = np.random.default_rng(3)
    u = orc.ginibre_unitary(4, g)
    rec = unitary_from_choi(choi_of_unitary(Unitary(u)))
    assert np.abs(rec - u).max() < 1e-12


def test_rectangular_channel_choi():
    rng = RandomSource(2)
    e = random_kraus_channel(2, 2, rng, d_out=3)
    w = choi_of_channel(e)
    assert (w.d_out, w.d_in) == (3, 2)
    assert np.abs(w.matrix - orc.choi_by_blocks(list(e.kraus_ops), 2)).max() < 1e-12


seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=25, deadline=None)
@given(seed=seeds, d=st.integers(2, 8), rank=st.integers(1, 4))
def test_round_trip_on_random_inputs(seed, d, rank):
    g = np.random.default_rng(seed)
    kraus = orc.random_kraus(d, rank, g)
    w = choi_of_channel(KrausChannel(tuple(kraus)))
    for _ in range(4):
        rho = orc.random_rho(d, g)
        out = apply_via_choi(w, DensityOperator(rho)).matrix
        assert np.abs(out - orc.kraus_apply(kraus, rho)).max() < 1e-9


@settings(max_examples=25, deadline=None)
@given(seed=seeds, d=st.integers(2, 6), rank=st.integers(1, 4))
def test_kraus_rank_equals_numerical_rank(seed, d, rank):
    g = np.random.default_rng(seed)
    w = choi_of_channel(KrausChannel(tuple(orc.random_kraus(d, rank, g))))
    numerical = int(np.sum(np.linalg.eigvalsh(w.matrix) > 1e-8))
    assert kraus_from_choi(w).rank == numerical == rank


@settings(max_examples=25, deadline=None)
@given(seed=seeds, d=st.integers(2, 6), rank=st.integers(1, 4))
def test_choi_invariants(seed, d, rank):
    g = np.random.default_rng(seed)
    w = choi_of_channel(KrausChannel(tuple(orc.random_kraus(d, rank, g))))
    assert abs(np.trace(w.matrix) - 1) < 1e-10
    assert np.linalg.eigvalsh(w.matrix).min() > -1e-10
    tail = orc.trace_out_last(np.einsum("aibj->iajb", w.matrix.reshape(d, d, d, d))
                              .reshape(d * d, d * d), d, d)
    assert np.abs(tail - np.eye(d) / d).max() < 1e-9
