import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import _oracles as orc
from qvn import gates
from qvn.core import PureState, QuantumError, Unitary, bell_state, ket, tensor_product
from qvn.duality import choi_of_unitary
from qvn.memory import MemoryUnit, ProgramSlot
from qvn.qcu import BlackBox, ControlSignal, FlagSpec, controlled_program, \
    controlled_unknown, disentangle_check, lcu_two

X, Z = orc.PAULI[1], orc.PAULI[3]
PLUS = np.array([1, 1]) / np.sqrt(2)
MINUS = np.array([1, -1]) / np.sqrt(2)


def flag_of(u, k=0):
    lam, vecs = np.linalg.eig(u)
    return FlagSpec(complex(lam[k] / abs(lam[k])), PureState.normalized(vecs[:, k]))


def test_controlled_z_on_plus():
    res = controlled_unknown(BlackBox(Z), FlagSpec(1, ket(0)), ControlSignal.bit(1),
                             PureState(PLUS))
    assert np.abs(res.state.amplitudes - np.kron([0, 1], MINUS)).max() < 1e-12
    assert res.flag_fidelity > 1 - 1e-12


def test_control_off_leaves_everything():
    g = np.random.default_rng(0)
    u = orc.ginibre_unitary(2, g)
    psi = orc.random_ket(2, g)
    res = controlled_unknown(BlackBox(u), flag_of(u), ControlSignal.bit(0), PureState(psi))
    assert orc.phase_free_distance(res.state.amplitudes, np.kron([1, 0], psi)) < 1e-12
    assert res.flag_fidelity > 1 - 1e-12


def test_controlled_random_gate_with_plus_control():
    g = np.random.default_rng(1)
    for _ in range(20):
        u = orc.ginibre_unitary(2, g)
        psi = orc.random_ket(2, g)
        res = controlled_unknown(BlackBox(u), flag_of(u, 1), ControlSignal.qubit(*PLUS),
                                 PureState(psi))
        ref = orc.controlled(u) @ np.kron(PLUS, psi)
        assert orc.phase_free_distance(res.state.amplitudes, ref) < 1e-9
        assert res.qubits_used == 3


def test_black_box_hides_matrix_and_counts_calls():
    u = BlackBox(lambda v: X @ v, dim=2, label="secret")
    controlled_unknown(u, FlagSpec(1, PureState(PLUS)), ControlSignal.bit(1), ket(0))
    # one call for the flag check, then one per column of the other two wires
    assert u.calls == 1 + 4
    assert not hasattr(u, "matrix")
    with pytest.raises(QuantumError):
        BlackBox(lambda v: v)


def test_bad_flag_is_rejected():
    with pytest.raises(QuantumError, match="bad flag"):
        controlled_unknown(BlackBox(X), FlagSpec(1, ket(0)), ControlSignal.bit(1), ket(0))
    with pytest.raises(QuantumError):
        FlagSpec(0.5, ket(0))


def test_control_signal_contract():
    with pytest.raises(QuantumError):
        ControlSignal.from_measurement(0)
    with pytest.raises(QuantumError):
        ControlSignal("qubit", 1, 0, provenance="measurement")
    with pytest.raises(QuantumError):
        ControlSignal.qubit(1, 1)
    assert ControlSignal.bit(1).state.amplitudes[1] == 1


def test_controlled_program_budgets_and_success_branch():
    g = np.random.default_rng(2)
    for d, budget in ((2, 5), (4, 9)):
        u = orc.ginibre_unitary(d, g)
        psi = orc.random_ket(d, g)
        s = ProgramSlot(choi_of_unitary(Unitary(u)), "U")
        res = controlled_program(s, flag_of(u), ControlSignal.qubit(*PLUS), PureState(psi),
                                 force=0)
        assert res.success and res.qubits_used == budget
        assert abs(res.probability - 1 / d ** 2) < 1e-12
        ref = orc.controlled(u) @ np.kron(PLUS, psi)
        assert orc.phase_free_distance(res.state.amplitudes, ref) < 1e-9
        assert s.consumed


def test_controlled_program_failure_branch_reported():
    u = orc.ginibre_unitary(2, np.random.default_rng(3))
    s = ProgramSlot(choi_of_unitary(Unitary(u)), "U")
    res = controlled_program(s, flag_of(u), ControlSignal.bit(1), ket(0), force=2)
    assert not res.success


def test_lcu_examples():
    psi = PureState(orc.random_ket(2, np.random.default_rng(4)))
    i2 = np.eye(2)
    sig = ControlSignal.qubit(*PLUS)
    f_i = FlagSpec(1, ket(0))
    good = lcu_two(BlackBox(i2), BlackBox(i2), sig, psi, f_i, f_i)[0]
    assert good.success and abs(good.probability - 1) < 1e-12
    assert orc.overlap2(good.state.amplitudes, psi.amplitudes) > 1 - 1e-12
    good = lcu_two(BlackBox(i2), BlackBox(Z), sig, ket(0), f_i, FlagSpec(1, ket(0)))[0]
    assert np.abs(good.state.amplitudes - [1, 0]).max() < 1e-12
    good = lcu_two(BlackBox(X), BlackBox(Z), sig, ket(0), FlagSpec(1, PureState(PLUS)),
                   FlagSpec(1, ket(0)))[0]
    assert np.abs(good.state.amplitudes - PLUS).max() < 1e-12
    assert abs(good.probability - 0.5) < 1e-12


def test_lcu_accepts_flagged_slots_and_requires_flags():
    mem = MemoryUnit()
    a = mem.store(gates.X, "X", flag=FlagSpec(1, PureState(PLUS)))
    b = mem.store(gates.Z, "Z", flag=FlagSpec(1, ket(0)))
    out = lcu_two(a, b, ControlSignal.qubit(*PLUS), ket(0))
    assert np.abs(out[0].state.amplitudes - PLUS).max() < 1e-12
    bare = mem.store(gates.H, "H")
    with pytest.raises(QuantumError, match="flag"):
        lcu_two(a, bare, ControlSignal.qubit(*PLUS), ket(0))


def test_lcu_cancelling_branch_has_zero_probability():
    f = FlagSpec(1, ket(0))
    out = lcu_two(BlackBox(np.eye(2)), BlackBox(np.eye(2)), ControlSignal.qubit(*PLUS), ket(0),
                  f, f)
    assert out[1].probability == 0 and out[1].state is None


def test_disentangle_examples():
    ok, m = disentangle_check(tensor_product(ket(0), PureState(PLUS)), [0], [1])
    assert ok and m < 1e-12
    ok, m = disentangle_check(bell_state(2), [0], [1])
    assert not ok and abs(m - 0.5) < 1e-12
    res = controlled_unknown(BlackBox(X), FlagSpec(1, PureState(PLUS)),
                             ControlSignal.qubit(*PLUS), ket(0))
    state = PureState(res.state.amplitudes, (2, 2))
    ok, m = disentangle_check(state, [0], [1])
    assert not ok and abs(m - 0.5) < 1e-12
    with pytest.raises(QuantumError):
        disentangle_check(state, [0], [0])


seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=30, deadline=None)
@given(seed=seeds, phi=st.floats(0, 2 * np.pi))
def test_phase_moves_with_flag_eigenvalue(seed, phi):
    g = np.random.default_rng(seed)
    u = orc.ginibre_unitary(2, g)
    c, psi = orc.random_ket(2, g), orc.random_ket(2, g)
    f = flag_of(u)
    a = controlled_unknown(BlackBox(u), f, ControlSignal.qubit(*c), PureState(psi))
    shifted = FlagSpec(np.exp(1j * phi) * f.eigenvalue, f.eigenstate)
    b = controlled_unknown(BlackBox(np.exp(1j * phi) * u), shifted, ControlSignal.qubit(*c),
                           PureState(psi))
    # equal up to a global phase; the relative phase between branches follows phi
    ref = orc.controlled(np.exp(1j * phi) * u) @ np.kron(c, psi)
    assert orc.phase_free_distance(b.state.amplitudes, ref) < 1e-9
    assert orc.phase_free_distance(a.state.amplitudes, orc.controlled(u) @ np.kron(c, psi)) < 1e-9
    # a stale eigenvalue no longer passes the flag check
    if abs(np.exp(1j * phi) - 1) > 1e-5:
        with pytest.raises(QuantumError):
            controlled_unknown(BlackBox(np.exp(1j * phi) * u), f, ControlSignal.qubit(*c),
                               PureState(psi))


@settings(max_examples=30, deadline=None)
@given(seed=seeds, d=st.sampled_from([2, 3, 4]))
def test_flag_is_restored(seed, d):
    g = np.random.default_rng(seed)
    u = orc.ginibre_unitary(d, g)
    res = controlled_unknown(BlackBox(u), flag_of(u), ControlSignal.qubit(*orc.random_ket(2, g)),
                             PureState(orc.random_ket(d, g)))
    assert res.flag_fidelity >= 1 - 1e-9 and res.flag_purity >= 1 - 1e-9


@settings(max_examples=30, deadline=None)
@given(seed=seeds)
def test_lcu_matches_branch_enumeration(seed):
    g = np.random.default_rng(seed)
    u1, u2 = orc.ginibre_unitary(2, g), orc.ginibre_unitary(2, g)
    ab, psi = orc.random_ket(2, g), orc.random_ket(2, g)
    out = lcu_two(BlackBox(u1), BlackBox(u2), ControlSignal.qubit(*ab), PureState(psi),
                  flag_of(u1), flag_of(u2))
    plus = (ab[0] * u1 @ psi + ab[1] * u2 @ psi) / np.sqrt(2)
    minus = (ab[0] * u1 @ psi - ab[1] * u2 @ psi) / np.sqrt(2)
    assert abs(out[0].probability - np.vdot(plus, plus).real) < 1e-10
    assert abs(out[1].probability - np.vdot(minus, minus).real) < 1e-10
    assert abs(out[0].probability + out[1].probability - 1) < 1e-10
