"""Compose stored programs by teleportation, then control an unknown gate.

Run with ``python3 tutorials/02_compose_and_control.py``.
"""
import numpy as np

from qvn import gates
from qvn.core import PureState, ket
from qvn.memory import MemoryUnit
from qvn.qcu import BlackBox, ControlSignal, FlagSpec, controlled_unknown, lcu_two
from qvn.qpu import compose_covariant, compose_postselect

mem = MemoryUnit()
th = np.array(gates.T.matrix @ gates.H.matrix)
want = th.reshape(-1) / np.sqrt(2)

# Postselected composition works for black boxes but only on one Bell outcome.
for k in range(4):
    r = compose_postselect(mem.store(gates.H, f"H{k}"), mem.store(gates.T, f"T{k}"), force=k)
    f = abs(np.vdot(want, r.choi.vector.amplitudes)) ** 2
    print(f"postselect outcome {k}: p={r.probability:.2f} fidelity to |TH>={f:.3f}")

# The covariant protocol corrects every outcome while sending one bit.
r = compose_covariant(mem.store(gates.H, "H"), mem.store(gates.T, "T"), force=1)
f = abs(np.vdot(want, r.choi.vector.amplitudes)) ** 2
print(f"covariant: {r.qubits_used} qubits, {r.ancilla_bits_used} bit, fidelity {f:.12f}")

# Controlled-U for a gate seen only through calls, given one eigenstate as a flag.
plus = PureState(np.array([1, 1]) / np.sqrt(2))
x_box = BlackBox(lambda v: gates.X.matrix @ v, dim=2, label="hidden X")
res = controlled_unknown(x_box, FlagSpec(1, plus), ControlSignal.qubit(*plus.amplitudes), ket(0))
print("controlled-X on |+>|0>:", np.round(res.state.amplitudes, 6), "calls:", x_box.calls)

# Two flagged gates give (X + Z)/sqrt(2) = H on the '+' branch.
out = lcu_two(BlackBox(gates.X.matrix), BlackBox(gates.Z.matrix),
              ControlSignal.qubit(*plus.amplitudes), ket(0), FlagSpec(1, plus), FlagSpec(1, ket(0)))
print(f"LCU '+' branch p={out[0].probability:.2f}:", np.round(out[0].state.amplitudes, 6))
