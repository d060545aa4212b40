"""Store a gate as a program state, run it by injection, and read it out.

Run with ``python3 tutorials/01_memory_and_injection.py``.
"""
import numpy as np

from qvn import gates
from qvn.core import PVM, PureState, ket
from qvn.memory import ACCEPT, COMPLEMENT, MemoryUnit, read_out, recover_probability, refresh, \
    write_inject

mem = MemoryUnit()
h = mem.store(gates.H, "H")
print("stored", h.label, "on", h.qubits, "qubits")

# Injecting |0> into the tail leaves H|0> on the head when the accept branch fires.
branches = write_inject(h, ket(0))
for b in branches:
    print(f"branch {b.outcome}: probability {b.probability:.3f}")
z = PVM.computational(2)
print("accept readout", read_out(branches[ACCEPT].head_state, z))

# The complement branch is not wasted: its statistics map back to the ideal ones.
q = read_out(branches[COMPLEMENT].head_state, PVM.from_basis(gates.H.matrix.T))
print("complement, X readout", q)
print("recovered", [recover_probability(COMPLEMENT, qi, 2) for qi in q])

# A slot is consumed by one injection and restored from its white-box description.
refresh(h)
plus = PureState(np.array([1, 1]) / np.sqrt(2))
print("H|+> in Z basis", read_out(write_inject(h, plus)[ACCEPT].head_state, z))
