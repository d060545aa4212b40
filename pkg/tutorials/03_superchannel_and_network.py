"""Transform a program with a superchannel, download it, and verify the copies.

Run with ``python3 tutorials/03_superchannel_and_network.py``.
"""
import numpy as np

from qvn import gates
from qvn.core import DensityOperator, RandomSource
from qvn.duality import choi_of_unitary
from qvn.memory import MemoryUnit
from qvn.network import ChannelModel, VerificationPlan, bb84_exchange, scheme1_send_bits, \
    scheme3_send_qubits, scheme4_send_via_ebits, verify_program
from qvn.superchannel import apply_to_channel, apply_to_choi, random_superchannel

rng = RandomSource(2024)

# A superchannel acts on the program itself. Its circuit form and its
# Choi-state form agree.
s = random_superchannel(2, 2, rng)
rho = DensityOperator(np.diag([0.7, 0.3]))
a = apply_to_channel(s, gates.T, rho).matrix
b = apply_to_choi(s, choi_of_unitary(gates.T), rho).matrix
print(f"superchannel: circuit vs Choi form differ by {np.abs(a - b).max():.1e}, "
      f"{s.choi_form_qubits()} qubits")

# Key exchange notices an intercept-resend attacker.
for channel in (ChannelModel.ideal(), ChannelModel.eavesdropper(1.0)):
    ex = bb84_exchange(20_000, channel, rng)
    print(f"BB84 over {channel.kind}: QBER {ex.qber:.3f}, abort={ex.abort}")

# Bits or qubits can carry the program.
tape, rec = scheme1_send_bits(["H", "T"], ChannelModel.ideal(), rng)
print("scheme 1:", tape, "bits sent:", rec.bits_transmitted)
host = MemoryUnit().store(gates.T, "T")
for send in (scheme3_send_qubits, scheme4_send_via_ebits):
    user, rec = send(host, ChannelModel.ideal(), rng)
    print(f"scheme {rec.scheme}: fidelity {user.metadata['fidelity']:.12f}, "
          f"peak {rec.details['peak_qubits']} qubits")
noisy, _ = scheme3_send_qubits(host, ChannelModel.depolarizing(0.1), rng)
print(f"scheme 3 with depolarizing p=0.1: fidelity {noisy.metadata['fidelity']:.4f}")

# Verification spends N copies and rejects an impostor.
plan = VerificationPlan(0.1, 0.05)
mem = MemoryUnit()
good = [mem.store(gates.H, f"H{i}") for i in range(plan.n_samples)]
fake = [mem.store(gates.Z, f"Z{i}") for i in range(plan.n_samples)]
print("N =", plan.n_samples,
      "| faithful accepted:", verify_program(good, plan, gates.H, rng).accepted,
      "| Z claimed as H accepted:", verify_program(fake, plan, gates.H, rng).accepted)
