"""Superchannels: maps from channels to channels.

Circuit form: a pre unitary ``U`` acts on input ``x`` and ancilla ``a``
(prepared in ``|0>``) and outputs the channel input ``y`` plus a residual
ancilla ``r``; the channel ``E`` maps ``y`` to ``z``; a post unitary ``V``
acts on ``z``, ``r`` and an optional extra wire ``e`` (also ``|0>``); the
wires not listed in ``keep`` are traced out.

Choi form: the channel is only available as its Choi state on (Z, T). An
ebit of dimension ``d_r`` on (Q, P) stands in for the ancilla path. The
transposed pre unitary, reordered by swaps (see :func:`build_tilde_u`), acts
on (P, T); the input enters as ``rho^t`` on T and ``|0><0|`` on P, and ``V``
acts on (Z, Q, e). Fixing the scalar by agreement with the circuit form
gives the factor ``d_y * d_r``: one dimension factor per Choi state.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import gates
from .core import (DensityOperator, KrausChannel, QuantumError, Unitary, as_rng, embed,
                   haar_random_unitary, partial_trace_matrix)
from .duality import ChoiState, choi_of_channel, choi_of_map, is_cptp_choi
from .jsonio import matrix_from_json, matrix_to_json
from .memory import ProgramSlot
from .register import qubits_of


@dataclass(frozen=True, eq=False)
class Superchannel:
    pre: Unitary
    post: Unitary
    input_dim: int
    ancilla_dim: int = 1
    channel_dims: tuple = None  # (d_y, d_z)
    extra_dim: int = 1
    post_dims: tuple = None  # factorization of V's output
    keep: tuple = (0,)
    label: str = ""

    def __post_init__(self):
        d_x, d_a = self.input_dim, self.ancilla_dim
        cd = (d_x, d_x) if self.channel_dims is None else tuple(self.channel_dims)
        object.__setattr__(self, "channel_dims", cd)
        if self.pre.dim != d_x * d_a:
            raise QuantumError(f"pre unitary has dimension {self.pre.dim}, expected {d_x * d_a}")
        if (d_x * d_a) % cd[0]:
            raise QuantumError("channel input dimension does not divide the pre output")
        d_in_post = cd[1] * self.residual_dim * self.extra_dim
        if self.post.dim != d_in_post:
            raise QuantumError(f"post unitary has dimension {self.post.dim}, expected {d_in_post}")
        pd = (cd[1], self.residual_dim * self.extra_dim) if self.post_dims is None \
            else tuple(self.post_dims)
        if int(np.prod(pd)) != d_in_post:
            raise QuantumError(f"post output factorization {pd} does not match {d_in_post}")
        object.__setattr__(self, "post_dims", pd)
        keep = tuple(sorted(self.keep))
        if not keep or any(k < 0 or k >= len(pd) for k in keep):
            raise QuantumError(f"invalid kept wires {keep} for output {pd}")
        object.__setattr__(self, "keep", keep)

    @property
    def residual_dim(self) -> int:
        return self.input_dim * self.ancilla_dim // self.channel_dims[0]

    @property
    def output_dim(self) -> int:
        return int(np.prod([self.post_dims[k] for k in self.keep]))

    @property
    def traced_wires(self) -> tuple:
        return tuple(i for i in range(len(self.post_dims)) if i not in self.keep)

    def choi_form_qubits(self) -> int:
        """Live qubits in the Choi form: program wires plus the ancilla ebit."""
        d_y, d_z = self.channel_dims
        return qubits_of(d_y) + qubits_of(d_z) + 2 * qubits_of(self.residual_dim)


def identity_superchannel(d: int) -> Superchannel:
    return Superchannel(gates.identity(d), gates.identity(d), d)


def _zero(d: int) -> np.ndarray:
    m = np.zeros((d, d), dtype=complex)
    m[0, 0] = 1
    return m


def _channel_on_first(kraus, sigma: np.ndarray, d_y: int, d_r: int) -> np.ndarray:
    """``(E (x) 1_r)(sigma)`` for ``sigma`` on (y, r)."""
    s = sigma.reshape(d_y, d_r, d_y, d_r)
    out = sum(np.einsum("zi,iajb,wj->zawb", k, s, k.conj()) for k in kraus)
    d_z = kraus[0].shape[0]
    return out.reshape(d_z * d_r, d_z * d_r)


def _choi_on_first(c: np.ndarray, sigma: np.ndarray, d_y: int, d_z: int, d_r: int):
    """Same map as :func:`_channel_on_first` computed from a Choi matrix."""
    ct = c.reshape(d_z, d_y, d_z, d_y)
    s = sigma.reshape(d_y, d_r, d_y, d_r)
    out = d_y * np.einsum("ziwj,iajb->zawb", ct, s)
    return out.reshape(d_z * d_r, d_z * d_r)


def _post(s: Superchannel, m: np.ndarray) -> np.ndarray:
    m = np.kron(m, _zero(s.extra_dim))
    v = s.post.matrix
    m = v @ m @ v.conj().T
    out = partial_trace_matrix(m, s.post_dims, list(s.keep))
    return (out + out.conj().T) / 2


def _rho_matrix(rho, d: int) -> np.ndarray:
    m = rho.matrix if hasattr(rho, "matrix") else np.asarray(rho, dtype=complex)
    if m.shape != (d, d):
        raise QuantumError(f"input of shape {m.shape} does not match dimension {d}")
    return m


def _kraus(e) -> tuple:
    if isinstance(e, Unitary):
        return (e.matrix,)
    if isinstance(e, KrausChannel):
        return e.kraus_ops
    raise QuantumError(f"expected a channel, got {type(e).__name__}")


def apply_to_channel(s: Superchannel, e, rho) -> DensityOperator:
    """``tr_a V (E (x) 1) U (rho (x) |0><0|)`` by direct circuit simulation."""
    kraus = _kraus(e)
    d_y, d_z = s.channel_dims
    if kraus[0].shape != (d_z, d_y):
        raise QuantumError(f"channel maps {kraus[0].shape[1]} -> {kraus[0].shape[0]}, "
                           f"superchannel slot expects {d_y} -> {d_z}")
    m = np.kron(_rho_matrix(rho, s.input_dim), _zero(s.ancilla_dim))
    u = s.pre.matrix
    m = u @ m @ u.conj().T
    m = _channel_on_first(kraus, m, d_y, s.residual_dim)
    return DensityOperator(_post(s, m))


def build_tilde_u(u: Unitary, dims: tuple) -> Unitary:
    """``SWAP . U^t . SWAP`` for ``U`` mapping (x, a) -> (y, r).

    ``dims = (d_x, d_a, d_y, d_r)`` (or ``(d_x, d_a)`` when the factorization
    is unchanged). The result acts on (r, y) ordered wires and outputs (a, x).
    """
    if len(dims) == 2:
        dims = (dims[0], dims[1], dims[0], dims[1])
    d_x, d_a, d_y, d_r = dims
    if u.dim != d_x * d_a or d_y * d_r != u.dim:
        raise QuantumError(f"dims {dims} inconsistent with a {u.dim}-dimensional unitary")
    m = gates.swap_matrix(d_x, d_a) @ u.matrix.T @ gates.swap_matrix(d_r, d_y)
    return Unitary(m, f"tilde({u.label})" if u.label else "")


def apply_to_choi(s: Superchannel, w: ChoiState, rho, ebit: np.ndarray | None = None
                  ) -> DensityOperator:
    """Choi-form evaluation of ``s(E)(rho)`` from the program state of ``E``.

    ``ebit`` replaces the maximally entangled ancilla state on (Q, P); it
    exists to show that a non-maximally entangled substitute breaks the
    identity.
    """
    d_y, d_z = s.channel_dims
    if (w.d_in, w.d_out) != (d_y, d_z):
        raise QuantumError(f"program maps {w.d_in} -> {w.d_out}, slot expects {d_y} -> {d_z}")
    out = _choi_form(s, w, _rho_matrix(rho, s.input_dim), ebit)
    return DensityOperator((out + out.conj().T) / 2)


def transform_choi(s: Superchannel, w: ChoiState) -> ChoiState:
    """Choi state of ``s(E)`` obtained by probing the Choi form on a basis."""
    m = choi_of_map(lambda e: _choi_form(s, w, e), s.input_dim, s.output_dim)
    m = (m + m.conj().T) / 2
    return ChoiState(DensityOperator(m, (s.output_dim, s.input_dim)))


def _choi_form(s: Superchannel, w: ChoiState, x: np.ndarray, ebit=None) -> np.ndarray:
    """Linear in ``x``, so it also serves for probing with ``|i><j|``."""
    d_y, d_z = s.channel_dims
    d_r, d_x, d_a = s.residual_dim, s.input_dim, s.ancilla_dim
    if ebit is None:
        om = np.eye(d_r).reshape(-1) / np.sqrt(d_r)
        ebit = np.outer(om, om)
    # wires (Z, T, Q, P)
    big = np.kron(w.matrix, ebit)
    ut = build_tilde_u(s.pre, (d_x, d_a, d_y, d_r)).matrix
    full = embed(ut, [d_z, d_y, d_r, d_r], [3, 1])
    big = full @ big @ full.conj().T
    # T now carries x and P carries a
    t = big.reshape(d_z, d_x, d_r, d_a, d_z, d_x, d_r, d_a)
    # tr_{T,P}[M (rho^t (x) |0><0|)]: rho^t[y, x] = rho[x, y]
    out = np.einsum("zxqpwyvk,xy,pk->zqwv", t, x, _zero(d_a))
    out = out.reshape(d_z * d_r, d_z * d_r) * d_y * d_r
    m = np.kron(out, _zero(s.extra_dim))
    v = s.post.matrix
    return partial_trace_matrix(v @ m @ v.conj().T, s.post_dims, list(s.keep))


def transform_channel_choi(s: Superchannel, e) -> np.ndarray:
    """Choi matrix of ``s(E)`` from the circuit form (probing a basis)."""
    kraus = _kraus(e)
    d_y, _ = s.channel_dims

    def action(x):
        m = np.kron(x, _zero(s.ancilla_dim))
        u = s.pre.matrix
        m = _channel_on_first(kraus, u @ m @ u.conj().T, d_y, s.residual_dim)
        m = np.kron(m, _zero(s.extra_dim))
        v = s.post.matrix
        return partial_trace_matrix(v @ m @ v.conj().T, s.post_dims, list(s.keep))

    return choi_of_map(action, s.input_dim, s.output_dim)


def preserves_cptp(s: Superchannel, e) -> bool:
    return is_cptp_choi(transform_channel_choi(s, e), s.output_dim, s.input_dim)


def random_superchannel(input_dim: int, ancilla_dim: int, rng) -> Superchannel:
    """Haar-random pre and post unitaries; the residual ancilla is traced."""
    if input_dim < 1 or ancilla_dim < 1:
        raise QuantumError("dimensions must be positive")
    rng = as_rng(rng)
    d = input_dim * ancilla_dim
    if d == 1:
        return identity_superchannel(1)
    pre = haar_random_unitary(d, rng)
    post = haar_random_unitary(d, rng)
    return Superchannel(pre, post, input_dim, ancilla_dim,
                        post_dims=(input_dim, ancilla_dim), keep=(0,))


# --------------------------------------------------------------------------- #
#                                   combs                                     #
# --------------------------------------------------------------------------- #

@dataclass
class CombResult:
    output: DensityOperator
    transcript: list = field(default_factory=list)


def _program_choi(p) -> ChoiState:
    if isinstance(p, ProgramSlot):
        p.check_available()
        return p.choi
    if isinstance(p, ChoiState):
        return p
    if isinstance(p, Unitary):
        return choi_of_channel(KrausChannel.from_unitary(p))
    if isinstance(p, KrausChannel):
        return choi_of_channel(p)
    raise QuantumError(f"cannot use a {type(p).__name__} as a comb slot")


def comb_compose(superchannels, programs, rho, shared_ancilla: bool = False) -> CombResult:
    """Run programs through a sequence of superchannels (one program per tooth).

    With ``shared_ancilla`` every tooth acts on (system, ancilla) with the
    same ancilla wire, which is prepared once and traced at the end; this
    requires square teeth with no extra or traced wires of their own.
    Otherwise each superchannel is applied to its program in Choi form and
    the resulting channels act one after another.
    """
    superchannels, programs = list(superchannels), list(programs)
    if len(superchannels) != len(programs):
        raise QuantumError(f"{len(superchannels)} superchannels but {len(programs)} programs")
    if not superchannels:
        raise QuantumError("empty comb")
    chois = [_program_choi(p) for p in programs]
    transcript = []
    if not shared_ancilla:
        current = rho
        for k, (s, w) in enumerate(zip(superchannels, chois)):
            current = apply_to_choi(s, w, current)
            transcript.append({"tooth": k, "operation": "superchannel(choi)",
                               "qubits_in_use": s.choi_form_qubits()})
        return CombResult(current, transcript)

    d_a = superchannels[0].ancilla_dim
    d = superchannels[0].input_dim
    for k, s in enumerate(superchannels):
        if s.ancilla_dim != d_a or s.input_dim != d or s.channel_dims != (d, d) \
                or s.extra_dim != 1 or s.post_dims != (d, d_a):
            raise QuantumError(f"tooth {k} does not chain on (system, shared ancilla)")
    m = np.kron(_rho_matrix(rho, d), _zero(d_a))
    for k, (s, w) in enumerate(zip(superchannels, chois)):
        u, v = s.pre.matrix, s.post.matrix
        m = u @ m @ u.conj().T
        m = _choi_on_first(w.matrix, m, d, d, d_a)
        m = v @ m @ v.conj().T
        transcript.append({"tooth": k, "operation": "tooth(shared ancilla)",
                           "qubits_in_use": 2 * qubits_of(d) + qubits_of(d) + qubits_of(d_a)})
    out = partial_trace_matrix(m, (d, d_a), [0])
    return CombResult(DensityOperator((out + out.conj().T) / 2), transcript)


# --------------------------------------------------------------------------- #
#                                  JSON I/O                                   #
# --------------------------------------------------------------------------- #

def superchannel_from_dict(data: dict) -> Superchannel:
    try:
        pre = Unitary(matrix_from_json(data["pre"]))
        post = Unitary(matrix_from_json(data["post"]))
    except KeyError as exc:
        raise QuantumError(f"superchannel needs field {exc}") from None
    d_a = int(data.get("ancilla_dim", 1))
    d_x = int(data.get("input_dim", pre.dim // d_a))
    post_dims = tuple(data["post_dims"]) if "post_dims" in data else None
    traced = data.get("traced_wires")
    if traced is not None:
        n = len(post_dims) if post_dims else 2
        keep = tuple(i for i in range(n) if i not in set(traced))
    else:
        keep = tuple(data.get("keep", (0,)))
    return Superchannel(pre, post, d_x, d_a, extra_dim=int(data.get("extra_dim", 1)),
                        post_dims=post_dims, keep=keep, label=data.get("label", ""))


def superchannel_to_dict(s: Superchannel) -> dict:
    return {"pre": matrix_to_json(s.pre.matrix), "post": matrix_to_json(s.post.matrix),
            "input_dim": s.input_dim, "ancilla_dim": s.ancilla_dim,
            "extra_dim": s.extra_dim, "post_dims": list(s.post_dims),
            "traced_wires": list(s.traced_wires), "label": s.label}


def load_superchannel(path) -> Superchannel:
    return superchannel_from_dict(json.loads(Path(path).read_text()))


def superchannel_qubits(program_dim: int = 2, reduced: bool = False) -> int:
    """Qubits for an arbitrary superchannel on a program in Choi form.

    The general construction needs an ancilla of dimension ``d^2``; the
    reduced count uses a ``d``-dimensional ancilla.
    """
    d_r = program_dim if reduced else program_dim ** 2
    return 2 * qubits_of(program_dim) + 2 * qubits_of(d_r)
