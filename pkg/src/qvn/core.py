"""Dense complex linear algebra and elementary quantum operations.

All quantum objects are immutable wrappers around numpy arrays. Subsystems
are ordered as Kronecker factors: subsystem 0 is the leftmost factor and the
most significant digit of a flat basis index, so ``|0> (x) |1>`` is the
vector ``(0, 1, 0, 0)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

ATOL = 1e-10
"""Tolerance for algebraic identities (normalization, unitarity, ...)."""

EIG_ATOL = 1e-8
"""Tolerance for quantities that pass through an eigen-decomposition."""

ZERO_BRANCH = 1e-13


class QuantumError(ValueError):
    """Raised when an object violates its invariants or dimensions mismatch."""


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=complex)
    arr.flags.writeable = False
    return arr


def _prod(dims) -> int:
    return int(np.prod(dims, dtype=np.int64)) if len(dims) else 1


# --------------------------------------------------------------------------- #
#                               Random numbers                                #
# --------------------------------------------------------------------------- #

class RandomSource:
    """Seeded random stream shared by every stochastic operation.

    The generator is numpy's PCG64 everywhere, so a seed fully determines a
    simulation transcript.
    """

    algorithm = "PCG64"

    def __init__(self, seed: int = 0):
        self.seed = int(seed) & 0xFFFF_FFFF_FFFF_FFFF
        self._seq = np.random.SeedSequence(self.seed)
        self.generator = np.random.Generator(np.random.PCG64(self._seq))

    def __repr__(self):
        return f"RandomSource(seed={self.seed})"

    def spawn(self, n: int) -> list["RandomSource"]:
        """Independent child streams, e.g. one per trial."""
        children = []
        for child in self._seq.spawn(n):
            rs = RandomSource.__new__(RandomSource)
            rs.seed = self.seed
            rs._seq = child
            rs.generator = np.random.Generator(np.random.PCG64(child))
            children.append(rs)
        return children

    def random(self, size=None):
        return self.generator.random(size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size=size)

    def normal(self, size=None):
        return self.generator.standard_normal(size)

    def choice(self, probabilities: Sequence[float]) -> int:
        """Draw one index according to ``probabilities``."""
        cdf = np.cumsum(probabilities)
        u = self.generator.random() * cdf[-1]
        return int(min(np.searchsorted(cdf, u, side="right"), len(cdf) - 1))


def as_rng(rng) -> RandomSource:
    if isinstance(rng, RandomSource):
        return rng
    if rng is None:
        return RandomSource(0)
    return RandomSource(int(rng))


# --------------------------------------------------------------------------- #
#                                Domain types                                 #
# --------------------------------------------------------------------------- #

@dataclass(frozen=True, eq=False)
class PureState:
    """Normalized amplitude vector over subsystems with dimensions ``dims``."""

    amplitudes: np.ndarray
    dims: tuple = None

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        dims = (len(amps),) if self.dims is None else tuple(int(d) for d in self.dims)
        if _prod(dims) != len(amps):
            raise QuantumError(f"dims {dims} do not match {len(amps)} amplitudes")
        norm = np.vdot(amps, amps).real
        if abs(norm - 1) > ATOL:
            raise QuantumError(f"state not normalized (norm^2 = {norm})")
        object.__setattr__(self, "amplitudes", _frozen(amps))
        object.__setattr__(self, "dims", dims)

    @classmethod
    def normalized(cls, amplitudes, dims=None) -> "PureState":
        v = np.asarray(amplitudes, dtype=complex).reshape(-1)
        n = np.linalg.norm(v)
        if n == 0:
            raise QuantumError("cannot normalize the zero vector")
        return cls(v / n, dims)

    @property
    def dim(self) -> int:
        return len(self.amplitudes)

    def density(self) -> "DensityOperator":
        v = self.amplitudes
        return DensityOperator(np.outer(v, v.conj()), self.dims)

    def conj(self) -> "PureState":
        return PureState(self.amplitudes.conj(), self.dims)

    def __repr__(self):
        return f"PureState(dims={self.dims}, amplitudes={np.round(self.amplitudes, 6)})"


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Positive semidefinite, unit-trace operator."""

    matrix: np.ndarray
    dims: tuple = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise QuantumError(f"density operator must be square, got {m.shape}")
        dims = (m.shape[0],) if self.dims is None else tuple(int(d) for d in self.dims)
        if _prod(dims) != m.shape[0]:
            raise QuantumError(f"dims {dims} do not match shape {m.shape}")
        if np.abs(m - m.conj().T).max() > ATOL:
            raise QuantumError("density operator is not Hermitian")
        if abs(np.trace(m) - 1) > ATOL:
            raise QuantumError(f"density operator trace is {np.trace(m).real}, not 1")
        if np.linalg.eigvalsh((m + m.conj().T) / 2).min() < -ATOL:
            raise QuantumError("density operator has negative eigenvalues")
        object.__setattr__(self, "matrix", _frozen(m))
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def __repr__(self):
        return f"DensityOperator(dims={self.dims})"


@dataclass(frozen=True, eq=False)
class Unitary:
    matrix: np.ndarray
    label: str = ""
    dims: tuple = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise QuantumError(f"unitary must be square, got {m.shape}")
        if np.linalg.norm(m.conj().T @ m - np.eye(m.shape[0])) > ATOL:
            raise QuantumError(f"matrix {self.label or ''} is not unitary")
        dims = (m.shape[0],) if self.dims is None else tuple(int(d) for d in self.dims)
        if _prod(dims) != m.shape[0]:
            raise QuantumError(f"dims {dims} do not match shape {m.shape}")
        object.__setattr__(self, "matrix", _frozen(m))
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dagger(self) -> "Unitary":
        label = f"{self.label}^dag" if self.label else ""
        return Unitary(self.matrix.conj().T, label, self.dims)

    def __matmul__(self, other: "Unitary") -> "Unitary":
        label = f"{self.label}{other.label}" if self.label and other.label else ""
        return Unitary(self.matrix @ other.matrix, label, self.dims)

    def apply(self, state: PureState) -> PureState:
        return PureState(self.matrix @ state.amplitudes, state.dims)

    def __repr__(self):
        return f"Unitary({self.label or self.dim})"


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """CPTP map given by Kraus operators of shape ``(d_out, d_in)``."""

    kraus_ops: tuple
    label: str = ""

    def __post_init__(self):
        ops = tuple(_frozen(k) for k in self.kraus_ops)
        if not ops:
            raise QuantumError("a channel needs at least one Kraus operator")
        shape = ops[0].shape
        if any(k.shape != shape for k in ops):
            raise QuantumError("Kraus operators must share a shape")
        total = sum(k.conj().T @ k for k in ops)
        if np.linalg.norm(total - np.eye(shape[1])) > ATOL:
            raise QuantumError("Kraus operators are not trace preserving")
        object.__setattr__(self, "kraus_ops", ops)

    @classmethod
    def from_unitary(cls, u: Unitary) -> "KrausChannel":
        return cls((u.matrix,), u.label)

    @property
    def d_in(self) -> int:
        return self.kraus_ops[0].shape[1]

    @property
    def d_out(self) -> int:
        return self.kraus_ops[0].shape[0]

    @property
    def rank(self) -> int:
        return len(self.kraus_ops)

    def apply_matrix(self, m: np.ndarray) -> np.ndarray:
        """Action on an arbitrary (not necessarily physical) operator."""
        return sum(k @ m @ k.conj().T for k in self.kraus_ops)

    def apply(self, rho: DensityOperator) -> DensityOperator:
        if rho.dim != self.d_in:
            raise QuantumError(f"channel expects dimension {self.d_in}, got {rho.dim}")
        return DensityOperator(self.apply_matrix(rho.matrix))


@dataclass(frozen=True, eq=False)
class PVM:
    """Projective measurement: orthogonal projectors summing to identity."""

    projectors: tuple

    def __post_init__(self):
        ps = tuple(_frozen(p) for p in self.projectors)
        if not ps:
            raise QuantumError("empty PVM")
        d = ps[0].shape[0]
        for i, p in enumerate(ps):
            if p.shape != (d, d):
                raise QuantumError("projectors must share a square shape")
            if np.abs(p @ p - p).max() > ATOL or np.abs(p - p.conj().T).max() > ATOL:
                raise QuantumError(f"projector {i} is not an orthogonal projector")
            for q in ps[i + 1:]:
                if np.abs(p @ q).max() > ATOL:
                    raise QuantumError("projectors are not mutually orthogonal")
        if np.abs(sum(ps) - np.eye(d)).max() > ATOL:
            raise QuantumError("projectors do not sum to identity")
        object.__setattr__(self, "projectors", ps)

    @classmethod
    def from_basis(cls, vectors) -> "PVM":
        """Rank-1 PVM from the given orthonormal vectors (rows or PureStates)."""
        vs = [v.amplitudes if isinstance(v, PureState) else np.asarray(v, complex)
              for v in vectors]
        return cls(tuple(np.outer(v, v.conj()) for v in vs))

    @classmethod
    def computational(cls, d: int) -> "PVM":
        return cls.from_basis(np.eye(d))

    @classmethod
    def binary(cls, psi: PureState) -> "PVM":
        """``{|psi><psi|, 1 - |psi><psi|}``."""
        p = np.outer(psi.amplitudes, psi.amplitudes.conj())
        return cls((p, np.eye(psi.dim) - p))

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0]

    def __len__(self):
        return len(self.projectors)


# --------------------------------------------------------------------------- #
#                                 Operations                                  #
# --------------------------------------------------------------------------- #

def ket(index: int, d: int = 2) -> PureState:
    v = np.zeros(d, dtype=complex)
    v[index] = 1
    return PureState(v)


def basis_state(digits: Sequence[int], dims: Sequence[int]) -> PureState:
    """Product basis state ``|digits[0], digits[1], ...>``."""
    index = int(np.ravel_multi_index(tuple(digits), tuple(dims)))
    v = np.zeros(_prod(dims), dtype=complex)
    v[index] = 1
    return PureState(v, tuple(dims))


def tensor_product(a, b):
    """Kronecker product of two objects of the same kind, dims concatenated."""
    if type(a) is not type(b):
        raise QuantumError(f"cannot tensor {type(a).__name__} with {type(b).__name__}")
    if isinstance(a, PureState):
        return PureState(np.kron(a.amplitudes, b.amplitudes), a.dims + b.dims)
    if isinstance(a, DensityOperator):
        return DensityOperator(np.kron(a.matrix, b.matrix), a.dims + b.dims)
    if isinstance(a, Unitary):
        label = f"{a.label}(x){b.label}" if a.label and b.label else ""
        return Unitary(np.kron(a.matrix, b.matrix), label, a.dims + b.dims)
    if isinstance(a, np.ndarray):
        return np.kron(a, b)
    raise QuantumError(f"unsupported kind {type(a).__name__}")


def partial_trace_matrix(m: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Raw-array partial trace; ``keep`` order is preserved in the output."""
    dims = list(dims)
    n = len(dims)
    keep = list(keep)
    t = np.asarray(m).reshape(dims + dims)
    row = list(range(n))
    col = [i + n if i in keep else i for i in range(n)]
    out = keep + [k + n for k in keep]
    res = np.einsum(t, row + col, out)
    dk = _prod([dims[k] for k in keep])
    return res.reshape(dk, dk)


def partial_trace(rho: DensityOperator, keep: Sequence[int]) -> DensityOperator:
    keep = list(keep)
    if not keep:
        raise QuantumError("keep set is empty; use numpy.trace for the scalar trace")
    if len(set(keep)) != len(keep) or any(k < 0 or k >= len(rho.dims) for k in keep):
        raise QuantumError(f"invalid subsystem indices {keep} for dims {rho.dims}")
    m = partial_trace_matrix(rho.matrix, rho.dims, keep)
    return DensityOperator((m + m.conj().T) / 2, tuple(rho.dims[k] for k in keep))


def apply_on_vector(op: np.ndarray, vec: np.ndarray, dims: Sequence[int],
                    targets: Sequence[int]) -> np.ndarray:
    """Apply ``op`` to the ``targets`` subsystems of a flat state vector."""
    dims = list(dims)
    targets = list(targets)
    t = np.asarray(vec).reshape(dims)
    t = np.moveaxis(t, targets, range(len(targets)))
    shape = t.shape
    dt = _prod([dims[i] for i in targets])
    t = (op @ t.reshape(dt, -1)).reshape(shape)
    return np.moveaxis(t, range(len(targets)), targets).reshape(-1)


def apply_on_matrix(op: np.ndarray, m: np.ndarray, dims: Sequence[int],
                    targets: Sequence[int]) -> np.ndarray:
    """``op m op^dag`` with ``op`` acting on ``targets``."""
    left = np.stack([apply_on_vector(op, col, dims, targets) for col in m.T], axis=1)
    right = np.stack([apply_on_vector(op, row, dims, targets)
                      for row in left.conj()], axis=1)
    return right.conj().T


def embed(op: np.ndarray, dims: Sequence[int], targets: Sequence[int]) -> np.ndarray:
    """Full-space matrix of ``op`` acting on ``targets``."""
    d = _prod(dims)
    return np.stack([apply_on_vector(op, e, dims, targets) for e in np.eye(d)], axis=1)


class Branch(NamedTuple):
    probability: float
    state: object  # PureState | DensityOperator | None for zero-probability branches

    @property
    def zero(self) -> bool:
        return self.state is None


def measure_pvm(state, pvm: PVM, targets: Sequence[int]) -> list[Branch]:
    """Enumerate every outcome of ``pvm`` measured on ``targets``.

    Returns one :class:`Branch` per projector. Branches whose probability
    is below ``ZERO_BRANCH`` carry ``state=None``.
    """
    targets = list(targets)
    dt = _prod([state.dims[i] for i in targets])
    if dt != pvm.dim:
        raise QuantumError(f"PVM of dimension {pvm.dim} cannot act on subsystems "
                           f"{targets} of total dimension {dt}")
    branches = []
    for p in pvm.projectors:
        if isinstance(state, PureState):
            v = apply_on_vector(p, state.amplitudes, state.dims, targets)
            prob = float(np.vdot(v, v).real)
            post = PureState(v / np.sqrt(prob), state.dims) if prob > ZERO_BRANCH else None
        elif isinstance(state, DensityOperator):
            m = apply_on_matrix(p, state.matrix, state.dims, targets)
            prob = float(np.trace(m).real)
            if prob > ZERO_BRANCH:
                m = m / prob
                post = DensityOperator((m + m.conj().T) / 2, state.dims)
            else:
                post = None
        else:
            raise QuantumError(f"cannot measure {type(state).__name__}")
        branches.append(Branch(max(prob, 0.0), post))
    total = sum(b.probability for b in branches)
    assert abs(total - 1) < ATOL, total
    return branches


def sample_branch(branches: Sequence[Branch], rng) -> tuple[int, object]:
    probs = np.array([b.probability for b in branches])
    if abs(probs.sum() - 1) > EIG_ATOL:
        raise QuantumError(f"branch probabilities sum to {probs.sum()}")
    i = as_rng(rng).choice(probs)
    return i, branches[i].state


def spectral_decompose(h, atol: float = EIG_ATOL) -> list[tuple[float, PureState]]:
    """Eigenpairs of a Hermitian operator, eigenvalues descending.

    Each eigenvector's phase is fixed so its first non-negligible component
    is real and positive.
    """
    m = h.matrix if hasattr(h, "matrix") else np.asarray(h, dtype=complex)
    if np.abs(m - m.conj().T).max() > atol:
        raise QuantumError("operator is not Hermitian")
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    pairs = []
    for i in np.argsort(-w, kind="stable"):
        vec = v[:, i]
        k = int(np.argmax(np.abs(vec) > 1e-9))
        vec = vec * np.exp(-1j * np.angle(vec[k]))
        pairs.append((float(w[i]), PureState(vec / np.linalg.norm(vec))))
    return pairs


def haar_random_unitary(d: int, rng) -> Unitary:
    """Haar-distributed unitary from the QR decomposition of a Ginibre matrix."""
    if d < 2:
        raise QuantumError("dimension must be at least 2")
    g = as_rng(rng).generator
    z = (g.standard_normal((d, d)) + 1j * g.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return Unitary(q * ph)


def random_pure_state(dims, rng) -> PureState:
    dims = (dims,) if np.isscalar(dims) else tuple(dims)
    g = as_rng(rng).generator
    d = _prod(dims)
    return PureState.normalized(g.standard_normal(d) + 1j * g.standard_normal(d), dims)


def random_density(d: int, rng, rank: int | None = None) -> DensityOperator:
    g = as_rng(rng).generator
    rank = d if rank is None else rank
    a = g.standard_normal((d, rank)) + 1j * g.standard_normal((d, rank))
    m = a @ a.conj().T
    return DensityOperator(m / np.trace(m))


def random_kraus_channel(d: int, rank: int, rng, d_out: int | None = None) -> KrausChannel:
    """Random channel from a Haar isometry split into ``rank`` blocks."""
    d_out = d if d_out is None else d_out
    big = d_out * rank
    if big < d:
        raise QuantumError("rank too small for a trace-preserving channel")
    u = haar_random_unitary(big, rng).matrix[:, :d] if big > 1 else np.ones((1, 1))
    return KrausChannel(tuple(u[k * d_out:(k + 1) * d_out] for k in range(rank)))


def fidelity(a, b) -> float:
    """|<a|b>|^2 for pure states, squared Uhlmann fidelity otherwise."""
    if a.dim != b.dim:
        raise QuantumError(f"dimension mismatch {a.dim} vs {b.dim}")
    if isinstance(a, PureState) and isinstance(b, PureState):
        return float(min(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2, 1.0))
    if isinstance(a, PureState):
        a, b = b, a
    if isinstance(b, PureState):
        v = b.amplitudes
        return float(np.clip(np.real(v.conj() @ a.matrix @ v), 0.0, 1.0))
    w, v = np.linalg.eigh(a.matrix)
    sq = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
    ev = np.linalg.eigvalsh(sq @ b.matrix @ sq)
    return float(np.clip(np.sum(np.sqrt(np.clip(ev, 0, None))) ** 2, 0.0, 1.0))


def bell_state(d: int = 2) -> PureState:
    """``(1/sqrt d) sum_i |i,i>``."""
    if d < 2:
        raise QuantumError("dimension must be at least 2")
    return PureState(np.eye(d).reshape(-1) / np.sqrt(d), (d, d))


def purity(m: np.ndarray) -> float:
    return float(np.real(np.trace(m @ m)))
