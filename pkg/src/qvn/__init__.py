"""Stored-program quantum computing: programs kept as Choi states in a memory
unit, composed by teleportation, controlled through flags and transferred
over a simulated quantum network."""
from .core import (ATOL, EIG_ATOL, DensityOperator, KrausChannel, PureState, PVM,
                   QuantumError, RandomSource, Unitary)
from .duality import ChoiState, apply_via_choi, choi_of_channel, choi_of_unitary, kraus_from_choi
from .memory import MemoryUnit, ProgramSlot, read_out, refresh, write_inject

__version__ = "0.1.0"

__all__ = [
    "ATOL", "EIG_ATOL", "DensityOperator", "KrausChannel", "PureState", "PVM", "QuantumError",
    "RandomSource", "Unitary", "ChoiState", "apply_via_choi", "choi_of_channel",
    "choi_of_unitary", "kraus_from_choi", "MemoryUnit", "ProgramSlot", "read_out", "refresh",
    "write_inject",
]
