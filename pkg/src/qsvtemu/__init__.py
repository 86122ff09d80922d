"""State-vector emulation of QSVT linear solvers.

Modules: :mod:`~qsvtemu.matrices` (test matrices and spectra),
:mod:`~qsvtemu.encoders` (block encodings), :mod:`~qsvtemu.emulator`
(state-vector kernels), :mod:`~qsvtemu.phases` (inverse-polynomial phase
factors), :mod:`~qsvtemu.qsvt` (solver pipeline) and :mod:`~qsvtemu.cli`.
"""

from .emulator import StateVector, backend, extract_block, set_backend
from .encoders import encode, kappa_s, op_counts
from .errors import InputError, NumericalError, QsvtEmuError, SizeCapError
from .matrices import SparseMatrix, gen_laplacian, gen_toeplitz, laplacian, rhs_polynomial, spectral_stats
from .phases import PhaseFactorSet, generate, read_phases, write_phases
from .qsvt import SolveReport, qsvt_solve, run_sequence

__version__ = "0.1.0"

__all__ = [
    "InputError", "NumericalError", "PhaseFactorSet", "QsvtEmuError", "SizeCapError", "SolveReport", "SparseMatrix",
    "StateVector", "backend", "encode", "extract_block", "gen_laplacian", "gen_toeplitz", "generate", "kappa_s",
    "laplacian", "op_counts", "qsvt_solve", "read_phases", "rhs_polynomial", "run_sequence", "set_backend",
    "spectral_stats", "write_phases",
]
