"""Berry phase of the dimerized Fermi-Hubbard chain via cyclic adiabatic
evolution, simulated with adaptive variational statevector algorithms and
validated against a dense exact-diagonalization oracle."""

from .berry import (
    BerryResult,
    angle_distance,
    hadamard_overlap,
    make_loop_schedule,
    principal_value,
    run_berry,
    symmetry_report,
)
from .dynamics import DynConfig, LoopSchedule, PhaseAccumulator, TrajectoryRecord, evolve
from .imag_time import ItConfig, ItReport, avqite_run
from .model import (
    ModelParams,
    OperatorPool,
    build_sshh,
    hamiltonian_pool,
    qubit_excitation_pool,
    reference_state,
)
from .pauli import PauliString, PauliSum, StateVector

__version__ = "0.1.0"

__all__ = [
    "BerryResult",
    "DynConfig",
    "ItConfig",
    "ItReport",
    "LoopSchedule",
    "ModelParams",
    "OperatorPool",
    "PauliString",
    "PauliSum",
    "PhaseAccumulator",
    "StateVector",
    "TrajectoryRecord",
    "angle_distance",
    "avqite_run",
    "build_sshh",
    "evolve",
    "hadamard_overlap",
    "hamiltonian_pool",
    "make_loop_schedule",
    "principal_value",
    "qubit_excitation_pool",
    "reference_state",
    "run_berry",
    "symmetry_report",
]
