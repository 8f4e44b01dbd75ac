"""Dense exact-diagonalization backend: spectra, propagation, Wilson loop.

Everything here works on full 2^n x 2^n matrices and is capped at a
configurable qubit count.  The adiabatic propagator applies
exp(-i dt H(rho_j)) to the state with a machine-precision truncated
Taylor series (dt ||H|| << 1 on the uniform integration grid), where
rho_j is taken at each substep's endpoint time.
"""

from __future__ import annotations

import math
import warnings as _warnings
from dataclasses import dataclass

import numpy as np

from .berry import principal_value
from .dynamics import HALF_BACKWARD, HALF_FORWARD, LoopSchedule, TrajectoryRecord
from .model import ModelParams, build_sshh_split
from .pauli import PauliSum, StateVector

DENSE_QUBIT_CAP = 12

DEGENERACY_TOL = 1e-10


class DenseCapError(ValueError):
    """System too large for the dense backend."""


class GridTooCoarseError(ValueError):
    """Wilson-loop grid produced a near-zero link overlap."""


def _check_cap(n_qubits: int) -> None:
    if n_qubits > DENSE_QUBIT_CAP:
        raise DenseCapError(
            f"{n_qubits} qubits exceeds the dense cap of {DENSE_QUBIT_CAP}"
        )


def dense_matrix(h: PauliSum) -> np.ndarray:
    """Full Hermitian matrix of a PauliSum, identity offset included."""
    _check_cap(h.n_qubits)
    dim = 1 << h.n_qubits
    out = np.zeros((dim, dim), dtype=np.complex128)
    rows = np.arange(dim)
    for coef, string in h.terms:
        perm, phase = string._action()
        out[rows, perm] += coef * phase
    out[rows, rows] += h.identity_offset
    return out


@dataclass
class EdReport:
    """Lowest eigenpair plus the full-Fock-space gap."""

    ground_energy: float
    gap: float
    ground_state: StateVector
    spectrum: np.ndarray | None = None
    degenerate: bool = False


def ground_state(h: PauliSum, want_spectrum: bool = False) -> EdReport:
    """Lowest eigenpair; the eigenvector's largest amplitude is made real
    positive so repeated calls share a gauge."""
    hmat = dense_matrix(h)
    vals, vecs = np.linalg.eigh(hmat)
    vec = vecs[:, 0]
    gap = float(vals[1] - vals[0])
    degenerate = gap <= DEGENERACY_TOL
    if degenerate:
        _warnings.warn("ground state is (near-)degenerate", RuntimeWarning)
    k = int(np.argmax(np.abs(vec)))
    vec = vec * (np.conj(vec[k]) / abs(vec[k]))
    return EdReport(
        ground_energy=float(vals[0]),
        gap=gap,
        ground_state=StateVector(h.n_qubits, vec),
        spectrum=vals.copy() if want_spectrum else None,
        degenerate=degenerate,
    )


def _expm_apply(hmat: np.ndarray, dt: float, vec: np.ndarray,
                hvec: np.ndarray | None = None) -> np.ndarray:
    """exp(-i dt H) vec via a Taylor series cut at machine precision."""
    out = vec.copy()
    term = (-1j * dt) * (hmat @ vec if hvec is None else hvec)
    k = 1
    cut = 1e-17 * np.linalg.norm(vec)
    while True:
        out += term
        if np.linalg.norm(term) <= cut or k > 60:
            return out
        k += 1
        term = (-1j * dt / k) * (hmat @ term)


class _DenseLoopHamiltonian:
    """H(rho) = H0 + cos(rho) Hc + sin(rho) Hs as dense matrices."""

    def __init__(self, params: ModelParams):
        _check_cap(params.n_qubits)
        h0, hc, hs = build_sshh_split(params)
        self.h0 = dense_matrix(h0)
        self.hc = dense_matrix(hc)
        self.hs = dense_matrix(hs)

    def at(self, rho: float) -> np.ndarray:
        return self.h0 + math.cos(rho) * self.hc + math.sin(rho) * self.hs


@dataclass
class EdTrajectory:
    """Checkpoint states plus the per-substep energy trace of an ED loop."""

    points: list                 # (half, t, rho, StateVector)
    times: np.ndarray            # substep endpoint times (t=0 sample first)
    halves: np.ndarray           # 0 = forward, 1 = backward
    energies: np.ndarray
    final_state: StateVector

    def half_cycle_phase_integrals(self):
        """(-integral E dt) over each half: the two dynamical-phase pieces."""
        fwd = self.halves == 0
        bwd = ~fwd
        # Backward samples run from T/2 down to 0; the trapezoid over the
        # descending time grid carries the sign of dt automatically.
        phi_plus = -float(np.trapezoid(self.energies[fwd], self.times[fwd]))
        phi_minus = -float(np.trapezoid(self.energies[bwd], self.times[bwd]))
        return phi_plus, phi_minus


def _checkpoints_by_half(schedule: LoopSchedule, checkpoints):
    """Sort checkpoint times into marching order for each half."""
    fwd, bwd = [], []
    for half, t in checkpoints:
        if half == HALF_FORWARD:
            fwd.append(float(t))
        elif half == HALF_BACKWARD:
            bwd.append(float(t))
        else:
            raise ValueError(f"unknown half {half!r}")
    fwd.sort()
    bwd.sort(reverse=True)
    return {HALF_FORWARD: fwd, HALF_BACKWARD: bwd}


def default_checkpoints(schedule: LoopSchedule, n_per_half: int = 256):
    """Evenly spaced protocol times: out along the forward half and back."""
    T2 = schedule.boundary
    fwd = [(HALF_FORWARD, T2 * k / n_per_half) for k in range(n_per_half + 1)]
    bwd = [(HALF_BACKWARD, T2 * (1.0 - k / n_per_half))
           for k in range(1, n_per_half + 1)]
    return fwd + bwd


def ed_propagate(s: StateVector, params: ModelParams, schedule: LoopSchedule,
                 dt: float = 0.001, checkpoints=None) -> EdTrajectory:
    """March the state around the loop on a uniform grid of step dt.

    Substeps land exactly on every checkpoint (half, t) and on the
    half-cycle boundaries; each substep uses H(rho) at its endpoint time.
    Checkpoint states come back in protocol order.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    dense = _DenseLoopHamiltonian(params)
    if checkpoints is None:
        checkpoints = default_checkpoints(schedule)
    per_half = _checkpoints_by_half(schedule, checkpoints)

    v = s.amplitudes.copy()
    points = []
    times = [0.0]
    halves = [0]
    energies = [float(np.vdot(v, dense.at(0.0) @ v).real)]

    for half, t_start, t_end, sign in schedule.halves:
        half_id = 0 if half == HALF_FORWARD else 1
        t = t_start
        targets = [tt for tt in per_half[half]]
        if not targets or abs(targets[-1] - t_end) > 1e-12:
            targets.append(t_end)
        for target in targets:
            if (target - t) * sign < -1e-12:
                raise ValueError("checkpoint out of marching order")
            while abs(target - t) > 1e-12:
                step = min(dt, abs(target - t))
                t_next = t + sign * step
                if abs(target - t_next) <= 1e-12:
                    t_next = target
                hmat = dense.at(schedule.rho_of(t_next, half))
                hv = hmat @ v
                energies.append(float(np.vdot(v, hv).real))
                # Energy sampled pre-step at the step Hamiltonian; the
                # trapezoid over these samples tracks E(t) to O(dt^2).
                v = _expm_apply(hmat, sign * step, v, hvec=hv)
                t = t_next
                times.append(t)
                halves.append(half_id)
            if any(abs(target - tc) <= 1e-12 for tc in per_half[half]):
                rho = schedule.rho_of(t, half)
                points.append((half, t, rho, StateVector(s.n_qubits, v.copy())))
    return EdTrajectory(
        points=points,
        times=np.asarray(times),
        halves=np.asarray(halves),
        energies=np.asarray(energies),
        final_state=StateVector(s.n_qubits, v.copy()),
    )


def wilson_loop_berry(params: ModelParams, n_grid: int = 256) -> float:
    """Gauge-invariant discretized Berry phase over the twist loop:
    -Im ln prod_j <G(rho_j)|G(rho_{j+1})>, reduced to (-pi, pi]."""
    if n_grid < 16:
        raise ValueError("n_grid must be at least 16")
    dense = _DenseLoopHamiltonian(params)
    vecs = []
    for j in range(n_grid):
        rho = 2.0 * math.pi * j / n_grid
        _, eigvecs = np.linalg.eigh(dense.at(rho))
        vecs.append(eigvecs[:, 0])
    product = 1.0 + 0.0j
    for j in range(n_grid):
        link = np.vdot(vecs[j], vecs[(j + 1) % n_grid])
        if abs(link) < 1e-6:
            raise GridTooCoarseError(
                f"link {j} overlap {abs(link):.2e}; refine the rho grid"
            )
        product *= link
    return principal_value(-float(np.angle(product)))


@dataclass
class InfidelityReport:
    """Loop maxima of 1-f (vs instantaneous ground state) and 1-f_t (vs
    the exactly propagated state at the same T)."""

    max_infid_f: float
    max_infid_ft: float
    infid_f: np.ndarray
    infid_ft: np.ndarray


def infidelities(traj: TrajectoryRecord, params: ModelParams,
                 schedule: LoopSchedule, dt: float = 0.001) -> InfidelityReport:
    """Fill the trajectory's infidelity slots from the dense oracle.

    The comparison propagation starts from the exact rho=0 ground state,
    keeping the oracle independent of the variational run it grades.
    """
    rows = [p for p in traj.points if p.state is not None]
    if not rows:
        raise ValueError("trajectory carries no statevector snapshots")
    dense = _DenseLoopHamiltonian(params)
    infid_f = np.empty(len(rows))
    for i, p in enumerate(rows):
        _, eigvecs = np.linalg.eigh(dense.at(p.rho))
        f = abs(np.vdot(eigvecs[:, 0], p.state)) ** 2
        infid_f[i] = max(0.0, 1.0 - f)
        p.infid_f = float(infid_f[i])

    _, eigvecs = np.linalg.eigh(dense.at(0.0))
    start = StateVector(params.n_qubits, eigvecs[:, 0].copy())
    checkpoints = [(p.half, p.t) for p in rows]
    ed_traj = ed_propagate(start, params, schedule, dt=dt,
                           checkpoints=checkpoints)
    if len(ed_traj.points) != len(rows):
        raise RuntimeError("checkpoint/trajectory length mismatch")
    infid_ft = np.empty(len(rows))
    for i, (p, (_, t, _, state)) in enumerate(zip(rows, ed_traj.points)):
        if abs(t - p.t) > 1e-9:
            raise RuntimeError("checkpoint time mismatch")
        f = abs(np.vdot(state.amplitudes, p.state)) ** 2
        infid_ft[i] = max(0.0, 1.0 - f)
        p.infid_ft = float(infid_ft[i])
    return InfidelityReport(
        max_infid_f=float(infid_f.max()),
        max_infid_ft=float(infid_ft.max()),
        infid_f=infid_f,
        infid_ft=infid_ft,
    )
