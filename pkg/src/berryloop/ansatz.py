"""Pseudo-Trotter variational ansatz and its McLachlan calculus.

The ansatz is prod_mu exp(-i theta_mu A_mu) |reference>, unit 1 applied
first.  Derivative states are materialized as columns of a single
(dim, N_theta) array so the M matrix and V vector reduce to BLAS calls:

    M_{mu nu} = 2 Re[ <d_mu|d_nu> + g_mu g_nu ],   g_mu = <d_mu|psi>
    V_mu     = 2 Im[ <d_mu|H psi> + conj(g_mu) <H> ]

The equations of motion (M + lambda I) theta_dot = V use a small Tikhonov
regularization because duplicated pool directions make M singular.  The
same workspace also carries the imaginary-time flavor of the flow (half
the metric, a gradient-type right-hand side), which ground-state
preparation uses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pauli import (
    DimensionError,
    InvalidGeneratorError,
    PauliString,
    PauliSum,
    StateVector,
)

ORIGIN_GROUND_PREP = "ground_prep"
ORIGIN_DYNAMICS = "dynamics"

REAL_TIME = "real"
IMAG_TIME = "imag"

DEFAULT_LAMBDA = 1e-6


@dataclass
class AnsatzUnit:
    generator: PauliString
    theta: float
    origin: str


class Ansatz:
    """Ordered parameterized-unitary sequence over a reference state.

    Units carry their generator, angle, and origin (ground-state prep vs
    dynamics).  A greedy earliest-fit layering is maintained on append: a
    unit joins layer 1 + max(layer of any earlier unit sharing a qubit).
    """

    def __init__(self, reference: StateVector):
        self.reference = reference
        self.units: list[AnsatzUnit] = []
        self._layers: list[int] = []
        self._qubit_layer: dict[int, int] = {}

    @property
    def n_qubits(self) -> int:
        return self.reference.n_qubits

    @property
    def n_params(self) -> int:
        return len(self.units)

    @property
    def thetas(self) -> np.ndarray:
        return np.array([u.theta for u in self.units], dtype=float)

    def set_thetas(self, values) -> None:
        values = np.asarray(values, dtype=float)
        if values.shape != (len(self.units),):
            raise ValueError("theta vector length mismatch")
        for unit, value in zip(self.units, values):
            unit.theta = float(value)

    @property
    def layer_of(self) -> list[int]:
        return list(self._layers)

    def append(self, generator: PauliString, theta: float = 0.0,
               origin: str = ORIGIN_DYNAMICS) -> None:
        if generator.is_identity:
            raise InvalidGeneratorError("ansatz units must be non-identity")
        if generator.n_qubits != self.n_qubits:
            raise DimensionError("generator qubit count differs from reference")
        layer = 1 + max(
            (self._qubit_layer.get(q, 0) for q in _support_qubits(generator)),
            default=0,
        )
        for q in _support_qubits(generator):
            self._qubit_layer[q] = layer
        self.units.append(AnsatzUnit(generator, float(theta), origin))
        self._layers.append(layer)

    def copy(self) -> "Ansatz":
        clone = Ansatz(self.reference)
        clone.units = [AnsatzUnit(u.generator, u.theta, u.origin) for u in self.units]
        clone._layers = list(self._layers)
        clone._qubit_layer = dict(self._qubit_layer)
        return clone

    def state_array(self, thetas=None) -> np.ndarray:
        """Amplitudes of the ansatz state, optionally at a given theta vector."""
        psi = self.reference.amplitudes.copy()
        if thetas is None:
            thetas = [u.theta for u in self.units]
        for unit, th in zip(self.units, thetas):
            psi = unit.generator.rotate(float(th), psi)
        return psi

    def evaluate(self) -> StateVector:
        return StateVector(self.n_qubits, self.state_array())


def _support_qubits(p: PauliString):
    mask = p.support
    q = 0
    while mask:
        if mask & 1:
            yield q
        mask >>= 1
        q += 1


def evaluate(a: Ansatz) -> StateVector:
    return a.evaluate()


def derivative_batch(a: Ansatz, thetas=None):
    """All d_mu = partial_mu |psi> as columns, plus |psi> itself.

    Forward sweep: after rotating every stored column and the running
    prefix by unit mu, the new column is -i A_mu (prefix); the suffix
    rotations a column still needs are exactly the later sweep steps.
    """
    if thetas is None:
        thetas = a.thetas
    dim = 1 << a.n_qubits
    n = a.n_params
    d = np.zeros((dim, n), dtype=np.complex128)
    psi = a.reference.amplitudes.copy()
    for mu, unit in enumerate(a.units):
        th = float(thetas[mu])
        if mu:
            d[:, :mu] = unit.generator.rotate(th, d[:, :mu])
        psi = unit.generator.rotate(th, psi)
        d[:, mu] = -1j * unit.generator.apply(psi)
    return d, psi


def derivative_states(a: Ansatz) -> list:
    """Exact partial_mu |psi> as StateVectors (diagnostic surface)."""
    d, _ = derivative_batch(a)
    return [StateVector(a.n_qubits, d[:, mu].copy()) for mu in range(a.n_params)]


@dataclass
class EomSystem:
    """McLachlan linear system at the current variational point."""

    m: np.ndarray
    v: np.ndarray
    var_h: float
    energy: float


class EomWorkspace:
    """Inner-product workspace behind the real- and imaginary-time flows.

    Supports exact in-place extension when a zero-angle unit is appended
    at the end of the ansatz: the new derivative column is -i A |psi> and
    the existing columns are unchanged.
    """

    def __init__(self, a: Ansatz, h: PauliSum, lambda_reg: float = DEFAULT_LAMBDA,
                 mode: str = REAL_TIME, need_var: bool = True, thetas=None):
        if h.n_qubits != a.n_qubits:
            raise DimensionError("hamiltonian qubit count differs from ansatz")
        if mode not in (REAL_TIME, IMAG_TIME):
            raise ValueError(f"unknown mode {mode!r}")
        self.mode = mode
        self.factor = 2.0 if mode == REAL_TIME else 1.0
        self.lambda_reg = float(lambda_reg)
        self.h = h
        self.d, self.psi = derivative_batch(a, thetas)
        self.hpsi = h.apply(self.psi)
        self.energy = float(np.vdot(self.psi, self.hpsi).real)
        self.g = self.d.conj().T @ self.psi          # <d_mu|psi>
        self.dh = self.d.conj().T @ self.hpsi        # <d_mu|H psi>
        gram = self.d.conj().T @ self.d
        self.m = self.factor * (gram.real + np.outer(self.g, self.g).real)
        self.v = self._rhs(self.dh, self.g)
        self.var_h = None
        if need_var:
            e2 = float(np.vdot(self.psi, h.square().apply(self.psi)).real)
            self.var_h = max(0.0, e2 - self.energy ** 2)
        self._solve()

    def _rhs(self, dh, g):
        if self.mode == REAL_TIME:
            return self.factor * (dh.imag + (np.conj(g) * self.energy).imag)
        return -dh.real + self.energy * g.real

    def _solve(self) -> None:
        n = self.v.size
        if n == 0:
            self._a_reg = np.zeros((0, 0))
            self.theta_dot = np.zeros(0)
        else:
            self._a_reg = self.m + self.lambda_reg * np.eye(n)
            self.theta_dot = np.linalg.solve(self._a_reg, self.v)
        if not np.all(np.isfinite(self.theta_dot)):
            raise FloatingPointError("non-finite theta_dot")

    def solve_against(self, rhs: np.ndarray) -> np.ndarray:
        """(M + lambda I)^{-1} rhs for one or many right-hand sides."""
        if self.v.size == 0:
            return np.zeros_like(rhs)
        return np.linalg.solve(self._a_reg, rhs)

    @property
    def l2(self) -> float:
        """Optimized McLachlan distance at the solved velocities, >= 0."""
        return max(0.0, self.factor * self.var_h - float(self.v @ self.theta_dot))

    def append_column(self, generator: PauliString) -> None:
        """Extend for a theta=0 unit appended at the ansatz end."""
        col = -1j * generator.apply(self.psi)
        g_new = complex(np.vdot(col, self.psi))
        dh_new = complex(np.vdot(col, self.hpsi))
        cross = self.d.conj().T @ col
        m_row = self.factor * (cross.real + (self.g * g_new).real)
        m_diag = self.factor * (float(np.vdot(col, col).real) + (g_new * g_new).real)
        v_new = self._rhs(np.array([dh_new]), np.array([g_new]))[0]
        n = self.v.size
        m = np.empty((n + 1, n + 1))
        m[:n, :n] = self.m
        m[:n, n] = m_row
        m[n, :n] = m_row
        m[n, n] = m_diag
        self.m = m
        self.v = np.append(self.v, v_new)
        self.d = np.concatenate([self.d, col[:, None]], axis=1)
        self.g = np.append(self.g, g_new)
        self.dh = np.append(self.dh, dh_new)
        self._solve()

    def phase_velocity(self) -> float:
        """Im[sum_mu <psi|d_mu psi> theta_dot_mu], the geometric integrand."""
        if self.theta_dot.size == 0:
            return 0.0
        return float((np.conj(self.g) @ self.theta_dot).imag)

    def system(self) -> EomSystem:
        return EomSystem(self.m.copy(), self.v.copy(), self.var_h, self.energy)


def screen_pool(ws: EomWorkspace, pool_elements):
    """Post-append McLachlan distance per zero-angle pool candidate.

    Border the current system with each candidate column -i A_nu |psi>
    and evaluate the new optimum through the Schur complement:
    L2_nu = L2 - (v_nu - m_nu . theta_dot)^2 / (m_nuu + lambda - m_nu A^-1 m_nu).
    """
    dim = ws.psi.size
    npool = len(pool_elements)
    cols = np.empty((dim, npool), dtype=np.complex128)
    for j, gen in enumerate(pool_elements):
        cols[:, j] = gen.apply(ws.psi)
    cols *= -1j
    g_c = cols.conj().T @ ws.psi
    dh_c = cols.conj().T @ ws.hpsi
    diag = np.einsum("ij,ij->j", cols.conj(), cols).real
    cross = ws.d.conj().T @ cols
    m_cross = ws.factor * (cross.real + np.outer(ws.g, g_c).real)
    m_diag = ws.factor * (diag + (g_c * g_c).real)
    v_c = ws._rhs(dh_c, g_c)
    w = ws.solve_against(m_cross)
    numer = v_c - m_cross.T @ ws.theta_dot
    denom = m_diag + ws.lambda_reg - np.einsum("ij,ij->j", m_cross, w)
    reduction = numer * numer / np.maximum(denom, 1e-14)
    return ws.l2 - reduction, reduction


def assemble_eom(a: Ansatz, h: PauliSum) -> EomSystem:
    """M, V, energy and variance of H at the current parameters."""
    return EomWorkspace(a, h).system()


def solve_theta_dot(e: EomSystem, lambda_reg: float = DEFAULT_LAMBDA) -> np.ndarray:
    """Tikhonov-regularized solve of (M + lambda I) theta_dot = V."""
    n = e.v.size
    if n == 0:
        return np.zeros(0)
    if not (np.all(np.isfinite(e.m)) and np.all(np.isfinite(e.v))):
        raise FloatingPointError("non-finite EOM entries")
    out = np.linalg.solve(e.m + lambda_reg * np.eye(n) if lambda_reg else e.m, e.v)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite theta_dot")
    return out


def mclachlan_distance(e: EomSystem, theta_dot: np.ndarray) -> float:
    """L^2 = 2 var[H] - V . theta_dot at the solved velocities, >= 0."""
    return max(0.0, 2.0 * e.var_h - float(e.v @ theta_dot))


def mclachlan_quadratic_form(e: EomSystem, theta_dot: np.ndarray) -> float:
    """Full quadratic form theta' M theta - 2 V . theta + 2 var (test hook)."""
    return float(theta_dot @ e.m @ theta_dot - 2.0 * (e.v @ theta_dot)
                 + 2.0 * e.var_h)


def resource_metrics(a: Ansatz):
    """(cnot_count, depth) under all-to-all connectivity and greedy layering."""
    cnots = sum(u.generator.cnot_cost() for u in a.units)
    qubit_layer: dict[int, int] = {}
    depth = 0
    for unit in a.units:
        layer = 1 + max(
            (qubit_layer.get(q, 0) for q in _support_qubits(unit.generator)),
            default=0,
        )
        for q in _support_qubits(unit.generator):
            qubit_layer[q] = layer
        depth = max(depth, layer)
    return cnots, depth
