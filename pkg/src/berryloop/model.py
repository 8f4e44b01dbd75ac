"""Dimerized Fermi-Hubbard chain (SSHH) in the Jordan-Wigner encoding.

Conventions fixed here and relied on everywhere else:

* N sites; spin-up fermionic modes are qubits 0..N-1 in site order and
  spin-down modes are qubits N..2N-1.  JW strings follow qubit index and
  occupation maps to bit value 1.
* Bond amplitudes t_j = t (1 + (-1)^j delta) for 1-based bond index j;
  bond j couples sites j and j+1 with site N+1 = 1.
* The boundary bond of the spin-up chain carries the twist phase
  e^{i rho} on c^dag_1 c_N; the spin-down boundary bond is untwisted.
* The interaction U n_up n_dn - (U/2)(n_up + n_dn) per site reduces to
  (U/4)(Z_j Z_{j+N} - 1); the constants accumulate in identity_offset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations, product

from .pauli import PauliString, PauliSum, StateVector

# Generic probe angle for pool extraction; special angles (multiples of
# pi/2) zero out some boundary strings.
POOL_PROBE_RHO = math.pi / 7

POOL_HAMILTONIAN = "hamiltonian"
POOL_QUBIT_EXCITATION = "qubit_excitation"


@dataclass(frozen=True)
class ModelParams:
    """SSHH chain parameters: N sites, hopping t, dimerization, interaction."""

    n_sites: int
    t: float = 1.0
    delta: float = 0.0
    u: float = 0.0

    def __post_init__(self):
        if self.n_sites < 2 or self.n_sites % 2:
            raise ValueError("n_sites must be even and >= 2")
        if self.t <= 0:
            raise ValueError("hopping t must be positive")
        if not -1.0 <= self.delta <= 1.0:
            raise ValueError("dimerization must lie in [-1, 1]")

    @property
    def n_qubits(self) -> int:
        return 2 * self.n_sites


@dataclass(frozen=True)
class OperatorPool:
    """Ordered, duplicate-free pool of non-identity generator strings."""

    elements: tuple
    kind: str

    def __post_init__(self):
        seen = set()
        for p in self.elements:
            if p.is_identity:
                raise ValueError("pool must not contain the identity")
            key = (p.x_mask, p.z_mask)
            if key in seen:
                raise ValueError("pool must not contain duplicates")
            seen.add(key)

    def __len__(self) -> int:
        return len(self.elements)


def _hopping_terms(n_qubits: int, m: int, mp: int, amplitude: complex):
    """Pauli terms of ``amplitude * c^dag_m c_mp + h.c.`` for modes m < mp.

    JW gives (a/2)(X Z.. X + Y Z.. Y) - (b/2)(X Z.. Y - Y Z.. X) for
    amplitude a + i b, with the Z string over the modes strictly between.
    """
    if not m < mp:
        raise ValueError("expected m < mp")
    zstring = 0
    for k in range(m + 1, mp):
        zstring |= 1 << k
    ends = (1 << m) | (1 << mp)
    a, b = amplitude.real, amplitude.imag
    terms = [
        (a / 2.0, PauliString(n_qubits, ends, zstring)),            # X..X
        (a / 2.0, PauliString(n_qubits, ends, zstring | ends)),     # Y..Y
    ]
    if b != 0.0:
        terms += [
            (-b / 2.0, PauliString(n_qubits, ends, zstring | (1 << mp))),  # X..Y
            (b / 2.0, PauliString(n_qubits, ends, zstring | (1 << m))),    # Y..X
        ]
    return terms


def _bond_amplitude(params: ModelParams, bond: int) -> float:
    """Staggered hopping on 1-based bond index: t (1 - (-1)^bond delta).

    The parity is fixed so the twisted boundary bond (N, 1) is the strong
    bond for delta < 0; that sign choice makes delta < 0 the topological
    region (Berry phase pi), matching the ED quantization this package
    is validated against.
    """
    return params.t * (1.0 - (-1) ** bond * params.delta)


def _sshh_terms(params: ModelParams, rho: float):
    n = params.n_sites
    nq = params.n_qubits
    terms = []
    offset = 0.0
    for spin_offset in (0, n):
        for bond in range(1, n):
            amp = _bond_amplitude(params, bond)
            m = spin_offset + bond - 1
            terms += _hopping_terms(nq, m, m + 1, amp)
        # Boundary bond (N, 1); only the spin-up copy is twisted.
        amp = _bond_amplitude(params, n)
        if spin_offset == 0:
            amp = amp * complex(math.cos(rho), math.sin(rho))
        terms += _hopping_terms(nq, spin_offset, spin_offset + n - 1, amp)
    if params.u != 0.0:
        for site in range(n):
            zz = (1 << site) | (1 << (site + n))
            terms.append((params.u / 4.0, PauliString(nq, 0, zz)))
            offset -= params.u / 4.0
    return terms, offset


def build_sshh(params: ModelParams, rho: float) -> PauliSum:
    """Hermitian SSHH Hamiltonian on 2N qubits at twist angle rho."""
    terms, offset = _sshh_terms(params, rho)
    return PauliSum.from_terms(params.n_qubits, terms, offset)


def build_sshh_split(params: ModelParams):
    """(h0, hc, hs) with H(rho) = h0 + cos(rho) hc + sin(rho) hs."""
    h_zero = build_sshh(params, 0.0)
    h_pi = build_sshh(params, math.pi)
    h_half = build_sshh(params, math.pi / 2.0)
    nq = params.n_qubits

    def _from_pair(sum_a, wa, sum_b, wb):
        entries = [(wa * c, p) for c, p in sum_a.terms]
        entries += [(wb * c, p) for c, p in sum_b.terms]
        off = wa * sum_a.identity_offset + wb * sum_b.identity_offset
        return PauliSum.from_terms(nq, entries, off)

    h0 = _from_pair(h_zero, 0.5, h_pi, 0.5)
    hc = _from_pair(h_zero, 0.5, h_pi, -0.5)
    hs = _from_pair(h_half, 1.0, h0, -1.0)
    return h0, hc, hs


def hamiltonian_pool(params: ModelParams) -> OperatorPool:
    """Distinct Hamiltonian strings at a generic twist, identity removed."""
    h = build_sshh(params, POOL_PROBE_RHO)
    elements = sorted(h.strings(), key=PauliString.sort_key)
    return OperatorPool(tuple(elements), POOL_HAMILTONIAN)


def qubit_excitation_pool(n_qubits: int) -> OperatorPool:
    """All 2- and 4-qubit x/y strings with an odd number of y letters."""
    if n_qubits < 2:
        raise ValueError("qubit-excitation pool needs n_qubits >= 2")
    elements = []
    for size in (2, 4):
        if n_qubits < size:
            continue
        for qubits in combinations(range(n_qubits), size):
            for letters in product("xy", repeat=size):
                if letters.count("y") % 2 == 0:
                    continue
                x = z = 0
                for q, letter in zip(qubits, letters):
                    x |= 1 << q
                    if letter == "y":
                        z |= 1 << q
                elements.append(PauliString(n_qubits, x, z))
    elements.sort(key=PauliString.sort_key)
    return OperatorPool(tuple(elements), POOL_QUBIT_EXCITATION)


def reference_state(params: ModelParams) -> StateVector:
    """Half-filled product state: spin-up on the first N/2 orbitals,
    spin-down on the next N/2 (qubits N..N+N/2-1)."""
    n = params.n_sites
    index = 0
    for q in range(n // 2):
        index |= 1 << q
    for q in range(n, n + n // 2):
        index |= 1 << q
    return StateVector.computational_basis(params.n_qubits, index)
