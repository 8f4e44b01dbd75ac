"""Pauli-string algebra and dense statevector kernels.

Strings use the symplectic bitmask encoding: qubit q carries the letter
I/X/Z/Y for mask bits (x_q, z_q) = (0,0)/(1,0)/(0,1)/(1,1).  The (1,1)
letter is the genuine Pauli Y, so as an operator identity a string equals
i^{n_Y} * X^{x} Z^{z}.  Basis index bit q of a statevector amplitude is
the occupation of qubit q; label strings read qubit 0 first.

All functions here are pure; values are immutable by convention and safe
to share across threads.
"""

from __future__ import annotations

import numpy as np

# Coefficients below this magnitude are dropped when merging PauliSum terms.
DROP_TOL = 1e-12

_PHASES = (1.0 + 0.0j, 1.0j, -1.0 + 0.0j, -1.0j)

_LETTER_TO_BITS = {"I": (0, 0), "X": (1, 0), "Z": (0, 1), "Y": (1, 1)}
_BITS_TO_LETTER = {(0, 0): "I", (1, 0): "X", (0, 1): "Z", (1, 1): "Y"}


class DimensionError(ValueError):
    """Operands act on different qubit counts."""


class InvalidGeneratorError(ValueError):
    """Identity string used where a rotation generator is required."""


class NonHermitianError(ValueError):
    """Operation requires a Hermitian PauliSum."""


def _parity(values: np.ndarray, mask: int) -> np.ndarray:
    """Parity of popcount(values & mask), vectorized over an index array."""
    return np.bitwise_count(values & mask).astype(np.int64) & 1


class PauliString:
    """A single Pauli string on ``n_qubits`` qubits, phase-free and canonical.

    Two strings are equal iff their masks are equal; any sign/phase picked
    up in products is returned separately (see :meth:`mul`) and folded into
    PauliSum coefficients.
    """

    __slots__ = ("n_qubits", "x_mask", "z_mask", "_perm", "_phase")

    def __init__(self, n_qubits: int, x_mask: int = 0, z_mask: int = 0):
        if n_qubits < 1:
            raise ValueError("n_qubits must be >= 1")
        full = (1 << n_qubits) - 1
        if x_mask & ~full or z_mask & ~full:
            raise ValueError("mask uses bits beyond n_qubits")
        self.n_qubits = n_qubits
        self.x_mask = x_mask
        self.z_mask = z_mask
        self._perm = None
        self._phase = None

    @classmethod
    def identity(cls, n_qubits: int) -> "PauliString":
        return cls(n_qubits, 0, 0)

    @classmethod
    def from_ops(cls, n_qubits: int, ops: dict) -> "PauliString":
        """Build from ``{qubit: letter}``; omitted qubits are identity."""
        x = z = 0
        for q, letter in ops.items():
            if not 0 <= q < n_qubits:
                raise ValueError(f"qubit {q} out of range for n={n_qubits}")
            bx, bz = _LETTER_TO_BITS[letter.upper()]
            x |= bx << q
            z |= bz << q
        return cls(n_qubits, x, z)

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        """Build from a letter sequence; character i is the qubit-i letter."""
        return cls.from_ops(len(label), {q: c for q, c in enumerate(label)})

    @property
    def label(self) -> str:
        return "".join(
            _BITS_TO_LETTER[(self.x_mask >> q) & 1, (self.z_mask >> q) & 1]
            for q in range(self.n_qubits)
        )

    @property
    def support(self) -> int:
        """Bitmask of qubits carrying a non-identity letter."""
        return self.x_mask | self.z_mask

    @property
    def is_identity(self) -> bool:
        return self.x_mask == 0 and self.z_mask == 0

    def weight(self) -> int:
        return int(self.support).bit_count()

    def cnot_cost(self) -> int:
        """CNOTs to implement exp(-i theta P): 2(p-1) for weight p >= 2."""
        w = self.weight()
        return 0 if w <= 1 else 2 * (w - 1)

    def mul(self, other: "PauliString"):
        """Return ``(phase, product)`` with self*other = phase*product.

        The phase is one of {1, i, -1, -i}; the product string is canonical.
        """
        if self.n_qubits != other.n_qubits:
            raise DimensionError("qubit counts differ")
        xa, za, xb, zb = self.x_mask, self.z_mask, other.x_mask, other.z_mask
        xc, zc = xa ^ xb, za ^ zb
        # Y-letter counts convert between letterwise strings and X^x Z^z form.
        n_ya = (xa & za).bit_count()
        n_yb = (xb & zb).bit_count()
        n_yc = (xc & zc).bit_count()
        # Z^za X^xb reordering contributes (-1)^{|za & xb|}.
        exp = (n_ya + n_yb - n_yc + 2 * (za & xb).bit_count()) % 4
        return _PHASES[exp], PauliString(self.n_qubits, xc, zc)

    def commutes(self, other: "PauliString") -> bool:
        """True iff the symplectic product is even."""
        if self.n_qubits != other.n_qubits:
            raise DimensionError("qubit counts differ")
        anti = (self.x_mask & other.z_mask) ^ (self.z_mask & other.x_mask)
        return anti.bit_count() % 2 == 0

    def _action(self):
        """Cached (perm, phase) so that (P v)[c] = phase[c] * v[perm[c]]."""
        if self._perm is None:
            dim = 1 << self.n_qubits
            idx = np.arange(dim, dtype=np.int64)
            perm = idx ^ self.x_mask
            n_y = (self.x_mask & self.z_mask).bit_count()
            signs = 1.0 - 2.0 * _parity(perm, self.z_mask)
            self._phase = (_PHASES[n_y % 4] * signs).astype(np.complex128)
            self._perm = perm
        return self._perm, self._phase

    def apply(self, amplitudes: np.ndarray) -> np.ndarray:
        """Apply to a dim-long vector or a (dim, k) column batch."""
        perm, phase = self._action()
        if amplitudes.ndim == 1:
            return phase * amplitudes[perm]
        return phase[:, None] * amplitudes[perm]

    def rotate(self, theta: float, amplitudes: np.ndarray) -> np.ndarray:
        """Apply exp(-i theta P) = cos(theta) - i sin(theta) P (P^2 = 1)."""
        c = np.cos(theta)
        s = np.sin(theta)
        if s == 0.0:
            return c * amplitudes
        return c * amplitudes + (-1j * s) * self.apply(amplitudes)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PauliString)
            and self.n_qubits == other.n_qubits
            and self.x_mask == other.x_mask
            and self.z_mask == other.z_mask
        )

    def __hash__(self) -> int:
        return hash((self.n_qubits, self.x_mask, self.z_mask))

    def __repr__(self) -> str:
        return f"PauliString('{self.label}')"

    def sort_key(self):
        return (self.weight(), self.x_mask, self.z_mask)


class PauliSum:
    """Hermitian-or-not linear combination of Pauli strings.

    Duplicate strings are merged, coefficients below DROP_TOL dropped, and
    the identity component kept separately in ``identity_offset``.  Terms
    are stored in (weight, x_mask, z_mask) order so iteration is
    deterministic.
    """

    __slots__ = ("n_qubits", "terms", "identity_offset", "_square")

    def __init__(self, n_qubits: int, terms, identity_offset: complex = 0.0):
        self.n_qubits = n_qubits
        self.terms = tuple(terms)
        self.identity_offset = complex(identity_offset)
        self._square = None

    @classmethod
    def from_terms(cls, n_qubits: int, entries, identity_offset: complex = 0.0) -> "PauliSum":
        """Merge ``(coefficient, string)`` pairs into canonical form."""
        acc: dict = {}
        offset = complex(identity_offset)
        for coef, string in entries:
            if string.n_qubits != n_qubits:
                raise DimensionError("term qubit count differs from sum")
            if string.is_identity:
                offset += coef
                continue
            key = (string.x_mask, string.z_mask)
            if key in acc:
                acc[key] = (acc[key][0] + coef, string)
            else:
                acc[key] = (complex(coef), string)
        kept = [
            (coef, string)
            for coef, string in acc.values()
            if abs(coef) > DROP_TOL
        ]
        kept.sort(key=lambda cs: cs[1].sort_key())
        if abs(offset) <= DROP_TOL:
            offset = 0.0
        return cls(n_qubits, kept, offset)

    @property
    def n_terms(self) -> int:
        return len(self.terms)

    def strings(self):
        return [string for _, string in self.terms]

    @property
    def is_hermitian(self) -> bool:
        if abs(self.identity_offset.imag) > 1e-10:
            return False
        return all(abs(c.imag) <= 1e-10 for c, _ in self.terms)

    def apply(self, amplitudes: np.ndarray) -> np.ndarray:
        out = self.identity_offset * amplitudes
        for coef, string in self.terms:
            out += coef * string.apply(amplitudes)
        return out

    def expectation_array(self, amplitudes: np.ndarray) -> complex:
        return complex(np.vdot(amplitudes, self.apply(amplitudes)))

    def square(self) -> "PauliSum":
        """Cached self*self, canonicalized term-by-term via string products."""
        if self._square is None:
            acc: dict = {}
            offset = self.identity_offset ** 2
            entries = []
            for ci, pi in self.terms:
                for cj, pj in self.terms:
                    phase, pk = pi.mul(pj)
                    c = ci * cj * phase
                    if pk.is_identity:
                        offset += c
                    else:
                        key = (pk.x_mask, pk.z_mask)
                        if key in acc:
                            acc[key] = (acc[key][0] + c, pk)
                        else:
                            acc[key] = (c, pk)
            if self.identity_offset != 0.0:
                entries = [
                    (2.0 * self.identity_offset * c, p) for c, p in self.terms
                ]
            merged = list(acc.values()) + entries
            self._square = PauliSum.from_terms(self.n_qubits, merged, offset)
        return self._square

    def __repr__(self) -> str:
        return f"PauliSum(n_qubits={self.n_qubits}, n_terms={self.n_terms})"


class StateVector:
    """Dense complex amplitudes over 2^n_qubits basis states."""

    __slots__ = ("n_qubits", "amplitudes")

    def __init__(self, n_qubits: int, amplitudes: np.ndarray):
        amplitudes = np.asarray(amplitudes, dtype=np.complex128)
        if amplitudes.shape != (1 << n_qubits,):
            raise DimensionError(
                f"expected {1 << n_qubits} amplitudes, got {amplitudes.shape}"
            )
        self.n_qubits = n_qubits
        self.amplitudes = amplitudes

    @classmethod
    def computational_basis(cls, n_qubits: int, index: int) -> "StateVector":
        """Basis state whose bit q equals the occupation of qubit q."""
        amp = np.zeros(1 << n_qubits, dtype=np.complex128)
        amp[index] = 1.0
        return cls(n_qubits, amp)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def overlap(self, other: "StateVector") -> complex:
        if self.n_qubits != other.n_qubits:
            raise DimensionError("qubit counts differ")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amplitudes.copy())


def pauli_mul(a: PauliString, b: PauliString):
    """Product a*b as ``(phase, canonical string)`` with phase in {±1, ±i}."""
    return a.mul(b)


def commutes(a: PauliString, b: PauliString) -> bool:
    return a.commutes(b)


def apply_pauli(p: PauliString, s: StateVector) -> StateVector:
    if p.n_qubits != s.n_qubits:
        raise DimensionError("qubit counts differ")
    return StateVector(s.n_qubits, p.apply(s.amplitudes))


def apply_rotation(theta: float, p: PauliString, s: StateVector) -> StateVector:
    """exp(-i theta P)|s> for non-identity P."""
    if p.is_identity:
        raise InvalidGeneratorError("identity rotations are pure global phase")
    if p.n_qubits != s.n_qubits:
        raise DimensionError("qubit counts differ")
    return StateVector(s.n_qubits, p.rotate(theta, s.amplitudes))


def expectation(h: PauliSum, s: StateVector) -> complex:
    if h.n_qubits != s.n_qubits:
        raise DimensionError("qubit counts differ")
    return h.expectation_array(s.amplitudes)


def variance(h: PauliSum, s: StateVector) -> float:
    """var[H] = <H^2> - <H>^2 >= 0, with H^2 built by string products."""
    if not h.is_hermitian:
        raise NonHermitianError("variance requires a Hermitian sum")
    if h.n_qubits != s.n_qubits:
        raise DimensionError("qubit counts differ")
    e = expectation(h, s).real
    e2 = expectation(h.square(), s).real
    return max(0.0, e2 - e * e)


def weight(p: PauliString) -> int:
    return p.weight()


def cnot_cost(p: PauliString) -> int:
    return p.cnot_cost()
