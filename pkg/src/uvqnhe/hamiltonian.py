"""Pauli strings, qubit Hamiltonians and brute-force reference values."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import isfinite

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, eigsh

from . import kernels
from .circuit import Statevector
from .errors import PauliParseError, ResourceError

PAULI_LETTERS = "IXYZ"
MAX_EXACT_QUBITS = 16
DENSE_LIMIT = 10


@dataclass(frozen=True)
class PauliString:
    letters: str

    def __post_init__(self):
        for pos, ch in enumerate(self.letters):
            if ch not in PAULI_LETTERS:
                raise PauliParseError(f"illegal Pauli letter {ch!r} at position {pos}", pos)
        if not self.letters:
            raise PauliParseError("empty Pauli string", 0)

    @property
    def n(self) -> int:
        return len(self.letters)

    def __str__(self):
        return self.letters

    def _mask(self, chars) -> int:
        m = 0
        for q, ch in enumerate(self.letters):
            if ch in chars:
                m |= 1 << (self.n - 1 - q)
        return m

    @cached_property
    def xmask(self) -> int:
        """Index bits flipped by the string (X or Y positions)."""
        return self._mask("XY")

    @cached_property
    def zmask(self) -> int:
        """Index bits carrying a (-1)**bit sign (Z or Y positions)."""
        return self._mask("ZY")

    @property
    def ny(self) -> int:
        return self.letters.count("Y")

    @property
    def is_diagonal(self) -> bool:
        return self.xmask == 0


def parse_pauli_string(text: str) -> PauliString:
    return PauliString(text.strip())


@dataclass(frozen=True)
class HamiltonianTerm:
    coeff: float
    pauli: PauliString

    def __post_init__(self):
        if not isfinite(self.coeff):
            raise ValueError(f"non-finite coefficient {self.coeff}")


@dataclass(frozen=True)
class Hamiltonian:
    """Real-weighted Pauli sum; duplicate strings are merged on construction."""

    n: int
    terms: tuple[HamiltonianTerm, ...]

    def __post_init__(self):
        merged: dict[str, float] = {}
        for t in self.terms:
            if t.pauli.n != self.n:
                raise ValueError(f"term {t.pauli} has length {t.pauli.n}, expected {self.n}")
            merged[t.pauli.letters] = merged.get(t.pauli.letters, 0.0) + float(t.coeff)
        terms = tuple(HamiltonianTerm(c, PauliString(p)) for p, c in merged.items())
        object.__setattr__(self, "terms", terms)

    @classmethod
    def from_pairs(cls, pairs):
        pairs = [(float(c), PauliString(p) if isinstance(p, str) else p) for c, p in pairs]
        if not pairs:
            raise ValueError("Hamiltonian needs at least one term")
        return cls(pairs[0][1].n, tuple(HamiltonianTerm(c, p) for c, p in pairs))

    def __len__(self):
        return len(self.terms)

    @property
    def one_norm(self) -> float:
        return float(sum(abs(t.coeff) for t in self.terms))


def tfim_hamiltonian(n: int, J: float = 1.0, h: float = 1.0, boundary: str = "open") -> Hamiltonian:
    """H = -J sum Z_i Z_{i+1} - h sum X_i on a chain of ``n`` sites."""
    if n < 2:
        raise ValueError("TFIM needs at least 2 sites")
    if boundary not in ("open", "periodic"):
        raise ValueError(f"boundary must be 'open' or 'periodic', got {boundary!r}")
    pairs = []
    bonds = [(i, i + 1) for i in range(n - 1)]
    if boundary == "periodic" and n > 2:
        bonds.append((n - 1, 0))
    for i, j in bonds:
        letters = ["I"] * n
        letters[i] = letters[j] = "Z"
        pairs.append((-J, "".join(letters)))
    for i in range(n):
        letters = ["I"] * n
        letters[i] = "X"
        pairs.append((-h, "".join(letters)))
    return Hamiltonian.from_pairs(pairs)


def _apply_pauli_array(P: PauliString, amps: np.ndarray) -> np.ndarray:
    amps = np.ascontiguousarray(amps, dtype=np.complex128)
    return kernels.apply_pauli(amps, P.n, P.xmask, P.zmask, P.ny)


def apply_pauli(P: PauliString, state: Statevector) -> Statevector:
    if P.n != state.n:
        raise ValueError(f"Pauli length {P.n} does not match {state.n}-qubit state")
    return Statevector(state.n, _apply_pauli_array(P, state.amplitudes))


def pauli_expectation_oracle(P: PauliString, state: Statevector) -> float:
    if P.n != state.n:
        raise ValueError(f"Pauli length {P.n} does not match {state.n}-qubit state")
    val = np.vdot(state.amplitudes, _apply_pauli_array(P, state.amplitudes))
    assert abs(val.imag) < 1e-12, "Hermitian expectation acquired an imaginary part"
    return float(val.real)


def apply_hamiltonian(H: Hamiltonian, amps: np.ndarray) -> np.ndarray:
    """Matrix-free H|v> for an arbitrary (unnormalized) amplitude vector."""
    out = np.zeros(1 << H.n, dtype=np.complex128)
    for t in H.terms:
        out += t.coeff * _apply_pauli_array(t.pauli, amps)
    return out


def expectation(H: Hamiltonian, amps: np.ndarray) -> float:
    """<v|H|v> / <v|v>."""
    amps = np.asarray(amps, dtype=np.complex128)
    return float(np.vdot(amps, apply_hamiltonian(H, amps)).real / np.vdot(amps, amps).real)


def hamiltonian_matrix(H: Hamiltonian) -> sp.csr_matrix:
    dim = 1 << H.n
    idx = np.arange(dim, dtype=np.int64)
    mat = sp.csr_matrix((dim, dim), dtype=np.complex128)
    for t in H.terms:
        P = t.pauli
        signs = 1 - 2 * (np.bitwise_count(idx & P.zmask) & 1).astype(np.int64)
        vals = t.coeff * (1j ** P.ny) * signs
        mat = mat + sp.csr_matrix((vals, (idx ^ P.xmask, idx)), shape=(dim, dim))
    return mat


def exact_ground_energy(H: Hamiltonian, method: str = "auto") -> float:
    """Lowest eigenvalue of ``H``: dense for n <= 10, Lanczos above."""
    if H.n > MAX_EXACT_QUBITS:
        raise ResourceError(f"exact diagonalization limited to {MAX_EXACT_QUBITS} qubits, got {H.n}")
    if method == "auto":
        method = "dense" if H.n <= DENSE_LIMIT else "iterative"
    if method == "dense" or H.n <= 2:
        return float(np.linalg.eigvalsh(hamiltonian_matrix(H).toarray())[0])
    if method != "iterative":
        raise ValueError(f"unknown method {method!r}")
    dim = 1 << H.n
    op = LinearOperator((dim, dim), matvec=lambda v: apply_hamiltonian(H, v.ravel()), dtype=np.complex128)
    vals = eigsh(op, k=1, which="SA", tol=1e-12, return_eigenvectors=False)
    return float(vals[0])


def parse_hamiltonian_text(text: str) -> Hamiltonian:
    """Parse '<coefficient> <pauli-letters>' lines; '#' starts a comment."""
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise PauliParseError(f"line {lineno}: expected '<coefficient> <pauli>', got {raw!r}")
        try:
            coeff = float(parts[0])
        except ValueError:
            raise PauliParseError(f"line {lineno}: bad coefficient {parts[0]!r}") from None
        try:
            pauli = parse_pauli_string(parts[1])
        except PauliParseError as exc:
            raise PauliParseError(f"line {lineno}: {exc}", exc.position) from None
        pairs.append((coeff, pauli))
    if not pairs:
        raise PauliParseError("no Hamiltonian terms found")
    lengths = {p.n for _, p in pairs}
    if len(lengths) != 1:
        raise PauliParseError(f"terms have mixed lengths {sorted(lengths)}")
    return Hamiltonian.from_pairs(pairs)


def format_hamiltonian(H: Hamiltonian) -> str:
    return "".join(f"{t.coeff!r} {t.pauli}\n" for t in H.terms)
