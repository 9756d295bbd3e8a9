"""Star-qubit measurement circuits and bitstring coverage bookkeeping.

For a Pauli string P with at least one X/Y letter, the star qubit q* is the
first X/Y position. The measurement circuit appends CX (for X) or CY (for Y)
from q* onto every other X/Y position, then a basis rotation on q*:

    part     star X       star Y
    real     H            SDG, H
    imag     RX(pi/2)     H

With s' = s with the star bit cleared and s~' its tilde transform, the
measured string s contributes to the pair (s', s~') with sign

    (-1)**s[q*] * (-1)**(parity of s on Z letters) * k

where k = -1 for the imaginary part of an X-star string and +1 otherwise.
Y letters contribute no explicit sign; their phases cancel against the CY
gates and the star rotation. These conventions are checked against the
dense oracle in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import pi

import numpy as np

from .circuit import Circuit, ShotCounts, cx, cy, h, index_to_bitstring, rx, sdg
from .hamiltonian import Hamiltonian, HamiltonianTerm, PauliString

REAL = "real"
IMAG = "imag"


@dataclass(frozen=True)
class StarInfo:
    index: int | None
    letter: str | None

    @property
    def present(self) -> bool:
        return self.index is not None


def star_qubit(P: PauliString) -> StarInfo:
    for q, ch in enumerate(P.letters):
        if ch in "XY":
            return StarInfo(q, ch)
    return StarInfo(None, None)


def _check_bits(s: str, n: int):
    if len(s) != n:
        raise ValueError(f"bitstring {s!r} has length {len(s)}, expected {n}")
    if set(s) - {"0", "1"}:
        raise ValueError(f"not a bitstring: {s!r}")


def tilde_transform(s: str, P: PauliString) -> str:
    """Flip the bits of ``s`` at the X/Y positions of ``P``."""
    _check_bits(s, P.n)
    return "".join(("1" if b == "0" else "0") if ch in "XY" else b for b, ch in zip(s, P.letters))


def star_reset(s: str, star: int) -> str:
    if not 0 <= star < len(s):
        raise ValueError(f"star index {star} outside bitstring of length {len(s)}")
    return s[:star] + "0" + s[star + 1 :]


def _parity(idx: np.ndarray, mask: int) -> np.ndarray:
    return (np.bitwise_count(idx & mask) & 1).astype(np.int64)


def z_only_mask(P: PauliString) -> int:
    m = 0
    for q, ch in enumerate(P.letters):
        if ch == "Z":
            m |= 1 << (P.n - 1 - q)
    return m


def term_signs(P: PauliString, part: str = REAL) -> np.ndarray:
    """Per-measured-string sign for the pair estimator of ``P``.

    For a diagonal string this is the Z-parity of the computational-basis
    outcome; otherwise see the module docstring.
    """
    n = P.n
    idx = np.arange(1 << n, dtype=np.int64)
    star = star_qubit(P)
    if not star.present:
        if part != REAL:
            raise ValueError("diagonal Pauli strings have no imaginary part")
        return 1.0 - 2.0 * _parity(idx, P.zmask)
    starbit = 1 << (n - 1 - star.index)
    sign = 1.0 - 2.0 * (_parity(idx, starbit) ^ _parity(idx, z_only_mask(P)))
    if part == IMAG and star.letter == "X":
        sign = -sign
    elif part not in (REAL, IMAG):
        raise ValueError(f"part must be 'real' or 'imag', got {part!r}")
    return sign


def measurement_suffix(P: PauliString, part: str = REAL) -> list:
    star = star_qubit(P)
    if not star.present:
        if part != REAL:
            raise ValueError(f"imaginary part requested for diagonal string {P}")
        return []
    q = star.index
    gates = []
    for j in range(q + 1, P.n):
        if P.letters[j] == "X":
            gates.append(cx(q, j))
        elif P.letters[j] == "Y":
            gates.append(cy(q, j))
    if part == REAL:
        gates += [h(q)] if star.letter == "X" else [sdg(q), h(q)]
    elif part == IMAG:
        gates += [rx(q, pi / 2)] if star.letter == "X" else [h(q)]
    else:
        raise ValueError(f"part must be 'real' or 'imag', got {part!r}")
    return gates


def build_measurement_circuit(ansatz: Circuit, P: PauliString, part: str = REAL) -> Circuit:
    if P.n != ansatz.n:
        raise ValueError(f"Pauli length {P.n} does not match {ansatz.n}-qubit ansatz")
    return ansatz.extend(measurement_suffix(P, part))


@dataclass(frozen=True)
class MeasurementGroup:
    """Terms sharing one measurement circuit per part.

    Strings with the same X/Y placement and the same letters at those
    positions share CX/CY gates and star rotation; all diagonal strings share
    the bare ansatz circuit.
    """

    n: int
    xmask: int
    xy_letters: str
    terms: tuple[HamiltonianTerm, ...]

    @property
    def diagonal(self) -> bool:
        return self.xmask == 0

    @property
    def representative(self) -> PauliString:
        return self.terms[0].pauli

    @property
    def star(self) -> StarInfo:
        return star_qubit(self.representative)

    @property
    def starbit(self) -> int:
        s = self.star
        return 0 if s.index is None else 1 << (self.n - 1 - s.index)

    @property
    def label(self) -> str:
        if self.diagonal:
            return "diag"
        return "".join(ch if ch in "XY" else "." for ch in self.representative.letters)

    def suffix(self, part: str = REAL) -> list:
        return measurement_suffix(self.representative, part)

    def weights(self, part: str = REAL) -> np.ndarray:
        """Sum over member terms of h_P times the per-string sign."""
        out = np.zeros(1 << self.n)
        for t in self.terms:
            out += t.coeff * term_signs(t.pauli, part)
        return out


def group_terms(H: Hamiltonian) -> list[MeasurementGroup]:
    """Partition terms into measurement groups; the diagonal group (if any) comes first."""
    buckets: dict[tuple[int, str], list[HamiltonianTerm]] = {}
    for t in H.terms:
        P = t.pauli
        key = (P.xmask, "".join(ch for ch in P.letters if ch in "XY"))
        buckets.setdefault(key, []).append(t)
    groups = [MeasurementGroup(H.n, k[0], k[1], tuple(v)) for k, v in buckets.items()]
    groups.sort(key=lambda g: not g.diagonal)
    return groups


@dataclass(frozen=True)
class CoverageSets:
    """Observed supports. ``real``/``imag`` map Pauli letters to B_{m,P} / B_{m',P}."""

    n: int
    ansatz: frozenset[str]
    real: dict[str, frozenset[str]] = field(default_factory=dict)
    imag: dict[str, frozenset[str]] = field(default_factory=dict)
    numerator: frozenset[str] = frozenset()

    @property
    def n_m(self) -> int:
        return len(self.numerator)

    @property
    def unmatched(self) -> frozenset[str]:
        """B_M minus B_a."""
        return self.numerator - self.ansatz


def _support(counts: ShotCounts) -> frozenset[str]:
    return frozenset(index_to_bitstring(i, counts.n) for i in np.flatnonzero(counts.counts))


def collect_coverage(ansatz_counts: ShotCounts, real_counts=None, imag_counts=None) -> CoverageSets:
    """Build B_a, B_{m,P}, B_{m',P} and B_M from frozen counts.

    ``real_counts`` / ``imag_counts`` map a Pauli string (or its letters) to
    the counts of its measurement circuit. Diagonal strings draw their
    numerator strings from the ansatz counts.
    """
    n = ansatz_counts.n
    b_a = _support(ansatz_counts)
    real, imag = {}, {}
    numerator: set[str] = set()
    for key, counts in (real_counts or {}).items():
        P = key if isinstance(key, PauliString) else PauliString(str(key))
        if counts.n != n:
            raise ValueError("counts disagree on qubit count")
        star = star_qubit(P)
        if not star.present:
            real[P.letters] = b_a
            numerator |= b_a
            continue
        observed = _support(counts)
        real[P.letters] = observed
        for s in observed:
            sp = star_reset(s, star.index)
            numerator.add(sp)
            numerator.add(tilde_transform(sp, P))
    for key, counts in (imag_counts or {}).items():
        P = key if isinstance(key, PauliString) else PauliString(str(key))
        imag[P.letters] = _support(counts)
    return CoverageSets(n, b_a, real, imag, frozenset(numerator))
