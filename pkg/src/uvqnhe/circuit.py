"""Gate-level circuits, statevector simulation and shot sampling.

Bit order: qubit 0 is the leftmost character of a bitstring and the most
significant bit of the statevector index. Rotations follow exp(-i theta G / 2).
Random numbers come from numpy's PCG64 generator, which is portable across
platforms for a given integer seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import cos, sin, sqrt

import numpy as np

from . import kernels
from .errors import CircuitError

GATE_KINDS = ("H", "X", "SDG", "RX", "RZ", "RZZ", "CX", "CY")
_CONTROLLED = ("CX", "CY")
_ROTATIONS = ("RX", "RZ", "RZZ")

_INV_SQRT2 = 1.0 / sqrt(2.0)
_FIXED = {
    "H": np.array([[_INV_SQRT2, _INV_SQRT2], [_INV_SQRT2, -_INV_SQRT2]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "SDG": np.array([[1, 0], [0, -1j]], dtype=complex),
    "CX": np.array([[0, 1], [1, 0]], dtype=complex),
    "CY": np.array([[0, -1j], [1j, 0]], dtype=complex),
}


def gate_matrix(kind: str, angle: float | None = None) -> np.ndarray:
    """2x2 matrix of a single-qubit gate (the target block for CX/CY)."""
    if kind in _FIXED:
        return _FIXED[kind]
    c, s = cos(angle / 2), sin(angle / 2)
    if kind == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if kind == "RZ":
        return np.array([[c - 1j * s, 0], [0, c + 1j * s]], dtype=complex)
    raise CircuitError(f"no single-qubit matrix for gate {kind}")


@dataclass(frozen=True)
class Gate:
    """One gate. ``targets`` has two entries for RZZ and one otherwise."""

    kind: str
    targets: tuple[int, ...]
    control: int | None = None
    angle: float | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        want = 2 if self.kind == "RZZ" else 1
        if len(self.targets) != want:
            raise CircuitError(f"{self.kind} takes {want} target(s), got {len(self.targets)}")
        if self.kind == "RZZ" and self.targets[0] == self.targets[1]:
            raise CircuitError("RZZ targets must differ")
        if (self.control is not None) != (self.kind in _CONTROLLED):
            raise CircuitError(f"control index must be given iff gate is CX/CY ({self.kind})")
        if self.control is not None and self.control in self.targets:
            raise CircuitError("control and target coincide")
        if (self.angle is not None) != (self.kind in _ROTATIONS):
            raise CircuitError(f"angle must be given iff gate is a rotation ({self.kind})")
        if min(self.qubits) < 0:
            raise CircuitError("negative qubit index")

    @property
    def qubits(self) -> tuple[int, ...]:
        if self.control is None:
            return self.targets
        return (self.control, *self.targets)

    @property
    def target(self) -> int:
        return self.targets[0]


def h(q):
    return Gate("H", (q,))


def x(q):
    return Gate("X", (q,))


def sdg(q):
    return Gate("SDG", (q,))


def rx(q, theta):
    return Gate("RX", (q,), angle=float(theta))


def rz(q, theta):
    return Gate("RZ", (q,), angle=float(theta))


def rzz(q1, q2, theta):
    return Gate("RZZ", (q1, q2), angle=float(theta))


def cx(control, target):
    return Gate("CX", (target,), control=control)


def cy(control, target):
    return Gate("CY", (target,), control=control)


@dataclass(frozen=True)
class Circuit:
    n: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self):
        if self.n < 1:
            raise CircuitError("circuit needs at least one qubit")
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if max(g.qubits) >= self.n:
                raise CircuitError(f"gate {g.kind} on qubit {max(g.qubits)} outside {self.n}-qubit circuit")

    def extend(self, gates) -> "Circuit":
        return Circuit(self.n, self.gates + tuple(gates))

    def __len__(self):
        return len(self.gates)


@dataclass(frozen=True)
class Statevector:
    n: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amp = np.array(self.amplitudes, dtype=np.complex128)
        if amp.shape != (1 << self.n,):
            raise CircuitError(f"expected {1 << self.n} amplitudes, got {amp.shape}")
        norm = float(np.vdot(amp, amp).real)
        if abs(norm - 1.0) > 1e-10:
            raise CircuitError(f"statevector not normalized (norm^2 = {norm})")
        amp.flags.writeable = False
        object.__setattr__(self, "amplitudes", amp)

    @property
    def probs(self) -> np.ndarray:
        """Probability vector indexed like the amplitudes."""
        return np.abs(self.amplitudes) ** 2

    @classmethod
    def zero(cls, n):
        amp = np.zeros(1 << n, dtype=np.complex128)
        amp[0] = 1.0
        return cls(n, amp)

    @classmethod
    def random(cls, n, rng):
        amp = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
        return cls(n, amp / np.linalg.norm(amp))


@dataclass(frozen=True)
class ShotCounts:
    """Dense per-bitstring counts; ``counts[i]`` belongs to ``index_to_bitstring(i, n)``."""

    n: int
    shots: int
    counts: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.counts, dtype=np.int64)
        if c.shape != (1 << self.n,):
            raise ValueError(f"expected {1 << self.n} count slots, got {c.shape}")
        if (c < 0).any():
            raise ValueError("negative count")
        if int(c.sum()) != self.shots:
            raise ValueError(f"counts sum to {int(c.sum())}, not {self.shots}")
        c.flags.writeable = False
        object.__setattr__(self, "counts", c)

    @classmethod
    def from_dict(cls, n, mapping):
        c = np.zeros(1 << n, dtype=np.int64)
        for key, val in mapping.items():
            if len(key) != n:
                raise ValueError(f"bitstring {key!r} is not {n} bits long")
            c[bitstring_to_index(key)] += int(val)
        return cls(n, int(c.sum()), c)

    def as_dict(self) -> dict[str, int]:
        return {index_to_bitstring(i, self.n): int(v) for i, v in enumerate(self.counts) if v}

    def frequencies(self) -> np.ndarray:
        """Reconstructed probabilities c(s)/N (all zero when N = 0)."""
        if self.shots == 0:
            return np.zeros(self.counts.shape, dtype=float)
        return self.counts / self.shots

    def support(self) -> frozenset[int]:
        return frozenset(np.flatnonzero(self.counts).tolist())


@dataclass(frozen=True)
class AnsatzSpec:
    """Hardware-efficient ansatz: per layer RX on every qubit then RZZ on each chain bond.

    ``hadamard_start`` prepends one unparametrized H on every qubit, so the
    circuit starts from |+...+> instead of |0...0>.
    """

    n: int
    layers: int = 1
    hadamard_start: bool = False

    def __post_init__(self):
        if self.n < 1 or self.layers < 1:
            raise ValueError("ansatz needs n >= 1 and layers >= 1")

    @property
    def n_params(self) -> int:
        return self.layers * (2 * self.n - 1)


def index_to_bitstring(index: int, n: int) -> str:
    return format(index, f"0{n}b")


def bitstring_to_index(bits: str) -> int:
    if not bits or set(bits) - {"0", "1"}:
        raise ValueError(f"not a bitstring: {bits!r}")
    return int(bits, 2)


def all_bitstrings(n):
    return [index_to_bitstring(i, n) for i in range(1 << n)]


def apply_gates(amplitudes: np.ndarray, n: int, gates) -> np.ndarray:
    """Apply ``gates`` to a working copy of ``amplitudes`` and return it."""
    state = np.array(amplitudes, dtype=np.complex128, copy=True, order="C")
    for g in gates:
        if g.kind == "RZZ":
            kernels.apply_zz_phase(state, n, g.targets[0], g.targets[1], g.angle)
        elif g.control is not None:
            kernels.apply_controlled(state, n, g.control, g.target, gate_matrix(g.kind))
        else:
            kernels.apply_1q(state, n, g.target, gate_matrix(g.kind, g.angle))
    return state


def run_circuit(circuit: Circuit, initial: Statevector | None = None) -> Statevector:
    """Simulate ``circuit`` from |0...0> (or from ``initial``)."""
    if initial is None:
        start = np.zeros(1 << circuit.n, dtype=np.complex128)
        start[0] = 1.0
    else:
        if initial.n != circuit.n:
            raise CircuitError("initial state and circuit disagree on qubit count")
        start = initial.amplitudes
    return Statevector(circuit.n, apply_gates(start, circuit.n, circuit.gates))


def probabilities(state: Statevector) -> dict[str, float]:
    return {index_to_bitstring(i, state.n): float(p) for i, p in enumerate(state.probs)}


def seed_sequence(seed) -> np.random.SeedSequence:
    """Accept an int, None or an existing SeedSequence (e.g. a spawned child)."""
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def sample_probabilities(probs: np.ndarray, n: int, shots: int, seed) -> ShotCounts:
    if shots < 0:
        raise ValueError("shots must be non-negative")
    p = np.clip(np.asarray(probs, dtype=float), 0.0, None)
    p = p / p.sum()
    counts = make_rng(seed).multinomial(shots, p) if shots else np.zeros(p.shape, dtype=np.int64)
    return ShotCounts(n, shots, counts)


def sample_counts(state: Statevector, shots: int, seed) -> ShotCounts:
    """Multinomial draw of ``shots`` computational-basis measurements."""
    return sample_probabilities(state.probs, state.n, shots, seed)


def build_hea(spec: AnsatzSpec, params) -> Circuit:
    params = np.asarray(params, dtype=float).ravel()
    if params.shape[0] != spec.n_params:
        raise ValueError(f"ansatz with n={spec.n}, L={spec.layers} needs {spec.n_params} parameters, got {params.shape[0]}")
    n = spec.n
    gates = [h(q) for q in range(n)] if spec.hadamard_start else []
    k = 0
    for _ in range(spec.layers):
        for q in range(n):
            gates.append(rx(q, params[k]))
            k += 1
        for q in range(n - 1):
            gates.append(rzz(q, q + 1, params[k]))
            k += 1
    return Circuit(n, gates)


def initial_params(spec: AnsatzSpec, seed, scale=0.1) -> np.ndarray:
    """Uniform draw from [-scale, scale] for every ansatz angle."""
    return make_rng(seed).uniform(-scale, scale, size=spec.n_params)
