"""Energy estimators (VQE, VQNHE, unitary VQNHE) and the two training stages.

All estimators read frozen :class:`EstimatorData`: probability tables from
the statevector ("exact") or reconstructed frequencies c(s)/N ("shots").
Strings never observed have zero weight, so sums over observed supports
B_a, B_{m,P}, B_{m',P} are plain dot products over all 2**n strings.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from math import pi

import numpy as np
from scipy.optimize import minimize

from . import kernels
from .circuit import AnsatzSpec, ShotCounts, Statevector, apply_gates, build_hea, initial_params, make_rng, run_circuit, sample_probabilities, seed_sequence
from .errors import EstimatorError, TrainingError
from .hamiltonian import Hamiltonian, PauliString, expectation
from .measurement import IMAG, REAL, CoverageSets, MeasurementGroup, collect_coverage, group_terms, term_signs
from .neural import AdamState, MlpNetwork, adam_step

EXACT = "exact"
SHOTS = "shots"
REGULARIZE_MASS = 1e-12


@dataclass(frozen=True, eq=False)
class EstimatorData:
    """Frozen measurement record for one ansatz state.

    ``real[i]`` / ``imag[i]`` are the probability tables of the measurement
    circuits of ``groups[i]``; the diagonal group reuses the ansatz table.
    ``counts`` holds the raw :class:`ShotCounts` in shot mode.
    """

    H: Hamiltonian
    mode: str
    groups: tuple[MeasurementGroup, ...]
    ansatz: np.ndarray
    real: tuple[np.ndarray, ...]
    imag: tuple[np.ndarray | None, ...]
    shots: int | None = None
    counts: dict = field(default_factory=dict)

    def __post_init__(self):
        for arr in (self.ansatz, *self.real, *(a for a in self.imag if a is not None)):
            arr.flags.writeable = False
        rw = tuple(np.ascontiguousarray(g.weights(REAL) * p) for g, p in zip(self.groups, self.real))
        iw = tuple(
            None if (g.diagonal or p is None) else np.ascontiguousarray(g.weights(IMAG) * p)
            for g, p in zip(self.groups, self.imag)
        )
        object.__setattr__(self, "_real_w", rw)
        object.__setattr__(self, "_imag_w", iw)

    @property
    def n(self) -> int:
        return self.H.n

    @property
    def has_imag(self) -> bool:
        return all(g.diagonal or p is not None for g, p in zip(self.groups, self.imag))

    def group_of(self, P: PauliString) -> int:
        for i, g in enumerate(self.groups):
            if any(t.pauli == P for t in g.terms):
                return i
        raise KeyError(f"{P} is not a term of this Hamiltonian")

    def coverage(self) -> CoverageSets:
        if self.mode != SHOTS:
            raise ValueError("coverage sets are defined for shot data")
        real, imag = {}, {}
        for g, key in zip(self.groups, range(len(self.groups))):
            for t in g.terms:
                real[t.pauli] = self.counts[(key, REAL)] if not g.diagonal else self.counts["ansatz"]
                if (key, IMAG) in self.counts:
                    imag[t.pauli] = self.counts[(key, IMAG)]
        return collect_coverage(self.counts["ansatz"], real, imag)


def collect_data(H: Hamiltonian, ansatz, mode=EXACT, shots=None, seed=None, imag=True) -> EstimatorData:
    """Run (and in shot mode sample) the ansatz and every measurement circuit once.

    ``ansatz`` is a :class:`Circuit` or an already simulated :class:`Statevector`.
    Each circuit gets ``shots`` samples from its own child of ``seed``.
    """
    state = ansatz if isinstance(ansatz, Statevector) else run_circuit(ansatz)
    if state.n != H.n:
        raise ValueError("ansatz and Hamiltonian disagree on qubit count")
    n = H.n
    groups = tuple(group_terms(H))
    if mode == SHOTS:
        if shots is None or shots < 1:
            raise ValueError("shot mode needs shots >= 1")
        children = iter(seed_sequence(seed).spawn(1 + 2 * len(groups)))
    elif mode != EXACT:
        raise ValueError(f"mode must be 'exact' or 'shots', got {mode!r}")

    counts = {}

    def table(probs, key):
        if mode == EXACT:
            return probs
        c = sample_probabilities(probs, n, shots, next(children))
        counts[key] = c
        return c.frequencies()

    p_a = table(state.probs, "ansatz")
    real, imaginary = [], []
    for i, g in enumerate(groups):
        if g.diagonal:
            real.append(p_a)
            imaginary.append(None)
            continue
        real.append(table(np.abs(apply_gates(state.amplitudes, n, g.suffix(REAL))) ** 2, (i, REAL)))
        if imag:
            imaginary.append(table(np.abs(apply_gates(state.amplitudes, n, g.suffix(IMAG))) ** 2, (i, IMAG)))
        else:
            imaginary.append(None)
    return EstimatorData(H, mode, groups, p_a, tuple(real), tuple(imaginary), shots if mode == SHOTS else None, counts)


def data_from_counts(H: Hamiltonian, ansatz_counts: ShotCounts, real_counts=None, imag_counts=None) -> EstimatorData:
    """Shot data from externally recorded counts (e.g. hardware runs).

    ``real_counts`` / ``imag_counts`` map the letters of any member term of a
    measurement group to that group's :class:`ShotCounts`. Groups without an
    entry are treated as never measured (zero counts).
    """
    n = H.n
    groups = tuple(group_terms(H))
    shots = ansatz_counts.shots
    real_counts = {str(k): v for k, v in (real_counts or {}).items()}
    imag_counts = {str(k): v for k, v in (imag_counts or {}).items()}
    counts = {"ansatz": ansatz_counts}
    zero = ShotCounts(n, 0, np.zeros(1 << n, dtype=np.int64))

    def lookup(table, g):
        hits = [table[t.pauli.letters] for t in g.terms if t.pauli.letters in table]
        return hits[0] if hits else None

    p_a = ansatz_counts.frequencies()
    real, imaginary = [], []
    for i, g in enumerate(groups):
        if g.diagonal:
            real.append(p_a)
            imaginary.append(None)
            continue
        rc = lookup(real_counts, g) or zero
        counts[(i, REAL)] = rc
        real.append(rc.frequencies())
        ic = lookup(imag_counts, g)
        if ic is not None:
            counts[(i, IMAG)] = ic
        imaginary.append(None if ic is None else ic.frequencies())
    return EstimatorData(H, SHOTS, groups, p_a, tuple(real), tuple(imaginary), shots, counts)


@dataclass(frozen=True)
class EnergyEstimate:
    """``value`` equals sum of h_P * terms[P] over the Hamiltonian."""

    value: float
    kind: str
    mode: str
    terms: dict[str, float]


def _assemble(H, kind, mode, per_term) -> EnergyEstimate:
    value = float(sum(t.coeff * per_term[t.pauli.letters] for t in H.terms))
    return EnergyEstimate(value, kind, mode, per_term)


def _check_data(H, data):
    if data.H != H:
        raise ValueError("estimator data was collected for a different Hamiltonian")


def _values(net_or_values, n):
    if isinstance(net_or_values, MlpNetwork):
        return net_or_values.all_outputs()
    vals = np.ascontiguousarray(net_or_values, dtype=float)
    if vals.shape != (1 << n,):
        raise ValueError(f"expected {1 << n} network values, got {vals.shape}")
    return vals


def vqe_energy(H: Hamiltonian, data: EstimatorData) -> EnergyEstimate:
    """Plain Pauli-sum energy from the real measurement tables."""
    _check_data(H, data)
    per_term = {}
    for g, p in zip(data.groups, data.real):
        for t in g.terms:
            per_term[t.pauli.letters] = float(np.dot(term_signs(t.pauli, REAL), p))
    return _assemble(H, "vqe", data.mode, per_term)


def vqe_energy_params(H, spec: AnsatzSpec, theta, mode=EXACT, shots=None, seed=None) -> EnergyEstimate:
    data = collect_data(H, build_hea(spec, theta), mode, shots, seed, imag=False)
    return vqe_energy(H, data)


def pauli_estimate_vqnhe(f_values, data: EstimatorData, P: PauliString) -> float:
    """Unnormalized <psi_f|P|psi_f> from the measurement tables."""
    f = _values(f_values, data.n)
    i = data.group_of(P)
    g = data.groups[i]
    w = np.ascontiguousarray(term_signs(P, REAL) * data.real[i])
    if g.diagonal:
        return float(np.dot(w, f * f))
    return kernels.pair_sum(w, f, g.starbit, g.xmask)


def vqnhe_denominator(f_values, data: EstimatorData, regularize=False) -> float:
    """Sum over observed ansatz strings of f(s)**2 p_a(s)."""
    f = _values(f_values, data.n)
    p = data.ansatz + REGULARIZE_MASS if regularize else data.ansatz
    with np.errstate(over="ignore", invalid="ignore"):
        return float(np.dot(f * f, p))


def vqnhe_loss(H: Hamiltonian, net, data: EstimatorData, regularize=False) -> EnergyEstimate:
    """Normalized VQNHE energy; in shot mode the denominator runs over B_a only."""
    _check_data(H, data)
    f = _values(net, data.n)
    den = vqnhe_denominator(f, data, regularize)
    if not np.isfinite(den) or den <= 0.0:
        raise EstimatorError(f"VQNHE normalization is {den}")
    with np.errstate(over="ignore", invalid="ignore"):
        per_term = {t.pauli.letters: pauli_estimate_vqnhe(f, data, t.pauli) / den for t in H.terms}
    return _assemble(H, "vqnhe", data.mode, per_term)


def pauli_estimate_uvqnhe(g_values, data: EstimatorData, P: PauliString) -> float:
    """<psi_u|P|psi_u> from real and imaginary measurement tables; no normalization."""
    g = _values(g_values, data.n)
    i = data.group_of(P)
    grp = data.groups[i]
    if grp.diagonal:
        return float(np.dot(term_signs(P, REAL), data.real[i]))
    if data.imag[i] is None:
        raise ValueError("unitary VQNHE needs imaginary-part measurement data")
    wr = np.ascontiguousarray(term_signs(P, REAL) * data.real[i])
    wi = np.ascontiguousarray(term_signs(P, IMAG) * data.imag[i])
    return kernels.phase_pair_sum(wr, wi, g, grp.starbit, grp.xmask)


def uvqnhe_energy(H: Hamiltonian, net, data: EstimatorData) -> EnergyEstimate:
    _check_data(H, data)
    g = _values(net, data.n)
    per_term = {t.pauli.letters: pauli_estimate_uvqnhe(g, data, t.pauli) for t in H.terms}
    return _assemble(H, "uvqnhe", data.mode, per_term)


def vqnhe_value_and_sensitivity(f, data: EstimatorData, regularize=False):
    """Loss and dLoss/df(s) for every string; grouped fast path used in training."""
    num = 0.0
    dnum = np.zeros(f.shape[0])
    with np.errstate(over="ignore", invalid="ignore"):
        for g, w in zip(data.groups, data._real_w):
            if g.diagonal:
                num += float(np.dot(w, f * f))
                dnum += 2.0 * w * f
            else:
                num += kernels.pair_sum(w, f, g.starbit, g.xmask)
                kernels.pair_grad(w, f, g.starbit, g.xmask, dnum)
        p = data.ansatz + REGULARIZE_MASS if regularize else data.ansatz
        den = float(np.dot(f * f, p))
        if not np.isfinite(den) or den <= 0.0:
            raise EstimatorError(f"VQNHE normalization is {den}")
        loss = num / den
        sens = dnum / den - loss * 2.0 * f * p / den
    return loss, sens


def uvqnhe_value_and_sensitivity(g, data: EstimatorData):
    if not data.has_imag:
        raise ValueError("unitary VQNHE needs imaginary-part measurement data")
    value = 0.0
    sens = np.zeros(g.shape[0])
    for grp, wr, wi in zip(data.groups, data._real_w, data._imag_w):
        if grp.diagonal:
            value += float(wr.sum())
        else:
            value += kernels.phase_pair_sum(wr, wi, g, grp.starbit, grp.xmask)
            kernels.phase_pair_grad(wr, wi, g, grp.starbit, grp.xmask, sens)
    return value, sens


def transformed_state(state: Statevector, net, kind: str) -> np.ndarray:
    """Diagonal transformation of the amplitudes: f(s) psi(s) or exp(i g(s)) psi(s)."""
    vals = _values(net, state.n)
    if kind == "vqnhe":
        return vals * state.amplitudes
    if kind == "uvqnhe":
        return np.exp(1j * vals) * state.amplitudes
    raise ValueError(f"kind must be 'vqnhe' or 'uvqnhe', got {kind!r}")


def exact_transformed_energy(H: Hamiltonian, state: Statevector, net, kind: str) -> float:
    """Brute-force <psi_t|H|psi_t>/<psi_t|psi_t> by dense application."""
    if state.n > 12:
        raise ValueError("dense transformed-state oracle limited to 12 qubits")
    return expectation(H, transformed_state(state, net, kind))


@dataclass
class TrainingTrajectory:
    """Per-epoch (or per-evaluation) losses starting at epoch 0."""

    losses: np.ndarray
    final_params: np.ndarray
    wall_clock: float
    seed: object
    config: dict
    diverged: bool = False
    divergence_epoch: int | None = None
    halted: bool = False
    stagnated: bool = False
    network: MlpNetwork | None = None
    evaluations: np.ndarray | None = None

    @property
    def final_loss(self) -> float:
        return float(self.losses[-1])


@dataclass(frozen=True)
class OptimizerConfig:
    """VQE-stage optimizer. ``budget`` counts energy evaluations (iterations for param-shift)."""

    method: str = "nelder-mead"
    budget: int = 4000
    restarts: int = 1
    lr: float = 0.05
    init_scale: float = 0.1
    tol: float = 1e-10


def vqe_gradient_param_shift(H: Hamiltonian, spec: AnsatzSpec, theta) -> np.ndarray:
    """Exact-mode gradient by the two-term shift rule (RX and RZZ generators have eigenvalues +/-1/2)."""
    theta = np.asarray(theta, dtype=float)
    circuit = build_hea(spec, theta)
    for gate in circuit.gates:
        if gate.angle is not None and gate.kind not in ("RX", "RZ", "RZZ"):
            raise ValueError(f"parameter shift unsupported for {gate.kind}")

    def energy(t):
        return expectation(H, run_circuit(build_hea(spec, t)).amplitudes)

    grad = np.empty_like(theta)
    for k in range(theta.shape[0]):
        shift = np.zeros_like(theta)
        shift[k] = pi / 2
        grad[k] = 0.5 * (energy(theta + shift) - energy(theta - shift))
    return grad


def train_vqe(H: Hamiltonian, spec: AnsatzSpec, cfg: OptimizerConfig = OptimizerConfig(), mode=EXACT, seed=0, shots=None):
    """Derivative-free VQE stage. Returns (theta*, trajectory of best-so-far energies)."""
    t0 = time.perf_counter()
    ss = seed_sequence(seed)
    init_seeds = ss.spawn(cfg.restarts)
    eval_rng = make_rng(ss.spawn(1)[0])
    evals: list[float] = []

    def energy(theta):
        circ = build_hea(spec, theta)
        if mode == EXACT:
            e = expectation(H, run_circuit(circ).amplitudes)
        else:
            e = vqe_energy(H, collect_data(H, circ, SHOTS, shots, eval_rng.integers(2**63), imag=False)).value
        evals.append(e)
        return e

    best_theta, best_e, stagnated = None, np.inf, False
    bounds = [(-2 * pi, 2 * pi)] * spec.n_params
    for child in init_seeds:
        x0 = initial_params(spec, child, cfg.init_scale)
        if cfg.method == "nelder-mead":
            res = minimize(energy, x0, method="Nelder-Mead", bounds=bounds,
                           options={"maxfev": cfg.budget, "xatol": cfg.tol, "fatol": cfg.tol, "adaptive": spec.n_params > 8})
            theta, ok = res.x, res.success
        elif cfg.method == "cobyla":
            res = minimize(energy, x0, method="COBYLA", options={"maxiter": cfg.budget, "tol": cfg.tol})
            theta, ok = res.x, res.success
        elif cfg.method == "param-shift":
            theta, ok = _param_shift_descent(H, spec, x0, cfg, energy)
        else:
            raise ValueError(f"unknown optimizer {cfg.method!r}")
        e = energy(theta)
        stagnated |= not ok
        if e < best_e:
            best_theta, best_e = np.asarray(theta, dtype=float), e
    raw = np.array(evals)
    traj = TrainingTrajectory(
        losses=np.minimum.accumulate(raw),
        final_params=best_theta,
        wall_clock=time.perf_counter() - t0,
        seed=seed,
        config={"method": cfg.method, "budget": cfg.budget, "restarts": cfg.restarts, "mode": mode, "shots": shots,
                "n": spec.n, "layers": spec.layers},
        stagnated=stagnated,
        evaluations=raw,
    )
    return best_theta, traj


def _param_shift_descent(H, spec, x0, cfg, energy):
    theta = np.array(x0, dtype=float)
    state = AdamState.create(theta.shape[0], lr=cfg.lr)
    for _ in range(cfg.budget):
        grad = vqe_gradient_param_shift(H, spec, theta)
        energy(theta)
        if np.linalg.norm(grad) < 1e-8:
            return theta, True
        theta, state = adam_step(state, theta, grad)
    return theta, False


def train_network(H: Hamiltonian, theta, spec: AnsatzSpec, kind="vqnhe", epochs=200, mode=EXACT, shots=None,
                  seed=0, lr=1e-2, hidden=None, head=None, regularize=False, data=None) -> TrainingTrajectory:
    """Network stage on frozen data: Adam on the VQNHE loss or the U-VQNHE energy.

    ``losses[k]`` is the loss before update ``k``; the last entry follows the
    final update. Non-finite loss halts training; any loss below -sum|h_P|
    (impossible for a normalized state) sets the divergence flag.
    """
    if kind not in ("vqnhe", "uvqnhe"):
        raise ValueError(f"kind must be 'vqnhe' or 'uvqnhe', got {kind!r}")
    t0 = time.perf_counter()
    data_seed, net_seed = seed_sequence(seed).spawn(2)
    if data is None:
        data = collect_data(H, build_hea(spec, theta), mode, shots, data_seed, imag=(kind == "uvqnhe"))
    head = head or ("amplitude" if kind == "vqnhe" else "phase")
    net = MlpNetwork.initialize(H.n, net_seed, hidden, head)
    adam = AdamState.create(net.size, lr=lr)
    idx = np.arange(1 << H.n)
    floor = -H.one_norm - 1e-9

    losses = []
    diverged, onset, halted = False, None, False
    for epoch in range(epochs + 1):
        vals = net.all_outputs()
        try:
            if kind == "vqnhe":
                loss, sens = vqnhe_value_and_sensitivity(vals, data, regularize)
            else:
                loss, sens = uvqnhe_value_and_sensitivity(vals, data)
        except EstimatorError:
            loss, sens = float("nan"), None
        losses.append(loss)
        if not np.isfinite(loss) or sens is None or not np.all(np.isfinite(sens)):
            diverged, halted = True, True
            onset = epoch if onset is None else onset
            break
        if loss < floor and not diverged:
            diverged, onset = True, epoch
        if epoch == epochs:
            break
        grad = net.vjp(idx, sens)
        try:
            new, adam = adam_step(adam, net.params, grad)
        except TrainingError:
            diverged, halted = True, True
            onset = epoch if onset is None else onset
            break
        if not np.all(np.isfinite(new)):
            diverged, halted = True, True
            onset = epoch if onset is None else onset
            break
        net.params = new
    return TrainingTrajectory(
        losses=np.array(losses),
        final_params=net.params.copy(),
        wall_clock=time.perf_counter() - t0,
        seed=seed,
        config={"kind": kind, "epochs": epochs, "mode": data.mode, "shots": data.shots, "lr": lr,
                "hidden": net.hidden, "head": net.head, "regularize": regularize},
        diverged=diverged,
        divergence_epoch=onset,
        halted=halted,
        network=net,
    )
