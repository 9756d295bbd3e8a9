"""Failure-mode analysis for shot-based VQNHE.

* divergence witnesses: numerator strings never seen by the ansatz circuit;
* coupon-collector shot budgets for full ansatz coverage;
* the closed-form shot-noise variance model Var = Gamma_f / N + Delta_f / N**2;
* Monte-Carlo audits of the same quantities.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuit import Statevector, bitstring_to_index, index_to_bitstring, make_rng, seed_sequence
from .errors import ModelError
from .estimator import EXACT, SHOTS, EstimatorData, collect_data, uvqnhe_energy, vqnhe_loss
from .measurement import REAL, star_reset, tilde_transform


@dataclass(frozen=True)
class DivergenceReport:
    """``witnesses`` is B_M \\ B_a. ``negative_pathway[s]`` is True when some
    measured string pairs ``s`` with a negative weight, so that growing a
    positive f(s) pushes the loss down. ``numerator_slope[s]`` is the linear
    coefficient of f(s) in the loss numerator (only when f is supplied)."""

    witnesses: tuple[str, ...]
    negative_pathway: dict[str, bool]
    n_m: int
    numerator_slope: dict[str, float] = field(default_factory=dict)

    @property
    def diverging_possible(self) -> bool:
        return bool(self.witnesses)


def divergence_witnesses(data: EstimatorData, f_values=None) -> DivergenceReport:
    """Scan frozen shot data for strings that escape the normalization."""
    cov = data.coverage()
    witnesses = tuple(sorted(cov.unmatched))
    wit_idx = {bitstring_to_index(s): s for s in witnesses}
    negative = {s: False for s in witnesses}
    slope = {s: 0.0 for s in witnesses}
    f = None if f_values is None else np.asarray(f_values, dtype=float)
    for g, w in zip(data.groups, data._real_w):
        if g.diagonal:
            continue
        for s in np.flatnonzero(w):
            lo = int(s) & ~g.starbit
            hi = lo ^ g.xmask
            for this, other in ((lo, hi), (hi, lo)):
                if this in wit_idx:
                    key = wit_idx[this]
                    if w[s] < 0:
                        negative[key] = True
                    if f is not None:
                        slope[key] += float(w[s] * f[other])
    return DivergenceReport(witnesses, negative, cov.n_m, slope if f is not None else {})


def numerator_strings(data: EstimatorData) -> frozenset[str]:
    """B_M rebuilt directly from string transforms (independent of the index path)."""
    n = data.n
    out: set[str] = set()
    for i, g in enumerate(data.groups):
        if g.diagonal:
            out |= {index_to_bitstring(int(s), n) for s in np.flatnonzero(data.ansatz)}
            continue
        P = g.representative
        for s in np.flatnonzero(data.real[i]):
            sp = star_reset(index_to_bitstring(int(s), n), g.star.index)
            out.add(sp)
            out.add(tilde_transform(sp, P))
    return frozenset(out)


def harmonic_number(k: int) -> float:
    return float(sum(1.0 / i for i in range(1, k + 1)))


def coupon_collector_expected_shots(n: int, n_m: int) -> float:
    """2**n * H_{N_M}: expected ansatz shots to see all N_M strings under a uniform ansatz."""
    if not 1 <= n_m <= (1 << n):
        raise ValueError(f"N_M must lie in [1, 2**{n}], got {n_m}")
    return (1 << n) * harmonic_number(n_m)


def shots_to_cover(state: Statevector, targets, seed, chunk=256) -> int:
    """Number of single-shot measurements until every target index has appeared."""
    rng = make_rng(seed)
    remaining = set(int(t) for t in targets)
    p = state.probs / state.probs.sum()
    taken = 0
    while remaining:
        draws = rng.choice(p.shape[0], size=chunk, p=p)
        for k, d in enumerate(draws):
            remaining.discard(int(d))
            if not remaining:
                return taken + k + 1
        taken += chunk
    return taken


def coupon_collector_monte_carlo(state: Statevector, targets, trials: int, seed) -> np.ndarray:
    children = seed_sequence(seed).spawn(trials)
    return np.array([shots_to_cover(state, targets, c) for c in children])


@dataclass(frozen=True)
class VarianceReport:
    """Closed-form shot-noise model for the VQNHE energy at ``shots`` = N.

    Per-unit entries are keyed by measurement-group label; terms sharing a
    measurement circuit are merged into one unit.
    """

    shots: int
    gamma: float
    delta: float
    xi: dict[str, float]
    per_term: dict[str, float]
    covariances: dict[tuple[str, str], float]
    form: str

    @property
    def variance(self) -> float:
        return self.gamma / self.shots + self.delta / self.shots**2

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.variance))


def variance_model(data: EstimatorData, f_values, shots: int, form: str = "squared") -> VarianceReport:
    """Evaluate Gamma_f and Delta_f from exact probability tables.

    Each measurement unit u (group of terms sharing a circuit) contributes

        Var_u = Xi_u / N * (1/D**2 + S / (N D**4))

    with D = sum f**2 p_a and S the binomial spread of the denominator; every
    pair of units adds E_u E_v S / (N D**2) through the shared denominator.

    ``form="squared"`` uses the variance of a weighted sum of independent
    binomial frequencies (weights squared, scale invariant in f).
    ``form="printed"`` keeps the unsquared weights f(s')f(s~'), f(s)**2|<P>|
    and f(s)**2 p_a(1-p_a) literally.
    """
    if data.mode != EXACT:
        raise ModelError("variance model needs exact probability tables")
    if form not in ("squared", "printed"):
        raise ValueError(f"form must be 'squared' or 'printed', got {form!r}")
    f = np.asarray(f_values, dtype=float)
    p_a = data.ansatz
    den = float(np.dot(f * f, p_a))
    if not np.isfinite(den) or den <= 0.0:
        raise ModelError(f"normalization denominator is {den}")
    binom_a = p_a * (1.0 - p_a)
    squared = form == "squared"
    spread = float(np.dot(f**4 if squared else f * f, binom_a))

    units: dict[str, tuple[float, float]] = {}
    for i, g in enumerate(data.groups):
        w = g.weights(REAL)
        p = data.real[i]
        if g.diagonal:
            num = float(np.dot(w * f * f, p))
        else:
            lo = np.arange(p.shape[0]) & ~g.starbit
            hi = lo ^ g.xmask
            pair = f[lo] * f[hi]
            num = float(np.dot(w * pair, p))
        e_u = num / den
        if g.diagonal:
            # numerator and denominator share the ansatz counts
            if squared:
                xi = float(np.dot((f * f * (w - e_u)) ** 2, binom_a))
            else:
                xi = float(np.dot(f * f * np.abs(w - e_u), binom_a))
        else:
            binom_m = p * (1.0 - p)
            if squared:
                xi = float(np.dot((w * pair) ** 2, binom_m) + e_u**2 * np.dot(f**4, binom_a))
            else:
                xi = float(np.dot(np.abs(w) * pair, binom_m) + abs(e_u) * np.dot(f * f, binom_a))
        units[g.label] = (e_u, xi)

    gamma = 0.0
    delta = 0.0
    per_term, xis, covs = {}, {}, {}
    for label, (e_u, xi) in units.items():
        xis[label] = xi
        per_term[label] = xi / shots * (1.0 / den**2 + spread / (shots * den**4))
        gamma += xi / den**2
        delta += xi * spread / den**4
    labels = list(units)
    for a in range(len(labels)):
        for b in range(len(labels)):
            if a == b:
                continue
            c = units[labels[a]][0] * units[labels[b]][0] * spread / den**2
            covs[(labels[a], labels[b])] = c / shots
            gamma += c
    if not (np.isfinite(gamma) and np.isfinite(delta)):
        raise ModelError("variance model produced a non-finite value")
    return VarianceReport(shots, gamma, delta, xis, per_term, covs, form)


def empirical_error_variance(H, state: Statevector, net_values, kind: str, shots, trials: int, seed):
    """Sample mean and unbiased variance of <H> - <H>_m over independent shot draws.

    ``shots=None`` evaluates every trial in exact mode (zero variance).
    Returns (mean, variance, per-trial differences).
    """
    if trials < 2:
        raise ValueError("need at least two trials")
    vals = np.asarray(net_values, dtype=float)
    estimate = vqnhe_loss if kind == "vqnhe" else uvqnhe_energy
    needs_imag = kind == "uvqnhe"
    exact = estimate(H, vals, collect_data(H, state, EXACT, imag=needs_imag)).value
    diffs = np.empty(trials)
    for t, child in enumerate(seed_sequence(seed).spawn(trials)):
        if shots is None:
            data = collect_data(H, state, EXACT, imag=needs_imag)
        else:
            data = collect_data(H, state, SHOTS, shots, child, imag=needs_imag)
        diffs[t] = exact - estimate(H, vals, data).value
    return float(diffs.mean()), float(diffs.var(ddof=1)), diffs
