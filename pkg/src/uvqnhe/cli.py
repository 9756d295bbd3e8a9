"""Command-line experiment runner.

    uvqnhe <kind> --config <file> [--seed N] [--out DIR] [--override key=value]...

Exit codes: 0 on success (a diverging VQNHE run is a success), 2 on a usage
or configuration error, 3 on an internal fault.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .analysis import divergence_witnesses, empirical_error_variance, variance_model
from .circuit import AnsatzSpec, build_hea, index_to_bitstring, run_circuit, seed_sequence
from .config import KINDS, ExperimentConfig, build_config, load_table
from .errors import ConfigError, ModelError, UvqnheError
from .estimator import EXACT, SHOTS, OptimizerConfig, collect_data, train_network, train_vqe
from .hamiltonian import Hamiltonian, exact_ground_energy, expectation, format_hamiltonian, tfim_hamiltonian
from .kernels import BACKEND

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FAULT = 3

TRAJECTORY = "trajectory.csv"
LANDSCAPE = "landscape.csv"
SWEEP = "sweep.csv"
MANIFEST = "manifest.json"
AUDIT = "variance_audit.csv"
AUDIT_SUMMARY = "variance_summary.json"


@dataclass
class RunManifest:
    config: dict
    seeds: dict
    E_exact: float
    E_VQE: float | None = None
    final_estimate: float | None = None
    diverged: bool = False
    divergence_epoch: int | None = None
    wall_clock: float = 0.0
    artifacts: list[str] = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def to_json(self) -> str:
        body = {
            "config": self.config,
            "seeds": self.seeds,
            "E_exact": self.E_exact,
            "E_VQE": self.E_VQE,
            "final_estimate": self.final_estimate,
            "diverged": self.diverged,
            "divergence_epoch": self.divergence_epoch,
            "wall_clock_seconds": self.wall_clock,
            "backend": BACKEND,
            "artifacts": self.artifacts,
            "details": self.details,
        }
        return json.dumps(_jsonable(body), indent=2, sort_keys=False) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _num(v) -> str:
    """Deterministic float text: shortest round-trip repr."""
    return repr(float(v))


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_trajectory(path: Path, losses):
    _write_csv(path, ("epoch", "loss"), ((k, _num(v)) for k, v in enumerate(losses)))


def write_landscape(path: Path, n, values, observed):
    rows = ((index_to_bitstring(i, n), _num(values[i]), int(bool(observed[i]))) for i in range(1 << n))
    _write_csv(path, ("bitstring", "network_output", "observed_in_ansatz"), rows)


def _seed_label(ss: np.random.SeedSequence) -> dict:
    return {"entropy": int(ss.entropy), "spawn_key": list(ss.spawn_key)}


class _Pipeline:
    """Shared stages: Hamiltonian, exact energy and the frozen VQE parameters."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.H: Hamiltonian = tfim_hamiltonian(cfg.n_sites, cfg.J, cfg.h, cfg.boundary)
        self.spec = AnsatzSpec(cfg.n_sites, cfg.layers, cfg.hadamard_start)
        self.root = seed_sequence(cfg.seed)
        self.vqe_ss, self.net_ss, self.trial_ss = self.root.spawn(3)
        self.seeds = {"root": cfg.seed, "vqe": _seed_label(self.vqe_ss), "network": _seed_label(self.net_ss),
                      "trials": _seed_label(self.trial_ss)}
        self.E_exact = exact_ground_energy(self.H)
        self.theta = None
        self.E_VQE = None
        self.vqe_traj = None

    @property
    def shots(self):
        return self.cfg.shot_count if self.cfg.mode == "sampler" else None

    def optimizer(self) -> OptimizerConfig:
        c = self.cfg
        return OptimizerConfig(method=c.optimizer, budget=c.budget, restarts=c.restarts, init_scale=c.init_scale)

    def run_vqe(self, mode=EXACT, shots=None):
        if self.cfg.theta_file is not None:
            theta = np.loadtxt(self.cfg.theta_file, dtype=float, ndmin=1)
            if theta.shape != (self.spec.n_params,):
                raise ConfigError(f"theta file holds {theta.size} angles, ansatz needs {self.spec.n_params}", "theta_file")
            self.theta = theta
        else:
            self.theta, self.vqe_traj = train_vqe(self.H, self.spec, self.optimizer(), mode, self.vqe_ss, shots)
        self.state = run_circuit(build_hea(self.spec, self.theta))
        # the reported VQE energy is always the exact energy of the frozen state
        self.E_VQE = expectation(self.H, self.state.amplitudes)
        return self.theta


def _observed(data) -> np.ndarray:
    if data.mode == SHOTS:
        return data.counts["ansatz"].counts > 0
    return data.ansatz > 0


def _covered(data, target: str) -> bool:
    if target == "ansatz":
        return bool(np.all(data.counts["ansatz"].counts > 0))
    return not data.coverage().unmatched


def _model_sigma(exact_data, f_values, shots, form) -> float:
    try:
        with np.errstate(all="ignore"):
            return variance_model(exact_data, f_values, shots, form).sigma
    except (ModelError, FloatingPointError):
        return float("nan")


def _network_run(pipe: _Pipeline, kind, mode, net_ss):
    """Collect data and train one network on the frozen state; returns (trajectory, data)."""
    cfg = pipe.cfg
    shots = cfg.shot_count if mode == SHOTS else None
    data_ss = net_ss.spawn(1)[0]
    data = collect_data(pipe.H, pipe.state, mode, shots, data_ss, imag=(kind == "uvqnhe"))
    traj = train_network(pipe.H, pipe.theta, pipe.spec, kind, cfg.epochs, mode, shots, net_ss, cfg.lr,
                         cfg.hidden, regularize=cfg.regularize, data=data)
    return traj, data


def _run_tfim_exact(pipe, out, manifest):
    (out / "hamiltonian.txt").write_text(format_hamiltonian(pipe.H))
    manifest.artifacts.append("hamiltonian.txt")
    manifest.final_estimate = pipe.E_exact


def _run_vqe(pipe, out, manifest):
    mode = SHOTS if pipe.cfg.mode == "sampler" else EXACT
    if pipe.cfg.theta_file is not None:
        raise ConfigError("theta_file replaces the VQE stage and cannot be used with kind vqe", "theta_file")
    pipe.run_vqe(mode, pipe.shots)
    write_trajectory(out / TRAJECTORY, pipe.vqe_traj.losses)
    (out / "theta.txt").write_text("".join(_num(t) + "\n" for t in pipe.theta))
    manifest.artifacts += [TRAJECTORY, "theta.txt"]
    manifest.final_estimate = pipe.E_VQE
    manifest.details["vqe_best_sampled"] = float(pipe.vqe_traj.losses[-1])
    manifest.details["evaluations"] = int(len(pipe.vqe_traj.losses))
    manifest.details["stagnated"] = pipe.vqe_traj.stagnated


def _run_network(pipe, out, manifest, kind):
    cfg = pipe.cfg
    pipe.run_vqe()
    mode = SHOTS if cfg.mode == "sampler" else EXACT
    traj, data = _network_run(pipe, kind, mode, pipe.net_ss)
    write_trajectory(out / TRAJECTORY, traj.losses)
    write_landscape(out / LANDSCAPE, cfg.n_sites, traj.network.all_outputs(), _observed(data))
    manifest.artifacts += [TRAJECTORY, LANDSCAPE]
    manifest.final_estimate = traj.final_loss
    manifest.diverged = traj.diverged
    manifest.divergence_epoch = traj.divergence_epoch
    manifest.details.update(kind=kind, mode=mode, halted=traj.halted)
    if mode == SHOTS:
        report = divergence_witnesses(data, traj.network.all_outputs() if kind == "vqnhe" else None)
        manifest.details.update(
            witnesses=len(report.witnesses),
            negative_pathway_witnesses=sum(report.negative_pathway.values()),
            N_M=report.n_m,
            ansatz_support=int(_observed(data).sum()),
        )
    if cfg.compare:
        comparison = {f"{kind}_{mode}": traj.final_loss}
        for other_kind in ("vqnhe", "uvqnhe"):
            for other_mode in (SHOTS, EXACT):
                if (other_kind, other_mode) == (kind, mode) or (other_mode == SHOTS and not cfg.shots):
                    continue
                t, _ = _network_run(pipe, other_kind, other_mode, pipe.net_ss)
                name = f"trajectory_{other_kind}_{other_mode}.csv"
                write_trajectory(out / name, t.losses)
                manifest.artifacts.append(name)
                comparison[f"{other_kind}_{other_mode}"] = t.final_loss
        manifest.details["comparison_final"] = comparison
    return traj, data


def _run_divergence_demo(pipe, out, manifest):
    pipe.cfg.mode = "sampler"
    pipe.cfg.network = "vqnhe"
    traj, data = _run_network(pipe, out, manifest, "vqnhe")
    finite = traj.losses[np.isfinite(traj.losses)]
    manifest.details["min_loss"] = float(finite.min()) if finite.size else float("nan")


def _sweep_row(job):
    """One (shots, trial) pipeline; module level so worker processes can import it."""
    (H, spec, theta, state, exact_data, kind, shots, trial, ss, opts) = job
    attempts = ss.spawn(opts["max_redraws"] + 1) if opts["enforce"] else [ss]
    rejections = 0
    for attempt in attempts:
        data_ss, net_ss = attempt.spawn(2)
        data = collect_data(H, state, SHOTS, shots, data_ss, imag=(kind == "uvqnhe"))
        ok = _covered(data, opts["target"])
        if ok or not opts["enforce"]:
            break
        rejections += 1
    traj = train_network(H, theta, spec, kind, opts["epochs"], SHOTS, shots, net_ss, opts["lr"], opts["hidden"],
                         regularize=opts["regularize"], data=data)
    sigma = _model_sigma(exact_data, traj.network.all_outputs(), shots, opts["form"]) if kind == "vqnhe" else float("nan")
    return {"shots": shots, "trial": trial, "final_energy": traj.final_loss, "model_sigma": sigma,
            "coverage_ok": ok, "rejections": min(rejections, opts["max_redraws"]) if opts["enforce"] else 0,
            "diverged": traj.diverged}


def sweep_shots(pipe: _Pipeline, kind: str) -> list[dict]:
    """Run every (shots, trial) pair; rows come back in (shots, trial) order."""
    cfg = pipe.cfg
    trials = cfg.resolved_trials
    exact_data = collect_data(pipe.H, pipe.state, EXACT, imag=False)
    opts = {"max_redraws": cfg.max_redraws, "enforce": cfg.enforce_coverage, "target": cfg.coverage_target,
            "epochs": cfg.epochs, "lr": cfg.lr, "hidden": cfg.hidden, "regularize": cfg.regularize,
            "form": cfg.variance_form}
    # the same child seeds for every network kind, so comparisons share shot data
    children = pipe.trial_ss.spawn(len(cfg.shots) * trials)
    jobs = [(pipe.H, pipe.spec, pipe.theta, pipe.state, exact_data, kind, shots, t, children[i * trials + t], opts)
            for i, shots in enumerate(cfg.shots) for t in range(trials)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(_sweep_row, jobs))
    else:
        rows = [_sweep_row(j) for j in jobs]
    return sorted(rows, key=lambda r: (cfg.shots.index(r["shots"]), r["trial"]))


def _write_sweep(path, rows):
    _write_csv(path, ("shots", "trial", "final_energy", "model_sigma", "coverage_ok"),
               ((r["shots"], r["trial"], _num(r["final_energy"]), _num(r["model_sigma"]), int(r["coverage_ok"]))
                for r in rows))


def _sweep_summary(rows, shots_list):
    out = {}
    for shots in shots_list:
        sel = [r for r in rows if r["shots"] == shots]
        e = np.array([r["final_energy"] for r in sel])
        fin = e[np.isfinite(e)]
        out[str(shots)] = {
            "trials": len(sel),
            "finite": int(fin.size),
            "mean": float(fin.mean()) if fin.size else float("nan"),
            "std": float(fin.std(ddof=1)) if fin.size > 1 else float("nan"),
            "coverage_ok": sum(r["coverage_ok"] for r in sel),
            "rejections": sum(r["rejections"] for r in sel),
            "diverged": sum(r["diverged"] for r in sel),
        }
    return out


def _run_shot_sweep(pipe, out, manifest):
    cfg = pipe.cfg
    pipe.run_vqe()
    rows = sweep_shots(pipe, cfg.network)
    _write_sweep(out / SWEEP, rows)
    manifest.artifacts.append(SWEEP)
    manifest.details["network"] = cfg.network
    manifest.details["per_shots"] = _sweep_summary(rows, cfg.shots)
    manifest.details["E_floor_global"] = -2.0 * pipe.H.one_norm
    finals = np.array([r["final_energy"] for r in rows])
    manifest.final_estimate = float(np.nanmean(np.where(np.isfinite(finals), finals, np.nan))) if np.isfinite(finals).any() else float("nan")
    manifest.diverged = any(r["diverged"] for r in rows)
    # exact-mode reference for the blue line of the sweep plot
    ref, _ = _network_run(pipe, cfg.network, EXACT, pipe.net_ss)
    manifest.details["exact_mode_final"] = ref.final_loss
    if cfg.compare:
        other = "uvqnhe" if cfg.network == "vqnhe" else "vqnhe"
        other_rows = sweep_shots(pipe, other)
        name = f"sweep_{other}.csv"
        _write_sweep(out / name, other_rows)
        manifest.artifacts.append(name)
        manifest.details[f"per_shots_{other}"] = _sweep_summary(other_rows, cfg.shots)


def _run_variance_audit(pipe, out, manifest):
    cfg = pipe.cfg
    pipe.run_vqe()
    traj = train_network(pipe.H, pipe.theta, pipe.spec, "vqnhe", cfg.epochs, EXACT, None, pipe.net_ss, cfg.lr,
                         cfg.hidden)
    f = traj.network.all_outputs()
    exact_data = collect_data(pipe.H, pipe.state, EXACT, imag=False)
    children = pipe.trial_ss.spawn(len(cfg.shots))
    rows, summary_rows = [], []
    for N, child in zip(cfg.shots, children):
        model = variance_model(exact_data, f, N, cfg.variance_form)
        mean, var, _ = empirical_error_variance(pipe.H, pipe.state, f, "vqnhe", N, cfg.resolved_trials, child)
        rows.append((N, _num(model.variance), _num(var), _num(model.gamma), _num(model.delta)))
        summary_rows.append({
            "N": N, "model_var": model.variance, "empirical_var": var, "empirical_mean": mean,
            "gamma_f": model.gamma, "delta_f": model.delta, "ratio_model_over_empirical": model.variance / var,
            "within_band": bool(var <= model.variance <= 10.0 * var),
            "delta_share": (model.delta / N**2) / (model.gamma / N) if model.gamma > 0 else float("nan"),
        })
    _write_csv(out / AUDIT, ("N", "model_var", "empirical_var", "gamma_f", "delta_f"), rows)
    summary = {"form": cfg.variance_form, "trials": cfg.resolved_trials, "exact_vqnhe_energy": traj.final_loss,
               "rows": summary_rows}
    (out / AUDIT_SUMMARY).write_text(json.dumps(_jsonable(summary), indent=2) + "\n")
    write_landscape(out / LANDSCAPE, cfg.n_sites, f, exact_data.ansatz > 0)
    manifest.artifacts += [AUDIT, AUDIT_SUMMARY, LANDSCAPE]
    manifest.final_estimate = traj.final_loss


_RUNNERS = {
    "tfim-exact": _run_tfim_exact,
    "vqe": _run_vqe,
    "vqnhe": lambda p, o, m: _run_network(p, o, m, "vqnhe"),
    "uvqnhe": lambda p, o, m: _run_network(p, o, m, "uvqnhe"),
    "divergence-demo": _run_divergence_demo,
    "shot-sweep": _run_shot_sweep,
    "variance-audit": _run_variance_audit,
}


def run_experiment(cfg: ExperimentConfig, out=None) -> RunManifest:
    """Execute one configured experiment and write its artifacts under ``out``."""
    t0 = time.perf_counter()
    out = Path(out or cfg.out or Path("runs") / cfg.kind)
    out.mkdir(parents=True, exist_ok=True)
    pipe = _Pipeline(cfg)
    manifest = RunManifest(config=cfg.to_dict(), seeds=pipe.seeds, E_exact=pipe.E_exact)
    _RUNNERS[cfg.kind](pipe, out, manifest)
    manifest.E_VQE = pipe.E_VQE
    if pipe.E_VQE is not None:
        manifest.details["variational_ok"] = bool(pipe.E_exact <= pipe.E_VQE + 1e-9)
    manifest.config = cfg.to_dict()
    manifest.wall_clock = time.perf_counter() - t0
    manifest.artifacts.append(MANIFEST)
    (out / MANIFEST).write_text(manifest.to_json())
    missing = [a for a in manifest.artifacts if not (out / a).exists()]
    if missing:
        raise UvqnheError(f"artifacts missing after run: {missing}")
    return manifest


def preset_path(name: str) -> Path:
    """Location of a shipped preset such as ``fig2`` or ``fig4a.cfg``."""
    if not name.endswith(".cfg"):
        name += ".cfg"
    return Path(str(resources.files("uvqnhe") / "presets" / name))


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uvqnhe", description="VQE / VQNHE / unitary VQNHE shot-noise experiments.")
    p.add_argument("kind", choices=KINDS)
    p.add_argument("--config", help="flat TOML config file, or preset name (fig2, fig3, fig4a, fig4b, fig4c)")
    p.add_argument("--seed", type=int, help="root seed (overrides the config)")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="set one config field; repeatable")
    return p


def _resolve_config_path(text: str) -> Path:
    path = Path(text)
    if path.exists():
        return path
    candidate = preset_path(text)
    if candidate.exists():
        return candidate
    raise ConfigError(f"config file {text} not found (and no preset of that name)", "config")


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        table = load_table(_resolve_config_path(args.config)) if args.config else {}
        overrides = list(args.override)
        if args.seed is not None:
            overrides.append(f"seed={args.seed}")
        if args.out is not None:
            overrides.append(f"out={json.dumps(args.out)}")
        cfg = build_config(args.kind, table, overrides)
    except ConfigError as exc:
        print(f"uvqnhe: usage error [{exc.field}]: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        manifest = run_experiment(cfg)
    except ConfigError as exc:
        print(f"uvqnhe: usage error [{exc.field}]: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - any escape here is an internal fault
        traceback.print_exc()
        print(f"uvqnhe: internal fault: {exc}", file=sys.stderr)
        return EXIT_FAULT
    summary = f"E_exact={manifest.E_exact:.10g}"
    if manifest.E_VQE is not None:
        summary += f" E_VQE={manifest.E_VQE:.10g}"
    if manifest.final_estimate is not None:
        summary += f" final={manifest.final_estimate:.10g}"
    if manifest.diverged:
        summary += f" diverged(epoch {manifest.divergence_epoch})"
    print(summary)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
