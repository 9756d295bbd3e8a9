"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--qubits 10 14 18] [--repeat 20]

Prints the median wall time per call for each kernel and the speedup of the
compiled backend. Also times one end-to-end VQNHE training run per backend.
"""

import argparse
import os
import statistics
import subprocess
import sys
import time

import numpy as np

from uvqnhe import _kernels_py
from uvqnhe.circuit import gate_matrix

try:
    from uvqnhe import _kernels
except ImportError:
    _kernels = None


def median_time(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def cases(n, rng):
    dim = 1 << n
    state = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    state /= np.linalg.norm(state)
    w = rng.normal(size=dim)
    w[rng.random(dim) < 0.5] = 0.0
    f = rng.uniform(0.5, 2.0, size=dim)
    g = rng.normal(size=dim)
    star, flip = 1 << (n - 1), (1 << (n - 1)) | 1
    rx = gate_matrix("RX", 0.3)
    cx = gate_matrix("CX")
    return {
        "apply_1q": lambda k: k.apply_1q(state.copy(), n, n // 2, rx),
        "apply_controlled": lambda k: k.apply_controlled(state.copy(), n, 0, n - 1, cx),
        "apply_zz_phase": lambda k: k.apply_zz_phase(state.copy(), n, 1, 2, 0.4),
        "apply_pauli": lambda k: k.apply_pauli(state, n, flip, 0b101, 1),
        "pair_sum": lambda k: k.pair_sum(w, f, star, flip),
        "pair_grad": lambda k: k.pair_grad(w, f, star, flip, np.zeros(dim)),
        "phase_pair_sum": lambda k: k.phase_pair_sum(w, w, g, star, flip),
        "phase_pair_grad": lambda k: k.phase_pair_grad(w, w, g, star, flip, np.zeros(dim)),
    }


def training_time(pure: bool) -> float:
    code = (
        "import time\n"
        "from uvqnhe.circuit import AnsatzSpec\n"
        "from uvqnhe.hamiltonian import tfim_hamiltonian\n"
        "from uvqnhe.estimator import train_network, SHOTS\n"
        "import numpy as np\n"
        "H = tfim_hamiltonian(10); spec = AnsatzSpec(10, 1)\n"
        "theta = np.full(spec.n_params, 0.5)\n"
        "t0 = time.perf_counter()\n"
        "train_network(H, theta, spec, 'uvqnhe', 100, SHOTS, 2000, 0)\n"
        "print(time.perf_counter() - t0)\n"
    )
    env = dict(os.environ, UVQNHE_PURE_PYTHON="1" if pure else "0")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--qubits", type=int, nargs="+", default=[10, 14, 18])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    if _kernels is None:
        print("compiled backend not built; only the numpy backend is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<18}{'n':>4}{'numpy [ms]':>14}{'cython [ms]':>14}{'speedup':>10}")
    for n in args.qubits:
        for name, call in cases(n, rng).items():
            t_py = median_time(lambda: call(_kernels_py), args.repeat)
            if _kernels is None:
                print(f"{name:<18}{n:>4}{t_py * 1e3:>14.3f}{'-':>14}{'-':>10}")
                continue
            t_cy = median_time(lambda: call(_kernels), args.repeat)
            print(f"{name:<18}{n:>4}{t_py * 1e3:>14.3f}{t_cy * 1e3:>14.3f}{t_py / t_cy:>10.1f}")
    t_py = training_time(pure=True)
    line = f"\nU-VQNHE training, 10 qubits, 100 epochs: numpy {t_py:.2f} s"
    if _kernels is not None:
        t_cy = training_time(pure=False)
        line += f", cython {t_cy:.2f} s ({t_py / t_cy:.1f}x)"
    print(line)


if __name__ == "__main__":
    main()
