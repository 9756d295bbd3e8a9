"""Two-layer post-processing network with hand-written backprop and Adam.

The network maps an n-bit string to one real number: bits are encoded as
+/-1, passed through a tanh hidden layer and a linear output ``z``. The
amplitude head returns exp(z) (strictly positive), the phase head returns z,
and the optional linear head returns z for signed-amplitude experiments.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .circuit import bitstring_to_index, make_rng
from .errors import TrainingError

HEADS = ("amplitude", "phase", "linear")


def encode_indices(indices, n) -> np.ndarray:
    """Basis indices -> (batch, n) array of +/-1 with qubit 0 in column 0."""
    idx = np.asarray(indices, dtype=np.int64)[:, None]
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)[None, :]
    return 2.0 * ((idx >> shifts) & 1) - 1.0


class MlpNetwork:
    """n -> hidden (tanh) -> 1, parameters stored as one flat vector.

    Layout of ``params``: hidden weights (hidden x n, row major), hidden bias,
    output weights, output bias.
    """

    def __init__(self, n, hidden=None, head="amplitude", params=None):
        if head not in HEADS:
            raise ValueError(f"head must be one of {HEADS}, got {head!r}")
        self.n = int(n)
        self.hidden = int(hidden if hidden is not None else 4 * n)
        self.head = head
        size = self.hidden * self.n + 2 * self.hidden + 1
        if params is None:
            params = np.zeros(size)
        params = np.array(params, dtype=float)
        if params.shape != (size,):
            raise ValueError(f"expected {size} parameters, got {params.shape}")
        if not np.all(np.isfinite(params)):
            raise ValueError("network parameters must be finite")
        self.params = params

    @classmethod
    def initialize(cls, n, seed, hidden=None, head="amplitude"):
        """Hidden layer uniform in [-1/sqrt(n), 1/sqrt(n)]; output layer zero."""
        net = cls(n, hidden, head)
        bound = 1.0 / np.sqrt(n)
        k = net.hidden * (n + 1)
        net.params[:k] = make_rng(seed).uniform(-bound, bound, size=k)
        return net

    @property
    def size(self) -> int:
        return self.params.shape[0]

    def _unpack(self, params=None):
        p = self.params if params is None else params
        hd, n = self.hidden, self.n
        w1 = p[: hd * n].reshape(hd, n)
        b1 = p[hd * n : hd * n + hd]
        w2 = p[hd * n + hd : hd * n + 2 * hd]
        b2 = p[-1]
        return w1, b1, w2, b2

    def _forward(self, x):
        w1, b1, w2, b2 = self._unpack()
        hidden = np.tanh(x @ w1.T + b1)
        z = hidden @ w2 + b2
        if self.head == "amplitude":
            with np.errstate(over="ignore"):
                out = np.exp(z)
        else:
            out = z
        return hidden, out

    def outputs(self, indices) -> np.ndarray:
        _, out = self._forward(encode_indices(indices, self.n))
        return out

    def all_outputs(self) -> np.ndarray:
        """Network output for every basis index 0 .. 2**n - 1."""
        return self.outputs(np.arange(1 << self.n))

    def __call__(self, bits: str) -> float:
        if len(bits) != self.n:
            raise ValueError(f"bitstring {bits!r} is not {self.n} bits long")
        return float(self.outputs([bitstring_to_index(bits)])[0])

    def vjp(self, indices, sensitivities) -> np.ndarray:
        """Gradient of sum_i sensitivities[i] * output(indices[i]) w.r.t. params."""
        sens = np.asarray(sensitivities, dtype=float)
        x = encode_indices(indices, self.n)
        hidden, out = self._forward(x)
        dz = sens * out if self.head == "amplitude" else sens
        _, _, w2, _ = self._unpack()
        da = np.outer(dz, w2) * (1.0 - hidden**2)
        return np.concatenate([(da.T @ x).ravel(), da.sum(axis=0), hidden.T @ dz, [dz.sum()]])

    def copy(self) -> "MlpNetwork":
        return MlpNetwork(self.n, self.hidden, self.head, self.params.copy())

    def save(self, path):
        """Plain-text checkpoint: one header line, then one parameter per line."""
        lines = [f"# mlp n={self.n} hidden={self.hidden} head={self.head} activation=tanh size={self.size}"]
        lines += [repr(float(v)) for v in self.params]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path):
        text = Path(path).read_text().splitlines()
        header = text[0]
        if not header.startswith("# mlp"):
            raise ValueError(f"{path}: not a network checkpoint")
        fields = dict(tok.split("=", 1) for tok in header[len("# mlp") :].split())
        params = np.array([float(v) for v in text[1:] if v.strip()])
        if params.shape[0] != int(fields["size"]):
            raise ValueError(f"{path}: header declares {fields['size']} parameters, found {params.shape[0]}")
        return cls(int(fields["n"]), int(fields["hidden"]), fields["head"], params)


def forward(net: MlpNetwork, bits: str) -> float:
    return net(bits)


def loss_gradient(net: MlpNetwork, batch) -> np.ndarray:
    """Exact gradient of sum sensitivity * forward(net, bits) over ``batch``."""
    batch = list(batch)
    if not batch:
        return np.zeros(net.size)
    idx = [bitstring_to_index(b) for b, _ in batch]
    sens = np.array([w for _, w in batch], dtype=float)
    if not np.all(np.isfinite(sens)):
        raise TrainingError("non-finite sensitivity")
    return net.vjp(idx, sens)


@dataclass(frozen=True)
class AdamState:
    t: int
    m: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)
    lr: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def create(cls, size, lr=1e-2, beta1=0.9, beta2=0.999, eps=1e-8):
        return cls(0, np.zeros(size), np.zeros(size), lr, beta1, beta2, eps)


def adam_step(state: AdamState, params, grad):
    """One bias-corrected Adam update; returns (new params, new state)."""
    params = np.asarray(params, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if grad.shape != params.shape or state.m.shape != params.shape:
        raise ValueError("parameter, gradient and moment shapes disagree")
    if not np.all(np.isfinite(grad)):
        raise TrainingError("non-finite gradient")
    t = state.t + 1
    m = state.beta1 * state.m + (1 - state.beta1) * grad
    with np.errstate(over="ignore"):
        v = state.beta2 * state.v + (1 - state.beta2) * grad**2
    if not np.all(np.isfinite(v)):
        raise TrainingError("second-moment estimate overflowed")
    m_hat = m / (1 - state.beta1**t)
    v_hat = v / (1 - state.beta2**t)
    new = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new, replace(state, t=t, m=m, v=v)
