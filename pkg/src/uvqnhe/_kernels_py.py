"""Pure numpy implementations of the hot kernels.

Every function here has a twin with the same signature in ``_kernels.pyx``.
Basis index convention: qubit ``q`` of an ``n``-qubit register lives on bit
``n - 1 - q`` of the statevector index, so qubit 0 is the most significant bit.
In-place kernels require a C-contiguous ``complex128`` array.
"""

import numpy as np


def _qubit_axes(state, n):
    return state.reshape((2,) * n)


def apply_1q(state, n, q, mat):
    """Apply the 2x2 matrix ``mat`` to qubit ``q`` in place."""
    st = _qubit_axes(state, n)
    i0 = [slice(None)] * n
    i1 = [slice(None)] * n
    i0[q] = 0
    i1[q] = 1
    i0, i1 = tuple(i0), tuple(i1)
    a0 = st[i0].copy()
    a1 = st[i1].copy()
    st[i0] = mat[0, 0] * a0 + mat[0, 1] * a1
    st[i1] = mat[1, 0] * a0 + mat[1, 1] * a1


def apply_controlled(state, n, control, target, mat):
    """Apply ``mat`` to ``target`` on the subspace where ``control`` is 1."""
    st = _qubit_axes(state, n)
    i0 = [slice(None)] * n
    i1 = [slice(None)] * n
    i0[control] = i1[control] = 1
    i0[target] = 0
    i1[target] = 1
    i0, i1 = tuple(i0), tuple(i1)
    a0 = st[i0].copy()
    a1 = st[i1].copy()
    st[i0] = mat[0, 0] * a0 + mat[0, 1] * a1
    st[i1] = mat[1, 0] * a0 + mat[1, 1] * a1


def apply_zz_phase(state, n, q1, q2, theta):
    """Multiply by exp(-i theta Z_q1 Z_q2 / 2) in place."""
    idx = np.arange(state.shape[0])
    odd = ((idx >> (n - 1 - q1)) ^ (idx >> (n - 1 - q2))) & 1
    phases = np.where(odd == 1, np.exp(0.5j * theta), np.exp(-0.5j * theta))
    state *= phases


def apply_pauli(state, n, xmask, zmask, ny):
    """Return P|state> for the Pauli given by its bit masks.

    ``xmask`` marks X/Y positions, ``zmask`` marks Z/Y positions and ``ny``
    counts Y letters, so that P|s> = i**ny * (-1)**popcount(s & zmask) |s ^ xmask>.
    """
    idx = np.arange(state.shape[0], dtype=np.int64)
    signs = 1 - 2 * (np.bitwise_count(idx & zmask) & 1).astype(np.int64)
    out = np.empty_like(state)
    out[idx ^ xmask] = (1j ** ny) * signs * state
    return out


def _pair_indices(active, star, flip):
    lo = active & ~star
    return lo, lo ^ flip


def pair_sum(w, f, star, flip):
    """Sum over s of w[s] * f[s'] * f[s~'] where s' clears the star bit."""
    nz = np.flatnonzero(w)
    lo, hi = _pair_indices(nz, star, flip)
    return float(np.dot(w[nz], f[lo] * f[hi]))


def pair_grad(w, f, star, flip, out):
    """Accumulate the derivative of ``pair_sum`` with respect to ``f`` into ``out``."""
    nz = np.flatnonzero(w)
    lo, hi = _pair_indices(nz, star, flip)
    size = out.shape[0]
    out += np.bincount(lo, weights=w[nz] * f[hi], minlength=size)
    out += np.bincount(hi, weights=w[nz] * f[lo], minlength=size)


def phase_pair_sum(wr, wi, g, star, flip):
    """Sum of wr*cos(d) + wi*sin(d) with d = g[s~'] - g[s']."""
    nz = np.flatnonzero((wr != 0) | (wi != 0))
    lo, hi = _pair_indices(nz, star, flip)
    d = g[hi] - g[lo]
    return float(np.dot(wr[nz], np.cos(d)) + np.dot(wi[nz], np.sin(d)))


def phase_pair_grad(wr, wi, g, star, flip, out):
    """Accumulate the derivative of ``phase_pair_sum`` with respect to ``g``."""
    nz = np.flatnonzero((wr != 0) | (wi != 0))
    lo, hi = _pair_indices(nz, star, flip)
    d = g[hi] - g[lo]
    dhi = -wr[nz] * np.sin(d) + wi[nz] * np.cos(d)
    size = out.shape[0]
    out += np.bincount(hi, weights=dhi, minlength=size)
    out -= np.bincount(lo, weights=dhi, minlength=size)
