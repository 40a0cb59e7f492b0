"""Hot state-recursion kernels.

Every kernel has two variants: an explicit-loop version compiled with numba
and a pure-numpy fallback vectorised over the batch axis. ``VARIANTS`` maps
kernel names to ``(numpy_variant, compiled_variant)`` pairs; the module-level
names point at the variant selected by :mod:`rdsrnn.backend`.

Callers are expected to pass C-contiguous float64 (int64 for map indices)
arrays. Random draws never happen here; generators stay outside so results
depend on the backend only through floating-point summation order.
"""

import numpy as np

from .backend import NUMBA_ENABLED, njit

# ---------------------------------------------------------------------------
# loop sources (njit-able)
# ---------------------------------------------------------------------------


def _switched_path_loops(mats, offs, idx, x0):
    T = idx.shape[0]
    d = x0.shape[0]
    out = np.empty((T + 1, d))
    out[0] = x0
    for t in range(T):
        m = mats[idx[t]]
        b = offs[idx[t]]
        for r in range(d):
            acc = b[r]
            for c in range(d):
                acc += m[r, c] * out[t, c]
            out[t + 1, r] = acc
    return out


def _switched_path_batch_loops(mats, offs, idx, x0):
    n_traj, T = idx.shape
    d = x0.shape[1]
    out = np.empty((n_traj, T + 1, d))
    for n in range(n_traj):
        out[n, 0] = x0[n]
        for t in range(T):
            m = mats[idx[n, t]]
            b = offs[idx[n, t]]
            for r in range(d):
                acc = b[r]
                for c in range(d):
                    acc += m[r, c] * out[n, t, c]
                out[n, t + 1, r] = acc
    return out


def _linear_path_batch_loops(a, b, u, x0):
    n_traj, T, du = u.shape
    d = x0.shape[1]
    out = np.empty((n_traj, T + 1, d))
    for n in range(n_traj):
        out[n, 0] = x0[n]
        for t in range(T):
            for r in range(d):
                acc = 0.0
                for c in range(d):
                    acc += a[r, c] * out[n, t, c]
                for c in range(du):
                    acc += b[r, c] * u[n, t, c]
                out[n, t + 1, r] = acc
    return out


def _ou_path_batch_loops(mean, alpha, u, x0):
    n_traj, T = u.shape
    out = np.empty((n_traj, T + 1))
    for n in range(n_traj):
        out[n, 0] = x0[n]
        for t in range(T):
            out[n, t + 1] = mean + alpha * (out[n, t] - mean) + u[n, t]
    return out


def _backward_affine_loops(a_seq, b_seq, x0):
    # y_k applies draw k first and draw 0 last; one row per k = 1..m-1.
    m = a_seq.shape[0]
    d = x0.shape[0]
    out = np.empty((m - 1, d))
    z = np.empty(d)
    w = np.empty(d)
    for k in range(1, m):
        for r in range(d):
            z[r] = x0[r]
        for j in range(k, -1, -1):
            for r in range(d):
                acc = b_seq[j, r]
                for c in range(d):
                    acc += a_seq[j, r, c] * z[c]
                w[r] = acc
            for r in range(d):
                z[r] = w[r]
        out[k - 1] = z
    return out


def _rnn2_rollout_batch_loops(w1, b1, pw, pb, w2, b2, u, x0):
    n_traj, T, du = u.shape
    n_hidden = w1.shape[0]
    dx = w2.shape[0]
    out = np.empty((n_traj, T, dx))
    h = np.empty(n_hidden)
    for n in range(n_traj):
        x = x0[n].copy()
        for t in range(T):
            for j in range(n_hidden):
                acc = b1[j] + pb[j]
                for c in range(du):
                    acc += w1[j, c] * u[n, t, c]
                for c in range(dx):
                    acc += pw[j, c] * x[c]
                h[j] = acc if acc > 0.0 else 0.0
            for r in range(dx):
                acc = b2[r]
                for j in range(n_hidden):
                    acc += w2[r, j] * h[j]
                out[n, t, r] = acc
                x[r] = acc
    return out


def _kalman_mean_batch_loops(trans, gains, obs, z0):
    n_traj, T, du = obs.shape
    dz = z0.shape[0]
    out = np.empty((n_traj, T, dz))
    z = np.empty(dz)
    w = np.empty(dz)
    for n in range(n_traj):
        for r in range(dz):
            z[r] = z0[r]
        for t in range(T):
            for r in range(dz):
                acc = 0.0
                for c in range(dz):
                    acc += trans[t, r, c] * z[c]
                for c in range(du):
                    acc += gains[t, r, c] * obs[n, t, c]
                w[r] = acc
            for r in range(dz):
                z[r] = w[r]
                out[n, t, r] = w[r]
    return out


# ---------------------------------------------------------------------------
# numpy fallbacks (vectorised over the batch axis)
# ---------------------------------------------------------------------------


def _switched_path_np(mats, offs, idx, x0):
    T = idx.shape[0]
    out = np.empty((T + 1, x0.shape[0]))
    out[0] = x0
    x = x0
    for t in range(T):
        i = idx[t]
        x = mats[i] @ x + offs[i]
        out[t + 1] = x
    return out


def _switched_path_batch_np(mats, offs, idx, x0):
    n_traj, T = idx.shape
    out = np.empty((n_traj, T + 1, x0.shape[1]))
    out[:, 0] = x0
    x = x0
    for t in range(T):
        sel = idx[:, t]
        x = np.einsum("nij,nj->ni", mats[sel], x) + offs[sel]
        out[:, t + 1] = x
    return out


def _linear_path_batch_np(a, b, u, x0):
    n_traj, T, _ = u.shape
    out = np.empty((n_traj, T + 1, x0.shape[1]))
    out[:, 0] = x0
    x = x0
    for t in range(T):
        x = x @ a.T + u[:, t] @ b.T
        out[:, t + 1] = x
    return out


def _ou_path_batch_np(mean, alpha, u, x0):
    n_traj, T = u.shape
    out = np.empty((n_traj, T + 1))
    out[:, 0] = x0
    x = x0
    for t in range(T):
        x = mean + alpha * (x - mean) + u[:, t]
        out[:, t + 1] = x
    return out


def _backward_affine_np(a_seq, b_seq, x0):
    m = a_seq.shape[0]
    out = np.empty((m - 1, x0.shape[0]))
    for k in range(1, m):
        z = x0
        for j in range(k, -1, -1):
            z = a_seq[j] @ z + b_seq[j]
        out[k - 1] = z
    return out


def _rnn2_rollout_batch_np(w1, b1, pw, pb, w2, b2, u, x0):
    n_traj, T, _ = u.shape
    dx = w2.shape[0]
    out = np.empty((n_traj, T, dx))
    x = x0
    bias = b1 + pb
    for t in range(T):
        h = u[:, t] @ w1.T + x @ pw.T + bias
        np.maximum(h, 0.0, out=h)
        x = h @ w2.T + b2
        out[:, t] = x
    return out


def _kalman_mean_batch_np(trans, gains, obs, z0):
    n_traj, T, _ = obs.shape
    dz = z0.shape[0]
    out = np.empty((n_traj, T, dz))
    z = np.broadcast_to(z0, (n_traj, dz))
    for t in range(T):
        z = z @ trans[t].T + obs[:, t] @ gains[t].T
        out[:, t] = z
    return out


# ---------------------------------------------------------------------------
# selection
# ---------------------------------------------------------------------------

_LOOP_SOURCES = {
    "switched_path": (_switched_path_np, _switched_path_loops),
    "switched_path_batch": (_switched_path_batch_np, _switched_path_batch_loops),
    "linear_path_batch": (_linear_path_batch_np, _linear_path_batch_loops),
    "ou_path_batch": (_ou_path_batch_np, _ou_path_batch_loops),
    "backward_affine": (_backward_affine_np, _backward_affine_loops),
    "rnn2_rollout_batch": (_rnn2_rollout_batch_np, _rnn2_rollout_batch_loops),
    "kalman_mean_batch": (_kalman_mean_batch_np, _kalman_mean_batch_loops),
}

VARIANTS = {}
for _name, (_np_fn, _loop_fn) in _LOOP_SOURCES.items():
    _compiled = njit(cache=True)(_loop_fn) if NUMBA_ENABLED else _loop_fn
    VARIANTS[_name] = (_np_fn, _compiled)

switched_path = VARIANTS["switched_path"][1] if NUMBA_ENABLED else _switched_path_np
switched_path_batch = VARIANTS["switched_path_batch"][1] if NUMBA_ENABLED else _switched_path_batch_np
linear_path_batch = VARIANTS["linear_path_batch"][1] if NUMBA_ENABLED else _linear_path_batch_np
ou_path_batch = VARIANTS["ou_path_batch"][1] if NUMBA_ENABLED else _ou_path_batch_np
backward_affine = VARIANTS["backward_affine"][1] if NUMBA_ENABLED else _backward_affine_np
rnn2_rollout_batch = VARIANTS["rnn2_rollout_batch"][1] if NUMBA_ENABLED else _rnn2_rollout_batch_np
kalman_mean_batch = VARIANTS["kalman_mean_batch"][1] if NUMBA_ENABLED else _kalman_mean_batch_np
