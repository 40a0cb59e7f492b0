"""Matrix norm helpers.

Norm conventions used throughout: Euclidean l2 on state vectors, spectral
norm on matrices. The spectral norm is computed by power iteration on
``m.T @ m`` with a deterministic start vector, relative tolerance 1e-12 on
successive eigenvalue estimates, and a 10000 iteration cap.
"""

import numpy as np

from .errors import NonFiniteError

POWER_REL_TOL = 1e-12
POWER_MAX_ITER = 10000


def spectral_norm(matrix, rel_tol: float = POWER_REL_TOL, max_iter: int = POWER_MAX_ITER) -> float:
    """Largest singular value of ``matrix``.

    Returns 0.0 for the zero matrix. Raises ``NonFiniteError`` on non-finite
    entries.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise NonFiniteError("matrix has non-finite entries")
    if not m.any():
        return 0.0

    gram = m.T @ m
    n = gram.shape[0]
    # Deterministic start with a mild ramp so it is not orthogonal to any
    # fixed eigenvector of interest.
    v = 1.0 + 1e-3 * np.arange(n)
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(max_iter):
        w = gram @ v
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            # Start vector sits in the nullspace; restart from the column of
            # the Gram matrix with the largest magnitude.
            j = int(np.argmax(np.abs(gram).sum(axis=0)))
            v = gram[:, j] / np.linalg.norm(gram[:, j])
            continue
        v = w / norm_w
        if abs(norm_w - estimate) <= rel_tol * norm_w:
            estimate = norm_w
            break
        estimate = norm_w
    return float(np.sqrt(estimate))


def spectral_radius(matrix) -> float:
    """Largest absolute eigenvalue."""
    m = np.asarray(matrix, dtype=float)
    return float(np.max(np.abs(np.linalg.eigvals(m))))
