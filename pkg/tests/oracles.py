"""Independent reference computations used by the tests.

These deliberately avoid the package's solver so they can check it.
"""
from __future__ import annotations

import math

import numpy as np

BELL = np.array([
    [1, 0, 0, 1],
    [1, 0, 0, -1],
    [0, 1, 1, 0],
    [0, 1, -1, 0],
], dtype=np.complex128).T / math.sqrt(2)  # columns: Phi+, Phi-, Psi+, Psi-


def bell_diagonal(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return (BELL * p) @ BELL.conj().T


def werner_weights(w: float) -> np.ndarray:
    """Bell-diagonal weights with top weight ``w`` and the rest spread evenly."""
    return np.array([w] + [(1 - w) / 3] * 3)


def _kl_rows(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    mask = p > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(mask, p * (np.log(np.where(mask, p, 1.0)) - np.log(q)), 0.0)
    return terms.sum(axis=-1)


def _grid(center, half, step):
    axes = [np.arange(max(c - half, 0.0), min(c + half, 0.5) + step / 2, step) for c in center]
    q1, q2, q3 = np.meshgrid(*axes, indexing="ij")
    q = np.stack([q1.ravel(), q2.ravel(), q3.ravel()], axis=1)
    q4 = 1.0 - q.sum(axis=1)
    ok = (q4 >= 0) & (q4 <= 0.5) & np.all(q > 0, axis=1) & (q4 > 0)
    return np.column_stack([q[ok], q4[ok]])


def bell_diagonal_ree_grid(p, step: float = 1e-3) -> float:
    """Brute-force ``min_q KL(p||q)`` over Bell-diagonal separable states.

    A Bell-diagonal state is separable exactly when every weight is at most
    1/2, and twirling shows the closest separable state to a Bell-diagonal
    state can be taken Bell-diagonal. The search is a coarse grid on the
    three free weights, refined around the best point down to ``step``.
    """
    p = np.asarray(p, dtype=float)
    q = _grid((0.25, 0.25, 0.25), 0.25, 0.02)
    vals = _kl_rows(p, q)
    best = q[np.argmin(vals)]
    half, h = 0.04, 0.004
    while True:
        h = max(h, step)
        q = _grid(best[:3], half, h)
        vals = _kl_rows(p, q)
        best = q[np.argmin(vals)]
        if h <= step:
            return float(vals.min())
        half, h = 4 * h, h / 4


def werner_ree_closed_form(w: float) -> float:
    """``ln 2 - h2(w)`` for top weight ``w >= 1/2``, else 0."""
    if w <= 0.5:
        return 0.0
    return math.log(2) + w * math.log(w) + (1 - w) * math.log(1 - w)


def dense_partial_trace(rho, dims, keep) -> np.ndarray:
    """Partial trace by explicit summation over basis indices."""
    dims = list(dims)
    n = len(dims)
    keep = sorted(keep)
    drop = [s for s in range(n) if s not in keep]
    dk = int(np.prod([dims[s] for s in keep])) if keep else 1
    out = np.zeros((dk, dk), dtype=np.complex128)
    for i in np.ndindex(*dims):
        for j in np.ndindex(*dims):
            if any(i[s] != j[s] for s in drop):
                continue
            a = np.ravel_multi_index([i[s] for s in keep], [dims[s] for s in keep]) if keep else 0
            b = np.ravel_multi_index([j[s] for s in keep], [dims[s] for s in keep]) if keep else 0
            out[a, b] += rho[np.ravel_multi_index(i, dims), np.ravel_multi_index(j, dims)]
    return out


def matrix_log(a) -> np.ndarray:
    w, v = np.linalg.eigh(a)
    return (v * np.log(w)) @ v.conj().T


def relative_entropy_full_rank(rho, sigma) -> float:
    """``Tr rho (ln rho - ln sigma)`` for full-rank unit-trace inputs."""
    return float(np.real(np.trace(rho @ (matrix_log(rho) - matrix_log(sigma)))))
