"""Dense linear algebra for small multipartite systems.

Operators are plain ``numpy`` complex arrays. A layout is a sequence of
local dimensions ``(d_1, ..., d_n)``; parties are indexed from 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

HERMITIAN_TOL = 1e-12
DENSITY_EIG_TOL = 1e-10
DENSITY_TRACE_TOL = 1e-10
# eigenvalues below RANK_FLOOR * lambda_max count as zero (supports, ranks, Schmidt)
RANK_FLOOR = 1e-12


def as_operator(m, check: bool = True) -> np.ndarray:
    """Return ``m`` as a square complex128 array, symmetrized.

    Raises ``ValueError`` if the input is not square or deviates from
    Hermiticity by more than ``HERMITIAN_TOL`` (relative to its scale).
    """
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if check:
        scale = max(1.0, float(np.max(np.abs(a))) if a.size else 1.0)
        dev = float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0
        if dev > HERMITIAN_TOL * scale:
            raise ValueError(f"matrix is not Hermitian (deviation {dev:.3e})")
    return 0.5 * (a + a.conj().T)


def check_layout(dims: Sequence[int], dim: int | None = None) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if not dims or any(d < 1 for d in dims):
        raise ValueError(f"invalid layout {dims}")
    if dim is not None and math.prod(dims) != dim:
        raise ValueError(f"layout {dims} does not match dimension {dim}")
    return dims


def is_density(rho, tol: float = DENSITY_EIG_TOL) -> bool:
    try:
        rho = as_operator(rho)
    except ValueError:
        return False
    if abs(np.trace(rho).real - 1.0) > DENSITY_TRACE_TOL:
        return False
    return bool(np.linalg.eigvalsh(rho)[0] >= -tol)


def check_density(rho, name: str = "rho") -> np.ndarray:
    rho = as_operator(rho)
    if abs(np.trace(rho).real - 1.0) > DENSITY_TRACE_TOL:
        raise ValueError(f"{name} does not have unit trace")
    if np.linalg.eigvalsh(rho)[0] < -DENSITY_EIG_TOL:
        raise ValueError(f"{name} is not positive semidefinite")
    return rho


def check_positive(rho, name: str = "rho") -> np.ndarray:
    rho = as_operator(rho)
    w = np.linalg.eigvalsh(rho)
    scale = max(1.0, abs(w[-1]))
    if w[0] < -DENSITY_EIG_TOL * scale:
        raise ValueError(f"{name} is not positive semidefinite (min eigenvalue {w[0]:.3e})")
    return rho


def ket_to_dm(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=np.complex128).ravel()
    return np.outer(psi, psi.conj())


def tensor(*ops) -> np.ndarray:
    """Kronecker product, first factor on the slowest-varying index."""
    if not ops:
        raise ValueError("tensor needs at least one factor")
    out = np.asarray(ops[0], dtype=np.complex128)
    for op in ops[1:]:
        out = np.kron(out, np.asarray(op, dtype=np.complex128))
    return out


def partial_trace(rho, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    """Reduced operator on the parties in ``keep`` (returned in ascending party order)."""
    rho = np.asarray(rho, dtype=np.complex128)
    dims = check_layout(dims, rho.shape[0])
    keep = sorted(set(int(k) for k in keep))
    n = len(dims)
    if not keep:
        raise ValueError("keep must be nonempty")
    if keep[0] < 0 or keep[-1] >= n:
        raise IndexError(f"party index out of range for {n} parties: {keep}")
    if len(keep) == n:
        return rho.copy()
    t = rho.reshape(dims + dims)
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    row = list(letters[:n])
    col = list(letters[n:2 * n])
    for s in range(n):
        if s not in keep:
            col[s] = row[s]
    out = "".join(row[s] for s in keep) + "".join(col[s] for s in keep)
    red = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    dk = math.prod(dims[s] for s in keep)
    return red.reshape(dk, dk)


def marginals(rho, dims: Sequence[int]) -> list[np.ndarray]:
    return [partial_trace(rho, dims, [s]) for s in range(len(dims))]


def partial_transpose(rho, dims: Sequence[int], parties: Iterable[int]) -> np.ndarray:
    rho = np.asarray(rho, dtype=np.complex128)
    dims = check_layout(dims, rho.shape[0])
    n = len(dims)
    t = rho.reshape(dims + dims)
    axes = list(range(2 * n))
    for s in parties:
        axes[s], axes[n + s] = axes[n + s], axes[s]
    return t.transpose(axes).reshape(rho.shape)


def permute_parties(rho, dims: Sequence[int], order: Sequence[int]) -> np.ndarray:
    """Reorder the tensor factors of an operator; ``order[k]`` is the old index of new party k."""
    rho = np.asarray(rho, dtype=np.complex128)
    dims = check_layout(dims, rho.shape[0])
    n = len(dims)
    order = list(order)
    t = rho.reshape(dims + dims).transpose(order + [n + s for s in order])
    return t.reshape(rho.shape)


def _tie_break(w: np.ndarray, tol: float) -> np.ndarray:
    # stable descending sort; values within tol of each other are ordered by column index
    order = np.argsort(-w, kind="stable")
    out = []
    i = 0
    while i < len(order):
        j = i + 1
        while j < len(order) and w[order[i]] - w[order[j]] <= tol:
            j += 1
        out.extend(sorted(order[i:j]))
        i = j
    return np.asarray(out, dtype=int)


def hermitian_eig(m, method: str = "lapack") -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition with eigenvalues in nonincreasing order.

    Equal eigenvalues (within ``1e-13 * ||M||``) keep the column order of
    the underlying solver, so spectral projectors are reproducible.
    ``method="jacobi"`` uses the cyclic Jacobi routine in this module.
    """
    a = as_operator(m)
    if method == "lapack":
        w, v = np.linalg.eigh(a)
    elif method == "jacobi":
        w, v = jacobi_eigh(a)
    else:
        raise ValueError(f"unknown method {method!r}")
    scale = max(float(np.max(np.abs(w))) if w.size else 0.0, 1e-300)
    order = _tie_break(w, 1e-13 * scale)
    return w[order], v[:, order]


def jacobi_eigh(a, tol: float = 1e-14, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic complex Jacobi diagonalization of a Hermitian matrix.

    Eigenvalues come back in the order of the diagonal after convergence;
    :func:`hermitian_eig` sorts them.
    """
    a = np.array(a, dtype=np.complex128)
    d = a.shape[0]
    v = np.eye(d, dtype=np.complex128)
    thresh = tol * max(np.linalg.norm(a), 1e-300)
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= thresh:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                mag = abs(apq)
                if mag <= thresh / d:
                    continue
                phase = apq / mag
                app, aqq = a[p, p].real, a[q, q].real
                theta = 0.5 * math.atan2(2.0 * mag, app - aqq)
                c, s = math.cos(theta), math.sin(theta)
                # phase-rotate column q to make a[p, q] real, then a real Givens rotation
                j = np.array([[c, -s], [s * np.conj(phase), c * np.conj(phase)]],
                             dtype=np.complex128)
                cols = a[:, [p, q]] @ j
                a[:, [p, q]] = cols
                rows = j.conj().T @ a[[p, q], :]
                a[[p, q], :] = rows
                a[p, q] = a[q, p] = 0.0
                v[:, [p, q]] = v[:, [p, q]] @ j
    return np.diag(a).real.copy(), v


def numerical_rank(w: np.ndarray) -> int:
    w = np.asarray(w, dtype=float)
    if w.size == 0:
        return 0
    top = float(np.max(w))
    if top <= 0:
        return 0
    return int(np.sum(w > RANK_FLOOR * top))


def support(rho) -> np.ndarray:
    """Orthonormal basis (columns) of the numerical support of a positive operator."""
    w, v = hermitian_eig(rho)
    return v[:, :numerical_rank(w)]


@dataclass(frozen=True)
class SchmidtDecomposition:
    coefficients: np.ndarray
    left_vectors: np.ndarray  # columns
    right_vectors: np.ndarray  # columns

    def reconstruct(self) -> np.ndarray:
        return np.einsum("j,aj,bj->ab", self.coefficients, self.left_vectors,
                         self.right_vectors).ravel()


def schmidt_decompose(psi, dims: Sequence[int], cut: int) -> SchmidtDecomposition:
    """Schmidt decomposition across parties ``[0, cut)`` vs ``[cut, n)``.

    Coefficients below the rank floor are dropped.
    """
    psi = np.asarray(psi, dtype=np.complex128).ravel()
    dims = check_layout(dims, psi.size)
    if not 1 <= cut < len(dims):
        raise ValueError(f"cut must satisfy 1 <= cut < {len(dims)}, got {cut}")
    da = math.prod(dims[:cut])
    u, s, vh = np.linalg.svd(psi.reshape(da, -1), full_matrices=False)
    k = numerical_rank(s ** 2)
    return SchmidtDecomposition(s[:k], u[:, :k], vh[:k].T)


def purify(rho) -> tuple[np.ndarray, tuple[int, int]]:
    """Purification ``sum_i sqrt(l_i) |v_i>|i>`` with a reference of dimension rank(rho).

    Returns the vector and its layout ``(dim, rank)``.
    """
    rho = check_density(rho)
    w, v = hermitian_eig(rho)
    k = numerical_rank(w)
    amps = v[:, :k] * np.sqrt(np.clip(w[:k], 0.0, None))
    psi = amps.ravel()
    return psi / np.linalg.norm(psi), (rho.shape[0], k)


def trace_norm(a) -> float:
    return float(np.sum(np.abs(np.linalg.eigvalsh(as_operator(a)))))


def trace_distance(rho, sigma) -> float:
    """Half the trace norm of ``rho - sigma``."""
    rho = np.asarray(rho, dtype=np.complex128)
    sigma = np.asarray(sigma, dtype=np.complex128)
    if rho.shape != sigma.shape:
        raise ValueError(f"dimension mismatch {rho.shape} vs {sigma.shape}")
    return 0.5 * trace_norm(rho - sigma)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def random_density(dims: Sequence[int] | int, rank: int | None = None, seed=None) -> np.ndarray:
    """Random state from the induced (Hilbert-Schmidt for full rank) measure."""
    d = math.prod(dims) if not isinstance(dims, (int, np.integer)) else int(dims)
    rank = d if rank is None else int(rank)
    if not 1 <= rank <= d:
        raise ValueError(f"rank must be in [1, {d}], got {rank}")
    rng = _rng(seed)
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = g @ g.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def random_pure(dims: Sequence[int] | int, seed=None) -> np.ndarray:
    d = math.prod(dims) if not isinstance(dims, (int, np.integer)) else int(dims)
    rng = _rng(seed)
    psi = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return psi / np.linalg.norm(psi)


def random_unitary(d: int, seed=None) -> np.ndarray:
    rng = _rng(seed)
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def bell_state(which: int = 0) -> np.ndarray:
    """Bell vectors: 0 -> Phi+, 1 -> Phi-, 2 -> Psi+, 3 -> Psi-."""
    s = 1 / math.sqrt(2)
    vecs = [
        [s, 0, 0, s],
        [s, 0, 0, -s],
        [0, s, s, 0],
        [0, s, -s, 0],
    ]
    return np.asarray(vecs[which], dtype=np.complex128)


def ghz_state(n: int = 3, d: int = 2) -> np.ndarray:
    psi = np.zeros(d ** n, dtype=np.complex128)
    for k in range(d):
        psi[sum(k * d ** j for j in range(n))] = 1.0
    return psi / np.linalg.norm(psi)
