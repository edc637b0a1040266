"""Finitely-decomposable separable states."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linalg import (RANK_FLOOR, _rng, check_layout, hermitian_eig, is_density,
                     ket_to_dm, numerical_rank, partial_trace, random_density,
                     schmidt_decompose, tensor)


@dataclass(frozen=True)
class ProductEnsemble:
    """Mixture ``sum_i p_i alpha_i^1 x ... x alpha_i^n`` of product states."""

    dims: tuple[int, ...]
    weights: np.ndarray
    atoms: tuple[tuple[np.ndarray, ...], ...]

    def __post_init__(self):
        dims = check_layout(self.dims)
        w = np.asarray(self.weights, dtype=float).ravel()
        atoms = tuple(tuple(np.asarray(a, dtype=np.complex128) for a in atom) for atom in self.atoms)
        if len(atoms) != w.size or w.size == 0:
            raise ValueError("need one weight per atom and at least one atom")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-10:
            raise ValueError("weights must be positive and sum to 1")
        for atom in atoms:
            if len(atom) != len(dims) or any(a.shape != (d, d) for a, d in zip(atom, dims)):
                raise ValueError("each atom needs one density matrix per party")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def from_vectors(cls, dims: Sequence[int], weights, vectors) -> "ProductEnsemble":
        """Build from pure product atoms given as per-party vectors."""
        atoms = [tuple(ket_to_dm(v) for v in atom) for atom in vectors]
        return cls(tuple(dims), np.asarray(weights, float), tuple(atoms))

    def __len__(self) -> int:
        return len(self.atoms)

    def validate(self, tol: float = 1e-10) -> bool:
        return all(is_density(a, tol) for atom in self.atoms for a in atom)

    def concat(self, other: "ProductEnsemble", p: float = 0.5) -> "ProductEnsemble":
        if other.dims != self.dims:
            raise ValueError("ensembles live on different layouts")
        w = np.concatenate([p * self.weights, (1 - p) * other.weights])
        keep = w > 0
        atoms = [a for a, k in zip(self.atoms + other.atoms, keep) if k]
        return ProductEnsemble(self.dims, w[keep], tuple(atoms))


def assemble(e: ProductEnsemble) -> np.ndarray:
    """Density operator of the ensemble."""
    d = math.prod(e.dims)
    out = np.zeros((d, d), dtype=np.complex128)
    for p, atom in zip(e.weights, e.atoms):
        out += p * tensor(*atom)
    return 0.5 * (out + out.conj().T)


def product_state(dims: Sequence[int], states: Sequence[np.ndarray]) -> ProductEnsemble:
    return ProductEnsemble(tuple(dims), np.ones(1), (tuple(states),))


def random_separable(dims: Sequence[int], m: int, seed=None) -> ProductEnsemble:
    """``m`` random mixed product atoms with Dirichlet(1) weights."""
    dims = check_layout(dims)
    if m < 1:
        raise ValueError("m must be at least 1")
    rng = _rng(seed)
    w = rng.dirichlet(np.ones(m)) if m > 1 else np.ones(1)
    w = np.clip(w, 1e-300, None)
    w /= w.sum()
    atoms = tuple(tuple(random_density(d, seed=rng) for d in dims) for _ in range(m))
    return ProductEnsemble(dims, w, atoms)


def _schmidt_chain(psi, dims, weight, prefix, out):
    if len(dims) == 1:
        out.append((weight, prefix + [psi]))
        return
    sd = schmidt_decompose(psi, dims, 1)
    for c, left, right in zip(sd.coefficients, sd.left_vectors.T, sd.right_vectors.T):
        _schmidt_chain(right, dims[1:], weight * c ** 2, prefix + [left], out)


def lemma_omega_state(omega, dims: Sequence[int], order: Sequence[int] | None = None) -> ProductEnsemble:
    """Separable state with the same one-party marginals as the pure state ``omega``.

    Iterated Schmidt decompositions across the cuts ``1 | 2..n``, then
    ``2 | 3..n`` and so on give mutually orthogonal product vectors; the
    ensemble mixes them with the squared Schmidt weights. ``order`` is an
    optional permutation of the parties for the sweep (default
    ``0, 1, ..., n-1``). Zero Schmidt coefficients are dropped.
    """
    psi = np.asarray(omega, dtype=np.complex128)
    if psi.ndim == 2:
        w, v = hermitian_eig(psi)
        if numerical_rank(w) != 1 or abs(w[0] - 1) > 1e-9:
            raise ValueError("omega must be a pure state")
        psi = v[:, 0]
    dims = check_layout(dims, psi.size)
    if len(dims) < 2:
        raise ValueError("need at least two parties")
    if abs(np.linalg.norm(psi) - 1) > 1e-9:
        raise ValueError("omega must be normalized")
    n = len(dims)
    order = list(range(n)) if order is None else list(order)
    if sorted(order) != list(range(n)):
        raise ValueError(f"order must be a permutation of 0..{n - 1}")
    pdims = [dims[s] for s in order]
    t = psi.reshape(dims).transpose(order).ravel()
    raw: list = []
    _schmidt_chain(t, pdims, 1.0, [], raw)
    weights = np.array([w for w, _ in raw])
    keep = weights > RANK_FLOOR * weights.max()
    inv = np.argsort(order)
    vecs = [[vs[k] for k in inv] for (w, vs), ok in zip(raw, keep) if ok]
    weights = weights[keep]
    return ProductEnsemble.from_vectors(dims, weights / weights.sum(), vecs)


def support_compress(e: ProductEnsemble, rho) -> ProductEnsemble:
    """Push an ensemble onto the product of the local supports of ``rho``.

    Applies ``X -> Q X Q + Tr[(I - Q) X] tau`` with ``Q`` the projector
    onto the local supports and ``tau`` the product of the top eigenvectors
    of the marginals; this never increases ``H(rho || .)``.
    """
    rho = np.asarray(rho, dtype=np.complex128)
    dims = check_layout(e.dims, rho.shape[0])
    projs, tops = [], []
    for s in range(len(dims)):
        w, v = hermitian_eig(partial_trace(rho, dims, [s]))
        k = numerical_rank(w)
        if k == 0:
            raise ValueError("rho has an empty local support")
        projs.append(v[:, :k] @ v[:, :k].conj().T)
        tops.append(ket_to_dm(v[:, 0]))
    weights, atoms = [], []
    for p, atom in zip(e.weights, e.atoms):
        local = [pr @ a @ pr for pr, a in zip(projs, atom)]
        traces = [float(np.real(np.trace(x))) for x in local]
        kept = p * math.prod(traces)
        if kept > 1e-15:
            weights.append(kept)
            atoms.append(tuple(x / t for x, t in zip(local, traces)))
    lost = 1.0 - sum(weights)
    if lost > 1e-15:
        weights.append(lost)
        atoms.append(tuple(tops))
    w = np.asarray(weights)
    return ProductEnsemble(dims, w / w.sum(), tuple(atoms))


def is_ppt(rho, dims: Sequence[int], tol: float = 1e-9) -> bool:
    """Positive partial transpose with respect to every single party."""
    from .linalg import partial_transpose
    return all(np.linalg.eigvalsh(partial_transpose(rho, dims, [s]))[0] >= -tol
               for s in range(len(dims)))
