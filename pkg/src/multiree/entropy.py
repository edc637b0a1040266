"""Entropy functionals (natural logarithms throughout)."""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .linalg import (RANK_FLOOR, as_operator, check_density, check_layout,
                     check_positive, hermitian_eig, partial_trace, tensor)

# squared overlap of a rho-eigenvector with ker(sigma) above which supp(rho) is not in supp(sigma)
SUPPORT_TOL = 1e-10


def eta(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = -x[pos] * np.log(x[pos])
    return out


def shannon_entropy(p) -> float:
    p = np.asarray(p, dtype=float)
    if p.size == 0:
        return 0.0
    top = float(np.max(p))
    p = np.where(p > RANK_FLOOR * top, p, 0.0)
    return float(np.sum(eta(p)))


def von_neumann_entropy(rho) -> float:
    """``-Tr rho ln rho``; eigenvalues below the rank floor contribute zero."""
    rho = check_density(rho)
    w = np.linalg.eigvalsh(rho)
    return max(0.0, shannon_entropy(w))


def binary_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    return float(eta(p) + eta(1.0 - p))


def g_func(x: float) -> float:
    """``g(x) = (x+1) ln(x+1) - x ln x``, equal to ``(1+x) h2(x/(1+x))``."""
    if x < 0:
        raise ValueError(f"g is defined for x >= 0, got {x}")
    if x == 0:
        return 0.0
    return (x + 1.0) * math.log1p(x) - x * math.log(x)


def relative_entropy(rho, sigma) -> float:
    """Lindblad relative entropy of positive operators.

    Evaluated in the eigenbasis of ``rho``:
    ``sum_i <i| rho ln rho - rho ln sigma |i> + Tr sigma - Tr rho``.
    Returns ``math.inf`` when the support of ``rho`` is not contained in
    the support of ``sigma``.
    """
    rho = check_positive(rho, "rho")
    sigma = check_positive(sigma, "sigma")
    if rho.shape != sigma.shape:
        raise ValueError(f"dimension mismatch {rho.shape} vs {sigma.shape}")
    lam, u = hermitian_eig(rho)
    mu, v = hermitian_eig(sigma)
    lam_top = max(float(lam[0]), 0.0)
    mu_top = max(float(mu[0]), 0.0)
    tr_diff = float(np.sum(mu) - np.sum(lam))
    keep = lam > RANK_FLOOR * lam_top if lam_top > 0 else np.zeros(lam.shape, bool)
    if not np.any(keep):
        return tr_diff
    lam, u = lam[keep], u[:, keep]
    supp = mu > RANK_FLOOR * mu_top if mu_top > 0 else np.zeros(mu.shape, bool)
    overlap = np.abs(v.conj().T @ u) ** 2  # overlap[k, i] = |<v_k|u_i>|^2
    if np.any(np.sum(overlap[~supp], axis=0) > SUPPORT_TOL):
        return math.inf
    log_mu = np.log(mu[supp])
    cross = np.sum(lam * (log_mu @ overlap[supp]))
    return float(np.sum(lam * np.log(lam)) - cross + tr_diff)


def conditional_entropy_ext(rho, dims: Sequence[int], conditioned_on: int = 1) -> float:
    """Extended conditional entropy ``H(A|B) = H(rho_A) - H(rho || rho_A x rho_B)``.

    ``dims`` must describe two parties; ``conditioned_on`` selects B (1 gives H(A1|A2)).
    """
    rho = check_density(rho)
    dims = check_layout(dims, rho.shape[0])
    if len(dims) != 2:
        raise ValueError("conditional entropy needs a bipartite layout")
    if conditioned_on not in (0, 1):
        raise ValueError("conditioned_on must be 0 or 1")
    rho_a = partial_trace(rho, dims, [0])
    rho_b = partial_trace(rho, dims, [1])
    target = rho_b if conditioned_on == 0 else rho_a
    return von_neumann_entropy(target) - relative_entropy(rho, tensor(rho_a, rho_b))


def conditional_entropy(rho, dims: Sequence[int], conditioned_on: int = 1) -> float:
    """Plain ``H(AB) - H(B)`` form, used to cross-check the extended one."""
    rho = check_density(rho)
    dims = check_layout(dims, rho.shape[0])
    if len(dims) != 2:
        raise ValueError("conditional entropy needs a bipartite layout")
    return von_neumann_entropy(rho) - von_neumann_entropy(partial_trace(rho, dims, [conditioned_on]))


def mutual_information(rho, dims: Sequence[int]) -> float:
    """Multipartite mutual information ``H(rho || rho_1 x ... x rho_n)``."""
    rho = check_density(rho)
    dims = check_layout(dims, rho.shape[0])
    if len(dims) < 2:
        raise ValueError("mutual information needs at least two parties")
    prod = tensor(*[partial_trace(rho, dims, [s]) for s in range(len(dims))])
    return max(0.0, relative_entropy(rho, prod))


def mutual_information_entropies(rho, dims: Sequence[int]) -> float:
    """``sum_s H(rho_s) - H(rho)``, the finite-entropy form of the mutual information."""
    rho = check_density(rho)
    dims = check_layout(dims, rho.shape[0])
    return sum(von_neumann_entropy(partial_trace(rho, dims, [s])) for s in range(len(dims))) \
        - von_neumann_entropy(rho)


def marginal_entropies(rho, dims: Sequence[int]) -> list[float]:
    rho = as_operator(rho)
    return [von_neumann_entropy(partial_trace(rho, dims, [s])) for s in range(len(dims))]
