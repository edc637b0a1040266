"""Relative entropy of entanglement by Frank-Wolfe over fully separable states.

The objective ``F(sigma) = H(rho || sigma)`` is convex and the separable
set is the convex hull of pure product states, so each iteration calls a
linear minimization oracle over product vectors and the Frank-Wolfe gap
``<sigma - phi phi^+, grad F(sigma)>`` bounds the suboptimality.

The oracle is a multi-start alternating minimization. It is exact for
the tested two-qubit cases but only locally optimal in general, so the
reported gap is a certificate relative to the oracle's answer.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .entropy import (binary_entropy, conditional_entropy_ext, mutual_information,
                      relative_entropy, von_neumann_entropy)
from .linalg import (_rng, check_density, check_layout, hermitian_eig, numerical_rank,
                     partial_trace, permute_parties, random_density, tensor)
from .separable import ProductEnsemble

log = logging.getLogger(__name__)

FLOOR = 1e-9
NOISE = 1e-3
CORRECTIVE_EVERY = 10
CORRECTIVE_STEPS = 30
SWEEP_CAP = 200
SWEEP_PLATEAU = 1e-9
REFINE_ITERS = 150
EXTRA_WEIGHT = 1e-2


@dataclass
class SolveResult:
    value: float
    gap: float
    ensemble: ProductEnsemble
    iterations: int
    converged: bool
    info: dict = field(default_factory=dict)

    @property
    def lower(self) -> float:
        return max(0.0, self.value - self.gap)

    @property
    def bracket(self) -> tuple[float, float]:
        return self.lower, self.value


# ---------------------------------------------------------------------------
# gradient


def _divided_log(mu: np.ndarray) -> np.ndarray:
    lm = np.log(mu)
    num = lm[:, None] - lm[None, :]
    den = mu[:, None] - mu[None, :]
    close = np.abs(den) <= 1e-10 * np.maximum(mu[:, None], mu[None, :])
    safe = np.where(close, 1.0, den)
    return np.where(close, 2.0 / (mu[:, None] + mu[None, :]), num / safe)


def rel_entropy_gradient(rho, sigma) -> np.ndarray:
    """Gradient of ``sigma -> H(rho || sigma)``: ``-U (rho~ o Gamma) U^+``.

    ``rho~`` is ``rho`` in the eigenbasis ``U`` of ``sigma`` and ``Gamma``
    holds the divided differences of ``ln`` at the eigenvalues of ``sigma``.
    Raises ``ValueError`` when ``sigma`` is singular.
    """
    rho = np.asarray(rho, dtype=np.complex128)
    mu, u = np.linalg.eigh(np.asarray(sigma, dtype=np.complex128))
    if mu[0] <= 1e-14 * max(mu[-1], 1e-300):
        raise ValueError("sigma must be full rank (mix in a floor first)")
    rt = u.conj().T @ rho @ u
    g = -(u @ (rt * _divided_log(mu)) @ u.conj().T)
    return 0.5 * (g + g.conj().T)


# ---------------------------------------------------------------------------
# linear minimization oracle over product vectors

class _Contractor:
    """Contracts ``G`` against all parties but one, batched over restarts.

    For each party ``s`` the tensor of ``G`` is permuted once so that the
    local operator is ``conj(psi) . G_s . psi`` with ``psi`` the batched
    product of the other parties' vectors.
    """

    def __init__(self, G: np.ndarray, dims: Sequence[int]):
        self.dims = tuple(dims)
        n = len(dims)
        gt = G.reshape(self.dims + self.dims)
        self.blocks = []
        for s in range(n):
            others = [t for t in range(n) if t != s]
            perm = [s] + others + [n + s] + [n + t for t in others]
            rest = math.prod(self.dims[t] for t in others)
            d = self.dims[s]
            self.blocks.append(np.ascontiguousarray(gt.transpose(perm)).reshape(d * rest * d, rest))

    def local(self, phis: list[np.ndarray], s: int) -> np.ndarray:
        R = phis[0].shape[0]
        psi = None
        for t, p in enumerate(phis):
            if t == s:
                continue
            psi = p if psi is None else (psi[:, :, None] * p[:, None, :]).reshape(R, -1)
        d = self.dims[s]
        rest = psi.shape[1]
        t = (self.blocks[s] @ psi.T).reshape(d, rest, d, R)
        return np.einsum("airz,zi->zar", t, psi.conj())


def _product_vector(parts: Sequence[np.ndarray]) -> np.ndarray:
    out = parts[0]
    for p in parts[1:]:
        out = np.kron(out, p)
    return out


def _schmidt_guess(vec: np.ndarray, dims: Sequence[int]) -> list[np.ndarray]:
    parts = []
    rest = vec
    for s in range(len(dims) - 1):
        u, _, vh = np.linalg.svd(rest.reshape(dims[s], -1), full_matrices=False)
        parts.append(u[:, 0])
        rest = vh[0].conj()
    parts.append(rest / np.linalg.norm(rest))
    return parts


def _rayleigh_polish(G: np.ndarray, dims: Sequence[int], parts: Sequence[np.ndarray]
                     ) -> tuple[list[np.ndarray], float]:
    """BFGS on ``<phi|G|phi> / <phi|phi>`` over unnormalized party vectors."""
    dims = tuple(dims)
    offs = np.cumsum([0] + [2 * d for d in dims])

    def unpack(x):
        return [x[a:a + d] + 1j * x[a + d:b] for a, b, d in zip(offs[:-1], offs[1:], dims)]

    def fun(x):
        ps = unpack(x)
        norms = [float(np.real(np.vdot(p, p))) for p in ps]
        phi = _product_vector(ps)
        gphi = (G @ phi).reshape(dims)
        total = math.prod(norms)
        f = float(np.real(np.vdot(phi, gphi.ravel()))) / total
        grad = []
        for s, p in enumerate(ps):
            t = gphi
            for u in reversed(range(len(dims))):
                if u != s:
                    t = np.moveaxis(t, u, -1) @ ps[u].conj()
            w = t / total - f * p / norms[s]
            grad += [2 * w.real, 2 * w.imag]
        return f, np.concatenate(grad)

    x0 = np.concatenate([np.concatenate([p.real, p.imag]) for p in parts])
    res = minimize(fun, x0, jac=True, method="BFGS", options={"gtol": 1e-10, "maxiter": 500})
    out = [p / np.linalg.norm(p) for p in unpack(res.x)]
    phi = _product_vector(out)
    return out, float(np.real(np.vdot(phi, G @ phi)))


def lmo_product(G, dims: Sequence[int], restarts: int = 16, seed=None,
                warm: Sequence[Sequence[np.ndarray]] = (), polish: int = 3
                ) -> tuple[list[np.ndarray], float]:
    """Product vector approximately minimizing ``<phi|G|phi>``.

    Returns the per-party vectors and the value; see
    :func:`lmo_candidates` for the search itself.
    """
    return lmo_candidates(G, dims, restarts, seed, warm, polish)[0]


def lmo_candidates(G, dims: Sequence[int], restarts: int = 16, seed=None,
                   warm: Sequence[Sequence[np.ndarray]] = (), polish: int = 3
                   ) -> list[tuple[list[np.ndarray], float]]:
    """Distinct local minimizers of ``<phi|G|phi>`` over product vectors, best first.

    Alternating minimization: each party vector is set to the minimal
    eigenvector of ``G`` contracted with the other parties. Starts are
    ``restarts`` random product vectors, the product built from the minimal
    eigenvector of ``G`` and any ``warm`` starts. Sweeps stop once no start
    moves by more than ``1e-9`` (at most 200 sweeps); the ``polish`` best
    distinct candidates are then refined by BFGS on the Rayleigh quotient,
    which converges where the sweeps only creep.
    """
    G = np.asarray(G, dtype=np.complex128)
    G = 0.5 * (G + G.conj().T)
    dims = check_layout(dims, G.shape[0])
    n = len(dims)
    rng = _rng(seed)
    if n == 1:
        w, v = np.linalg.eigh(G)
        return [([v[:, 0]], float(w[0]))]
    starts = [list(p) for p in warm]
    w, v = np.linalg.eigh(G)
    starts.append(_schmidt_guess(v[:, 0], dims))
    for _ in range(restarts):
        starts.append([rng.standard_normal(d) + 1j * rng.standard_normal(d) for d in dims])
    R = len(starts)
    phis = [np.array([st[s] for st in starts], dtype=np.complex128) for s in range(n)]
    for s in range(n):
        phis[s] /= np.linalg.norm(phis[s], axis=1, keepdims=True)
    con = _Contractor(G, dims)
    scale = max(1.0, float(np.max(np.abs(w))))
    vals = np.full(R, np.inf)
    movable = [s for s in range(n) if dims[s] > 1]
    if not movable:
        phi = _product_vector([p[0] for p in phis])
        return [([p[0] for p in phis], float(np.real(np.vdot(phi, G @ phi))))]
    for _ in range(SWEEP_CAP):
        for s in movable:
            m = con.local(phis, s)
            m = 0.5 * (m + np.conj(np.swapaxes(m, 1, 2)))
            ew, ev = np.linalg.eigh(m)
            phis[s] = ev[:, :, 0]
            new = ew[:, 0]
        done = np.max(np.abs(vals - new)) <= SWEEP_PLATEAU * scale
        vals = new
        if done:
            break
    order = np.argsort(vals, kind="stable")
    found: list[tuple[list[np.ndarray], float]] = []
    seen: list[np.ndarray] = []
    for k in order:
        vec = _product_vector([phis[s][k] for s in range(n)])
        if any(abs(np.vdot(c, vec)) ** 2 > 1 - 1e-8 for c in seen):
            continue
        seen.append(vec)
        parts = [phis[s][k].copy() for s in range(n)]
        if len(found) < polish:
            parts, val = _rayleigh_polish(G, dims, parts)
        else:
            val = float(vals[k])
        found.append((parts, val))
    found.sort(key=lambda item: item[1])
    return found


# ---------------------------------------------------------------------------
# Frank-Wolfe engine


class _Problem:
    """``F(sigma) = H(rho || sigma) + lam * Tr[H sigma]`` on a fixed layout."""

    def __init__(self, rho, dims, hamiltonian=None, lam: float = 0.0):
        self.rho = rho
        self.dims = dims
        self.d = rho.shape[0]
        w = np.linalg.eigvalsh(rho)
        w = w[w > 1e-300]
        self.neg_entropy = float(np.sum(w * np.log(w)))
        self.ham = hamiltonian
        self.lam = lam

    def floored(self, sigma):
        return (1 - FLOOR) * sigma + FLOOR * np.eye(self.d) / self.d

    def value(self, sigma) -> float:
        mu, u = np.linalg.eigh(self.floored(sigma))
        mu = np.maximum(mu, 1e-300)
        diag = np.real(np.einsum("ij,ik,kj->j", u.conj(), self.rho, u))
        val = self.neg_entropy - float(diag @ np.log(mu))
        if self.ham is not None and self.lam:
            val += self.lam * float(np.real(np.vdot(self.ham, sigma)))
        return val

    def value_and_grad(self, sigma):
        sf = self.floored(sigma)
        mu, u = np.linalg.eigh(sf)
        mu = np.maximum(mu, 1e-300)
        rt = u.conj().T @ self.rho @ u
        val = self.neg_entropy - float(np.real(np.diag(rt)) @ np.log(mu))
        g = -(u @ (rt * _divided_log(mu)) @ u.conj().T)
        g = 0.5 * (g + g.conj().T)
        if self.ham is not None and self.lam:
            val += self.lam * float(np.real(np.vdot(self.ham, sigma)))
            g = g + self.lam * self.ham
        return val, g


class _ActiveSet:
    def __init__(self, dims):
        self.dims = dims
        self.parts: list[list[np.ndarray]] = []
        self.vecs = np.zeros((int(np.prod(dims)), 0), dtype=np.complex128)
        self.w = np.zeros(0)

    def sigma(self) -> np.ndarray:
        s = (self.vecs * self.w) @ self.vecs.conj().T
        return 0.5 * (s + s.conj().T)

    def find(self, vec) -> int:
        if not self.w.size:
            return -1
        ov = np.abs(self.vecs.conj().T @ vec) ** 2
        k = int(np.argmax(ov))
        return k if ov[k] > 1 - 1e-12 else -1

    def add(self, parts, weight):
        vec = _product_vector(parts)
        k = self.find(vec)
        if k >= 0:
            self.w[k] += weight
            return k
        self.parts.append([p.copy() for p in parts])
        self.vecs = np.column_stack([self.vecs, vec])
        self.w = np.append(self.w, weight)
        return self.w.size - 1

    def prune(self, tol=1e-14):
        keep = self.w > tol
        if not np.all(keep):
            self.parts = [p for p, k in zip(self.parts, keep) if k]
            self.vecs = self.vecs[:, keep]
            self.w = self.w[keep]
        self.w = self.w / self.w.sum()

    def atom_values(self, g) -> np.ndarray:
        return np.real(np.einsum("ia,ij,ja->a", self.vecs.conj(), g, self.vecs))

    def ensemble(self, isometries=None) -> ProductEnsemble:
        vecs = []
        for parts in self.parts:
            if isometries is not None:
                parts = [v @ p for v, p in zip(isometries, parts)]
            vecs.append([p / np.linalg.norm(p) for p in parts])
        full_dims = self.dims if isometries is None else tuple(v.shape[0] for v in isometries)
        return ProductEnsemble.from_vectors(full_dims, self.w / self.w.sum(), vecs)


def _initial_atoms(rho, dims, active: _ActiveSet, noise: float = NOISE):
    eigs = [hermitian_eig(partial_trace(rho, dims, [s])) for s in range(len(dims))]
    idx = np.indices(dims).reshape(len(dims), -1).T
    for combo in idx:
        p = math.prod(max(float(eigs[s][0][i]), 0.0) for s, i in enumerate(combo))
        if p > 1e-14:
            active.add([eigs[s][1][:, i] for s, i in enumerate(combo)], (1 - noise) * p)
    basis = [np.eye(d, dtype=np.complex128) for d in dims]
    d = int(np.prod(dims))
    for combo in idx:
        active.add([basis[s][:, i] for s, i in enumerate(combo)], noise / d)
    active.prune()


def _line_search(prob: _Problem, sigma, direction, tmax: float) -> float:
    if tmax <= 0:
        return 0.0
    res = minimize_scalar(lambda t: prob.value(sigma + t * direction), bounds=(0.0, tmax),
                          method="bounded", options={"xatol": 1e-12, "maxiter": 200})
    t = float(res.x)
    # the bounded method never probes the endpoints
    if prob.value(sigma + tmax * direction) <= prob.value(sigma + t * direction):
        t = tmax
    return t


def _corrective(prob: _Problem, active: _ActiveSet, steps: int = CORRECTIVE_STEPS):
    """Exponentiated-gradient descent on the atom weights."""
    sigma = active.sigma()
    f, g = prob.value_and_grad(sigma)
    eta = 1.0
    for _ in range(steps):
        a = active.atom_values(g)
        spread = float(a.max() - a.min())
        if spread < 1e-14:
            break
        while True:
            w = active.w * np.exp(-eta * (a - a.min()) / spread)
            w /= w.sum()
            trial = (active.vecs * w) @ active.vecs.conj().T
            ft = prob.value(trial)
            if ft <= f - 1e-4 * eta * float((active.w - w) @ (a - a.min())) / spread or eta < 1e-8:
                break
            eta *= 0.5
        if ft >= f:
            break
        active.w = w
        f, g = prob.value_and_grad(trial)
        eta = min(eta * 2.0, 1e3)
    active.prune()


def _refine(prob: _Problem, active: _ActiveSet, maxiter: int = REFINE_ITERS):
    """Joint quasi-Newton descent over the atoms of the current decomposition.

    ``sigma = sum_i phi_i phi_i^+ / sum_i |phi_i|^2`` with unnormalized
    product vectors ``phi_i``, so the weights live in the norms. This
    smooth parametrization supplies the fast local convergence that plain
    Frank-Wolfe lacks when the optimum sits on the boundary of the
    separable set; the Frank-Wolfe oracle keeps adding atoms and certifies
    the gap.
    """
    dims = prob.dims
    n = len(dims)
    K = active.w.size
    offs = np.cumsum([0] + [2 * d * K for d in dims])

    def unpack(x):
        out = []
        for a, b, d in zip(offs[:-1], offs[1:], dims):
            block = x[a:b].reshape(2, d, K)
            out.append(block[0] + 1j * block[1])
        return out

    def fun(x):
        parts = unpack(x)
        phi = parts[0]
        for p in parts[1:]:
            phi = (phi[:, None, :] * p[None, :, :]).reshape(-1, K)
        S = phi @ phi.conj().T
        T = float(np.real(np.trace(S)))
        f, g = prob.value_and_grad(0.5 * (S + S.conj().T) / T)
        c = float(np.real(np.vdot(g, S))) / T
        gphi = ((g @ phi - c * phi) / T).reshape(dims + (K,))
        grads = []
        for s in range(n):
            t = gphi
            for u in reversed(range(n)):
                if u != s:
                    t = np.sum(np.moveaxis(t, u, -2) * parts[u].conj(), axis=-2)
            grads.append(np.concatenate([2 * t.real.ravel(), 2 * t.imag.ravel()]))
        return f, np.concatenate(grads)

    scale = np.sqrt(active.w) ** (1.0 / n)
    x0 = []
    for s in range(n):
        block = np.array([p[s] for p in active.parts]).T * scale
        x0.append(np.concatenate([block.real.ravel(), block.imag.ravel()]))
    x0 = np.concatenate(x0)
    f0 = fun(x0)[0]
    res = minimize(fun, x0, jac=True, method="L-BFGS-B",
                   options={"maxiter": maxiter, "ftol": 1e-15, "gtol": 1e-12})
    if not res.fun < f0:
        return
    parts = unpack(res.x)
    norms = np.prod([np.real(np.sum(p.conj() * p, axis=0)) for p in parts], axis=0)
    keep = norms > 1e-300
    active.parts = [[parts[s][:, k] / np.linalg.norm(parts[s][:, k]) for s in range(n)]
                    for k in range(K) if keep[k]]
    active.vecs = np.column_stack([_product_vector(p) for p in active.parts])
    active.w = norms[keep] / norms[keep].sum()
    active.prune(1e-12)


def _frank_wolfe(prob: _Problem, active: _ActiveSet, tol: float, max_iter: int,
                 restarts: int, rng) -> dict:
    dims = prob.dims
    warm: list = []
    best_lower = -math.inf
    it = 0
    gap = math.inf
    converged = False
    for it in range(1, max_iter + 1):
        sigma = active.sigma()
        f, g = prob.value_and_grad(sigma)
        cands = lmo_candidates(g, dims, restarts, rng, warm)
        parts, lmo_val = cands[0]
        warm = [parts]
        fw_vec = _product_vector(parts)
        sigma_f = prob.floored(sigma)
        gap = float(np.real(np.vdot(g, sigma_f))) - lmo_val
        best_lower = max(best_lower, f - gap)
        if gap <= tol:
            converged = True
            break
        # away direction: worst active atom
        a_vals = active.atom_values(g)
        k_away = int(np.argmax(a_vals))
        s_dot = float(np.real(np.vdot(g, sigma)))
        fw_gain = s_dot - lmo_val
        away_gain = a_vals[k_away] - s_dot
        if fw_gain >= away_gain or active.w[k_away] >= 1 - 1e-12:
            direction = np.outer(fw_vec, fw_vec.conj()) - sigma
            t = _line_search(prob, sigma, direction, 1.0)
            active.w *= (1 - t)
            active.add(parts, t)
            # other descent atoms enter with a small weight for the refinement to use
            extra = [c for c, v in cands[1:] if v < s_dot]
            if extra:
                share = EXTRA_WEIGHT * max(t, 1e-3)
                active.w *= (1 - share)
                for c in extra:
                    active.add(c, share / len(extra))
        else:
            v = active.vecs[:, k_away]
            direction = sigma - np.outer(v, v.conj())
            wa = active.w[k_away]
            tmax = wa / (1 - wa)
            t = _line_search(prob, sigma, direction, tmax)
            active.w *= (1 + t)
            active.w[k_away] -= t
            active.w = np.maximum(active.w, 0.0)
        active.prune()
        if it % CORRECTIVE_EVERY == 0:
            _corrective(prob, active)
        _refine(prob, active)
    return {"iterations": it, "gap": gap, "best_lower": best_lower, "converged": converged}


def _local_isometries(rho, dims):
    isos = []
    for s in range(len(dims)):
        w, v = hermitian_eig(partial_trace(rho, dims, [s]))
        isos.append(v[:, :max(1, numerical_rank(w))])
    return isos


def estimate_ree(rho, dims: Sequence[int], tol: float = 1e-3, max_iter: int = 2000,
                 restarts: int = 16, seed=0, compress: bool = True) -> SolveResult:
    """Relative entropy of entanglement with a Frank-Wolfe certificate.

    With ``compress=True`` the problem is first restricted to the product
    of the local supports of ``rho``, where the optimum always lies.
    ``value`` is ``H(rho || sigma)`` for the returned separable ``sigma``
    (evaluated without the numerical floor) and ``value - gap`` is the
    certified lower bound.
    """
    rho = check_density(rho)
    dims = check_layout(dims, rho.shape[0])
    if len(dims) < 2:
        raise ValueError("need at least two parties")
    rng = _rng(seed)
    isos = None
    work, wdims = rho, dims
    if compress:
        isos = _local_isometries(rho, dims)
        if any(v.shape[1] < d for v, d in zip(isos, dims)):
            big = tensor(*isos)
            work = big.conj().T @ rho @ big
            work = 0.5 * (work + work.conj().T)
            wdims = tuple(v.shape[1] for v in isos)
        else:
            isos = None
    prob = _Problem(work, wdims)
    active = _ActiveSet(wdims)
    _initial_atoms(work, wdims, active)
    info = _frank_wolfe(prob, active, tol, max_iter, restarts, rng)
    sigma = active.sigma()
    value = relative_entropy(work, sigma)
    if not math.isfinite(value):
        value = prob.value(sigma)
    gap = max(0.0, value - info["best_lower"])
    ens = active.ensemble(isos)
    return SolveResult(value, gap, ens, info["iterations"], info["converged"],
                       {"compressed_dims": wdims, "fw_gap": info["gap"]})


# ---------------------------------------------------------------------------
# energy constraint


def energy_constrained_ree(rho, dims: Sequence[int], hamiltonians, energy: float,
                           tol: float = 1e-3, max_iter: int = 2000, restarts: int = 16,
                           seed=0, lam_max: float = 1e6, bisections: int = 60) -> SolveResult:
    """Relative entropy of entanglement restricted to ``Tr H sigma <= energy``.

    ``H`` is the sum of the per-party Hamiltonians (``HamiltonianSpec``
    objects or matrices). The constraint is handled by a Lagrange
    multiplier: for fixed ``lam`` Frank-Wolfe minimizes
    ``H(rho||sigma) + lam Tr H sigma``, whose oracle minimizes
    ``<phi|G + lam H|phi>`` over product vectors, and ``lam`` is bisected
    until the solution meets the energy bound. The lower end of the
    bracket is the Lagrangian dual value. ``energy = inf`` drops the
    constraint.
    """
    from .energy import HamiltonianSpec, sum_hamiltonian_matrix
    rho = check_density(rho)
    dims = check_layout(dims, rho.shape[0])
    specs = [h if isinstance(h, HamiltonianSpec) else HamiltonianSpec.from_matrix(h)
             for h in hamiltonians]
    if len(specs) != len(dims) or any(h.dim != d for h, d in zip(specs, dims)):
        raise ValueError("need one Hamiltonian per party matching the local dimensions")
    if math.isinf(energy):
        res = estimate_ree(rho, dims, tol, max_iter, restarts, seed)
        res.info["lambda"] = 0.0
        return res
    emin = sum(h.e0 for h in specs)
    if energy < emin - 1e-12:
        raise ValueError(f"energy {energy} is infeasible: product states need at least {emin}")
    H = sum_hamiltonian_matrix(specs)
    rng = _rng(seed)

    def solve(lam, active):
        prob = _Problem(rho, dims, H, lam)
        info = _frank_wolfe(prob, active, tol / 4, max_iter, restarts, rng)
        sigma = active.sigma()
        e = float(np.real(np.vdot(H, sigma)))
        f = relative_entropy(rho, sigma)
        if not math.isfinite(f):
            f = _Problem(rho, dims).value(sigma)
        # Lagrangian dual bound; valid for every lam >= 0
        lower = info["best_lower"] - lam * energy
        return f, e, lower, info

    def fresh():
        a = _ActiveSet(dims)
        _initial_atoms(rho, dims, a)
        return a

    best_upper, best_ens, best_lower = math.inf, None, -math.inf
    iters = 0
    lam_lo, lam_hi = 0.0, None
    act = fresh()
    f, e, lower, info = solve(0.0, act)
    iters += info["iterations"]
    best_lower = max(best_lower, lower)
    if e <= energy:
        best_upper, best_ens = f, act.ensemble()
    else:
        lo_state = (act.sigma(), f, e)
        lam = 1.0
        while lam <= lam_max:
            a = fresh()
            f, e, lower, info = solve(lam, a)
            iters += info["iterations"]
            best_lower = max(best_lower, lower)
            if e <= energy:
                lam_hi = lam
                hi_state = (a, f, e)
                best_upper, best_ens = f, a.ensemble()
                break
            lam_lo, lo_state = lam, (a.sigma(), f, e)
            lam *= 4.0
        if lam_hi is None:
            raise ValueError(f"no feasible separable state found for energy {energy}")
        for _ in range(bisections):
            if best_upper - max(best_lower, 0.0) <= tol:
                break
            lam = 0.5 * (lam_lo + lam_hi)
            a = fresh()
            f, e, lower, info = solve(lam, a)
            iters += info["iterations"]
            best_lower = max(best_lower, lower)
            if e <= energy:
                lam_hi, hi_state = lam, (a, f, e)
                if f < best_upper:
                    best_upper, best_ens = f, a.ensemble()
            else:
                lam_lo, lo_state = lam, (a.sigma(), f, e)
        del hi_state, lo_state
    gap = max(0.0, best_upper - max(best_lower, 0.0))
    return SolveResult(best_upper, gap, best_ens, iters, gap <= tol,
                       {"lambda": lam_hi if lam_hi is not None else 0.0, "energy_bound": energy})


# ---------------------------------------------------------------------------
# bounds and audit


def _group(rho, dims, grouping):
    a, b = [list(g) for g in grouping]
    order = a + b
    if sorted(order) != list(range(len(dims))):
        raise ValueError("grouping must split the parties into two groups")
    r = permute_parties(rho, dims, order)
    return r, (math.prod(dims[s] for s in a), math.prod(dims[s] for s in b))


def ree_lower_bounds(rho, dims: Sequence[int], grouping=None) -> float:
    """``max(0, -H(A|B), -H(B|A))`` for a bipartite (or grouped) state; 0 otherwise."""
    rho = check_density(rho)
    dims = check_layout(dims, rho.shape[0])
    if len(dims) != 2:
        if grouping is None:
            return 0.0
        rho, dims = _group(rho, dims, grouping)
    return max(0.0, -conditional_entropy_ext(rho, dims, 1), -conditional_entropy_ext(rho, dims, 0))


@dataclass(frozen=True)
class AuditRecord:
    name: str
    lhs: float
    rhs: float
    slack: float
    passed: bool


@dataclass
class AuditReport:
    records: list[AuditRecord] = field(default_factory=list)

    def add(self, name: str, lhs: float, rhs: float, tolerance: float):
        slack = rhs - lhs
        self.records.append(AuditRecord(name, lhs, rhs, slack, bool(slack >= -tolerance)))

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def __getitem__(self, name: str) -> AuditRecord:
        for r in self.records:
            if r.name == name:
                return r
        raise KeyError(name)


def audit_state(rho, dims: Sequence[int], tol: float = 1e-3, restarts: int = 16, seed=0,
                tolerance: float = 1e-9, mixture_p: float = 0.5) -> AuditReport:
    """Check the E_R upper/lower bounds and related inequalities on one state.

    Solver values enter through their certified bracket: an upper bound on
    E_R is tested against ``value - gap`` and a lower bound against
    ``value``, so a record fails only on a certified violation.
    """
    rho = check_density(rho)
    dims = check_layout(dims, rho.shape[0])
    n = len(dims)
    opts = dict(tol=tol, restarts=restarts, seed=seed)
    report = AuditReport()
    res = estimate_ree(rho, dims, **opts)
    ents = [von_neumann_entropy(partial_trace(rho, dims, [s])) for s in range(n)]
    for k in range(n):
        rest = sum(e for s, e in enumerate(ents) if s != k)
        report.add(f"ER-UB[drop {k + 1}]", res.lower, rest, tolerance)
    report.add("ER-UB+", res.lower, (n - 1) / n * sum(ents), tolerance)
    qmi = mutual_information(rho, dims)
    for k in range(n):
        report.add(f"nMI-UB[drop {k + 1}]", qmi, 2 * sum(e for s, e in enumerate(ents) if s != k),
                   tolerance)
    if n == 2:
        report.add("LB-1[1|2]", -conditional_entropy_ext(rho, dims, 1), res.value, tolerance)
        report.add("LB-1[2|1]", -conditional_entropy_ext(rho, dims, 0), res.value, tolerance)
    if n == 3 and abs(von_neumann_entropy(rho)) < 1e-9:
        for i, j in ((0, 1), (1, 2), (2, 0)):
            pair = sorted((i, j))
            sub = partial_trace(rho, dims, pair)
            sdims = [dims[s] for s in pair]
            r2 = estimate_ree(sub, sdims, **opts)
            report.add(f"LB-2[{i + 1},{j + 1}]", r2.lower + von_neumann_entropy(sub), res.value,
                       tolerance)
    other = random_density(math.prod(dims), seed=_rng(seed))
    mix = mixture_p * rho + (1 - mixture_p) * other
    r_other = estimate_ree(other, dims, **opts)
    r_mix = estimate_ree(mix, dims, **opts)
    report.add("RE-LAA", mixture_p * res.lower + (1 - mixture_p) * r_other.lower,
               r_mix.value + binary_entropy(mixture_p), tolerance)
    return report
