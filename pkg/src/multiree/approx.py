"""Spectral truncation of multipartite states and its error bounds.

The map compresses a state with tensor products of rank-``r`` spectral
projectors of selected marginals, then renormalizes:
``Lambda_r(rho) = Q_r rho Q_r / Tr Q_r rho``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .energy import HamiltonianSpec, log_power_weights, max_entropy_F, sum_hamiltonian
from .entropy import (conditional_entropy_ext, g_func, mutual_information,
                      von_neumann_entropy)
from .linalg import check_density, check_layout, hermitian_eig, partial_trace, tensor

FUNCTIONALS = ("entropy", "qmi", "ree", "cond")
CSV_HEADER = ("r", "c_r", "delta_r", "value", "bound", "valid_regime")


@dataclass(frozen=True)
class TruncationResult:
    state: np.ndarray
    c_r: float
    subset: tuple[int, ...]
    r: int
    delta_r: float  # sqrt(sum_j Tr Pbar_r^{s_j} rho_{s_j})
    tail_masses: tuple[float, ...]  # Tr Pbar_r^{s_j} rho_{s_j} per subset party


def spectral_projector(marginal, r: int) -> np.ndarray:
    """Projector onto the eigenvectors of the ``r`` largest eigenvalues."""
    w, v = hermitian_eig(marginal)
    if not 1 <= r <= w.size:
        raise ValueError(f"r must lie in [1, {w.size}], got {r}")
    return v[:, :r] @ v[:, :r].conj().T


def _check_subset(subset: Iterable[int], n: int) -> tuple[int, ...]:
    subset = tuple(sorted(set(int(s) for s in subset)))
    if not subset:
        raise ValueError("subset must be nonempty")
    if subset[0] < 0 or subset[-1] >= n:
        raise IndexError(f"subset {subset} out of range for {n} parties")
    return subset


def approx_map(rho, dims: Sequence[int], subset: Iterable[int], r: int) -> TruncationResult:
    """Apply the truncation map; ``r`` is clamped to each local dimension."""
    rho = check_density(rho)
    dims = check_layout(dims, rho.shape[0])
    subset = _check_subset(subset, len(dims))
    if r < 1:
        raise ValueError("r must be positive")
    factors, tails = [], []
    for s, d in enumerate(dims):
        if s in subset:
            marg = partial_trace(rho, dims, [s])
            p = spectral_projector(marg, min(r, d))
            factors.append(p)
            tails.append(max(0.0, 1.0 - float(np.real(np.trace(p @ marg)))))
        else:
            factors.append(np.eye(d))
    q = tensor(*factors)
    qrq = q @ rho @ q
    c_r = float(np.real(np.trace(qrq)))
    if c_r <= 0:
        raise ValueError("the truncation removes the whole state (Tr Q_r rho = 0)")
    state = qrq / c_r
    state = 0.5 * (state + state.conj().T)
    return TruncationResult(state, c_r, subset, int(r), math.sqrt(sum(tails)), tuple(tails))


def build_fa_hamiltonian(marginal, weights: Sequence[float] | None = None) -> HamiltonianSpec:
    """``G = sum_i g_i |phi_i><phi_i|`` in the eigenbasis of ``marginal``.

    Eigenvectors are ordered by nonincreasing eigenvalue, so the largest
    population gets weight ``g_1 = 0``. The default weights are ``ln^3 i``.
    """
    w, v = hermitian_eig(marginal)
    if weights is None:
        weights = log_power_weights(w.size, 3.0)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != w.shape:
        raise ValueError(f"need {w.size} weights, got {weights.size}")
    if weights[0] != 0:
        raise ValueError("the first weight must be 0")
    return HamiltonianSpec(weights, basis=v)


def fa_energy(marginal, h: HamiltonianSpec) -> float:
    return float(np.real(np.trace(h.matrix() @ np.asarray(marginal))))


def theorem1_bound(delta_r: float, E_S: float, C: float, D: float,
                   F: Callable[[float], float], variant: str = "L") -> float:
    """``C sqrt(2d) F(4 E_S / (3 d)) + D g(sqrt(2d))``.

    ``variant="L"`` uses ``d = delta_r``; ``variant="N"`` uses
    ``d = sqrt(delta_r (2 - delta_r))``. ``delta_r = 0`` gives 0.
    """
    if not 0 <= delta_r <= 0.5:
        raise ValueError(f"delta_r must lie in (0, 1/2], got {delta_r}")
    if E_S < 0:
        raise ValueError("E_S must be nonnegative")
    if variant == "L":
        d = delta_r
    elif variant == "N":
        d = math.sqrt(delta_r * (2.0 - delta_r))
    else:
        raise ValueError(f"unknown variant {variant!r}")
    if d == 0:
        return 0.0
    root = math.sqrt(2.0 * d)
    return C * root * F(4.0 * E_S / (3.0 * d)) + D * g_func(root)


def class_constants(functional: str, n: int) -> tuple[float, float, int]:
    """``(C, D, m)`` of the class each functional belongs to."""
    if functional == "qmi":
        return 2.0, float(n), n - 1
    if functional == "ree":
        return 1.0, 1.0, n - 1
    if functional == "entropy":
        return 1.0, 1.0, n
    if functional == "cond":
        if n != 2:
            raise ValueError("conditional entropy needs a bipartite layout")
        return 2.0, 1.0, 1
    raise ValueError(f"unknown functional {functional!r}; expected one of {FUNCTIONALS}")


def evaluate_functional(functional: str, rho, dims: Sequence[int], ree_options: dict | None = None) -> float:
    if functional == "entropy":
        return von_neumann_entropy(rho)
    if functional == "qmi":
        return mutual_information(rho, dims)
    if functional == "cond":
        return conditional_entropy_ext(rho, dims)
    if functional == "ree":
        from .ree import estimate_ree
        return estimate_ree(rho, dims, **(ree_options or {})).value
    raise ValueError(f"unknown functional {functional!r}; expected one of {FUNCTIONALS}")


@dataclass(frozen=True)
class TruncationRow:
    r: int
    c_r: float
    delta_r: float
    value: float
    bound: float
    valid_regime: bool


@dataclass
class TruncationTable:
    functional: str
    dims: tuple[int, ...]
    subset: tuple[int, ...]
    exact: float
    r0: int | None
    E_S: float
    rows: list[TruncationRow] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in self.rows:
            w.writerow([row.r, f"{row.c_r:.17g}", f"{row.delta_r:.17g}", f"{row.value:.17g}",
                        f"{row.bound:.17g}", int(row.valid_regime)])
        return buf.getvalue()


def bound_pipeline(rho, dims: Sequence[int], functional: str,
                   weights: Sequence[Sequence[float]] | None = None):
    """FA-Hamiltonians for the first ``m`` marginals, their energy and ``F_{G_{A^m}}``."""
    dims = tuple(dims)
    C, D, m = class_constants(functional, len(dims))
    hams = []
    E_S = 0.0
    for s in range(m):
        marg = partial_trace(rho, dims, [s])
        h = build_fa_hamiltonian(marg, None if weights is None else weights[s])
        hams.append(h)
        E_S += fa_energy(marg, h)
    g_sum = sum_hamiltonian(hams)
    return C, D, E_S, (lambda e: max_entropy_F(g_sum, e))


def truncation_experiment(rho, dims: Sequence[int], subset: Iterable[int], functional: str,
                          r_values: Iterable[int] | None = None, variant: str = "L",
                          ree_options: dict | None = None) -> TruncationTable:
    """Tabulate ``f(Lambda_r(rho))`` against the truncation error bound for each ``r``.

    Rows with ``delta_r > 1/2`` are outside the bound's regime and carry
    ``bound = nan``. ``r0`` is the smallest ``r`` from which every
    tabulated row is in the regime.
    """
    rho = check_density(rho)
    dims = check_layout(dims, rho.shape[0])
    subset = _check_subset(subset, len(dims))
    if functional not in FUNCTIONALS:
        raise ValueError(f"unknown functional {functional!r}; expected one of {FUNCTIONALS}")
    rmax = max(dims)
    r_values = sorted(set(range(1, rmax + 1) if r_values is None else r_values))
    C, D, E_S, F = bound_pipeline(rho, dims, functional)
    exact = evaluate_functional(functional, rho, dims, ree_options)
    table = TruncationTable(functional, dims, subset, exact, None, E_S)
    for r in r_values:
        tr = approx_map(rho, dims, subset, r)
        if tr.delta_r == 0.0 or np.allclose(tr.state, rho, atol=1e-14, rtol=0):
            value = exact
        else:
            value = evaluate_functional(functional, tr.state, dims, ree_options)
        valid = tr.delta_r <= 0.5
        bound = theorem1_bound(tr.delta_r, E_S, C, D, F, variant) if valid else math.nan
        table.rows.append(TruncationRow(r, tr.c_r, tr.delta_r, value, bound, valid))
    r0 = None
    for row in reversed(table.rows):
        if not row.valid_regime:
            break
        r0 = row.r
    table.r0 = r0
    return table
