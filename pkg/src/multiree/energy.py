"""Hamiltonian spectra, Gibbs states, entropy-energy functions and continuity bounds."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .entropy import g_func

log = logging.getLogger(__name__)

SUM_SPECTRUM_CAP = 100_000
BETA_RANGE = 50.0
BISECTION_STEPS = 200


@dataclass(frozen=True)
class Oscillator:
    omegas: tuple[float, ...]
    hbar: float = 1.0
    levels: int = 60  # per-mode truncation used to build a spectrum

    @property
    def modes(self) -> int:
        return len(self.omegas)

    @property
    def e0(self) -> float:
        return 0.5 * self.hbar * sum(self.omegas)

    @property
    def e_star(self) -> float:
        return math.prod(self.hbar * w for w in self.omegas) ** (1.0 / self.modes)


@dataclass(frozen=True)
class HamiltonianSpec:
    """Truncated nondecreasing spectrum ``g_1 <= g_2 <= ...`` of a Hamiltonian.

    ``basis`` optionally holds the eigenvectors (columns) so the operator
    can be rebuilt; ``oscillator`` records where the spectrum came from.
    """

    eigenvalues: np.ndarray
    basis: np.ndarray | None = None
    oscillator: Oscillator | None = None

    def __post_init__(self):
        g = np.asarray(self.eigenvalues, dtype=float).ravel()
        if g.size == 0:
            raise ValueError("empty spectrum")
        if np.any(np.diff(g) < -1e-12 * max(1.0, float(np.max(np.abs(g))))):
            raise ValueError("Hamiltonian eigenvalues must be nondecreasing")
        object.__setattr__(self, "eigenvalues", g)
        if self.basis is not None:
            b = np.asarray(self.basis, dtype=np.complex128)
            if b.shape != (g.size, g.size):
                raise ValueError("basis must be square with one column per eigenvalue")
            object.__setattr__(self, "basis", b)

    @classmethod
    def from_oscillator(cls, omegas: Sequence[float], hbar: float = 1.0,
                        levels: int = 60, cap: int = SUM_SPECTRUM_CAP) -> "HamiltonianSpec":
        """Sorted levels ``sum_i hbar w_i (k_i + 1/2)`` with ``k_i < levels``, capped."""
        omegas = tuple(float(w) for w in np.atleast_1d(omegas))
        if not omegas or any(w <= 0 for w in omegas) or hbar <= 0:
            raise ValueError("oscillator frequencies and hbar must be positive")
        parts = [hbar * w * (np.arange(levels) + 0.5) for w in omegas]
        g = minkowski_sum(parts, cap)
        return cls(g, oscillator=Oscillator(omegas, float(hbar), int(levels)))

    @classmethod
    def from_matrix(cls, h) -> "HamiltonianSpec":
        from .linalg import hermitian_eig
        w, v = hermitian_eig(h)
        return cls(w[::-1].copy(), basis=v[:, ::-1].copy())

    @property
    def e0(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def dim(self) -> int:
        return int(self.eigenvalues.size)

    def matrix(self) -> np.ndarray:
        if self.basis is None:
            return np.diag(self.eigenvalues).astype(np.complex128)
        return (self.basis * self.eigenvalues) @ self.basis.conj().T

    def energy(self, rho) -> float:
        return float(np.real(np.trace(self.matrix() @ np.asarray(rho))))


def minkowski_sum(spectra: Sequence[np.ndarray], cap: int = SUM_SPECTRUM_CAP) -> np.ndarray:
    """Lowest ``cap`` values of all sums ``g^1_i + g^2_j + ...``, sorted."""
    out = np.sort(np.asarray(spectra[0], dtype=float))[:cap]
    for g in spectra[1:]:
        g = np.sort(np.asarray(g, dtype=float))[:cap]
        s = (out[:, None] + g[None, :]).ravel()
        if s.size > cap:
            s = np.partition(s, cap - 1)[:cap]
        out = np.sort(s)
    return out


def sum_hamiltonian(specs: Sequence[HamiltonianSpec], cap: int = SUM_SPECTRUM_CAP) -> HamiltonianSpec:
    """Spectrum of ``H_1 x I x ... + ... + I x ... x H_m`` (levels capped at ``cap``)."""
    return HamiltonianSpec(minkowski_sum([h.eigenvalues for h in specs], cap))


def sum_hamiltonian_matrix(specs: Sequence[HamiltonianSpec]) -> np.ndarray:
    """Full operator of the sum Hamiltonian in the tensor-product basis."""
    from .linalg import tensor
    mats = [h.matrix() for h in specs]
    eyes = [np.eye(m.shape[0]) for m in mats]
    total = 0
    for s, m in enumerate(mats):
        total = total + tensor(*(m if k == s else eyes[k] for k in range(len(mats))))
    return total


@dataclass(frozen=True)
class GibbsResult:
    weights: np.ndarray
    beta: float
    energy: float
    entropy: float
    tail_weight: float  # Gibbs weight of the highest retained level


def _gibbs_at(g: np.ndarray, beta: float) -> tuple[np.ndarray, float, float]:
    x = -beta * (g - g[0])
    x -= np.max(x)
    p = np.exp(x)
    z = p.sum()
    p /= z
    logp = x - math.log(z)
    ent = float(-np.sum(p * logp))
    return p, float(p @ g), ent


def _beta_scale(g: np.ndarray) -> float:
    gaps = g - g[0]
    pos = gaps[gaps > 1e-12 * max(1.0, abs(g[-1]))]
    return float(pos[0]) if pos.size else 1.0


def gibbs_state(h: HamiltonianSpec, energy: float) -> GibbsResult:
    """Gibbs weights ``exp(-beta g_i)/Z`` whose mean energy equals ``energy``.

    ``beta`` is found by bisection on ``[-50, 50]`` divided by the first
    excitation gap; energies outside the reachable range are clamped to
    the corresponding endpoint.
    """
    g = h.eigenvalues
    if energy <= g[0]:
        raise ValueError(f"energy {energy} must exceed the ground energy {g[0]}")
    bmax = BETA_RANGE / _beta_scale(g)
    lo, hi = -bmax, bmax
    # mean energy decreases in beta
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        _, e, _ = _gibbs_at(g, mid)
        if e > energy:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, abs(mid)):
            break
    beta = 0.5 * (lo + hi)
    p, e, ent = _gibbs_at(g, beta)
    return GibbsResult(p, beta, e, max(ent, 0.0), float(p[-1]))


def max_entropy_F(h: HamiltonianSpec, energy: float) -> float:
    """Largest entropy among states with mean energy at most ``energy``."""
    g = h.eigenvalues
    scale = 1e-12 * max(1.0, abs(g[0]))
    if energy < g[0] - scale:
        raise ValueError(f"energy {energy} is below the ground energy {g[0]}")
    if energy <= g[0] + scale:
        return math.log(int(np.sum(g <= g[0] + scale)))
    if energy >= float(np.mean(g)):
        log.debug("energy %g above uniform mean; entropy capped at ln %d", energy, g.size)
        return math.log(g.size)
    return gibbs_state(h, energy).entropy


def max_entropy_F_bar(h: HamiltonianSpec, energy: float) -> float:
    """``F(E + E0)``: the same function with energy measured from the ground level."""
    return max_entropy_F(h, energy + h.e0)


def oscillator_F(frequencies: Sequence[float], energy: float, variant: str = "F",
                 hbar: float = 1.0) -> float:
    """Closed-form upper bounds on the entropy of an ``l``-mode oscillator.

    ``variant="F"``:  ``l ln((E + E0)/(l E*)) + l``;
    ``variant="F-bar"``: the same at ``E + E0``, i.e. ``l ln((E + 2 E0)/(l E*)) + l``.
    """
    osc = Oscillator(tuple(float(w) for w in np.atleast_1d(frequencies)), float(hbar))
    if any(w <= 0 for w in osc.omegas) or hbar <= 0:
        raise ValueError("frequencies and hbar must be positive")
    if energy <= 0:
        raise ValueError("energy must be positive")
    shift = {"F": osc.e0, "F-bar": 2.0 * osc.e0}.get(variant)
    if shift is None:
        raise ValueError(f"unknown variant {variant!r}")
    l = osc.modes
    return l * math.log((energy + shift) / (l * osc.e_star)) + l


@dataclass(frozen=True)
class FFunction:
    """An upper bound ``F_hat(E)`` for ``F_H(E + E0)``, with ``E`` counted from the ground level.

    ``kind="numeric-gibbs"`` evaluates the Gibbs entropy of ``hamiltonian``;
    ``kind="oscillator-closed-form"`` uses the oscillator ``F-bar`` formula.
    """

    kind: str
    hamiltonian: HamiltonianSpec | None = None
    oscillator: Oscillator | None = None

    @classmethod
    def numeric(cls, h: HamiltonianSpec) -> "FFunction":
        return cls("numeric-gibbs", hamiltonian=h)

    @classmethod
    def for_oscillator(cls, omegas: Sequence[float], hbar: float = 1.0) -> "FFunction":
        return cls("oscillator-closed-form",
                   oscillator=Oscillator(tuple(float(w) for w in np.atleast_1d(omegas)), hbar))

    @property
    def ground_energy(self) -> float:
        if self.kind == "numeric-gibbs":
            return self.hamiltonian.e0
        return self.oscillator.e0

    def __call__(self, energy: float) -> float:
        if self.kind == "numeric-gibbs":
            return max_entropy_F_bar(self.hamiltonian, energy)
        if self.kind == "oscillator-closed-form":
            return oscillator_F(self.oscillator.omegas, energy, "F-bar", self.oscillator.hbar)
        raise ValueError(f"unknown F-function kind {self.kind!r}")

    def check_conditions(self, grid: Sequence[float] | None = None) -> dict[str, bool]:
        """Grid checks: nondecreasing, concave, and ``F(E)/sqrt(E)`` nonincreasing."""
        grid = np.geomspace(0.1, 1000.0, 200) if grid is None else np.asarray(grid, float)
        vals = np.array([self(e) for e in grid])
        ratio = vals / np.sqrt(grid)
        slopes = np.diff(vals) / np.diff(grid)
        return {
            "nondecreasing": bool(np.all(np.diff(vals) >= -1e-12)),
            "concave": bool(np.all(np.diff(slopes) <= 1e-9)),
            "ratio_nonincreasing": bool(np.all(np.diff(ratio) <= 1e-12)),
        }


# ---------------------------------------------------------------------------
# FA-property checks


@dataclass(frozen=True)
class FACheck:
    energy: float
    energy_remainder: float
    hcond_plus: str  # "holds" | "fails" | "inconclusive"
    betas: np.ndarray
    log_values: np.ndarray  # beta * ln sum_i exp(-beta g_i); inf when the sum diverges
    slope: float

    @property
    def fa_property(self) -> str:
        if math.isinf(self.energy) or self.hcond_plus == "fails":
            return "fails"
        return self.hcond_plus


def _spectrum_tail(kind: str, params: tuple, n: int, lam_n: float) -> Callable[[float], float]:
    if kind == "geometric":
        (q,) = params
        return lambda x: lam_n * q ** (x - n)
    if kind == "power-law":
        (alpha,) = params
        return lambda x: lam_n * (n / x) ** alpha
    if kind == "log-corrected":
        alpha, q = params
        return lambda x: lam_n * (n / x) ** alpha * (math.log(n) / math.log(x)) ** q
    raise ValueError(f"unknown spectrum tail model {kind!r}")


def _weight_fn(kind: str, params: tuple) -> Callable[[float], float]:
    if kind == "log-power":
        a, q = params
        return lambda x: a * math.log(x) ** q if x > 1 else 0.0
    if kind == "power":
        a, p = params
        return lambda x: a * x ** p
    raise ValueError(f"unknown weight model {kind!r}")


def _energy_tail_converges(spec_kind, spec_params, w_kind, w_params) -> bool:
    if spec_kind == "geometric":
        return True
    alpha = spec_params[0]
    qs = spec_params[1] if spec_kind == "log-corrected" else 0.0
    if w_kind == "log-power":
        a_exp, log_exp = alpha, qs - w_params[1]
    else:
        a_exp, log_exp = alpha - w_params[1], qs
    return a_exp > 1 or (a_exp == 1 and log_exp > 1)


def _energy_tail(spec_kind, spec_params, n, lam_n, w_kind, w_params) -> tuple[float, float]:
    lam = _spectrum_tail(spec_kind, spec_params, n, lam_n)
    g = _weight_fn(w_kind, w_params)
    term = lambda x: lam(x) * g(x)  # noqa: E731
    if spec_kind == "geometric":
        total, i = 0.0, n + 1
        while True:
            t = term(i)
            total += t
            if t < 1e-18 * max(total, 1e-300) or i > n + 100_000:
                return total, 0.0
            i += 1
    # sum explicitly until the terms decrease, then integrate in u = ln x with
    # the integrand assembled in log space (x itself overflows far out)
    i, total = n + 1, 0.0
    while i < n + 100_000 and term(i + 1) >= term(i):
        total += term(i)
        i += 1
    alpha = spec_params[0]
    qs = spec_params[1] if spec_kind == "log-corrected" else 0.0
    c = math.log(lam_n) + alpha * math.log(n)
    ln_ln_n = math.log(math.log(n)) if qs else 0.0

    def integrand(u):
        log_lam = c + (1.0 - alpha) * u + (qs * (ln_ln_n - math.log(u)) if qs else 0.0)
        if w_kind == "log-power":
            a, q = w_params
            return a * u ** q * math.exp(log_lam)
        a, p = w_params
        return a * math.exp(log_lam + p * u)

    val, _ = integrate.quad(integrand, math.log(i), np.inf, limit=500)
    first = term(i)
    return total + val + 0.5 * first, 0.5 * first


def _log_partition(weights: np.ndarray, w_kind: str | None, w_params: tuple, beta: float) -> float:
    """``ln sum_i exp(-beta g_i)`` over head and modelled tail; ``inf`` if divergent."""
    head = -beta * weights
    top = float(np.max(head))
    z_head = float(np.sum(np.exp(head - top)))
    if w_kind is None:
        return top + math.log(z_head)
    n = weights.size
    if w_kind == "log-power":
        a, q = w_params
        if q < 1 or (q == 1 and beta * a <= 1):
            return math.inf
        phi = lambda u: u - beta * a * u ** q  # noqa: E731
        u0 = math.log(n + 1)
        ustar = (1.0 / (q * beta * a)) ** (1.0 / (q - 1)) if q > 1 else u0
        ustar = max(ustar, u0)
    elif w_kind == "power":
        a, p = w_params
        phi = lambda u: u - beta * a * math.exp(p * u)  # noqa: E731
        u0 = math.log(n + 1)
        ustar = max(u0, math.log(1.0 / (p * beta * a)) / p)
    else:
        raise ValueError(f"unknown weight model {w_kind!r}")
    pmax = phi(ustar)
    uend = ustar + 1.0
    while phi(uend) > pmax - 60.0:
        uend = ustar + 2.0 * (uend - ustar)
    pts = [ustar] if u0 < ustar < uend else None
    val, _ = integrate.quad(lambda u: math.exp(phi(u) - pmax), u0, uend, points=pts, limit=500)
    tail_log = pmax + math.log(val) if val > 0 else -math.inf
    hi = max(top, tail_log)
    return hi + math.log(z_head * math.exp(top - hi) + math.exp(tail_log - hi))


def fa_check(spectrum: Sequence[float], weights: Sequence[float],
             spectrum_tail: tuple | None = None, weights_tail: tuple | None = None,
             betas: Sequence[float] | None = None) -> FACheck:
    """Numerical evidence for the FA-property of a spectrum with a given weight sequence.

    ``spectrum`` and ``weights`` are finite heads of equal length. Tails are
    declared as ``("geometric", q)``, ``("power-law", alpha)`` or
    ``("log-corrected", alpha, q)`` for the spectrum (continued from its last
    entry) and ``("log-power", a, q)`` for ``g_i = a ln^q i`` or
    ``("power", a, p)`` for ``g_i = a i^p``.
    """
    lam = np.asarray(spectrum, dtype=float)
    g = np.asarray(weights, dtype=float)
    if lam.ndim != 1 or lam.size == 0 or g.shape != lam.shape:
        raise ValueError("spectrum and weights must be nonempty with equal length")
    if np.any(lam < 0) or np.any(np.diff(lam) > 1e-15) or lam.sum() > 1 + 1e-10:
        raise ValueError("spectrum must be nonnegative, nonincreasing and sum to at most 1")
    if np.any(g < 0) or np.any(np.diff(g) < 0):
        raise ValueError("weights must be nonnegative and nondecreasing")

    energy, remainder = float(lam @ g), 0.0
    if spectrum_tail is not None:
        if weights_tail is None:
            raise ValueError("a spectrum tail needs a weights tail")
        sk, sp = spectrum_tail[0], tuple(spectrum_tail[1:])
        wk, wp = weights_tail[0], tuple(weights_tail[1:])
        if _energy_tail_converges(sk, sp, wk, wp):
            tail, remainder = _energy_tail(sk, sp, lam.size, float(lam[-1]), wk, wp)
            energy += tail
        else:
            energy = math.inf

    betas = np.asarray([2.0 ** -k for k in range(1, 21)] if betas is None else betas, float)
    wk = weights_tail[0] if weights_tail is not None else None
    wp = tuple(weights_tail[1:]) if weights_tail is not None else ()
    vals = np.array([b * _log_partition(g, wk, wp, b) for b in betas])
    slope = math.nan
    if np.any(np.isinf(vals)):
        verdict = "fails"
    else:
        tail_b, tail_v = betas[-5:], vals[-5:]
        if np.all(tail_v > 0):
            slope = float(np.polyfit(np.log(tail_b), np.log(tail_v), 1)[0])
        if tail_v[-1] < 1e-2 and slope > 0.05:
            verdict = "holds"
        elif slope < -0.05:
            verdict = "fails"
        else:
            verdict = "inconclusive"
    return FACheck(energy, remainder, verdict, betas, vals, slope)


def log_power_weights(n: int, q: float = 3.0, a: float = 1.0) -> np.ndarray:
    """``g_i = a ln^q i`` for ``i = 1..n`` (so ``g_1 = 0``)."""
    return a * np.log(np.arange(1, n + 1, dtype=float)) ** q


# ---------------------------------------------------------------------------
# continuity bounds


def cb_finite_dim(epsilon: float, dims: Sequence[int]) -> float:
    """``eps ln dim(A_1...A_{n-1}) + g(eps)``; ``dims`` are the first n-1 local dimensions."""
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    return epsilon * math.log(math.prod(dims)) + g_func(epsilon)


def cb_energy(epsilon: float, energy: float, m: int, n: int,
              party_hamiltonians: Sequence[HamiltonianSpec],
              F_hat: Callable[[float], float] | None = None) -> float:
    """Energy-constrained bound ``C_m sqrt(2 eps) F_bar(m E_bar / eps) + g(sqrt(2 eps))``.

    ``F_bar`` belongs to the sum Hamiltonian of the first ``m`` parties and is
    evaluated numerically unless ``F_hat`` (an upper bound taking energy above
    the ground level) is supplied; ``epsilon > 1`` requires ``F_hat``.
    """
    if m not in (n - 1, n) or n < 2:
        raise ValueError("need n >= 2 and m in {n-1, n}")
    if len(party_hamiltonians) < m:
        raise ValueError(f"need {m} party Hamiltonians")
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    if epsilon > 1 and F_hat is None:
        raise ValueError("epsilon > 1 requires an F_hat upper bound")
    if epsilon == 0:
        return 0.0
    hm = sum_hamiltonian(party_hamiltonians[:m])
    e_bar = energy - hm.e0 / m
    if e_bar < 0:
        raise ValueError("energy is below the per-party ground energy mean")
    c_m = (n - 1) / m
    F = F_hat if F_hat is not None else (lambda e: max_entropy_F_bar(hm, e))
    root = math.sqrt(2 * epsilon)
    return c_m * root * F(m * e_bar / epsilon) + g_func(root)


def cb_energy_iid(epsilon: float, energy: float, m: int, n: int, t: float,
                  F_hat: FFunction) -> float:
    """Bound for identical subsystems with free parameter ``t`` in ``(0, 1/eps)``."""
    return sum(cb_energy_iid_terms(epsilon, energy, m, n, t, F_hat).values())


def cb_energy_iid_terms(epsilon, energy, m, n, t, F_hat: FFunction) -> dict[str, float]:
    if m not in (n - 1, n) or n < 2:
        raise ValueError("need n >= 2 and m in {n-1, n}")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if not 0 < t < 1 / epsilon:
        raise ValueError(f"t must lie in (0, 1/eps) = (0, {1 / epsilon})")
    e_bar = energy - F_hat.ground_energy
    if e_bar <= 0:
        raise ValueError("energy must exceed the ground energy")
    c_m = (n - 1) / m
    et = epsilon * t
    a = epsilon + et ** 2
    b = math.sqrt(2 * et)
    return {
        "term1": m * c_m * a * F_hat(m * e_bar / et ** 2),
        "term2": m * c_m * 2 * b * F_hat(e_bar / et),
        "g1": g_func(a),
        "g2": 2 * g_func(b),
    }


def optimize_t(epsilon: float, energy: float, m: int, n: int, F_hat: FFunction,
               points: int = 200) -> tuple[float, float]:
    """Minimize :func:`cb_energy_iid` over a log grid ``t in [1e-4/eps, 0.9999/eps]``."""
    ts = np.geomspace(1e-4 / epsilon, 0.9999 / epsilon, points)
    vals = [cb_energy_iid(epsilon, energy, m, n, t, F_hat) for t in ts]
    k = int(np.argmin(vals))
    return float(ts[k]), float(vals[k])


def cb_oscillator_terms(epsilon: float, energy: float, t: float, frequencies: Sequence[float],
                        m: int, n: int, hbar: float = 1.0) -> dict[str, float]:
    """Explicit logarithmic bound for ``l``-mode oscillators, split into its four terms."""
    osc = Oscillator(tuple(float(w) for w in np.atleast_1d(frequencies)), float(hbar))
    if m not in (n - 1, n) or n < 2:
        raise ValueError("need n >= 2 and m in {n-1, n}")
    if energy <= osc.e0:
        raise ValueError("energy must exceed the oscillator ground energy")
    if epsilon <= 0 or not 0 < t < 1 / epsilon:
        raise ValueError("need epsilon > 0 and t in (0, 1/eps)")
    l, e0, es = osc.modes, osc.e0, osc.e_star
    c_m = (n - 1) / m
    e_bar = energy - e0
    et = epsilon * t
    denom = math.exp(-1) * l * es
    return {
        "log1": m * c_m * (epsilon + et ** 2) * l * math.log((m * e_bar / et ** 2 + 2 * e0) / denom),
        "log2": 2 * m * c_m * math.sqrt(2 * et) * l * math.log((e_bar / et + 2 * e0) / denom),
        "g1": g_func(epsilon + et ** 2),
        "g2": 2 * g_func(math.sqrt(2 * et)),
    }


def cb_oscillator(epsilon: float, energy: float, t: float, frequencies: Sequence[float],
                  m: int, n: int, hbar: float = 1.0) -> float:
    return sum(cb_oscillator_terms(epsilon, energy, t, frequencies, m, n, hbar).values())
