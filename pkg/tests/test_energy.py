from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from multiree.energy import (FFunction, HamiltonianSpec, cb_energy, cb_energy_iid,
                             cb_energy_iid_terms, cb_finite_dim, cb_oscillator,
                             cb_oscillator_terms, fa_check, gibbs_state, log_power_weights,
                             max_entropy_F, minkowski_sum, optimize_t, oscillator_F,
                             sum_hamiltonian, sum_hamiltonian_matrix)
from multiree.entropy import g_func

LN2 = math.log(2)
QUBIT = HamiltonianSpec(np.array([0.0, 1.0]))
QUTRIT = HamiltonianSpec(np.array([0.0, 0.7, 2.0]))
OSC = HamiltonianSpec.from_oscillator([1.0], levels=60)

# cb_energy_iid with the one-mode oscillator F-bar (hbar w = 1), n=2, m=1, E=2,
# eps=0.01, t=10; checked by hand: 0.02(ln 151 + 1) + 2 sqrt(0.2)(ln 16 + 1)
# + g(0.02) + 2 g(sqrt(0.2))
GOLDEN_IID = 5.382749395744598


def bosonic_entropy(n: float) -> float:
    return (n + 1) * math.log(n + 1) - n * math.log(n) if n > 0 else 0.0


def test_spectrum_must_be_sorted():
    with pytest.raises(ValueError):
        HamiltonianSpec(np.array([1.0, 0.0]))


def test_oscillator_levels():
    h = HamiltonianSpec.from_oscillator([1.0, 2.0], levels=4)
    np.testing.assert_allclose(h.eigenvalues[:4], [1.5, 2.5, 3.5, 3.5])
    assert h.oscillator.modes == 2
    assert h.oscillator.e_star == pytest.approx(math.sqrt(2))


def test_minkowski_sum_cap():
    s = minkowski_sum([np.arange(10.0), np.arange(10.0)], cap=5)
    np.testing.assert_allclose(s, [0, 1, 1, 2, 2])


def test_sum_hamiltonian_matrix_spectrum():
    m = sum_hamiltonian_matrix([QUBIT, QUTRIT])
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(m)),
                               sum_hamiltonian([QUBIT, QUTRIT]).eigenvalues, atol=1e-14)


def test_from_matrix_round_trip():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    a = a + a.conj().T
    np.testing.assert_allclose(HamiltonianSpec.from_matrix(a).matrix(), a, atol=1e-12)


def test_gibbs_half_energy():
    res = gibbs_state(QUBIT, 0.5)
    assert res.beta == pytest.approx(0, abs=1e-12)
    np.testing.assert_allclose(res.weights, [0.5, 0.5], atol=1e-12)


def test_gibbs_quarter_energy():
    res = gibbs_state(QUBIT, 0.25)
    assert res.beta == pytest.approx(math.log(3), abs=1e-10)
    np.testing.assert_allclose(res.weights, [0.75, 0.25], atol=1e-12)


def test_gibbs_ground_limit():
    res = gibbs_state(QUTRIT, 1e-9)
    assert res.weights[0] > 1 - 1e-8
    assert res.entropy < 1e-6


def test_gibbs_rejects_ground_energy():
    with pytest.raises(ValueError):
        gibbs_state(QUBIT, 0.0)


@pytest.mark.parametrize("energy", [0.5, 0.75, 3.0])
def test_F_qubit_cap(energy):
    assert max_entropy_F(QUBIT, energy) == pytest.approx(LN2)


@pytest.mark.parametrize("n", [0.5, 1.0, 2.0])
def test_F_truncated_oscillator(n):
    assert max_entropy_F(OSC, n + 0.5) == pytest.approx(bosonic_entropy(n), abs=1e-6)


@pytest.mark.parametrize("energy", [1.0, 2.0, 5.0, 10.0])
def test_F_dominated_by_closed_form(energy):
    assert max_entropy_F(OSC, energy) <= oscillator_F([1.0], energy, "F")


def test_oscillator_F_values():
    assert oscillator_F([1.0], 1.5, "F") == pytest.approx(LN2 + 1)
    assert oscillator_F([1.0], 1.5, "F-bar") == pytest.approx(math.log(2.5) + 1)


def test_oscillator_F_bad_variant():
    with pytest.raises(ValueError):
        oscillator_F([1.0], 1.0, "G")


def test_F_bar_ratio_nonincreasing():
    F = FFunction.for_oscillator([1.0])
    assert all(F.check_conditions().values())


@pytest.mark.parametrize("h", [QUBIT, QUTRIT, HamiltonianSpec.from_oscillator([1.0], levels=30)])
def test_F_concave(h):
    grid = np.linspace(h.e0 + 0.01, h.e0 + 3.0, 120)
    vals = np.array([max_entropy_F(h, e) for e in grid])
    assert np.all(np.diff(vals, 2) <= 1e-8)


def test_fa_check_geometric_holds():
    n = 100
    lam = 0.5 * 0.5 ** np.arange(n)
    res = fa_check(lam, log_power_weights(n, 3.0), ("geometric", 0.5), ("log-power", 1.0, 3.0))
    assert math.isfinite(res.energy)
    assert res.fa_property == "holds"


def test_fa_check_log_weights_fail():
    n = 100
    lam = 0.5 * 0.5 ** np.arange(n)
    res = fa_check(lam, log_power_weights(n, 1.0), ("geometric", 0.5), ("log-power", 1.0, 1.0))
    assert res.hcond_plus == "fails"


def _log_corrected(n, alpha, q):
    i = np.arange(1, n + 1, dtype=float)
    raw = (i + 1) ** -alpha * np.log(i + 1) ** -q
    return raw / (raw.sum() * 1.5)


def test_fa_check_heavy_tail_energy_diverges():
    n = 200
    lam = _log_corrected(n, 1.0, 2.5)
    res = fa_check(lam, log_power_weights(n, 2.25), ("log-corrected", 1.0, 2.5),
                   ("log-power", 1.0, 2.25))
    assert res.energy == math.inf
    assert res.fa_property == "fails"


def test_fa_check_log_corrected_energy_finite():
    n = 200
    lam = _log_corrected(n, 2.0, 2.5)
    res = fa_check(lam, log_power_weights(n, 3.0), ("log-corrected", 2.0, 2.5),
                   ("log-power", 1.0, 3.0))
    assert math.isfinite(res.energy) and res.energy > float(lam @ log_power_weights(n, 3.0))


def test_fa_check_tail_matches_partial_sum():
    # long explicit partial sum vs. head + modelled tail for lambda_i = c i^-3
    n, big = 200, 200_000
    i = np.arange(1, big + 1, dtype=float)
    lam = 0.5 * i ** -3.0
    g = np.log(i) ** 3
    res = fa_check(lam[:n], g[:n], ("power-law", 3.0), ("log-power", 1.0, 3.0))
    assert res.energy == pytest.approx(float(lam @ g), rel=1e-6)


def test_fa_check_rejects_bad_input():
    with pytest.raises(ValueError):
        fa_check([0.2, 0.8], [0.0, 1.0])


def test_cb_finite_dim_values():
    assert cb_finite_dim(0.0, [2]) == 0.0
    assert cb_finite_dim(1.0, [2]) == pytest.approx(3 * LN2)


def test_cb_energy_zero():
    assert cb_energy(0.0, 0.5, 1, 2, [QUBIT, QUBIT]) == 0.0


def test_cb_energy_direct_arithmetic():
    expected = 0.4 * LN2 + g_func(0.4)
    assert cb_energy(0.08, 0.5, 1, 2, [QUBIT, QUBIT]) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(1.1148, abs=1e-4)


def test_cb_energy_vanishes():
    vals = [cb_energy(e, 0.75, 1, 2, [QUBIT, QUBIT]) for e in np.geomspace(0.5, 1e-10, 20)]
    assert all(b <= a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-3


def test_cb_energy_bad_m():
    with pytest.raises(ValueError):
        cb_energy(0.1, 0.5, 3, 2, [QUBIT, QUBIT])


def test_cb_energy_iid_golden():
    F = FFunction.for_oscillator([1.0])
    assert cb_energy_iid(0.01, 2.0, 1, 2, 10.0, F) == pytest.approx(GOLDEN_IID, rel=1e-12)


def test_cb_energy_iid_bad_t():
    with pytest.raises(ValueError):
        cb_energy_iid(0.1, 2.0, 1, 2, 10.0, FFunction.for_oscillator([1.0]))


def test_cb_energy_iid_vanishes_fixed_t():
    F = FFunction.for_oscillator([1.0])
    vals = [cb_energy_iid(e, 2.0, 1, 2, 1.0, F) for e in (1e-2, 1e-4, 1e-6, 1e-8)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-2


def test_optimize_t_is_minimum():
    F = FFunction.for_oscillator([1.0])
    t, v = optimize_t(0.01, 2.0, 1, 2, F)
    for s in np.geomspace(1e-4 / 0.01, 0.9999 / 0.01, 200):
        assert v <= cb_energy_iid(0.01, 2.0, 1, 2, s, F) + 1e-12
    assert v == pytest.approx(cb_energy_iid(0.01, 2.0, 1, 2, t, F))


@pytest.mark.parametrize("eps,t", [(0.01, 10.0), (0.05, 1.0), (0.001, 300.0), (0.2, 0.5),
                                   (0.1, 9.0)])
def test_oscillator_matches_iid(eps, t):
    F = FFunction.for_oscillator([1.0, 2.0])
    assert cb_oscillator(eps, 4.0, t, [1.0, 2.0], 1, 2) == pytest.approx(
        cb_energy_iid(eps, 4.0, 1, 2, t, F), abs=1e-12)


def test_oscillator_terms_sum():
    terms = cb_oscillator_terms(0.01, 2.0, 10.0, [1.0], 1, 2)
    assert sum(terms.values()) == pytest.approx(cb_oscillator(0.01, 2.0, 10.0, [1.0], 1, 2))
    assert sum(terms.values()) == pytest.approx(GOLDEN_IID, rel=1e-12)


def test_oscillator_vanishes_fixed_t():
    vals = [cb_oscillator(e, 2.0, 1.0, [1.0], 1, 2) for e in (1e-2, 1e-5, 1e-8)]
    assert vals[-1] < vals[0] and vals[-1] < 1e-2


def test_numeric_F_function_iid():
    F = FFunction.numeric(QUTRIT)
    terms = cb_energy_iid_terms(0.01, 1.0, 1, 2, 5.0, F)
    assert all(v >= 0 for v in terms.values())


@given(st.floats(0.05, 30.0))
def test_F_monotone_in_energy(e):
    assert max_entropy_F(OSC, 0.5 + e) <= max_entropy_F(OSC, 0.5 + e * 1.1) + 1e-12
