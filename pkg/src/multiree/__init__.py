"""Multipartite relative entropy of entanglement and related entropic bounds."""
from __future__ import annotations

from .approx import approx_map, theorem1_bound, truncation_experiment
from .energy import (FFunction, HamiltonianSpec, cb_energy, cb_energy_iid, cb_finite_dim,
                     cb_oscillator, fa_check, gibbs_state, max_entropy_F, oscillator_F)
from .entropy import (conditional_entropy_ext, mutual_information, relative_entropy,
                      von_neumann_entropy)
from .linalg import partial_trace, tensor, trace_distance
from .ree import (SolveResult, audit_state, energy_constrained_ree, estimate_ree, lmo_product,
                  ree_lower_bounds)
from .separable import ProductEnsemble, assemble, lemma_omega_state

__version__ = "0.1.0"

__all__ = [
    "FFunction", "HamiltonianSpec", "ProductEnsemble", "SolveResult", "approx_map", "assemble",
    "audit_state", "cb_energy", "cb_energy_iid", "cb_finite_dim", "cb_oscillator",
    "conditional_entropy_ext", "energy_constrained_ree", "estimate_ree", "fa_check",
    "gibbs_state", "lemma_omega_state", "lmo_product", "max_entropy_F", "mutual_information",
    "oscillator_F", "partial_trace", "ree_lower_bounds", "relative_entropy", "tensor",
    "theorem1_bound", "trace_distance", "truncation_experiment", "von_neumann_entropy",
]
