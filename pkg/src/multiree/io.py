"""Versioned JSON file formats for operators, ensembles, Hamiltonians and results.

Every object carries ``format`` and ``version`` fields. Complex arrays are
stored as separate ``re``/``im`` row-major nested lists, and every float is
written with 17 significant digits so files re-ingest bit for bit. Output is
a pure function of the data (sorted keys are not used; field order is fixed
by the writers), which keeps repeated runs byte-identical.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .energy import HamiltonianSpec, Oscillator
from .linalg import check_layout, ket_to_dm
from .separable import ProductEnsemble

VERSION = 1
OPERATOR = "multiree/operator"
VECTOR = "multiree/vector"
ENSEMBLE = "multiree/ensemble"
HAMILTONIAN = "multiree/hamiltonian"
RESULT = "multiree/result"


class FormatError(ValueError):
    """Malformed or unsupported input file."""


# ---------------------------------------------------------------------------
# text encoding


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def dumps(obj: Any, indent: int = 1, _level: int = 0) -> str:
    """JSON text with 17-significant-digit floats.

    Lists of scalars stay on one line; nested containers are indented.
    """
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot encode {type(obj).__name__}")


def write(path: str | Path, obj: Any) -> None:
    Path(path).write_text(dumps(obj) + "\n", encoding="utf-8")


def read(path: str | Path) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from exc


def _header(kind: str) -> dict:
    return {"format": kind, "version": VERSION}


def _check_header(obj: dict, kinds: tuple[str, ...]) -> str:
    if not isinstance(obj, dict):
        raise FormatError("expected a JSON object")
    kind = obj.get("format")
    if kind not in kinds:
        raise FormatError(f"expected format in {kinds}, got {kind!r}")
    if obj.get("version") != VERSION:
        raise FormatError(f"unsupported version {obj.get('version')!r}")
    return kind


# ---------------------------------------------------------------------------
# arrays


def _complex_fields(a: np.ndarray) -> dict:
    a = np.asarray(a, dtype=np.complex128)
    return {"re": a.real.tolist(), "im": a.imag.tolist()}


def _complex_from(obj: dict, ndim: int) -> np.ndarray:
    try:
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad re/im arrays: {exc}") from exc
    if re.shape != im.shape or re.ndim != ndim:
        raise FormatError(f"re/im must be matching {ndim}-d arrays")
    return re + 1j * im


def operator_to_obj(m: np.ndarray, dims=None) -> dict:
    m = np.asarray(m)
    dims = check_layout(dims if dims is not None else (m.shape[0],), m.shape[0])
    return {**_header(OPERATOR), "dims": list(dims), **_complex_fields(m)}


def vector_to_obj(v: np.ndarray, dims=None) -> dict:
    v = np.asarray(v)
    dims = check_layout(dims if dims is not None else (v.size,), v.size)
    return {**_header(VECTOR), "dims": list(dims), **_complex_fields(v)}


def obj_to_array(obj: dict) -> tuple[np.ndarray, tuple[int, ...]]:
    """Operator or vector object to ``(array, dims)``."""
    kind = _check_header(obj, (OPERATOR, VECTOR))
    a = _complex_from(obj, 2 if kind == OPERATOR else 1)
    if kind == OPERATOR and a.shape[0] != a.shape[1]:
        raise FormatError("operator must be square")
    try:
        dims = check_layout(obj.get("dims", [a.shape[0]]), a.shape[0])
    except ValueError as exc:
        raise FormatError(str(exc)) from exc
    return a, dims


def load_state(path: str | Path) -> tuple[np.ndarray, tuple[int, ...]]:
    """Density matrix and layout from an operator or (pure) vector file."""
    obj = read(path)
    a, dims = obj_to_array(obj)
    if a.ndim == 1:
        a = ket_to_dm(a)
    return a, dims


def load_vector(path: str | Path) -> tuple[np.ndarray, tuple[int, ...]]:
    a, dims = obj_to_array(read(path))
    if a.ndim != 1:
        raise FormatError("expected a vector file")
    return a, dims


def save_operator(path, m, dims=None) -> None:
    write(path, operator_to_obj(m, dims))


def save_vector(path, v, dims=None) -> None:
    write(path, vector_to_obj(v, dims))


# ---------------------------------------------------------------------------
# ensembles


def ensemble_to_obj(e: ProductEnsemble) -> dict:
    return {**_header(ENSEMBLE), "dims": list(e.dims), "weights": e.weights.tolist(),
            "atoms": [[_complex_fields(a) for a in atom] for atom in e.atoms]}


def obj_to_ensemble(obj: dict) -> ProductEnsemble:
    _check_header(obj, (ENSEMBLE,))
    try:
        atoms = tuple(tuple(_complex_from(a, 2) for a in atom) for atom in obj["atoms"])
        return ProductEnsemble(tuple(obj["dims"]), np.asarray(obj["weights"], float), atoms)
    except KeyError as exc:
        raise FormatError(f"missing field {exc}") from exc
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def save_ensemble(path, e: ProductEnsemble) -> None:
    write(path, ensemble_to_obj(e))


def load_ensemble(path) -> ProductEnsemble:
    return obj_to_ensemble(read(path))


# ---------------------------------------------------------------------------
# Hamiltonians


def hamiltonian_to_obj(h: HamiltonianSpec) -> dict:
    out = _header(HAMILTONIAN)
    if h.oscillator is not None:
        osc = h.oscillator
        out["oscillator"] = {"l": osc.modes, "omegas": list(osc.omegas), "hbar": osc.hbar}
        out["truncation"] = osc.levels
        return out
    out["eigenvalues"] = h.eigenvalues.tolist()
    if h.basis is not None:
        out["basis"] = _complex_fields(h.basis)
    return out


def obj_to_hamiltonian(obj: dict) -> HamiltonianSpec:
    """``{eigenvalues: [...]}`` or ``{oscillator: {l, omegas, hbar}, truncation}``.

    The ``format``/``version`` header is optional here so hand-written
    spectra are accepted; ``truncation`` is the number of levels per mode
    (default 60).
    """
    if not isinstance(obj, dict):
        raise FormatError("expected a JSON object")
    if "format" in obj:
        _check_header(obj, (HAMILTONIAN,))
    try:
        if "oscillator" in obj:
            osc = obj["oscillator"]
            omegas = [float(w) for w in osc["omegas"]]
            if "l" in osc and int(osc["l"]) != len(omegas):
                raise FormatError("oscillator 'l' must equal the number of frequencies")
            return HamiltonianSpec.from_oscillator(omegas, float(osc.get("hbar", 1.0)),
                                                   levels=int(obj.get("truncation", 60)))
        basis = _complex_from(obj["basis"], 2) if "basis" in obj else None
        return HamiltonianSpec(np.asarray(obj["eigenvalues"], float), basis=basis)
    except KeyError as exc:
        raise FormatError(f"missing field {exc}") from exc
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def load_hamiltonian(path) -> HamiltonianSpec:
    return obj_to_hamiltonian(read(path))


def oscillator_obj(omegas, hbar: float = 1.0, truncation: int = 60) -> dict:
    osc = Oscillator(tuple(float(w) for w in omegas), float(hbar))
    return {"oscillator": {"l": osc.modes, "omegas": list(osc.omegas), "hbar": osc.hbar},
            "truncation": truncation}


# ---------------------------------------------------------------------------
# results


def result_obj(kind: str, seed: int | None, payload: dict) -> dict:
    out = {**_header(RESULT), "kind": kind}
    if seed is not None:
        out["seed"] = int(seed)
    out.update(payload)
    return out


def solve_result_payload(res) -> dict:
    return {"value": res.value, "gap": res.gap, "lower": res.lower,
            "iterations": res.iterations, "converged": bool(res.converged),
            "ensemble": ensemble_to_obj(res.ensemble)}


def audit_payload(report) -> dict:
    return {"passed": report.passed,
            "records": [{"name": r.name, "lhs": r.lhs, "rhs": r.rhs, "slack": r.slack,
                         "pass": r.passed} for r in report.records]}
