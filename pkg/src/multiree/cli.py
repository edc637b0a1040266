"""Command-line front end: ``multiree <command> ...``.

Every command writes one result file (``--output``, default stdout) whose
content depends only on the inputs and ``--seed``. Diagnostics go to
stderr through :mod:`logging`; set ``MULTIREE_LOG=DEBUG`` (or INFO,
WARNING, ...) to change verbosity.

Exit codes: 0 success, 2 invalid input, 3 numerical failure (including
non-convergence under ``--strict``).
"""
from __future__ import annotations

import argparse
import csv
import io as _io
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from . import io
from .approx import FUNCTIONALS, truncation_experiment
from .energy import (FFunction, HamiltonianSpec, cb_energy, cb_energy_iid_terms, cb_finite_dim,
                     cb_oscillator_terms, fa_check, gibbs_state, log_power_weights, max_entropy_F,
                     optimize_t)
from .entropy import (conditional_entropy_ext, marginal_entropies, mutual_information,
                      relative_entropy, von_neumann_entropy)
from .linalg import check_density, check_layout, partial_trace, trace_distance
from .ree import audit_state, energy_constrained_ree, estimate_ree
from .separable import assemble, lemma_omega_state

log = logging.getLogger("multiree")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


class NumericalFailure(RuntimeError):
    """A computation finished but did not meet its convergence contract."""


# ---------------------------------------------------------------------------
# argument helpers


def _int_list(text: str) -> list[int]:
    try:
        out = [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _parties(text: str) -> list[int]:
    """1-based party list on the command line, 0-based inside."""
    return [p - 1 for p in _int_list(text)]


def _sweep(text: str) -> tuple[str, np.ndarray]:
    """``name=a:b:n`` -> evenly spaced values (``n`` points, both ends included)."""
    try:
        name, spec = text.split("=", 1)
        a, b, n = spec.split(":")
        return name.strip(), np.linspace(float(a), float(b), int(n))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected name=a:b:n, got {text!r}") from exc


def _load_state(path: str, layout: Sequence[int] | None):
    rho, dims = io.load_state(path)
    if layout is not None:
        dims = check_layout(layout, rho.shape[0])
    return check_density(rho), dims


def _emit(args, obj=None, text: str | None = None) -> None:
    out = text if text is not None else io.dumps(obj) + "\n"
    if args.output in (None, "-"):
        sys.stdout.write(out)
    else:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(out)


def _csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([io._fmt_float(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _pmap(args, fn: Callable, items: Sequence) -> list:
    """Order-preserving map, threaded when ``--jobs > 1``."""
    if args.jobs <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        return list(pool.map(fn, items))


def _check_converged(args, converged: bool, what: str) -> None:
    if not converged:
        msg = f"{what} did not reach the requested tolerance"
        if args.strict:
            raise NumericalFailure(msg)
        log.warning(msg)


# ---------------------------------------------------------------------------
# commands


def cmd_entropy(args) -> None:
    rho, dims = _load_state(args.state, args.layout)
    out = {"entropy": von_neumann_entropy(rho), "marginal_entropies": marginal_entropies(rho, dims)}
    if args.qmi:
        out["mutual_information"] = mutual_information(rho, dims)
    if args.cond is not None:
        try:
            a, b = (int(x) - 1 for x in args.cond.split("|"))
        except ValueError as exc:
            raise ValueError(f"--cond expects A|B with party numbers, got {args.cond!r}") from exc
        if len(dims) != 2 or {a, b} != {0, 1}:
            raise ValueError("--cond needs a bipartite layout and parties 1|2 or 2|1")
        out["conditional_entropy"] = conditional_entropy_ext(rho, dims, conditioned_on=b)
    if args.rel is not None:
        sigma, _ = _load_state(args.rel, dims)
        out["relative_entropy"] = relative_entropy(rho, sigma)
    _emit(args, io.result_obj("entropy", None, {"dims": list(dims), **out}))


def _hamiltonians(paths: Sequence[str] | None, n: int) -> list[HamiltonianSpec]:
    if not paths:
        raise ValueError("--ham is required")
    hams = [io.load_hamiltonian(p) for p in paths]
    if len(hams) == 1:
        hams = hams * n
    if len(hams) != n:
        raise ValueError(f"need one --ham per party (or a single shared one), got {len(hams)}")
    return hams


def cmd_ree(args) -> None:
    rho, dims = _load_state(args.state, args.layout)
    opts = dict(tol=args.tol, max_iter=args.max_iter, restarts=args.restarts, seed=args.seed)
    if args.energy is not None:
        res = energy_constrained_ree(rho, dims, _hamiltonians(args.ham, len(dims)), args.energy, **opts)
    else:
        res = estimate_ree(rho, dims, **opts)
    _check_converged(args, res.converged, "E_R solver")
    payload = {"dims": list(dims), "tol": args.tol, **io.solve_result_payload(res)}
    if args.energy is not None:
        payload["energy"] = args.energy
        payload["lambda"] = res.info.get("lambda", 0.0)
    if args.ensemble_out:
        io.save_ensemble(args.ensemble_out, res.ensemble)
    _emit(args, io.result_obj("ree", args.seed, payload))


def cmd_truncate(args) -> None:
    rho, dims = _load_state(args.state, args.layout)
    rvals = list(range(1, args.rmax + 1))
    table = truncation_experiment(rho, dims, args.subset, args.f, rvals, args.variant,
                                  {"tol": args.tol, "restarts": args.restarts, "seed": args.seed})
    if args.format == "json":
        rows = [{"r": r.r, "c_r": r.c_r, "delta_r": r.delta_r, "value": r.value, "bound": r.bound,
                 "valid_regime": r.valid_regime} for r in table.rows]
        _emit(args, io.result_obj("truncate", args.seed, {
            "dims": list(dims), "subset": [s + 1 for s in table.subset], "functional": args.f,
            "exact": table.exact, "r0": table.r0, "E_S": table.E_S, "rows": rows}))
    else:
        _emit(args, text=table.to_csv())


def _bound_rows(args, evaluate: Callable[[float, float | None], tuple[float, dict]]):
    """Evaluate a bound at one epsilon or across ``--sweep``; returns (eps, t, value, terms) rows."""
    if args.sweep is not None:
        name, values = args.sweep
        if name not in ("epsilon", "eps"):
            raise ValueError("only epsilon sweeps are supported")
        epsilons = [float(v) for v in values]
    else:
        if args.epsilon is None:
            raise ValueError("--epsilon or --sweep is required")
        epsilons = [args.epsilon]
    return _pmap(args, lambda e: (e,) + evaluate(e), epsilons)


def _emit_bounds(args, kind: str, rows, energy: float | None, extra: dict) -> None:
    sweep = args.sweep is not None
    fmt = args.format or ("csv" if sweep else "json")
    term_names = sorted({k for *_, terms in rows for k in terms}, key=lambda k: k)
    if fmt == "csv":
        header = ["epsilon", "t", "E", "value"] + term_names
        body = [[e, (t if t is not None else ""), (energy if energy is not None else ""), v]
                + [terms.get(k, "") for k in term_names] for e, t, v, terms in rows]
        _emit(args, text=_csv_text(header, body))
        return
    out = [{"epsilon": e, "t": t, "value": v, "terms": terms} for e, t, v, terms in rows]
    payload = {"bound": kind, **extra}
    if energy is not None:
        payload["E"] = energy
    if sweep:
        payload["rows"] = out
    else:
        payload.update(out[0])
    _emit(args, io.result_obj("bounds", None, payload))


def cmd_bounds(args) -> None:
    kind = args.kind
    if kind == "finite":
        if args.dims is None:
            raise ValueError("--dims is required")
        rows = _bound_rows(args, lambda e: (None, cb_finite_dim(e, args.dims), {}))
        _emit_bounds(args, kind, rows, None, {"dims": args.dims})
        return
    if args.energy is None:
        raise ValueError("--energy is required")
    E, m, n = args.energy, args.m, args.n
    if kind == "energy":
        hams = _hamiltonians(args.ham, m)
        rows = _bound_rows(args, lambda e: (None, cb_energy(e, E, m, n, hams), {}))
        _emit_bounds(args, kind, rows, E, {"m": m, "n": n})
        return
    if kind == "iid":
        if args.omegas is not None:
            F = FFunction.for_oscillator(args.omegas, args.hbar)
        else:
            F = FFunction.numeric(_hamiltonians(args.ham, 1)[0])

        def ev(e):
            t = args.t if not args.optimize_t else optimize_t(e, E, m, n, F)[0]
            if t is None:
                raise ValueError("--t or --optimize-t is required")
            terms = cb_energy_iid_terms(e, E, m, n, t, F)
            return t, sum(terms.values()), terms
        rows = _bound_rows(args, ev)
        _emit_bounds(args, kind, rows, E, {"m": m, "n": n, "F_hat": F.kind})
        return
    if kind == "oscillator":
        if args.omegas is None:
            raise ValueError("--omegas is required")
        F = FFunction.for_oscillator(args.omegas, args.hbar)

        def ev(e):
            t = args.t if not args.optimize_t else optimize_t(e, E, m, n, F)[0]
            if t is None:
                raise ValueError("--t or --optimize-t is required")
            terms = cb_oscillator_terms(e, E, t, args.omegas, m, n, args.hbar)
            return t, sum(terms.values()), terms
        rows = _bound_rows(args, ev)
        _emit_bounds(args, kind, rows, E, {"m": m, "n": n, "omegas": args.omegas, "hbar": args.hbar})
        return
    raise ValueError(f"unknown bound {kind!r}")


def _parse_model(text: str) -> tuple[str, dict]:
    """``name:key=value:key=value``."""
    name, *parts = text.split(":")
    params = {}
    for p in parts:
        k, _, v = p.partition("=")
        if not _:
            raise ValueError(f"bad model parameter {p!r} in {text!r}")
        params[k.strip()] = float(v)
    return name.strip(), params


def _spectrum_arg(text: str) -> tuple[np.ndarray, tuple | None]:
    if os.path.exists(text):
        obj = io.read(text)
        values = obj["values"] if isinstance(obj, dict) else obj
        tail = tuple(obj["tail"]) if isinstance(obj, dict) and "tail" in obj else None
        return np.asarray(values, float), tail
    name, p = _parse_model(text)
    n = int(p.get("n", 200))
    i = np.arange(1, n + 1, dtype=float)
    if name == "geometric":
        q = p.get("q", 0.5)
        return (1 - q) * q ** (i - 1), ("geometric", q)
    if name in ("power-law", "log-corrected"):
        alpha = p.get("alpha", 2.0)
        q = p.get("q", 0.0) if name == "log-corrected" else 0.0
        if alpha < 1 or (alpha == 1 and q <= 1):
            raise ValueError("spectrum model is not normalizable")
        raw = (i + 1) ** -alpha * np.log(i + 1) ** -q
        # normalized over the tail integral (in u = ln x), so the head has mass < 1
        tail_mass, _ = integrate.quad(lambda u: math.exp((1 - alpha) * u) * u ** -q,
                                      math.log(n + 1.5), np.inf, limit=500)
        total = float(np.sum(raw)) + tail_mass
        tail = ("power-law", alpha) if name == "power-law" else ("log-corrected", alpha, q)
        return raw / total, tail
    raise ValueError(f"unknown spectrum model {name!r}")


def _weights_arg(text: str, n: int) -> tuple[np.ndarray, tuple | None]:
    if os.path.exists(text):
        obj = io.read(text)
        values = obj["values"] if isinstance(obj, dict) else obj
        tail = tuple(obj["tail"]) if isinstance(obj, dict) and "tail" in obj else None
        return np.asarray(values, float), tail
    name, p = _parse_model(text)
    a = p.get("a", 1.0)
    if name == "log-power":
        q = p.get("q", 3.0)
        return log_power_weights(n, q, a), ("log-power", a, q)
    if name == "power":
        pw = p.get("p", 1.0)
        return a * (np.arange(1, n + 1, dtype=float) ** pw - 1.0), ("power", a, pw)
    raise ValueError(f"unknown weights model {name!r}")


def cmd_fa_check(args) -> None:
    lam, stail = _spectrum_arg(args.spectrum)
    g, wtail = _weights_arg(args.weights, lam.size)
    res = fa_check(lam, g, stail, wtail)
    _emit(args, io.result_obj("fa-check", None, {
        "energy": res.energy, "energy_remainder": res.energy_remainder,
        "hcond_plus": res.hcond_plus, "fa_property": res.fa_property,
        "betas": res.betas.tolist(), "values": res.log_values.tolist(), "slope": res.slope}))


def cmd_audit(args) -> None:
    rho, dims = _load_state(args.state, args.layout)
    report = audit_state(rho, dims, tol=args.tol, restarts=args.restarts, seed=args.seed)
    _emit(args, io.result_obj("audit", args.seed, {"dims": list(dims), **io.audit_payload(report)}))
    if args.strict and not report.passed:
        raise NumericalFailure("audit found a violated inequality")


def cmd_lemma_omega(args) -> None:
    psi, dims = io.load_vector(args.state)
    if args.layout is not None:
        dims = check_layout(args.layout, psi.size)
    order = None if args.order is None else [p - 1 for p in args.order]
    ens = lemma_omega_state(psi, dims, order)
    omega = np.outer(psi, psi.conj())
    sigma = assemble(ens)
    n = len(dims)
    seq = list(range(n)) if order is None else order
    rel = relative_entropy(omega, sigma)
    bound = sum(von_neumann_entropy(partial_trace(omega, dims, [s])) for s in seq[:-1])
    match = max(trace_distance(partial_trace(omega, dims, [s]), partial_trace(sigma, dims, [s]))
                for s in range(n))
    if args.ensemble_out:
        io.save_ensemble(args.ensemble_out, ens)
    _emit(args, io.result_obj("lemma-omega", None, {
        "dims": list(dims), "atoms": len(ens), "relative_entropy": rel, "bound": bound,
        "bound_holds": bool(rel <= bound + 1e-8), "marginal_mismatch": match,
        "ensemble": io.ensemble_to_obj(ens)}))


def cmd_gibbs(args) -> None:
    h = _hamiltonians(args.ham, 1)[0]
    res = gibbs_state(h, args.energy)
    _emit(args, io.result_obj("gibbs", None, {
        "energy": args.energy, "beta": res.beta, "mean_energy": res.energy,
        "entropy": res.entropy, "F": max_entropy_F(h, args.energy),
        "weights": res.weights.tolist()}))


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-o", "--output", help="result file (default: stdout)")
    common.add_argument("--seed", type=int, default=0, help="seed for all randomness (default 0)")
    common.add_argument("--format", choices=("json", "csv"), help="output format")
    common.add_argument("--strict", action="store_true", help="exit 3 when a solver does not converge")
    common.add_argument("--jobs", type=int, default=1, help="worker threads for sweeps")

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--tol", type=float, default=1e-3)
    solver.add_argument("--restarts", type=int, default=16)
    solver.add_argument("--max-iter", type=int, default=2000)

    state = argparse.ArgumentParser(add_help=False)
    state.add_argument("state", help="state file (operator or pure vector)")
    state.add_argument("--layout", type=_int_list, help="local dimensions d1,d2,... (default: from file)")

    p = argparse.ArgumentParser(prog="multiree", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("entropy", parents=[common, state], help="entropic functionals of a state")
    s.add_argument("--qmi", action="store_true", help="also report the mutual information")
    s.add_argument("--cond", metavar="A|B", help="conditional entropy H(A|B) (bipartite)")
    s.add_argument("--rel", metavar="SIGMA", help="relative entropy to another state file")
    s.set_defaults(func=cmd_entropy)

    s = sub.add_parser("ree", parents=[common, state, solver], help="relative entropy of entanglement")
    s.add_argument("--energy", type=float, help="energy bound for the constrained variant")
    s.add_argument("--ham", action="append", help="Hamiltonian spec file (once per party, or once shared)")
    s.add_argument("--ensemble-out", help="write the optimizing separable ensemble here")
    s.set_defaults(func=cmd_ree)

    s = sub.add_parser("truncate", parents=[common, state, solver], help="truncation error table")
    s.add_argument("--subset", type=_parties, required=True, help="parties to truncate, e.g. 1,2")
    s.add_argument("--f", choices=FUNCTIONALS, required=True, help="functional to tabulate")
    s.add_argument("--rmax", type=int, required=True)
    s.add_argument("--variant", choices=("L", "N"), default="L")
    s.set_defaults(func=cmd_truncate)

    s = sub.add_parser("bounds", parents=[common], help="continuity bounds")
    s.add_argument("kind", choices=("finite", "energy", "iid", "oscillator"))
    s.add_argument("--epsilon", type=float)
    s.add_argument("--sweep", type=_sweep, help="epsilon=a:b:n")
    s.add_argument("--dims", type=_int_list, help="local dimensions of the first n-1 parties")
    s.add_argument("--energy", type=float)
    s.add_argument("--m", type=int, default=1)
    s.add_argument("--n", type=int, default=2)
    s.add_argument("--t", type=float)
    s.add_argument("--optimize-t", action="store_true")
    s.add_argument("--ham", action="append")
    s.add_argument("--omegas", type=_float_list)
    s.add_argument("--hbar", type=float, default=1.0)
    s.set_defaults(func=cmd_bounds)

    s = sub.add_parser("fa-check", parents=[common], help="FA-property evidence for a spectrum")
    s.add_argument("--spectrum", required=True, help="file or model, e.g. geometric:q=0.5:n=200")
    s.add_argument("--weights", required=True, help="file or model, e.g. log-power:q=3")
    s.set_defaults(func=cmd_fa_check)

    s = sub.add_parser("audit", parents=[common, state, solver], help="inequality audit")
    s.set_defaults(func=cmd_audit)

    s = sub.add_parser("lemma-omega", parents=[common, state],
                       help="separable state matching the marginals of a pure state")
    s.add_argument("--order", type=_int_list, help="party order for the Schmidt sweep")
    s.add_argument("--ensemble-out")
    s.set_defaults(func=cmd_lemma_omega)

    s = sub.add_parser("gibbs", parents=[common], help="Gibbs state at a given mean energy")
    s.add_argument("--ham", action="append", required=True)
    s.add_argument("--energy", type=float, required=True)
    s.set_defaults(func=cmd_gibbs)
    return p


def _setup_logging() -> None:
    level = os.environ.get("MULTIREE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")


def main(argv: Sequence[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except NumericalFailure as exc:
        log.error("%s", exc)
        return EXIT_NUMERIC
    except (np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except (ValueError, IndexError, KeyError, OSError, TypeError) as exc:
        log.error("invalid input: %s", exc)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
