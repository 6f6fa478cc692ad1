"""depconc command line.

Exit codes: 0 success, 2 parse/usage error, 3 a single requested method is
inapplicable, 4 a bound is violated by an exact tail.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile

import numpy as np

from . import __version__, gamma as gm
from .bounds import TailBound
from .documents import DocumentError, load_function, load_model
from .errors import BadPartition, DepconcError, SoundnessViolation
from .mixing import interdependence_matrix, operator_norm
from .model import ProductModel, lipschitz_seminorm, oscillation_vector
from .validate import evaluate_bounds, exact_tails, mc_sample, model_digest, soundness_suite

EXIT_OK, EXIT_PARSE, EXIT_PRECONDITION, EXIT_VIOLATION = 0, 2, 3, 4
METHODS = ("goldstein", "chazottes", "kulske", "markov_theta", "blocks", "mcdiarmid", "samson", "chatterjee",
           "tensorized_tc", "azuma")
GAMMA_METHODS = {"goldstein", "chazottes", "kulske", "markov_theta", "blocks"}

log = logging.getLogger("depconc")


class UsageError(Exception):
    pass


def _parse_methods(text: str | None) -> list[str]:
    if not text or text == "all":
        return list(METHODS)
    methods = [m.strip() for m in text.split(",") if m.strip()]
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise UsageError(f"unknown methods {unknown}; choose from {', '.join(METHODS)}")
    return methods


def _parse_t(text: str | None, model: ProductModel, f) -> np.ndarray:
    if text is None or text == "auto":
        support = model.pmf > 0
        radius = float(np.abs(f[support] - model.pmf @ f).max())
        return np.linspace(0.0, radius, 11)
    try:
        t = np.array([float(tok) for tok in text.split(",") if tok.strip()])
    except ValueError as exc:
        raise UsageError(f"cannot parse t grid {text!r}") from exc
    if t.size == 0 or np.any(t < 0) or not np.all(np.isfinite(t)):
        raise UsageError("t values must be finite and nonnegative")
    return t


def _gamma_for(method: str, model: ProductModel, partition):
    if method == "goldstein":
        return gm.gamma_goldstein(model)
    if method == "chazottes":
        return gm.gamma_chazottes(model)
    if method == "kulske":
        return gm.gamma_kulske(model)
    if method == "markov_theta" and model.law.kind in ("markov", "gibbs_chain"):
        return gm.gamma_markov_theta(gm.MarkovChainView.from_model(model), model.coordinates)
    if method == "blocks" and partition is not None:
        return gm.gamma_blocks(model, partition)
    return None


def _floats(arr) -> list:
    return [None if not np.isfinite(x) else float(x) for x in np.ravel(arr)]


def build_report(model: ProductModel, f, methods, t, partition=None, seed: int = 0, gamma_hook=None) -> dict:
    bounds = evaluate_bounds(model, f, t, gamma_hook=gamma_hook, partition=partition)
    if "blocks" in methods and partition is None:
        bounds["blocks"] = TailBound("blocks", t, np.full(t.shape, np.nan), False, notes=["no --blocks partition given"])
    unit_C = interdependence_matrix(model.with_unit_metrics())
    results = {}
    for m in methods:
        tb = bounds.get(m)
        if tb is None:
            tb = TailBound(m, t, np.full(t.shape, np.nan), False, notes=["metrics are not scaled trivial"])
        entry = tb.as_dict()
        entry["applicable"] = tb.preconditions_ok
        if m in GAMMA_METHODS:
            g = _gamma_for(m, model, partition)
            if g is not None:
                entry["gamma"] = [_floats(row) for row in g.entries]
                entry["gamma_valid"] = g.valid
                entry["gamma_notes"] = g.notes
        if m == "chatterjee":
            entry["constants"]["C_spectral_radius"] = unit_C.spectral_radius
        if m == "kulske":
            C = interdependence_matrix(model)
            entry["interdependence"] = [_floats(row) for row in C.C]
            entry["constants"]["spectral_radius"] = C.spectral_radius
            entry["constants"]["C_norm"] = operator_norm(C.C)
        results[m] = entry
    return {
        "tool_version": __version__,
        "model_digest": model_digest(model),
        "seed": seed,
        "methods": list(methods),
        "t": _floats(t),
        "delta": _floats(oscillation_vector(f, model)),
        "lipschitz": lipschitz_seminorm(f, model) if model.num_states <= 4096 else None,
        "mean": float(model.pmf @ f),
        "results": results,
    }


def _csv(report: dict, with_exact: bool) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["method", "t", "bound"] + (["exact"] if with_exact else [])
    w.writerow(header)
    for m, entry in report["results"].items():
        vals = entry["values"] or [None] * len(report["t"])
        for k, t in enumerate(report["t"]):
            v = vals[k]
            row = [m, repr(t), "n/a" if v is None else repr(v)]
            if with_exact:
                row.append(repr(report["exact"][k]))
            w.writerow(row)
    return buf.getvalue()


def _emit(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(out))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".depconc-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _render(report: dict, fmt: str, with_exact: bool = False) -> str:
    if fmt == "csv":
        return _csv(report, with_exact)
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def _halve_gamma(g):
    g.entries = g.entries * 0.5
    g.notes.append("fault injection: entries halved")
    return g


def _load_inputs(args):
    model = load_model(args.model)
    f = load_function(args.function, model)
    partition = gm.parse_blocks(args.blocks, model.n) if args.blocks else None
    return model, f, partition


def cmd_analyze(args) -> int:
    model, f, partition = _load_inputs(args)
    methods = _parse_methods(args.methods)
    t = _parse_t(args.t, model, f)
    hook = _halve_gamma if args.inject_fault == "halve-gamma" else None
    report = build_report(model, f, methods, t, partition, args.seed, hook)
    _emit(_render(report, args.format), args.out)
    if len(methods) == 1 and not report["results"][methods[0]]["applicable"]:
        log.error("method %s is not applicable: %s", methods[0], "; ".join(report["results"][methods[0]]["notes"]))
        return EXIT_PRECONDITION
    return EXIT_OK


def cmd_validate(args) -> int:
    model, f, partition = _load_inputs(args)
    methods = _parse_methods(args.methods)
    t = _parse_t(args.t, model, f)
    hook = _halve_gamma if args.inject_fault == "halve-gamma" else None
    report = build_report(model, f, methods, t, partition, args.seed, hook)
    two = exact_tails(model, f, t)
    one = exact_tails(model, f, t, one_sided=True)
    report["mode"] = args.mode
    report["exact"] = _floats(two)
    report["exact_one_sided"] = _floats(one)
    if args.mode == "mc":
        draws = mc_sample(model, args.samples, args.seed)
        idx = np.ravel_multi_index(draws.T, model.sizes)
        vals = f[idx]
        dev = vals - model.pmf @ f
        est = np.array([(np.abs(dev) >= s).mean() for s in t])
        report["mc_estimate"] = _floats(est)
        report["mc_stderr"] = _floats(np.sqrt(est * (1.0 - est) / max(args.samples, 1)))
        report["samples"] = args.samples
    violated = []
    for m, entry in report["results"].items():
        if not entry["applicable"]:
            continue
        exact = one if entry["one_sided"] else two
        margin = np.array(entry["values"]) - exact
        entry["margin"] = _floats(margin)
        if np.any(margin < -1e-12):
            violated.append(m)
    report["violations"] = violated
    _emit(_render(report, args.format, with_exact=True), args.out)
    if violated:
        log.error("bounds violated by the exact tail: %s", ", ".join(violated))
        return EXIT_VIOLATION
    if len(methods) == 1 and not report["results"][methods[0]]["applicable"]:
        return EXIT_PRECONDITION
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_invariants

    hook = _halve_gamma if args.inject_fault == "halve-gamma" else None
    rows = []
    failed = None
    try:
        reports = soundness_suite(args.seed, args.instances, gamma_hook=hook)
        rows.append(("soundness_suite", True, f"{len(reports)} instances"))
    except SoundnessViolation as exc:
        rows.append(("soundness_suite", False, str(exc)))
        failed = exc.witness
    if hook is None:
        for name, ok, detail in run_invariants(args.seed):
            rows.append((name, ok, detail))
    width = max(len(r[0]) for r in rows)
    lines = [f"{name.ljust(width)}  {'PASS' if ok else 'FAIL'}  {detail}" for name, ok, detail in rows]
    sys.stdout.write("\n".join(lines) + "\n")
    if failed is not None:
        _emit(json.dumps(failed, indent=2, sort_keys=True) + "\n", args.out)
        return EXIT_VIOLATION
    return EXIT_OK if all(ok for _, ok, _ in rows) else EXIT_VIOLATION


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="depconc", description="Concentration bounds for dependent finite-state vectors.")
    p.add_argument("--version", action="version", version=f"depconc {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, needs_inputs=True):
        if needs_inputs:
            sp.add_argument("--model", required=True, help="model JSON document")
            sp.add_argument("--function", required=True, help="function JSON document")
            sp.add_argument("--methods", default=None, help=f"comma list from {','.join(METHODS)} (default: all)")
            sp.add_argument("--t", default="auto", help="comma list of t values or 'auto'")
            sp.add_argument("--format", choices=("json", "csv"), default="json")
            sp.add_argument("--blocks", default=None, help="contiguous 0-based blocks, e.g. '0|1,2'")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default=None, help="write the report here (atomically) instead of stdout")
        sp.add_argument("--inject-fault", default=None, choices=("halve-gamma",), help=argparse.SUPPRESS)

    a = sub.add_parser("analyze", help="evaluate tail bounds")
    common(a)
    a.set_defaults(func=cmd_analyze)
    v = sub.add_parser("validate", help="compare bounds with exact (or Monte Carlo) tails")
    common(v)
    v.add_argument("--mode", choices=("exact", "mc"), default="exact")
    v.add_argument("--samples", type=int, default=100_000)
    v.set_defaults(func=cmd_validate)
    s = sub.add_parser("selftest", help="run the soundness harness and invariant suites")
    common(s, needs_inputs=False)
    s.add_argument("--instances", type=int, default=100)
    s.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="depconc: %(message)s")
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except (DocumentError, UsageError, BadPartition) as exc:
        sys.stderr.write(f"depconc: {exc}\n")
        return EXIT_PARSE
    except OSError as exc:
        sys.stderr.write(f"depconc: {exc}\n")
        return EXIT_PARSE
    except DepconcError as exc:
        sys.stderr.write(f"depconc: {exc}\n")
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
