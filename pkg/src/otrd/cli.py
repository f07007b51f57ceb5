"""Command-line front end: ``otrd {rd,quantize,capacity,ot}``.

Problem files are JSON objects.  A source file looks like

    {"kind": "source", "atoms": [0, 1, 2], "weights": [0.2, 0.5, 0.3],
     "reproduction_atoms": [0, 1, 2], "distortion": "squared"}

where ``reproduction_atoms`` (default: the source atoms) and ``distortion``
("squared" or "hamming", default "squared") are optional.  A channel file is

    {"kind": "channel", "matrix": [[0.9, 0.1], [0.2, 0.8]]}

Either kind may instead name a built-in instance: {"fixture": "bsc-0.11"}.
The same names are accepted directly with ``--fixture``.

Exit codes: 0 success, 1 bad input, 2 a solver did not converge.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .blahut_arimoto import ba_capacity, rd_sweep_ba
from .capacity_ot import capacity_via_ot
from .exact_ot import emd
from .fixtures import CHANNELS, SOURCES, SourceProblem
from .measures import DiscreteDistribution, hamming_matrix, squared_error_matrix
from .quantizer import extremal_emd_quantizer, kmeans_1d_exact, lloyd_max
from .sinkhorn import sinkhorn, sinkhorn_eps_sweep
from .sinkhorn_rd import rd_sweep_sinkhorn

log = logging.getLogger(__name__)

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED = 0, 1, 2
LN2 = math.log(2)


class InputError(ValueError):
    pass


# ---------------------------------------------------------------- parsing

def _num_list(obj, field, nested=False):
    if not isinstance(obj, list) or not obj:
        raise InputError(f"{field}: expected a non-empty list")
    try:
        if nested:
            rows = [[float(v) for v in row] for row in obj]
            if len({len(r) for r in rows}) != 1:
                raise InputError(f"{field}: rows have different lengths")
            return np.array(rows)
        return np.array([float(v) for v in obj])
    except (TypeError, ValueError):
        raise InputError(f"{field}: entries must be numbers") from None


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc.msg}, line {exc.lineno})") from None
    if not isinstance(data, dict):
        raise InputError(f"{path}: top level must be an object")
    return data


def source_from_dict(data) -> SourceProblem:
    if "fixture" in data:
        return _fixture_source(data["fixture"])
    if data.get("kind") != "source":
        raise InputError(f"kind: expected 'source', got {data.get('kind')!r}")
    atoms = _num_list(data.get("atoms"), "atoms")
    weights = _num_list(data.get("weights"), "weights")
    if atoms.size != weights.size:
        raise InputError("weights: length differs from atoms")
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
        raise InputError("weights: must be nonnegative and sum to 1")
    repro = atoms
    if data.get("reproduction_atoms") is not None:
        repro = _num_list(data["reproduction_atoms"], "reproduction_atoms")
    kind = data.get("distortion", "squared")
    if kind == "squared":
        d = squared_error_matrix(atoms, repro)
    elif kind == "hamming":
        d = hamming_matrix(atoms.size, repro.size)
    else:
        raise InputError(f"distortion: unknown kind {kind!r} (use 'squared' or 'hamming')")
    return SourceProblem(DiscreteDistribution(weights, atoms), d, repro, kind)


def channel_from_dict(data) -> np.ndarray:
    if "fixture" in data:
        return _fixture_channel(data["fixture"])
    if data.get("kind") != "channel":
        raise InputError(f"kind: expected 'channel', got {data.get('kind')!r}")
    w = _num_list(data.get("matrix"), "matrix", nested=True)
    if np.any(w < 0) or np.max(np.abs(w.sum(axis=1) - 1.0)) > 1e-10:
        raise InputError("matrix: rows must be nonnegative and sum to 1")
    return w


def _fixture_source(name):
    if name not in SOURCES:
        raise InputError(f"fixture: unknown source {name!r} (known: {', '.join(sorted(SOURCES))})")
    return SOURCES[name]()


def _fixture_channel(name):
    if name == "identity-2":
        return np.eye(2)
    if name not in CHANNELS:
        raise InputError(f"fixture: unknown channel {name!r} (known: {', '.join(sorted(CHANNELS))})")
    return CHANNELS[name]()


def _load(args, kind):
    if args.fixture and args.spec:
        raise InputError("give either a spec file or --fixture, not both")
    if args.fixture:
        data = {"fixture": args.fixture}
    elif args.spec:
        data = _read_json(args.spec)
    else:
        raise InputError("a spec file or --fixture is required")
    return source_from_dict(data) if kind == "source" else channel_from_dict(data)


def parse_lambda_grid(text):
    """'min:max:count' (log-spaced, inclusive) or a comma list of values."""
    try:
        if ":" in text:
            lo, hi, count = text.split(":")
            lo, hi, count = float(lo), float(hi), int(count)
            if not (0 < lo <= hi) or count < 1:
                raise ValueError
            if count == 1:
                return [lo]
            return list(np.logspace(math.log10(lo), math.log10(hi), count))
        vals = [float(v) for v in text.split(",")]
        if any(not v > 0 for v in vals):
            raise ValueError
        return vals
    except ValueError:
        raise InputError(f"--lambdas: expected 'min:max:count' with 0 < min <= max, got {text!r}") from None


def parse_levels(text):
    """'M' or an inclusive range 'a:b'."""
    try:
        if ":" in text:
            a, b = (int(v) for v in text.split(":"))
        else:
            a = b = int(text)
        if a < 1 or b < a:
            raise ValueError
        return list(range(a, b + 1))
    except ValueError:
        raise InputError(f"--levels: expected a positive integer or 'a:b', got {text!r}") from None


# ---------------------------------------------------------------- output

def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _emit(text, out):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _json_text(command, params, body):
    doc = {"tool": "otrd", "version": __version__, "command": command, "parameters": params}
    doc.update(body)
    return json.dumps(_jsonable(doc), indent=2, sort_keys=False) + "\n"


def _params(args, **extra):
    skip = {"func", "out", "verbose"}
    p = {k: v for k, v in vars(args).items() if k not in skip}
    p.update(extra)
    return p


# ---------------------------------------------------------------- commands

def cmd_rd(args):
    prob = _load(args, "source")
    lambdas = parse_lambda_grid(args.lambdas)
    methods = ["ba", "sinkhorn"] if args.method == "both" else [args.method]
    curves = {}
    for m in methods:
        if m == "ba":
            curves[m] = rd_sweep_ba(prob.source, prob.distortion, lambdas, y_atoms=prob.reproduction_atoms)
        else:
            curves[m] = rd_sweep_sinkhorn(prob.source, prob.distortion, lambdas, y_atoms=prob.reproduction_atoms)

    rows = []
    for m in methods:
        for pt in sorted(curves[m], key=lambda p: p.lam):
            rows.append((pt.lam, pt.rate_nats, pt.rate_bits, pt.distortion, m, pt.converged))

    comparison = None
    if len(methods) == 2:
        a = {p.lam: p for p in curves["ba"]}
        b = {p.lam: p for p in curves["sinkhorn"]}
        per = [
            {"lambda": lam, "abs_delta_rate_nats": abs(a[lam].rate_nats - b[lam].rate_nats),
             "abs_delta_distortion": abs(a[lam].distortion - b[lam].distortion)}
            for lam in sorted(a)
        ]
        comparison = {
            "per_lambda": per,
            "max_abs_delta_rate_nats": max(r["abs_delta_rate_nats"] for r in per),
            "max_abs_delta_distortion": max(r["abs_delta_distortion"] for r in per),
        }

    if args.format == "json":
        body = {"curves": {m: [
            {"lambda": p.lam, "rate_nats": p.rate_nats, "rate_bits": p.rate_bits,
             "distortion": p.distortion, "converged": p.converged}
            for p in sorted(curves[m], key=lambda p: p.lam)] for m in methods}}
        if comparison:
            body["comparison"] = comparison
        _emit(_json_text("rd", _params(args, lambda_values=lambdas), body), args.out)
    else:
        _emit(_csv_text(["lambda", "rate_nats", "rate_bits", "distortion", "method", "converged"], rows), args.out)
        if comparison:
            text = _csv_text(
                ["lambda", "abs_delta_rate_nats", "abs_delta_distortion"],
                [(r["lambda"], r["abs_delta_rate_nats"], r["abs_delta_distortion"]) for r in comparison["per_lambda"]],
            )
            if args.out and args.out != "-":
                Path(args.out).with_suffix(".comparison.csv").write_text(text, encoding="utf-8")
            else:
                sys.stderr.write(text)
    ok = all(c.converged for c in curves.values())
    return EXIT_OK if ok else EXIT_NONCONVERGED


def cmd_quantize(args):
    prob = _load(args, "source")
    if prob.distortion_name != "squared":
        raise InputError("distortion: quantizer design needs squared error")
    levels = parse_levels(args.levels)
    methods = ["lloyd", "emd", "exact"] if args.method == "all" else [args.method]
    results = []
    for M in levels:
        for m in methods:
            if m == "lloyd":
                q = lloyd_max(prob.source, M, restarts=args.restarts, seed=args.seed)
            elif m == "emd":
                q = extremal_emd_quantizer(prob.source, M, restarts=args.restarts, seed=args.seed)
            else:
                q = kmeans_1d_exact(prob.source, M)
            results.append((M, m, q))
    if args.format == "json":
        body = {"results": [
            {"levels": M, "method": m, "distortion": q.distortion, "codebook": q.codebook,
             "weights": q.induced_q.weights, "assignment": q.assignment}
            for M, m, q in results]}
        _emit(_json_text("quantize", _params(args, level_values=levels), body), args.out)
    else:
        _emit(_csv_text(["levels", "method", "distortion"], [(M, m, q.distortion) for M, m, q in results]), args.out)
    return EXIT_OK


def cmd_capacity(args):
    w = _load(args, "channel")
    methods = ["ba", "ot"] if args.method == "both" else [args.method]
    rows = []
    ok = True
    ba = None
    for m in methods:
        if m == "ba":
            ba = ba_capacity(w)
            ok = ok and ba.converged
            rows.append({"method": "ba", "capacity_nats": ba.capacity_nats,
                         "capacity_bits": ba.capacity_nats / LN2, "input_dist": ba.input_dist.weights,
                         "converged": ba.converged, "experimental": False})
        else:
            r = capacity_via_ot(w)
            ok = ok and r.converged
            rows.append({"method": "ot", "capacity_nats": r.value_nats,
                         "capacity_bits": r.value_nats / LN2, "input_dist": r.input_dist.weights,
                         "converged": r.converged, "experimental": True,
                         "ba_reference": r.ba_reference, "discrepancy": r.discrepancy})
    if args.format == "json":
        _emit(_json_text("capacity", _params(args), {"results": rows}), args.out)
    else:
        header = ["method", "capacity_nats", "capacity_bits", "converged", "experimental", "discrepancy"]
        _emit(_csv_text(header, [
            (r["method"], r["capacity_nats"], r["capacity_bits"], r["converged"], r["experimental"],
             r.get("discrepancy", "")) for r in rows]), args.out)
    return EXIT_OK if ok else EXIT_NONCONVERGED


def _parse_eps(text):
    if text == "exact":
        return None
    try:
        eps = float(text)
    except ValueError:
        eps = -1.0
    if not eps > 0:
        raise InputError(f"--eps: expected a positive number or 'exact', got {text!r}")
    return eps


def cmd_ot(args):
    mu = source_from_dict(_read_json(args.mu))
    nu = source_from_dict(_read_json(args.nu))
    if args.distortion == "hamming":
        if mu.source.weights.size != nu.source.weights.size:
            raise InputError("distortion: hamming needs equal alphabet sizes")
        d = hamming_matrix(mu.source.weights.size, nu.source.weights.size)
    else:
        d = squared_error_matrix(mu.source.atoms, nu.source.atoms)

    header = ["eps", "cost", "kl", "objective"]
    if args.eps_sweep:
        try:
            eps_list = [float(v) for v in args.eps_sweep.split(",")]
        except ValueError:
            raise InputError(f"--eps-sweep: expected comma-separated numbers, got {args.eps_sweep!r}") from None
        results = sinkhorn_eps_sweep(mu.source, nu.source, d, eps_list)
        rows = [(r.eps, r.transport_cost, r.kl_term, r.objective) for r in results]
        ok = all(r.converged for r in results)
        couplings = [r.coupling.entries for r in results]
    else:
        eps = _parse_eps(args.eps)
        if eps is None:
            r = emd(mu.source, nu.source, d)
            rows = [("exact", r.cost, "", r.cost)]
            ok = True
            couplings = [r.coupling.entries]
        else:
            r = sinkhorn(mu.source, nu.source, d, eps)
            rows = [(eps, r.transport_cost, r.kl_term, r.objective)]
            ok = r.converged
            couplings = [r.coupling.entries]
    if args.format == "json":
        body = {"results": [
            dict(zip(header, row), coupling=c, converged=ok) for row, c in zip(rows, couplings)]}
        _emit(_json_text("ot", _params(args), body), args.out)
    else:
        _emit(_csv_text(header, rows), args.out)
    return EXIT_OK if ok else EXIT_NONCONVERGED


# ---------------------------------------------------------------- entry

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="otrd", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"otrd {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log solver progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, fixture_help):
        p.add_argument("spec", nargs="?", help="JSON problem file")
        p.add_argument("--fixture", help=fixture_help)
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--format", choices=["csv", "json"], default="csv")

    p = sub.add_parser("rd", help="rate-distortion curve")
    common(p, "built-in source: " + ", ".join(sorted(SOURCES)))
    p.add_argument("--method", choices=["ba", "sinkhorn", "both"], default="both")
    p.add_argument("--lambdas", default="0.01:100:20", help="log grid min:max:count or a comma list")
    p.set_defaults(func=cmd_rd)

    p = sub.add_parser("quantize", help="M-level scalar quantizer design")
    common(p, "built-in source: " + ", ".join(sorted(SOURCES)))
    p.add_argument("--levels", default="1:8", help="M or an inclusive range a:b")
    p.add_argument("--method", choices=["lloyd", "emd", "exact", "all"], default="all")
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("capacity", help="channel capacity")
    common(p, "built-in channel: " + ", ".join(sorted(CHANNELS) + ["identity-2"]))
    p.add_argument("--method", choices=["ba", "ot", "both"], default="ba")
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("ot", help="optimal transport between two sources")
    p.add_argument("mu", help="JSON source file for the first marginal")
    p.add_argument("nu", help="JSON source file for the second marginal")
    p.add_argument("--eps", default="exact", help="'exact' (EMD) or a positive regularization")
    p.add_argument("--eps-sweep", help="comma-separated descending eps values")
    p.add_argument("--distortion", choices=["squared", "hamming"], default="squared")
    p.add_argument("--out")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.set_defaults(func=cmd_ot)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"otrd: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"otrd: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
