"""Command-line orchestration: sample, products, spectra, batch certification.

Exit codes: 0 success, 2 usage or precondition violation, 3 numerical
non-convergence, 4 I/O failure. Every command is deterministic given its
seed; reports carry no timestamps so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys
from pathlib import Path

from . import epsgood as eg
from . import moments
from .ensemble import UnitaryEnsemble, hermitian_double, load, sample_random_qtpe, save, validate
from .zigzag import (
    ZigzagSpec,
    bound_genzigzag,
    bound_zigzag,
    bound_zigzag_derandomised,
    bound_zigzag_improved,
    zigzag,
    zigzag_derandomised,
    zigzag_generalised,
)
from .errors import EnsembleFormatError, PreconditionError, QtpeError
from .linalg import SeededRng, haar_unitary

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NONCONVERGED = 3
EXIT_IO = 4


def _flatten(prefix: str, obj, out: dict) -> None:
    if isinstance(obj, dict):
        for key in sorted(obj):
            _flatten(f"{prefix}.{key}" if prefix else str(key), obj[key], out)
    elif isinstance(obj, (list, tuple)):
        for i, item in enumerate(obj):
            _flatten(f"{prefix}[{i}]", item, out)
    else:
        out[prefix] = obj


def _emit(report: dict, out_path: str | None, as_csv: bool) -> None:
    if as_csv:
        flat: dict = {}
        _flatten("", report, flat)
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(list(flat.keys()))
        writer.writerow(list(flat.values()))
        text = buf.getvalue()
    else:
        text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if out_path:
        Path(out_path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_sample(args) -> int:
    rng = SeededRng(args.seed)
    e = sample_random_qtpe(args.dim, args.degree, rng, label=args.label or f"haar-d{args.dim}-s{args.degree}")
    sidecar = {
        "seed": args.seed,
        "provenance": {"kind": "haar-sample", "dim": args.dim, "degree": args.degree},
        "bound_reference": 8.0 / math.sqrt(args.degree),
    }
    save(e, args.out, sidecar=sidecar)
    print(f"sampled {e.label}: {e.size} unitaries of dimension {e.dim} -> {args.out}")
    return EXIT_OK


def _load_checked(path: str) -> UnitaryEnsemble:
    e = load(path)
    report = validate(e, tol=1e-8 * max(1, e.dim))
    if not report.passed:
        raise PreconditionError(
            f"ensemble {path} fails validation: unitarity defect {report.unitarity_defect:.2e}, "
            f"involution defect {report.involution_defect:.2e}"
        )
    return e


def _sidecar_bound(path: str) -> float | None:
    side = Path(path).with_suffix(".json")
    if not side.exists():
        return None
    try:
        value = json.loads(side.read_text()).get("bound_reference")
        return float(value) if value is not None else None
    except (json.JSONDecodeError, TypeError, ValueError):
        return None


def cmd_lambda(args) -> int:
    e = _load_checked(args.ensemble)
    bound = args.bound if args.bound is not None else _sidecar_bound(args.ensemble)
    method = None if args.method == "auto" else args.method
    report = moments.lambda_report(
        e,
        args.t,
        method=method,
        tol=args.tol,
        rng=SeededRng(args.seed),
        max_iters=args.max_iters,
        bound_reference=bound,
    )
    _emit(report.to_json_dict(), args.out, args.csv)
    return EXIT_OK if report.converged else EXIT_NONCONVERGED


def cmd_zigzag(args) -> int:
    g = _load_checked(args.g)
    hs = [_load_checked(p) for p in args.h]
    if args.kind in ("zigzag", "derandomised"):
        if len(hs) != 1:
            raise PreconditionError(f"{args.kind} takes exactly one inner ensemble, got {len(hs)}")
        h = hs[0]
        if args.double_g and g.involution is None:
            g = hermitian_double(g)
        if args.double_h and h.involution is None:
            h = hermitian_double(h)
        product = zigzag(g, h) if args.kind == "zigzag" else zigzag_derandomised(g, h)
        spec = ZigzagSpec(args.kind, g.dim, g.size, h.dim, h.size)
    else:
        k = args.k if args.k is not None else len(hs)
        if len(hs) == 1 and k > 1:
            hs = hs * k
        if len(hs) != k:
            raise PreconditionError(f"generalised product needs k={k} inner ensembles, got {len(hs)}")
        d = g.size
        if hs[0].dim % d != 0:
            raise PreconditionError(f"inner dimension {hs[0].dim} is not a multiple of outer degree {d}")
        dprime = hs[0].dim // d
        product = zigzag_generalised(g, hs, d, dprime)
        spec = ZigzagSpec(args.kind, g.dim, g.size, hs[0].dim, hs[0].size, k=k, d_split=(d, dprime))
    save(product, args.out, sidecar={"provenance": {"kind": args.kind, "g": str(args.g), "h": [str(p) for p in args.h]}})
    report: dict = {
        "kind": args.kind,
        "members": product.size,
        "dim": product.dim,
        "outer": {"dim": spec.outer_dim, "degree": spec.outer_degree},
        "inner": {"dim": spec.inner_dim, "degree": spec.inner_degree},
        "out": str(args.out),
    }
    exit_code = EXIT_OK
    if args.check_bound_t is not None:
        t = args.check_bound_t
        rng = SeededRng(args.seed)
        rep1 = moments.lambda_report(g, 1, tol=args.tol, rng=rng.child(1))
        rep2 = moments.lambda_report(hs[0], t, tol=args.tol, rng=rng.child(2))
        rep = moments.lambda_report(product, t, tol=args.tol, rng=rng.child(3))
        if args.kind == "zigzag":
            bound = bound_zigzag(rep1.lambda_, rep2.lambda_, t, g.size)
        elif args.kind == "derandomised":
            bound = bound_zigzag_derandomised(rep1.lambda_, rep2.lambda_, t, g.size)
        else:
            d, dprime = spec.d_split
            bound = bound_genzigzag(rep1.lambda_, rep2.lambda_, spec.k, t, d, dprime, args.eps)
        satisfied = rep.lambda_ <= bound.value + args.bound_tol
        report["bound_check"] = {
            "t": t,
            "lambda1": rep1.lambda_,
            "lambda2": rep2.lambda_,
            "lambda_product": rep.lambda_,
            "bound": bound.value,
            "flags": list(bound.flags),
            "vacuous": bound.vacuous,
            "satisfied": satisfied,
            "converged": rep1.converged and rep2.converged and rep.converged,
        }
        if not (rep1.converged and rep2.converged and rep.converged):
            exit_code = EXIT_NONCONVERGED
    _emit(report, args.report, args.csv)
    return exit_code


def _step_rng(seed: int, index: int) -> SeededRng:
    return SeededRng(seed).child(index)


def _run_step(step: dict, index: int, seed: int, base: Path) -> dict:
    kind = step.get("kind")
    name = step.get("name", f"step-{index}")
    rng = _step_rng(seed, index)
    result: dict = {"name": name, "kind": kind}

    def resolve(p: str) -> str:
        path = Path(p)
        return str(path if path.is_absolute() else base / path)

    if kind == "sample":
        e = sample_random_qtpe(int(step["dim"]), int(step["degree"]), rng, label=step.get("label", name))
        save(
            e,
            resolve(step["out"]),
            sidecar={"seed": seed, "provenance": {"kind": "haar-sample"}, "bound_reference": 8.0 / math.sqrt(e.size)},
        )
        result.update({"members": e.size, "dim": e.dim, "pass": True})
    elif kind == "double":
        e = hermitian_double(_load_checked(resolve(step["ensemble"])))
        save(e, resolve(step["out"]), sidecar={"provenance": {"kind": "double"}})
        result.update({"members": e.size, "dim": e.dim, "pass": True})
    elif kind == "lambda":
        e = _load_checked(resolve(step["ensemble"]))
        rep = moments.lambda_report(
            e,
            int(step["t"]),
            method=step.get("method"),
            tol=step.get("tol"),
            rng=rng,
            max_iters=int(step.get("max_iters", 5000)),
            bound_reference=_sidecar_bound(resolve(step["ensemble"])),
        )
        result.update(rep.to_json_dict())
        ok = rep.converged
        if "assert_below" in step:
            below = rep.lambda_ < float(step["assert_below"])
            result["assert_below"] = {"threshold": float(step["assert_below"]), "satisfied": below}
            ok = ok and below
        if rep.bound_reference is not None:
            result["vacuous_bound"] = rep.bound_reference >= 1.0
        result["pass"] = ok
    elif kind == "zigzag":
        g = _load_checked(resolve(step["g"]))
        h_paths = step["h"] if isinstance(step["h"], list) else [step["h"]]
        hs = [_load_checked(resolve(p)) for p in h_paths]
        zz_kind = step.get("zz_kind", "zigzag")
        if zz_kind == "zigzag":
            product = zigzag(g, hs[0])
        elif zz_kind == "derandomised":
            product = zigzag_derandomised(g, hs[0])
        else:
            k = int(step.get("k", len(hs)))
            if len(hs) == 1 and k > 1:
                hs = hs * k
            d = g.size
            product = zigzag_generalised(g, hs, d, hs[0].dim // d)
        save(product, resolve(step["out"]), sidecar={"provenance": {"kind": zz_kind}})
        result.update({"members": product.size, "dim": product.dim})
        ok = True
        if "check_bound_t" in step:
            t = int(step["check_bound_t"])
            tol = float(step.get("bound_tol", 1e-6))
            rep1 = moments.lambda_report(g, 1, tol=step.get("tol"), rng=rng.child(1))
            rep2 = moments.lambda_report(hs[0], t, tol=step.get("tol"), rng=rng.child(2))
            rep = moments.lambda_report(product, t, tol=step.get("tol"), rng=rng.child(3))
            bound = bound_zigzag(rep1.lambda_, rep2.lambda_, t, g.size)
            satisfied = rep.lambda_ <= bound.value + tol
            result["bound_check"] = {
                "lambda1": rep1.lambda_,
                "lambda2": rep2.lambda_,
                "lambda_product": rep.lambda_,
                "bound": bound.value,
                "flags": list(bound.flags),
                "vacuous": bound.vacuous,
                "satisfied": satisfied,
            }
            ok = satisfied and rep1.converged and rep2.converged and rep.converged
        result["pass"] = ok
    elif kind == "closeness":
        rep = moments.subspace_closeness_report(int(step["D"]), int(step["d"]), int(step["t"]))
        result.update(rep.to_json_dict())
        result["pass"] = all(rep.claims.values())
    elif kind == "design_error":
        e = _load_checked(resolve(step["ensemble"]))
        t = int(step["t"])
        tol = float(step.get("tol", 1e-9))
        lam = moments.lambda_report(e, t, rng=rng).lambda_
        worst = 0.0
        ok = True
        for k in step.get("ks", [1]):
            for rows in _index_tuples(e.dim, t):
                for cols in _index_tuples(e.dim, t):
                    err = moments.design_error_monomial(e, t, int(k), rows, cols)
                    worst = max(worst, err - lam ** int(k))
                    ok = ok and err <= lam ** int(k) + tol
        result.update({"lambda": lam, "worst_excess": worst, "pass": ok})
    elif kind == "epsgood":
        n = int(step["d"]) * int(step["dprime"])
        us = [haar_unitary(n, rng.child(i)) for i in range(int(step["k"]))]
        decision = eg.is_tuple_good(
            us,
            int(step["d"]),
            int(step["dprime"]),
            float(step["eps"]),
            mode=step.get("mode", "exhaustive"),
            budget=step.get("budget"),
            rng=rng.child(99) if step.get("mode") == "sampled" else None,
        )
        result.update({"good": decision.good, "coverage": decision.coverage, "witness": decision.witness})
        result["pass"] = decision.good == bool(step.get("expect_good", True))
    elif kind == "bound":
        which = step["bound"]
        if which == "zigzag":
            b = bound_zigzag(float(step["l1"]), float(step["l2"]), int(step["t"]), int(step["d"]))
        elif which == "derandomised":
            b = bound_zigzag_derandomised(float(step["l1"]), float(step["l2"]), int(step["t"]), int(step["d"]))
        elif which == "improved":
            b = bound_zigzag_improved(
                float(step["l1"]), float(step["l2"]), int(step["t"]), int(step["d"]), step.get("variant", "as-printed")
            )
        elif which == "generalised":
            b = bound_genzigzag(
                float(step["l1"]),
                float(step["l2"]),
                int(step["k"]),
                int(step["t"]),
                int(step["d"]),
                int(step["dprime"]),
                float(step["eps"]),
            )
        else:
            raise PreconditionError(f"steps[{index}].bound: unknown bound kind {which!r}")
        result.update({"value": b.value, "flags": list(b.flags), "vacuous": b.vacuous, "pass": True})
    else:
        raise PreconditionError(f"steps[{index}].kind: unknown step kind {kind!r}")
    return result


def _index_tuples(n: int, t: int):
    return list(itertools.product(range(n), repeat=t))


def cmd_certify(args) -> int:
    try:
        config = json.loads(Path(args.config).read_text())
    except json.JSONDecodeError as exc:
        print(f"config: malformed JSON: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if not isinstance(config, dict):
        print("config: top level must be an object", file=sys.stderr)
        return EXIT_USAGE
    if config.get("schema_version") != SCHEMA_VERSION:
        print(f"config.schema_version: expected {SCHEMA_VERSION}, got {config.get('schema_version')!r}", file=sys.stderr)
        return EXIT_USAGE
    steps = config.get("steps")
    if not isinstance(steps, list) or not steps:
        print("config.steps: expected a nonempty list", file=sys.stderr)
        return EXIT_USAGE
    seed = int(config.get("seed", 0))
    base = Path(args.config).resolve().parent
    results = []
    failures = []
    for i, step in enumerate(steps):
        if not isinstance(step, dict):
            print(f"config.steps[{i}]: expected an object", file=sys.stderr)
            return EXIT_USAGE
        try:
            result = _run_step(step, i, seed, base)
        except KeyError as exc:
            print(f"config.steps[{i}]: missing field {exc}", file=sys.stderr)
            return EXIT_USAGE
        except (PreconditionError, EnsembleFormatError) as exc:
            print(f"config.steps[{i}]: {exc}", file=sys.stderr)
            return EXIT_USAGE
        results.append(result)
        if not result.get("pass", True):
            failures.append(result["name"])
    report = {
        "schema_version": SCHEMA_VERSION,
        "seed": seed,
        "steps": results,
        "failures": failures,
        "pass": not failures,
    }
    _emit(report, args.out, args.csv)
    return EXIT_OK if not failures else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qtpe", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="sample a Haar-random explicitly Hermitian ensemble")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--degree", type=int, required=True, help="even integer >= 4")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--label", default="")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("lambda", help="second largest singular value of an ensemble at tensor power t")
    p.add_argument("--ensemble", required=True)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--method", choices=["auto", "dense-svd", "power-iteration"], default="auto")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bound", type=float, default=None, help="closed-form reference bound to attach")
    p.add_argument("--out", default=None)
    p.add_argument("--csv", action="store_true", help="emit the flattened CSV serialisation")
    p.set_defaults(func=cmd_lambda)

    p = sub.add_parser("zigzag", help="build a zigzag-style product ensemble")
    p.add_argument("--g", required=True, help="outer ensemble file")
    p.add_argument("--h", action="append", required=True, help="inner ensemble file (repeatable)")
    p.add_argument("--kind", choices=["zigzag", "derandomised", "generalised"], default="zigzag")
    p.add_argument("--k", type=int, default=None, help="generalised: number of inner stages")
    p.add_argument("--double-g", action="store_true", help="Hermitian-double g first if it has no involution")
    p.add_argument("--double-h", action="store_true", help="Hermitian-double h first if it has no involution")
    p.add_argument("--check-bound-t", type=int, default=None, help="measure lambdas and compare to the bound at this t")
    p.add_argument("--bound-tol", type=float, default=1e-6)
    p.add_argument("--eps", type=float, default=1e-3, help="generalised bound epsilon")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--report", default=None)
    p.add_argument("--csv", action="store_true")
    p.set_defaults(func=cmd_zigzag)

    p = sub.add_parser("certify", help="run a batch config and emit one consolidated report")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--csv", action="store_true")
    p.set_defaults(func=cmd_certify)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (PreconditionError, EnsembleFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except QtpeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
