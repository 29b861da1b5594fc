"""Command-line front-end (``lyapkernel <subcommand>``).

Exit codes: 0 success, 2 computed but not kernel-certifiable (heteroclinic
connection or degenerate pair), 1 input or runtime error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional, Sequence

from . import __version__
from .cantor import CSV_HEADER, DigitPair, census, intersection_dimension
from .errors import ArcConstructionFailed, PositivityFailed, PreconditionError
from .kernel import WeightedFamily
from .oracle import mc_lyapunov
from .positivize import (
    build_depth2,
    conjugate_to_positive,
    detect_ghc_depth2,
    find_invariant_arc,
    lyapunov_nonnegative,
)
from .projective import Matrix2
from .recurrence import RecurrenceSpec, growth_rate

SCHEMA = 1
EXIT_OK, EXIT_INPUT, EXIT_UNCERTIFIED = 0, 1, 2

log = logging.getLogger("lyapkernel")


class InputError(Exception):
    pass


# ------------------------------------------------------------------ parsing


def parse_number(tok: Any, where: str):
    """Keep integers (and ``p/q`` fractions) exact; everything else is float."""
    if isinstance(tok, bool):
        raise InputError(f"{where}: expected a number, got {tok!r}")
    if isinstance(tok, (int, float)):
        return tok
    if isinstance(tok, str):
        s = tok.strip()
        try:
            return int(s)
        except ValueError:
            pass
        if "/" in s:
            try:
                q = Fraction(s)
                return q.numerator if q.denominator == 1 else q
            except (ValueError, ZeroDivisionError):
                pass
        try:
            return float(s)
        except ValueError:
            pass
    raise InputError(f"{where}: expected a number, got {tok!r}")


def _matrix_from_json(obj, where: str) -> Matrix2:
    flat = obj
    if isinstance(obj, list) and len(obj) == 2 and all(isinstance(r, list) for r in obj):
        flat = [x for r in obj for x in r]
    if not isinstance(flat, list) or len(flat) != 4:
        raise InputError(f"{where}: expected a 2x2 matrix")
    return Matrix2(*(parse_number(x, f"{where}[{k}]") for k, x in enumerate(flat)))


def _family(mats: list[Matrix2], weights: Optional[list], where: str) -> WeightedFamily:
    if not mats:
        raise InputError(f"{where}: no matrices")
    try:
        if weights is None:
            return WeightedFamily.uniform(mats)
        return WeightedFamily(tuple(mats), tuple(float(w) for w in weights))
    except PreconditionError as exc:
        raise InputError(f"{where}: {exc}") from None


def parse_family_json(data: dict, where: str) -> WeightedFamily:
    if "matrices" not in data:
        raise InputError(f"{where}: missing key 'matrices'")
    mats = [_matrix_from_json(m, f"{where}: matrices[{i}]") for i, m in enumerate(data["matrices"])]
    weights = data.get("weights")
    if weights is not None:
        weights = [parse_number(w, f"{where}: weights[{i}]") for i, w in enumerate(weights)]
    return _family(mats, weights, where)


def parse_family_text(text: str, where: str) -> WeightedFamily:
    mats, weights = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        loc = f"{where}:{lineno}"
        if len(toks) not in (4, 5):
            raise InputError(f"{loc}: expected 'a b c d [weight]', got {len(toks)} fields")
        mats.append(Matrix2(*(parse_number(t, loc) for t in toks[:4])))
        weights.append(parse_number(toks[4], loc) if len(toks) == 5 else None)
    if any(w is None for w in weights):
        if any(w is not None for w in weights):
            raise InputError(f"{where}: give a weight on every line or on none")
        return _family(mats, None, where)
    return _family(mats, weights, where)


def load_problem(path: str) -> dict:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
        if not isinstance(data, dict):
            raise InputError(f"{path}: top level must be an object")
        return data
    return {"mode": "matrices", "family": parse_family_text(text, path)}


def family_of(problem: dict, where: str) -> WeightedFamily:
    if "family" in problem:
        return problem["family"]
    mode = problem.get("mode", "matrices")
    if mode != "matrices":
        raise InputError(f"{where}: expected mode 'matrices', got {mode!r}")
    return parse_family_json(problem, where)


def parse_digits(s: str, where: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in s.split(",") if t.strip())
    except ValueError:
        raise InputError(f"{where}: expected a comma-separated digit list, got {s!r}") from None


# ------------------------------------------------------------------ output


def _num(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def matrix_json(m: Matrix2) -> list:
    return [[_num(m.a), _num(m.b)], [_num(m.c), _num(m.d)]]


def family_json(f: WeightedFamily) -> dict:
    return {"matrices": [matrix_json(m) for m in f.matrices], "weights": list(f.weights)}


def emit(report: dict) -> None:
    report = {"schema": SCHEMA, **report}
    sys.stdout.write(json.dumps(report, indent=2) + "\n")


def _value_fields(cv) -> dict:
    return {
        "estimate": cv.estimate,
        "bound": cv.truncation_bound,
        "N": cv.N,
        "M": cv.M,
        "r": cv.r_used,
    }


# ------------------------------------------------------------------ commands


def _pinned(args) -> dict:
    return {"r": args.r, "N": args.N, "M": args.M}


def cmd_lyapunov(args) -> int:
    pinned = _pinned(args)
    if args.replay:
        prev = load_problem(args.replay)
        if "input" not in prev:
            raise InputError(f"{args.replay}: not a lyapunov report (no 'input')")
        family = parse_family_json(prev["input"], f"{args.replay}: input")
        eps = float(prev.get("eps", args.eps))
        for k in ("r", "N", "M"):
            if pinned[k] is None:
                pinned[k] = prev.get(k)
    else:
        if not args.file:
            raise InputError("lyapunov: give --file or --replay")
        problem = load_problem(args.file)
        family = family_of(problem, args.file)
        eps = args.eps if args.eps is not None else float(problem.get("epsilon", 1e-10))
    t0 = time.perf_counter()
    res = lyapunov_nonnegative(family, eps, **pinned)
    elapsed = time.perf_counter() - t0
    report = {"command": "lyapunov", "status": res.status, "eps": eps}
    if res.certified:
        report.update(_value_fields(res.value))
    report["P"] = matrix_json(res.P) if res.P is not None else None
    report["witness"] = res.witness.to_json() if res.witness else None
    report["timing_s"] = elapsed
    report["input"] = family_json(family)
    emit(report)
    return EXIT_OK if res.certified else EXIT_UNCERTIFIED


def cmd_cantor_dim(args) -> int:
    pair = DigitPair(args.b, parse_digits(args.d1, "--d1"), parse_digits(args.d2, "--d2"))
    t0 = time.perf_counter()
    res = intersection_dimension(pair, args.eps)
    elapsed = time.perf_counter() - t0
    report = {
        "command": "cantor-dim",
        "status": res.status,
        "b": pair.b,
        "D1": list(pair.D1),
        "D2": list(pair.D2),
        "eps": args.eps,
    }
    if res.status == "Certified":
        report.update(
            {
                "pipeline": res.pipeline_status,
                "lyapunov": res.lyapunov,
                "dimension": res.dimension,
                "estimate": res.dimension,
                "bound": res.bound,
                "N": res.N,
                "M": res.M,
                "r": res.r,
                "P": matrix_json(res.P) if res.P is not None else None,
            }
        )
    report["witness"] = res.witness.to_json() if res.witness else None
    report["timing_s"] = elapsed
    emit(report)
    return EXIT_OK if res.status == "Certified" else EXIT_UNCERTIFIED


def cmd_census(args) -> int:
    limit = 16 if args.allow_large else (10 if args.slow else 7)
    bases = []
    for tok in args.b.split(","):
        b = int(parse_number(tok, "--b"))
        if b > limit:
            raise InputError(
                f"--b {b}: bases above {limit} need "
                + ("--slow" if limit == 7 else "--allow-large")
            )
        bases.append(b)
    rows = []
    for b in bases:
        t0 = time.perf_counter()
        row = census(b, threads=args.threads, allow_large=args.allow_large,
                     detail=bool(args.detail), legacy_rule=args.legacy_rule)
        log.info("census b=%d took %.2fs", b, time.perf_counter() - t0)
        rows.append(row)
    print(CSV_HEADER)
    for row in rows:
        print(row.csv_row())
    if args.detail:
        with open(args.detail, "w") as fh:
            for row in rows:
                for line in row.detail_lines():
                    fh.write(f"{row.b} {line}\n")
    return EXIT_OK


def _recurrence_spec(args) -> RecurrenceSpec:
    if args.file:
        data = load_problem(args.file)
        if data.get("mode") != "recurrence":
            raise InputError(f"{args.file}: expected mode 'recurrence'")
        pairs = [tuple(parse_number(x, f"{args.file}: pairs[{i}]") for x in p) for i, p in enumerate(data.get("pairs", []))]
        weights = data.get("weights") or ()
    else:
        if not args.pairs:
            raise InputError("recurrence: give --pairs or --file")
        pairs = []
        for i, chunk in enumerate(args.pairs.split(";")):
            toks = chunk.split(",")
            if len(toks) != 2:
                raise InputError(f"--pairs item {i}: expected 'a,b', got {chunk!r}")
            pairs.append(tuple(parse_number(t, f"--pairs item {i}") for t in toks))
        weights = [float(w) for w in args.weights.split(",")] if args.weights else ()
    return RecurrenceSpec(tuple(pairs), tuple(weights))


def cmd_recurrence(args) -> int:
    spec = _recurrence_spec(args)
    t0 = time.perf_counter()
    cv = growth_rate(spec, args.eps, route=args.route)
    report = {"command": "recurrence", "status": "Positive", **_value_fields(cv)}
    report["lyapunov"] = cv.extra["lyapunov"]
    report["route"] = args.route
    report["timing_s"] = time.perf_counter() - t0
    report["input"] = {"pairs": [list(p) for p in spec.pairs], "weights": list(spec.weights)}
    emit(report)
    return EXIT_OK


def cmd_check_positivize(args) -> int:
    family = family_of(load_problem(args.file), args.file)
    sys_ = build_depth2(family)
    ghc = detect_ghc_depth2(sys_)
    report: dict = {"command": "check-positivize", "excluded_identity_multiples": list(sys_.excluded)}
    if ghc:
        report.update({"status": "GhcDetected", "witness": ghc.witness.to_json()})
        emit(report)
        return EXIT_UNCERTIFIED
    arc = find_invariant_arc(family, sys=sys_)
    conj = conjugate_to_positive(family, arc, skip=sys_.excluded)
    report.update(
        {
            "status": "Conjugated",
            "arc": [arc.A, arc.B],
            "P": matrix_json(conj.P),
            "images": [matrix_json(m) for m in conj.positive_images],
        }
    )
    emit(report)
    return EXIT_OK


def cmd_mc(args) -> int:
    family = family_of(load_problem(args.file), args.file)
    t0 = time.perf_counter()
    est = mc_lyapunov(family.matrices, family.weights, args.steps, args.trials, args.seed)
    emit(
        {
            "command": "mc",
            "status": "MonteCarlo",
            "estimate": est.mean,
            "std_error": est.std_error,
            "steps": est.steps,
            "trials": est.trials,
            "seed": est.seed,
            "timing_s": time.perf_counter() - t0,
            "input": family_json(family),
        }
    )
    return EXIT_OK


# ------------------------------------------------------------------ driver


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lyapkernel", description="Certified Lyapunov exponents of random 2x2 matrix products.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lyapunov", help="exponent of a non-negative family")
    p.add_argument("--file", help="JSON problem file or text file with lines 'a b c d [weight]'")
    p.add_argument("--eps", type=float, default=None, help="target truncation error (default 1e-10)")
    p.add_argument("--replay", metavar="REPORT", help="recompute from a previous JSON report")
    p.add_argument("--r", type=float, default=None, help="pin the contraction radius")
    p.add_argument("--N", type=int, default=None, help="pin the number of series terms")
    p.add_argument("--M", type=int, default=None, help="pin the kernel truncation size")
    p.set_defaults(func=cmd_lyapunov)

    p = sub.add_parser("cantor-dim", help="dimension of a Cantor-set intersection")
    p.add_argument("--b", type=int, required=True)
    p.add_argument("--d1", required=True, help="comma-separated digits")
    p.add_argument("--d2", required=True, help="comma-separated digits")
    p.add_argument("--eps", type=float, default=1e-10)
    p.set_defaults(func=cmd_cantor_dim)

    p = sub.add_parser("census", help="degeneracy / heteroclinic census over all digit pairs")
    p.add_argument("--b", required=True, help="base or comma-separated bases")
    p.add_argument("--slow", action="store_true", help="allow bases 8..10")
    p.add_argument("--allow-large", action="store_true", help="allow bases up to 16")
    p.add_argument("--threads", type=int, default=None, help="worker processes (default: all cores)")
    p.add_argument("--detail", metavar="FILE", help="write one line per pair with its status")
    p.add_argument(
        "--legacy-rule",
        action="store_true",
        help="ignore non-hyperbolic length-2 products (legacy counting; differs from the default at b=9,10)",
    )
    p.set_defaults(func=cmd_census)

    p = sub.add_parser("recurrence", help="growth rate of x_{n+1} = a x_n + b x_{n-1}")
    p.add_argument("--pairs", help="'a,b;a,b;...'")
    p.add_argument("--weights", help="comma-separated probabilities")
    p.add_argument("--file", help="JSON with mode 'recurrence'")
    p.add_argument("--eps", type=float, default=1e-10)
    p.add_argument("--route", choices=("pairs", "direct"), default="pairs")
    p.set_defaults(func=cmd_recurrence)

    p = sub.add_parser("check-positivize", help="detect connections or build a positivizing conjugator")
    p.add_argument("--file", required=True)
    p.set_defaults(func=cmd_check_positivize)

    p = sub.add_parser("mc", help="Monte Carlo estimate")
    p.add_argument("--file", required=True)
    p.add_argument("--steps", type=int, default=100_000)
    p.add_argument("--trials", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_mc)
    return ap


def _setup_logging() -> None:
    level = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}.get(
        os.environ.get("LYAP_LOG", "quiet").lower(), logging.WARNING
    )
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def run(argv: Optional[Sequence[str]] = None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return args.func(args)
    except (InputError, PreconditionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ArcConstructionFailed, PositivityFailed, FloatingPointError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())
