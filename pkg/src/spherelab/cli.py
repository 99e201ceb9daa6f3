"""Command-line front end.

Every command writes one report to stdout (JSON by default, CSV with
``--format csv``). Reports are byte-identical for identical configurations:
keys are sorted, timings are left out unless ``--timing`` is given, and the
thread count is not echoed into the embedded config.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import __version__
from .errors import InvalidConfig, ParseError, SphereLabError
from .grid import GridFunction, average, maximal
from .lattice import (DEFAULT_CELL_CAP, DEFAULT_POINT_CAP, DEFAULT_SIEVE_BUDGET, SphereSpec, count_reps,
                      count_reps_upto, enumerate_sphere)
from .probes import delta_test, divergence_slope, periodic_padic_probe
from .sequences import (DEFAULT_PRIME_BOUND, DEFAULT_WINDOW, SequenceTruncation, default_primes,
                        dyadic_profile, generate, load_sequence, padic_profile, sequence_eta)

# config keys that describe how a run executes rather than what it computes
_EXECUTION_KEYS = {"threads", "timing", "func", "output"}


def _int_list(text: str) -> list[int]:
    try:
        return [int(float(t)) if "e" in t.lower() else int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _exponent(text: str) -> float:
    if text.strip().lower() in ("inf", "infinity"):
        return float("inf")
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def _positive(text: str) -> int:
    value = int(float(text))
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


# -- sequence sources -----------------------------------------------------------------

def _add_sequence_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("sequence")
    g.add_argument("--seq", help="sequence file (one integer per line, or JSON)")
    g.add_argument("--family", choices=["naturals", "squares", "geometric", "lacunary_random",
                                        "padic_cover"])
    g.add_argument("--bound", type=_positive, help="truncation bound T (naturals, squares, padic_cover)")
    g.add_argument("--base", type=int, default=2, help="ratio q of the geometric family")
    g.add_argument("--count", type=_positive, default=20)
    g.add_argument("--ratio", type=float, default=2.0, help="lacunary_random growth ratio")
    g.add_argument("--stages", type=_positive, default=3)
    g.add_argument("--growth", type=float, default=2.0)
    g.add_argument("--family-prime", type=int, default=2, help="prime of the padic_cover family")


def _family(args) -> SequenceTruncation:
    name = args.family
    if name == "naturals":
        return generate(name, T=args.bound or 1000)
    if name == "squares":
        return generate(name, T=args.bound or 10**4)
    if name == "geometric":
        return generate(name, q=args.base, count=args.count)
    if name == "lacunary_random":
        return generate(name, ratio=args.ratio, count=args.count, seed=args.seed)
    return generate(name, prime=args.family_prime, stages=args.stages, growth=args.growth,
                    seed=args.seed, max_term=args.bound)


def _sequence(args) -> SequenceTruncation:
    if args.seq and args.family:
        raise InvalidConfig("give either --seq or --family, not both")
    if args.seq:
        try:
            return load_sequence(args.seq)
        except OSError as exc:
            raise ParseError(f"cannot read {args.seq}: {exc}") from exc
    if args.family:
        return _family(args)
    raise InvalidConfig("a sequence is required: use --seq FILE or --family NAME")


def _read_grid(path: str) -> GridFunction:
    try:
        return GridFunction.from_json(Path(path).read_text())
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc


def _grid_json(f: GridFunction) -> dict:
    return json.loads(f.to_json())


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _primes(args) -> list[int]:
    if args.prime:
        return args.prime
    return default_primes(args.primes_up_to)


# -- commands ---------------------------------------------------------------------

def cmd_count(args):
    if args.max_lambda is not None:
        table = count_reps_upto(args.d, args.max_lambda, budget=args.cap_sieve)
        counts = table.as_list()
        return ({"d": args.d, "max_lambda": args.max_lambda, "counts": counts},
                _csv(["lambda", "count"], enumerate(counts)))
    if args.lam is None:
        raise InvalidConfig("count needs --lambda or --max-lambda")
    n = count_reps(SphereSpec(args.d, args.lam))
    return {"d": args.d, "lambda": args.lam, "count": n}, _csv(["lambda", "count"], [(args.lam, n)])


def cmd_enumerate(args):
    pts = enumerate_sphere(SphereSpec(args.d, args.lam), cap=args.cap_points).tolist()
    return ({"d": args.d, "lambda": args.lam, "count": len(pts), "points": pts},
            _csv([f"x{i}" for i in range(args.d)], pts))


def _grid_csv(f: GridFunction) -> str:
    rows = [[int(c) for c in row] + [repr(float(v))] for row, v in zip(f.coords, f.values)]
    return _csv([f"x{i}" for i in range(f.d)] + ["value"], rows)


def cmd_average(args):
    out = average(_read_grid(args.grid), args.lam, cap=args.cap_points)
    return {"lambda": args.lam, "grid": _grid_json(out)}, _grid_csv(out)


def cmd_maximal(args):
    f = _read_grid(args.grid)
    if args.lambdas:
        lams, name = args.lambdas, "custom"
    else:
        seq = _sequence(args)
        lams, name = list(seq.terms), seq.name
    out = maximal(f, lams, cap=args.cap_points, threads=args.threads)
    return {"sequence": name, "lambdas": list(lams), "grid": _grid_json(out)}, _grid_csv(out)


def cmd_generate(args):
    seq = _family(args)
    return seq.to_json(), _csv(["index", "term"], enumerate(seq.terms))


def cmd_analyze(args):
    seq = _sequence(args)
    profiles = [padic_profile(seq, p, args.jmax, window=args.window).to_json() for p in _primes(args)]
    profiles.append(dyadic_profile(seq, window=args.window).to_json())
    rows = []
    for prof in profiles:
        label = f"p={prof['prime']}" if prof["prime"] else "dyadic"
        rows.extend((label, level, count) for level, count in prof["scales"])
    doc = {"sequence": seq.to_json() if args.embed_sequence else seq.name, "profiles": profiles}
    return doc, _csv(["profile", "level", "count"], rows)


def cmd_eta(args):
    seq = _sequence(args)
    report = sequence_eta(seq, args.d, _primes(args), args.mode, window=args.window).to_json()
    report["sequence"] = seq.name
    rows = [(k, v) for k, v in report["terms"].items()] + [("eta", report["eta"])]
    return report, _csv(["term", "value"], rows)


def _probe_output(result, args):
    return result.to_json(include_runtime=args.timing), result.to_csv()


def cmd_probe_delta(args):
    seq = _sequence(args)
    res = delta_test(args.d, seq, args.p, direct=not args.no_direct, cap=args.cap_points,
                     budget=args.cap_sieve, threads=args.threads)
    return _probe_output(res, args)


def cmd_probe_slope(args):
    schedule = args.schedule
    if args.seq or args.family:
        seq = _sequence(args)
    else:
        seq = generate("naturals", T=max(schedule))
    res = divergence_slope(args.d, seq, args.p, schedule, budget=args.cap_sieve)
    return _probe_output(res, args)


def cmd_probe_padic(args):
    seq = _sequence(args)
    if len(args.prime or []) != 1:
        raise InvalidConfig("probe-padic needs exactly one --prime")
    res = periodic_padic_probe(args.d, seq, args.prime[0], args.level, args.q,
                               per_stage=not args.final_only, cell_cap=args.cap_cells)
    return _probe_output(res, args)


# -- parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=["json", "csv"], default="json")
    common.add_argument("--output", "-o", help="write the report here instead of stdout")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=_positive, default=1)
    common.add_argument("--timing", action="store_true", help="include wall-clock runtimes")
    common.add_argument("--cap-points", type=_positive, default=DEFAULT_POINT_CAP,
                        help="max sphere points / convolution terms")
    common.add_argument("--cap-cells", type=_positive, default=DEFAULT_CELL_CAP, help="max torus cells")
    common.add_argument("--cap-sieve", type=_positive, default=DEFAULT_SIEVE_BUDGET,
                        help="work budget of the representation-count sieve")

    parser = argparse.ArgumentParser(prog="spherelab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        p = sub.add_parser(name, parents=[common], help=help)
        p.set_defaults(func=func)
        return p

    p = add("count", cmd_count, "representation numbers r_d(lambda)")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=int)
    p.add_argument("--max-lambda", type=int)

    p = add("enumerate", cmd_enumerate, "lattice points on a sphere")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=int, required=True)

    p = add("average", cmd_average, "apply A_lambda to a grid function file")
    p.add_argument("--grid", required=True)
    p.add_argument("--lambda", dest="lam", type=int, required=True)

    p = add("maximal", cmd_maximal, "apply the maximal operator to a grid function file")
    p.add_argument("--grid", required=True)
    p.add_argument("--lambdas", type=_int_list, help="comma-separated radius-squared values")
    _add_sequence_args(p)

    p = add("generate", cmd_generate, "generate a sequence family")
    _add_sequence_args(p)
    p.set_defaults(family="naturals")

    def analysis_args(p):
        p.add_argument("--prime", type=int, action="append", help="prime to use (repeatable)")
        p.add_argument("--primes-up-to", type=int, default=DEFAULT_PRIME_BOUND)
        p.add_argument("--window", type=_positive, default=DEFAULT_WINDOW)

    p = add("analyze", cmd_analyze, "p-adic and dyadic dimension profiles")
    _add_sequence_args(p)
    analysis_args(p)
    p.add_argument("--jmax", type=_positive)
    p.add_argument("--embed-sequence", action="store_true")

    p = add("eta", cmd_eta, "critical exponent eta(Lambda, d)")
    p.add_argument("--d", type=int, required=True)
    _add_sequence_args(p)
    analysis_args(p)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--declared", dest="mode", action="store_const", const="declared")
    mode.add_argument("--estimated", dest="mode", action="store_const", const="estimated")
    p.set_defaults(mode="auto")

    p = add("probe-delta", cmd_probe_delta, "point-mass lower bound")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--p", type=_exponent, required=True)
    p.add_argument("--no-direct", action="store_true", help="closed form only")
    _add_sequence_args(p)

    p = add("probe-slope", cmd_probe_slope, "divergence slope of the point-mass bound")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--p", type=_exponent, required=True)
    p.add_argument("--schedule", type=_int_list, default=[10**4, 2 * 10**4, 5 * 10**4, 10**5])
    _add_sequence_args(p)

    p = add("probe-padic", cmd_probe_padic, "periodic p-adic torus probe")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--prime", type=int, action="append", required=True)
    p.add_argument("--level", type=_positive, required=True)
    p.add_argument("--q", type=_exponent, required=True)
    p.add_argument("--final-only", action="store_true", help="only report k = level")
    _add_sequence_args(p)
    return parser


def _config(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in _EXECUTION_KEYS and not k.startswith("_")}
    return json.loads(json.dumps(cfg, default=str))


def render(args) -> str:
    doc, csv_text = args.func(args)
    if args.format == "csv":
        return csv_text
    report = {"tool": "spherelab", "version": __version__, "command": args.command,
              "config": _config(args), "result": doc}
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "d", None) is not None and args.d < 4:
        return _fail(InvalidConfig(f"--d must be >= 4, got {args.d}"))
    try:
        text = render(args)
    except SphereLabError as exc:
        return _fail(exc)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _fail(exc: Exception) -> int:
    record = {"error": type(exc).__name__, "message": str(exc)}
    sys.stderr.write(json.dumps(record, sort_keys=True) + "\n")
    return 2


if __name__ == "__main__":
    sys.exit(main())
