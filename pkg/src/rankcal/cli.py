"""Command-line interface.

Subcommands: ``simulate``, ``rank``, ``postprocess``, ``oracle``, ``verify``
and ``rerun``. Every command that writes to ``--out`` also writes a
``manifest.json`` from which ``rerun`` reproduces the outputs exactly.

Exit codes: 0 success, 1 usage error, 2 data error, 3 verification failure.
"""
import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._accel import backend
from .core import RandomSource, observation_ranks
from .errors import DataError, UsageError
from .io import (
    histogram_svg,
    read_cases,
    read_series,
    summary_dict,
    write_cases,
    write_histogram_csv,
    write_json,
    write_ranks,
    write_text,
)
from .oracle import oracle_report
from .postprocess import STRATEGIES, PostprocessConfig, SyntheticSpec, run_postprocessing, synthetic_series
from .prerank import PreRankMethod, compute_preranks_many
from .simulate import ScenarioConfig, run_scenario_multi, sample_sets

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_VERIFY = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _default_seed():
    text = os.environ.get("RANKCAL_SEED")
    if text is None or not text.strip():
        return 0
    try:
        return int(text)
    except ValueError:
        raise UsageError(f"RANKCAL_SEED must be an integer, got {text!r}") from None


def _write_outputs(out, method, hist, svg, title):
    write_histogram_csv(out / f"hist_{method}.csv", hist)
    write_json(out / f"summary_{method}.json", summary_dict(method, hist))
    if svg:
        write_text(out / f"hist_{method}.svg", histogram_svg(hist, title))


def _manifest(args, command, out, inputs, started):
    params = {k: v for k, v in vars(args).items() if k not in ("func", "out")}
    files = sorted(p.relative_to(out).as_posix() for p in out.rglob("*")
                   if p.is_file() and p.name != "manifest.json")
    manifest = {
        "subcommand": command,
        "params": params,
        "seed": params.get("seed"),
        "version": __version__,
        "backend": backend(),
        "workers": params.get("workers", 1),
        "inputs": inputs,
        "output_dir": str(out.resolve()),
        "outputs": files,
        "duration_seconds": round(time.perf_counter() - started, 3),
    }
    write_json(out / "manifest.json", manifest)


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ----------------------------------------------------------------- commands


def cmd_simulate(args):
    started = time.perf_counter()
    cfg = ScenarioConfig.from_names(args.scenario, args.obs_scenario, args.d, args.m,
                                    args.cases, args.seed)
    methods = PreRankMethod.parse_list(args.method)
    out = _out_dir(args)
    res = run_scenario_multi(cfg, methods, workers=args.workers, chunk=args.chunk,
                             standardize=args.standardize)
    for meth, hist in res.histograms.items():
        title = f"{meth.value}: {args.scenario} vs {args.obs_scenario}, d={args.d}"
        _write_outputs(out, meth.value, hist, args.svg, title)
    if args.save_cases:
        write_cases(out / "cases.csv", sample_sets(cfg, np.arange(args.cases)))
        for meth, ranks in res.ranks.items():
            write_ranks(out / f"ranks_{meth.value}.csv", range(args.cases), ranks)
    _manifest(args, "simulate", out, [], started)
    return EXIT_OK


def _case_ranks(cases, method, seed, standardize):
    """Observation ranks for cases of possibly different sizes, batched by shape."""
    ranks = np.zeros(len(cases), dtype=np.int64)
    groups = {}
    for i, case in enumerate(cases):
        groups.setdefault((case.m, case.d), []).append(i)
    for idx in groups.values():
        S = np.stack([cases[i].ensemble_set() for i in idx])
        pre = compute_preranks_many(S, [method], standardize=standardize)[method]
        u = np.array([RandomSource(seed, cases[i].case_id).tie_uniform() for i in idx])
        ranks[idx] = observation_ranks(pre, u)
    return ranks


def cmd_rank(args):
    started = time.perf_counter()
    method = PreRankMethod.parse(args.method)
    src = Path(args.input)
    if not src.is_file():
        raise DataError(f"input file {src} not found")
    args.input = str(src.resolve())
    cases = read_cases(src)
    out = _out_dir(args)
    ranks = _case_ranks(cases, method, args.seed, args.standardize)
    write_ranks(out / "ranks.csv", [c.case_id for c in cases], ranks)
    _manifest(args, "rank", out, [args.input], started)
    return EXIT_OK


def cmd_postprocess(args):
    started = time.perf_counter()
    config = PostprocessConfig(window=args.window, strategy=args.strategy,
                               inflate=not args.no_inflate)
    methods = PreRankMethod.parse_list(args.methods)
    inputs = []
    if args.input:
        src = Path(args.input)
        if not src.is_file():
            raise DataError(f"input file {src} not found")
        args.input = str(src.resolve())
        series = read_series(src)
        inputs.append(args.input)
    else:
        series = synthetic_series(SyntheticSpec.parse(args.synthetic))
    out = _out_dir(args)
    res = run_postprocessing(series, config, methods, seed=args.seed,
                             standardize=args.standardize)
    for meth, hist in res.multivariate.items():
        _write_outputs(out, meth.value, hist, args.svg, f"{meth.value}: {args.strategy}")
    for k, hist in enumerate(res.univariate, start=1):
        _write_outputs(out, f"lead{k:02d}", hist, args.svg, f"lead time {k}: {args.strategy}")
    _manifest(args, "postprocess", out, inputs, started)
    return EXIT_OK


def cmd_oracle(args):
    started = time.perf_counter()
    report = oracle_report(args.m, args.d).to_dict()
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        out = _out_dir(args)
        write_text(out / "oracle.json", text + "\n")
        _manifest(args, "oracle", out, [], started)
    else:
        print(text)
    return EXIT_OK


def cmd_verify(args):
    from .verify import run_suite

    results = run_suite(args.suite, report=lambda r: print(r.line(), flush=True))
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_rerun(args):
    path = Path(args.manifest)
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
        command = manifest["subcommand"]
        params = dict(manifest["params"])
    except (OSError, ValueError, KeyError) as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from None
    if command not in COMMANDS or command in ("verify", "rerun"):
        raise DataError(f"manifest names unsupported subcommand {command!r}")
    params["out"] = args.out if args.out else manifest.get("output_dir")
    if args.workers is not None and "workers" in params:
        params["workers"] = args.workers
    return COMMANDS[command](argparse.Namespace(**params))


COMMANDS = {
    "simulate": cmd_simulate,
    "rank": cmd_rank,
    "postprocess": cmd_postprocess,
    "oracle": cmd_oracle,
    "verify": cmd_verify,
    "rerun": cmd_rerun,
}


def _positive(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def build_parser():
    seed = _default_seed()
    p = _Parser(prog="rankcal", description="Multivariate rank histograms for ensemble forecasts.")
    p.add_argument("--version", action="version", version=f"rankcal {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="Monte Carlo rank histograms for Gaussian scenarios")
    s.add_argument("--scenario", required=True,
                   help="forecast model: iid:<mu>:<sigma>, ar1:<tau>, corr-a, corr-b or corr-c")
    s.add_argument("--obs-scenario", default="iid:0:1", help="observation model (same syntax)")
    s.add_argument("--d", type=_positive, required=True)
    s.add_argument("--m", type=_positive, default=20, help="ensemble size plus one")
    s.add_argument("--cases", type=_positive, default=10000)
    s.add_argument("--method", default="all", help="mv, bd, avg, mst, a comma list or all")
    s.add_argument("--seed", type=int, default=seed)
    s.add_argument("--out", required=True)
    s.add_argument("--svg", action="store_true", help="also write SVG bar charts")
    s.add_argument("--save-cases", action="store_true",
                   help="write the sampled cases and per-case ranks")
    s.add_argument("--standardize", action="store_true", help="standardise before MST")
    s.add_argument("--workers", type=_positive, default=1)
    s.add_argument("--chunk", type=_positive, default=2000, help="cases per work unit")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("rank", help="rank observations in a case file")
    r.add_argument("--in", dest="input", required=True)
    r.add_argument("--method", required=True)
    r.add_argument("--seed", type=int, default=seed)
    r.add_argument("--standardize", action="store_true")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_rank)

    q = sub.add_parser("postprocess", help="rolling bias correction and error dressing")
    grp = q.add_mutually_exclusive_group(required=True)
    grp.add_argument("--in", dest="input", help="series CSV day,member_id,v1..vd")
    grp.add_argument("--synthetic", help="synthetic spec, key=value pairs ('' for defaults)")
    q.add_argument("--strategy", choices=STRATEGIES, default="independent")
    q.add_argument("--window", type=_positive, default=50)
    q.add_argument("--methods", default="all")
    q.add_argument("--no-inflate", action="store_true")
    q.add_argument("--standardize", action="store_true")
    q.add_argument("--seed", type=int, default=seed)
    q.add_argument("--svg", action="store_true")
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_postprocess)

    o = sub.add_parser("oracle", help="closed-form pre-rank moments as JSON")
    o.add_argument("--m", type=int, required=True)
    o.add_argument("--d", type=int, required=True)
    o.add_argument("--out", help="write oracle.json and a manifest here instead of stdout")
    o.set_defaults(func=cmd_oracle)

    v = sub.add_parser("verify", help="run acceptance checks")
    v.add_argument("--suite", required=True,
                   choices=("figures", "tables", "appendix", "bruteforce", "postprocess",
                            "determinism", "all"))
    v.set_defaults(func=cmd_verify)

    rr = sub.add_parser("rerun", help="repeat a run from its manifest")
    rr.add_argument("--manifest", required=True)
    rr.add_argument("--out", help="output directory (default: the recorded one)")
    rr.add_argument("--workers", type=_positive)
    rr.set_defaults(func=cmd_rerun)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
