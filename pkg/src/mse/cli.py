"""Command-line interface.

Subcommands: analyze, transform, run, driver, compare.  Input programs are
.mir files or bundled benchmark names (optionally name:size).  Exit codes:
0 success, 1 validation diagnostics or errors, 2 budget exhaustion.

MSE_SEED is honored for reproducibility; the pipeline itself is
deterministic, so the seed only feeds the stdlib RNG used by any future
randomized tie-breaking.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys

from . import corpus
from .harness import MODES, driver_loop, run_compare
from .ir import MirError, parse_module, print_module, validate_module
from .symanalysis import analyze_program, facts_to_json
from .symexec import DseConfig, DseEngine
from .transform import merge_branches

EXIT_OK, EXIT_DIAGNOSTICS, EXIT_BUDGET = 0, 1, 2


def _load_module(target):
    if os.path.exists(target):
        with open(target) as fh:
            text = fh.read()
        return parse_module(text)
    name, _, size = target.partition(":")
    if name in corpus.names():
        return corpus.load(name, int(size) if size else None)
    raise SystemExit(f"error: no such file or benchmark: {target}")


def _validated(target):
    mod = _load_module(target)
    diags = validate_module(mod)
    if diags:
        for d in diags:
            print(d, file=sys.stderr)
        raise SystemExit(EXIT_DIAGNOSTICS)
    return mod


def _dse_config(args):
    return DseConfig(
        strategy=args.strategy,
        merge_states=args.merge_states,
        caching=not args.no_cache,
        backend=args.backend,
        max_time=args.max_time,
        max_paths=args.max_paths,
        dump_smt2=getattr(args, "dump_smt2", None),
    )


def _add_run_flags(p):
    p.add_argument("--strategy", choices=("dfs", "bfs"), default="dfs")
    p.add_argument("--merge-states", action="store_true")
    p.add_argument("--no-cache", action="store_true")
    p.add_argument("--backend", choices=("sat", "enum"), default="sat")
    p.add_argument("--max-time", type=float, default=None, metavar="S")
    p.add_argument("--max-paths", type=int, default=None, metavar="N")


def cmd_analyze(args):
    mod = _validated(args.module)
    facts = analyze_program(mod)
    print(json.dumps(facts_to_json(mod, facts), indent=2))
    return EXIT_OK


def cmd_transform(args):
    mod = _validated(args.module)
    facts = analyze_program(mod)
    skip = frozenset(args.skip_loc or ())
    merged, report = merge_branches(mod, facts, skip=skip)
    text = print_module(merged)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(report.to_json(), fh, indent=2)
    return EXIT_OK


def cmd_run(args):
    mod = _validated(args.module)
    report = DseEngine(mod, _dse_config(args)).run()
    payload = report.to_json()
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(payload, fh, indent=2)
    print(json.dumps(payload, indent=2))
    return EXIT_OK if report.termination == "exhausted" else EXIT_BUDGET


def cmd_driver(args):
    mod = _validated(args.module)
    state = driver_loop(mod, _dse_config(args))
    payload = state.to_json()
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(payload, fh, indent=2)
    print(json.dumps(payload, indent=2))
    done = state.final is not None and state.final.termination == "exhausted"
    return EXIT_OK if done else EXIT_BUDGET


def cmd_compare(args):
    benchmarks = args.benchmarks.split(",") if args.benchmarks else corpus.names()
    sizes = [int(s) for s in args.sizes.split(",")] if args.sizes else [None]
    modes = args.modes.split(",") if args.modes else list(MODES)
    for m in modes:
        if m not in MODES:
            raise SystemExit(f"error: unknown mode {m}")
    matrix = run_compare(benchmarks, sizes, _dse_config(args), modes=modes)
    table = matrix.to_table()
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(matrix.to_json(), fh, indent=2)
    if args.table:
        with open(args.table, "w") as fh:
            fh.write(table)
    print(table)
    oot = any(c.report.termination != "exhausted" for c in matrix.cells)
    return EXIT_BUDGET if oot else EXIT_OK


def main(argv=None):
    seed = os.environ.get("MSE_SEED")
    if seed is not None:
        random.seed(int(seed))
    ap = argparse.ArgumentParser(prog="mse",
                                 description="branch-merging DSE workbench")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="print symbolic-variable facts as JSON")
    p.add_argument("module")
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("transform", help="apply branch merging to a module")
    p.add_argument("module")
    p.add_argument("-o", "--output", help="write transformed MIR here")
    p.add_argument("--skip-loc", action="append", metavar="FUNC:BLOCK",
                   help="location to exclude from merging (repeatable)")
    p.add_argument("--report", help="write a JSON transform report")
    p.set_defaults(fn=cmd_transform)

    p = sub.add_parser("run", help="symbolically execute a module")
    p.add_argument("module")
    _add_run_flags(p)
    p.add_argument("--dump-smt2", metavar="DIR",
                   help="write every issued query in SMT-LIB2 form")
    p.add_argument("--json", help="write the report as JSON")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("driver", help="transform + explore + filter false positives")
    p.add_argument("module")
    _add_run_flags(p)
    p.add_argument("--json", help="write the driver state as JSON")
    p.set_defaults(fn=cmd_driver)

    p = sub.add_parser("compare", help="K/SM/C/C-SM comparison matrix")
    p.add_argument("--benchmarks", help="comma-separated benchmark names")
    p.add_argument("--sizes", help="comma-separated input sizes")
    p.add_argument("--modes", help=f"subset of {','.join(MODES)}")
    _add_run_flags(p)
    p.add_argument("--json", help="write matrix rows as JSON")
    p.add_argument("--table", help="write the text table here")
    p.set_defaults(fn=cmd_compare)

    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except MirError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DIAGNOSTICS


if __name__ == "__main__":
    sys.exit(main())
