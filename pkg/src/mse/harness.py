"""False-positive filtering driver and mode-comparison runner.

The driver explores the transformed program; every crash is replayed on the
original with the crashing input.  A crash that reproduces is a true
positive and exploration continues.  One that does not is an artifact of
merging: its origin location is added to the skip set, the program is
re-transformed from the pristine original, and exploration restarts from
scratch.  Skip locations only grow, and they are drawn from the finite set
of merge locations, so the loop terminates.

The comparison runner fills the K / SM / C / C-SM matrix per benchmark and
input size and renders it as JSON or an aligned text table.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace as dc_replace

from . import corpus
from .interp import concrete_run
from .symanalysis import analyze_program
from .symexec import DseConfig, DseEngine
from .transform import merge_branches


def verify_crash(original, report):
    """Replay the crash input on the original program and classify."""
    outcome = concrete_run(original, report.input)
    if outcome.crashed:
        report.classification = "true-positive"
        report.replay_kind = outcome.kind
        report.replay_src_lines = outcome.src_lines
    else:
        report.classification = "false-positive"
    return report.classification


@dataclass
class DriverState:
    original: object
    constraints: set = field(default_factory=set)
    iterations: int = 0
    true_positives: list = field(default_factory=list)
    false_positive_locations: list = field(default_factory=list)
    reports: list = field(default_factory=list)        # TransformReport per pass
    final: object = None                               # last DseReport

    def to_json(self):
        return {
            "iterations": self.iterations,
            "constraints": sorted(self.constraints),
            "true_positives": [c.to_json() for c in self.true_positives],
            "false_positive_locations": list(self.false_positive_locations),
            "final": self.final.to_json() if self.final else None,
        }


def driver_loop(module, config=None, max_iterations=64):
    """Explore the merged program, filtering out merge-induced false bugs."""
    config = config or DseConfig()
    facts = analyze_program(module)
    state = DriverState(module)
    while state.iterations < max_iterations:
        state.iterations += 1
        merged, treport = merge_branches(module, facts,
                                         skip=frozenset(state.constraints))
        state.reports.append(treport)
        found_fp = []

        def hook(crash):
            cls = verify_crash(module, crash)
            if cls == "true-positive":
                state.true_positives.append(crash)
                return "continue"
            found_fp.append(crash)
            return "abort"

        run_cfg = dc_replace(config, crash_hook=hook)
        dse = DseEngine(merged, run_cfg).run()
        if not found_fp:
            state.final = dse
            return state
        crash = found_fp[0]
        loc = crash.origin
        if loc is None or loc in state.constraints:
            raise AssertionError(
                f"false positive at {crash.location} has no usable merge "
                f"origin; driver cannot make progress")
        state.false_positive_locations.append(loc)
        state.constraints.add(loc)
    state.final = dse
    return state


# ---------------------------------------------------------------------------
# Mode comparison

MODES = ("K", "SM", "C", "C-SM")


@dataclass
class CompareCell:
    benchmark: str
    size: int
    mode: str
    report: object

    def row(self):
        r = self.report
        return {"benchmark": self.benchmark, "size": self.size, "mode": self.mode,
                **r.to_json()}


@dataclass
class CompareMatrix:
    cells: list = field(default_factory=list)

    def get(self, benchmark, size, mode):
        for c in self.cells:
            if (c.benchmark, c.size, c.mode) == (benchmark, size, mode):
                return c
        return None

    def to_json(self):
        return [c.row() for c in self.cells]

    def to_table(self):
        groups = ("Time(s)", "Queries", "AvgQuerySize", "Paths")
        head1 = f"{'Benchmark':<22}{'Size':>5}"
        head2 = " " * 27
        for g in groups:
            head1 += f" | {g:^39}"
            head2 += " | " + "".join(f"{m:>10}" for m in MODES)
        lines = [head1, head2, "-" * len(head2)]
        seen = []
        for c in self.cells:
            key = (c.benchmark, c.size)
            if key not in seen:
                seen.append(key)
        for bench, size in seen:
            row = f"{bench:<22}{size:>5}"
            for g, attr in zip(groups, ("time", "queries", "avg", "paths")):
                row += " | "
                for mode in MODES:
                    cell = self.get(bench, size, mode)
                    if cell is None:
                        row += f"{'-':>10}"
                        continue
                    r = cell.report
                    if attr == "time":
                        val = ("OOT" if r.termination != "exhausted"
                               else f"{r.time_ms / 1000:.2f}")
                    elif attr == "queries":
                        val = str(r.queries)
                    elif attr == "avg":
                        val = f"{r.avg_query_size:.0f}"
                    else:
                        val = str(r.paths)
                    row += f"{val:>10}"
            lines.append(row)
        return "\n".join(lines) + "\n"


def run_compare(benchmarks, sizes, config=None, modes=MODES):
    """Run each benchmark at each size under the requested modes."""
    config = config or DseConfig()
    matrix = CompareMatrix()
    for name in benchmarks:
        for size in sizes:
            base = corpus.load(name, size)
            facts = analyze_program(base)
            merged, _ = merge_branches(base, facts)
            for mode in modes:
                target = merged if mode.startswith("C") else base
                cfg = dc_replace(config, merge_states=mode.endswith("SM"))
                report = DseEngine(target, cfg).run()
                report.mode = mode
                matrix.cells.append(CompareCell(name, size, mode, report))
    return matrix
