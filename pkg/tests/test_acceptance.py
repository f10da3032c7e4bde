"""Acceptance suite: one test per criterion, exact tolerances.

Run with `pytest tests/test_acceptance.py -v -s` to see one line per
criterion.  Every number asserted here is exact; the only timing bounds are
the stated wall-clock budgets.
"""

import random
import time

import pytest

from _oracles import check_failure_preservation, check_partition
from mse import corpus
from mse.harness import driver_loop
from mse.solver import Solver
from mse.solver.expr import (binop, bv_const, cmp, eval_concrete, ite,
                             sym_read)
from mse.symanalysis import analyze_program
from mse.symexec import DseConfig, DseEngine, run_dse
from mse.transform import merge_branches


def _report(line):
    print(f"\n[acceptance] {line}")


def _transformed(name, size):
    mod = corpus.load(name, size)
    merged, rep = merge_branches(mod, analyze_program(mod))
    return mod, merged, rep


def test_criterion_1_path_explosion_reproduction():
    """toupper N=10: original explores 1024 paths, merged explores 1."""
    t0 = time.monotonic()
    mod, merged, _ = _transformed("toupper", 10)
    base = run_dse(mod, DseConfig(backend="sat"))
    assert base.paths == 1024
    assert base.termination == "exhausted"
    after = run_dse(merged, DseConfig(backend="sat"))
    assert after.paths == 1
    elapsed = time.monotonic() - t0
    assert elapsed < 60.0, f"{elapsed:.1f}s exceeds the 60s budget"
    _report(f"criterion 1 PASS: paths 1024 -> 1 (SAT backend, {elapsed:.1f}s)")


def test_criterion_2_select_shape():
    """Merging the toupper diamond emits exactly 3 selects."""
    _, merged, rep = _transformed("toupper", 10)
    assert rep.selects == {"to_upper:body": 3}
    emitted = [i for f in merged.functions for b in f.blocks
               for i in b.instructions if i.opcode == "select"]
    assert len(emitted) == 3
    _report("criterion 2 PASS: exactly 3 selects for the toupper diamond")


def test_criterion_3_state_merging_path_count():
    """toupper N=10 under state merging completes exactly 11 paths."""
    mod = corpus.load("toupper", 10)
    report = run_dse(mod, DseConfig(backend="sat", merge_states=True))
    assert report.paths == 11
    assert report.termination == "exhausted"
    _report("criterion 3 PASS: state merging completes exactly 11 paths")


@pytest.mark.parametrize("n", [10, 100])
def test_criterion_4_query_free_merged_loop(n):
    """Merged toupper issues zero queries, none at the old branch location."""
    _, merged, _ = _transformed("toupper", n)
    engine = DseEngine(merged, DseConfig(backend="sat"))
    report = engine.run()
    assert report.paths == 1
    assert report.queries == 0
    assert engine.queries_by_branch.get("to_upper:body", 0) == 0
    _report(f"criterion 4 PASS: N={n} merged run issues 0 queries")


def test_criterion_5_failure_preservation_suite():
    """Exhaustive: crash-set(P) within crash-set(P'); safe states identical."""
    t0 = time.monotonic()
    lines = []
    for name in corpus.names():
        size = corpus.ORACLE_SIZES[name]
        mod = corpus.load(name, size)
        bits = corpus.symbolic_bits(mod)
        assert bits <= 16, (name, bits)
        merged, _ = merge_branches(mod, analyze_program(mod))
        crashes_p, crashes_t, compared = check_failure_preservation(mod, merged)
        lines.append(f"{name}@{size}: {crashes_p}->{crashes_t} crash inputs, "
                     f"{compared} safe inputs compared")
    elapsed = time.monotonic() - t0
    assert elapsed < 300.0, f"{elapsed:.0f}s exceeds the 5 min budget"
    _report(f"criterion 5 PASS ({elapsed:.0f}s): " + "; ".join(lines))


def test_criterion_6_driver_correctness():
    """guarded_oob: 1 false positive then clean; true bug survives filtering."""
    state = driver_loop(corpus.load("guarded_oob", 3), DseConfig(backend="sat"))
    assert state.iterations == 2
    assert len(state.false_positive_locations) == 1
    assert state.true_positives == []
    assert state.final.crashes == [] and state.final.termination == "exhausted"
    bug = driver_loop(corpus.load("true_bug"), DseConfig(backend="sat"))
    assert bug.iterations == 1
    assert len(bug.true_positives) == 1
    assert bug.true_positives[0].classification == "true-positive"
    assert bug.false_positive_locations == []
    _report("criterion 6 PASS: 1 false positive filtered; true positive kept")


def _random_query(rng):
    preds = ["eq", "ne", "ult", "ule", "ugt", "uge", "slt", "sle", "sgt", "sge"]
    ops = ["add", "sub", "mul", "and", "or", "xor", "shl", "lshr", "ashr",
           "udiv", "sdiv"]

    def expr(depth):
        if depth == 0 or rng.random() < 0.25:
            if rng.random() < 0.65:
                return sym_read(rng.choice("xy"), 0, 8)
            return bv_const(8, rng.randrange(256))
        if rng.random() < 0.12:
            return ite(cmp(rng.choice(preds), expr(depth - 1), expr(depth - 1)),
                       expr(depth - 1), expr(depth - 1))
        return binop(rng.choice(ops), expr(depth - 1), expr(depth - 1))

    return [cmp(rng.choice(preds), expr(2), expr(2))
            for _ in range(rng.randint(1, 2))]


def test_criterion_7_solver_cross_check():
    """SAT and enumeration agree on 10^4 random queries; models validate."""
    rng = random.Random(20240817)
    sat_solver = Solver("sat", caching=False)
    enum_solver = Solver("enum", caching=False)
    disagreements = 0
    t0 = time.monotonic()
    for i in range(10_000):
        q = _random_query(rng)
        r_sat = sat_solver.check(q)
        r_enum = enum_solver.check(q)
        if r_sat.status != r_enum.status:
            disagreements += 1
            continue
        for r in (r_sat, r_enum):
            if r.is_sat:
                model = {"x": [r.model.get("x", {}).get(0, 0)],
                         "y": [r.model.get("y", {}).get(0, 0)]}
                for c in q:
                    assert eval_concrete(c, model) == 1
    assert disagreements == 0
    _report(f"criterion 7 PASS: 10000 queries, 0 disagreements "
            f"({time.monotonic() - t0:.0f}s)")


def test_criterion_8_path_partition():
    """Per-path input sets partition the whole space on every corpus program."""
    lines = []
    for name in corpus.names():
        size = corpus.ORACLE_SIZES[name]
        mod = corpus.load(name, size)
        n = check_partition(mod)
        lines.append(f"{name}@{size}:{n}")
    _report("criterion 8 PASS: partition holds; paths " + " ".join(lines))
