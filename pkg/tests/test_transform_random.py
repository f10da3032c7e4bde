"""Randomized differential stress for the branch-merging pipeline.

Generates small diamond programs over a two-cell symbolic array: random ALU
and memory mixes in the arms, optional nested inner diamonds, optional join
phis, divisions with possibly-zero divisors.  Each program is transformed
and checked exhaustively (mask algebra over the whole 16-bit input space)
for failure preservation and state preservation, then spot-checked against
the concrete interpreter.
"""

import random

import pytest

from _oracles import check_failure_preservation, path_masks
from mse.interp import concrete_run
from mse.ir import parse_module, validate_module
from mse.solver.expr import eval_concrete
from mse.symanalysis import analyze_program
from mse.transform import merge_branches

ALU = ["add", "sub", "mul", "and", "or", "xor", "shl", "lshr", "ashr"]
PREDS = ["eq", "ne", "ult", "ule", "slt", "sge"]


class _Gen:
    def __init__(self, seed):
        self.rng = random.Random(seed)
        self.lines = []
        self.counter = 0
        self.current_block = "entry"

    def fresh(self, prefix):
        self.counter += 1
        return f"%{prefix}{self.counter}"

    def emit(self, line):
        self.lines.append("  " + line)

    def label(self, name):
        self.lines.append(f"{name}:")
        self.current_block = name

    def pick_val(self, pool):
        if self.rng.random() < 0.25:
            return str(self.rng.randrange(0, 256))
        return self.rng.choice(pool)

    def alu_op(self, pool, prefix):
        v = self.fresh(prefix)
        op = self.rng.choice(ALU + ["udiv", "sdiv"])
        a = self.pick_val(pool)
        if op in ("udiv", "sdiv"):
            # divisors may be symbolic or even the constant zero: the
            # transformation must preserve exactly which inputs crash
            b = self.pick_val(pool) if self.rng.random() < 0.5 else \
                str(self.rng.choice([0, 1, 2, 3, 7]))
        else:
            b = self.pick_val(pool)
        self.emit(f"{v} = {op} i8 {a}, {b}")
        return v

    def arm_ops(self, pool, prefix, allow_inner, depth):
        """Random straight-line (or one-level nested) arm body."""
        local = list(pool)
        n = self.rng.randint(0, 4)
        for _ in range(n):
            roll = self.rng.random()
            if roll < 0.45:
                local.append(self.alu_op(local, prefix))
            elif roll < 0.7:
                v = self.fresh(prefix)
                self.emit(f"{v} = load i8 %p{self.rng.randint(0, 1)}")
                local.append(v)
            else:
                val = self.pick_val(local)
                self.emit(f"store i8 {val}, %p{self.rng.randint(0, 1)}")
        if allow_inner and depth == 0 and self.rng.random() < 0.35:
            local = self.diamond(local, depth + 1, prefix + "n")
        return local

    def diamond(self, pool, depth, prefix):
        branch_block = self.current_block
        c = self.fresh(prefix + "c")
        self.emit(f"{c} = icmp {self.rng.choice(PREDS)} i8 "
                  f"{self.rng.choice(pool)}, {self.pick_val(pool)}")
        t, e, join = (f"{prefix}t{self.counter}", f"{prefix}e{self.counter}",
                      f"{prefix}j{self.counter}")
        if_then = self.rng.random() < 0.4
        self.emit(f"br {c}, %{t}, %{e if not if_then else join}")
        self.label(t)
        t_pool = self.arm_ops(pool, prefix + "t", allow_inner=True, depth=depth)
        t_exit = self.current_block
        self.emit(f"br %{join}")
        if not if_then:
            self.label(e)
            e_pool = self.arm_ops(pool, prefix + "e", allow_inner=True,
                                  depth=depth)
            e_exit = self.current_block
            self.emit(f"br %{join}")
        else:
            e_pool, e_exit = pool, branch_block
        self.label(join)
        out = list(pool)
        if self.rng.random() < 0.8:
            phi = self.fresh(prefix + "phi")
            tv = self.rng.choice(t_pool)
            ev = self.rng.choice(e_pool)
            self.emit(f"{phi} = phi i8 [{tv}, %{t_exit}], [{ev}, %{e_exit}]")
            out.append(phi)
        return out

    def program(self):
        self.lines = ["func @main() -> i32 {", "entry:"]
        self.current_block = "entry"
        self.emit("%a = alloca [2 x i8]")
        self.emit('call @sym.make_symbolic(%a, 2, "a")')
        self.emit("%p0 = gep [2 x i8] %a, 0")
        self.emit("%p1 = gep [2 x i8] %a, 1")
        self.emit("%v0 = load i8 %p0")
        self.emit("%v1 = load i8 %p1")
        pool = ["%v0", "%v1"]
        for _ in range(self.rng.randint(0, 2)):
            pool.append(self.alu_op(pool, "pre"))
        pool = self.diamond(pool, 0, "d")
        final = self.rng.choice(pool)
        self.emit(f"store i8 {final}, %p0")
        self.emit(f"%rv = zext i8 {final} to i32")
        self.emit("ret i32 %rv")
        self.lines.append("}")
        return "\n".join(self.lines)


def _generate(seed):
    text = _Gen(seed).program()
    mod = parse_module(text)
    diags = validate_module(mod)
    assert diags == [], f"generator produced invalid program:\n{text}\n{diags}"
    return mod


@pytest.mark.parametrize("seed", range(90))
def test_random_diamond_programs_preserve_behavior(seed):
    mod = _generate(seed)
    facts = analyze_program(mod)
    merged, report = merge_branches(mod, facts)
    assert report.found == report.merged + report.rejected
    assert validate_module(merged) == []
    # exhaustive over all 2^16 inputs via path masks
    check_failure_preservation(mod, merged)
    # idempotence
    again, rep2 = merge_branches(merged, analyze_program(merged))
    assert rep2.merged == 0
    # independent spot checks through the concrete interpreter
    rng = random.Random(seed ^ 0xABCD)
    for _ in range(12):
        inputs = {"a": [rng.randrange(256), rng.randrange(256)]}
        o1 = concrete_run(mod, inputs)
        o2 = concrete_run(merged, inputs)
        if o1.crashed:
            assert o2.crashed, (seed, inputs)
        elif not o2.crashed:
            assert (o1.memory, o1.ret) == (o2.memory, o2.ret), (seed, inputs)


@pytest.mark.parametrize("seed", range(0, 90, 3))
def test_random_programs_engine_matches_interpreter(seed):
    """Per-path symbolic state, concretized, must equal the concrete run."""
    mod = _generate(seed)
    atoms, paths, _ = path_masks(mod)
    rng = random.Random(seed * 31 + 7)
    for _ in range(6):
        idx = rng.randrange(1 << 16)
        inputs = {"a": [idx & 0xFF, (idx >> 8) & 0xFF]}
        conc = concrete_run(mod, inputs)
        hits = [rec for rec, m in paths if m[idx]]
        assert len(hits) == 1, (seed, idx)
        rec = hits[0]
        if conc.crashed:
            assert rec.outcome == conc.kind, (seed, idx)
            continue
        assert rec.outcome == "ret"
        assert eval_concrete(rec.ret, inputs) == conc.ret
        for key, cells in rec.memory.items():
            got = [eval_concrete(c, inputs) for c in cells]
            assert got == conc.memory[key], (seed, idx, key)
