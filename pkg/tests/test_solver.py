"""Expression semantics, both solver backends, caching, SMT2 export."""

import random

import pytest
from hypothesis import given, settings, strategies as st

from mse.solver import Solver, make_query
from mse.solver.enum_backend import EnumerationCapError
from mse.solver.expr import (apply_binop, apply_cmp, binop, bv_const, cmp,
                             dag_size, eval_concrete, ite, sym_read,
                             zext, sext, trunc, concat, extract)

X = sym_read("x", 0, 8)
Y = sym_read("y", 0, 8)


def test_contradiction_unsat_both_backends():
    q = [cmp("sgt", X, bv_const(8, 5)), cmp("slt", X, bv_const(8, 3))]
    assert Solver("sat").check(q).status == "unsat"
    assert Solver("enum").check(q).status == "unsat"


def test_simple_equality_model():
    q = [cmp("eq", X, bv_const(8, 7))]
    for backend in ("sat", "enum"):
        r = Solver(backend).check(q)
        assert r.status == "sat"
        assert r.model["x"][0] == 7


def test_eval_concrete_basics():
    assert eval_concrete(bv_const(8, 42), {}) == 42
    # a non-constant ite evaluated under a model picking the true side
    e = ite(cmp("eq", X, bv_const(8, 1)), Y, bv_const(8, 9))
    assert eval_concrete(e, {"x": [1], "y": [5]}) == 5
    assert eval_concrete(e, {"x": [0], "y": [5]}) == 9


def test_structural_sharing():
    a = binop("add", X, Y)
    b = binop("add", X, Y)
    assert a is b
    assert dag_size([a, b]) == 3


def test_signed_division_semantics():
    # truncation toward zero, SMT-LIB convention at zero, INT_MIN wrap
    assert apply_binop("sdiv", 7, 0xFE, 8) == 0xFD          # 7 / -2 = -3
    assert apply_binop("sdiv", 0x80, 0xFF, 8) == 0x80       # INT_MIN / -1 wraps
    assert apply_binop("sdiv", 5, 0, 8) == 0xFF             # nonneg / 0 = -1
    assert apply_binop("sdiv", 0xFB, 0, 8) == 1             # neg / 0 = +1
    assert apply_binop("udiv", 5, 0, 8) == 0xFF


def test_shift_semantics_total():
    assert apply_binop("shl", 0x81, 9, 8) == 0
    assert apply_binop("lshr", 0x81, 9, 8) == 0
    assert apply_binop("ashr", 0x81, 9, 8) == 0xFF
    assert apply_binop("ashr", 0x41, 9, 8) == 0


@given(st.sampled_from(["add", "sub", "mul", "and", "or", "xor",
                        "shl", "lshr", "ashr", "udiv", "sdiv"]),
       st.integers(0, 255), st.integers(0, 255))
@settings(max_examples=300, deadline=None)
def test_symbolic_eval_matches_direct_semantics(op, a, b):
    e = binop(op, X, Y)
    got = eval_concrete(e, {"x": [a], "y": [b]})
    assert got == apply_binop(op, a, b, 8)


@given(st.sampled_from(["eq", "ne", "ult", "ule", "ugt", "uge",
                        "slt", "sle", "sgt", "sge"]),
       st.integers(0, 255), st.integers(0, 255))
@settings(max_examples=200, deadline=None)
def test_cmp_eval_matches_direct_semantics(pred, a, b):
    got = eval_concrete(cmp(pred, X, Y), {"x": [a], "y": [b]})
    assert got == apply_cmp(pred, a, b, 8)


def test_width_changing_ops():
    w = sym_read("w", 0, 16)
    m = {"w": [0x8123], "x": [0xAB]}
    assert eval_concrete(zext(X, 32), m) == 0xAB
    assert eval_concrete(sext(X, 32), m) == 0xFFFFFFAB
    assert eval_concrete(trunc(w, 8), m) == 0x23
    assert eval_concrete(concat(X, w), m) == 0xAB8123
    assert eval_concrete(extract(w, 11, 4), m) == 0x12


def _random_expr(rng, depth, width=8):
    if depth == 0 or rng.random() < 0.2:
        if rng.random() < 0.6:
            return sym_read(rng.choice("xy"), 0, width)
        return bv_const(width, rng.randrange(1 << width))
    roll = rng.random()
    if roll < 0.15:
        c = cmp(rng.choice(["eq", "ult", "slt"]),
                _random_expr(rng, depth - 1), _random_expr(rng, depth - 1))
        return ite(c, _random_expr(rng, depth - 1), _random_expr(rng, depth - 1))
    op = rng.choice(["add", "sub", "mul", "and", "or", "xor",
                     "shl", "lshr", "ashr", "udiv", "sdiv"])
    return binop(op, _random_expr(rng, depth - 1), _random_expr(rng, depth - 1))


def _random_query(rng):
    preds = ["eq", "ne", "ult", "ule", "ugt", "uge", "slt", "sle", "sgt", "sge"]
    return [cmp(rng.choice(preds), _random_expr(rng, 2), _random_expr(rng, 2))
            for _ in range(rng.randint(1, 3))]


def test_backends_agree_on_random_queries():
    rng = random.Random(1234)
    sat_solver = Solver("sat", caching=False)
    enum_solver = Solver("enum", caching=False)
    for i in range(400):
        q = _random_query(rng)
        r1, r2 = sat_solver.check(q), enum_solver.check(q)
        assert r1.status == r2.status, (i, q)
        for r in (r1, r2):
            if r.is_sat:
                model = {"x": [r.model.get("x", {}).get(0, 0)],
                         "y": [r.model.get("y", {}).get(0, 0)]}
                for c in q:
                    assert eval_concrete(c, model) == 1, (i, c, model)


def test_cache_hit_on_identical_query():
    s = Solver("sat")
    q = [cmp("eq", X, bv_const(8, 3))]
    s.check(q)
    issued = s.stats.queries
    s.check(q)
    assert s.stats.queries == issued
    assert s.stats.cache_hits == 1


def test_cache_hit_is_order_insensitive():
    s = Solver("sat")
    a = cmp("ult", X, bv_const(8, 100))
    b = cmp("ugt", Y, bv_const(8, 3))
    s.check([a, b])
    s.check([b, a])
    assert s.stats.queries == 1
    assert s.stats.cache_hits == 1
    assert make_query([a, b]).key == make_query([b, a]).key


def test_cache_disabled_counts_every_query():
    s = Solver("sat", caching=False)
    q = [cmp("eq", X, bv_const(8, 3))]
    s.check(q)
    s.check(q)
    assert s.stats.queries == 2
    assert s.stats.cache_hits == 0


def test_query_size_is_dedup_dag_node_count():
    shared = binop("add", X, Y)
    a = cmp("ult", shared, bv_const(8, 9))
    b = cmp("ugt", shared, bv_const(8, 1))
    # nodes: x, y, add, 9, 1, ult, ugt -> 7
    assert make_query([a, b]).size == 7


def test_enumeration_cap_error():
    wide = [cmp("eq", sym_read(f"a{i}", 0, 8), bv_const(8, 1)) for i in range(4)]
    with pytest.raises(EnumerationCapError):
        Solver("enum", cap_bits=20).check(wide)


def test_smt2_dump(tmp_path):
    s = Solver("sat", dump_dir=str(tmp_path))
    s.check([cmp("slt", binop("add", X, bv_const(8, 1)), Y)])
    files = list(tmp_path.glob("*.smt2"))
    assert len(files) == 1
    body = files[0].read_text()
    assert "(set-logic QF_BV)" in body and "(check-sat)" in body
    assert "bvadd" in body and "bvslt" in body


def test_backends_agree_on_sixteen_bit_atoms():
    rng = random.Random(77)
    sat_solver = Solver("sat", caching=False)
    enum_solver = Solver("enum", caching=False)
    w = sym_read("w", 0, 16)

    def expr(depth):
        if depth == 0 or rng.random() < 0.2:
            return w if rng.random() < 0.6 else bv_const(16, rng.randrange(1 << 16))
        op = rng.choice(["add", "sub", "mul", "and", "or", "xor",
                         "shl", "lshr", "ashr", "udiv", "sdiv"])
        return binop(op, expr(depth - 1), expr(depth - 1))

    for i in range(120):
        q = [cmp(rng.choice(["eq", "ne", "ult", "slt", "uge", "sle"]),
                 expr(3), expr(3))]
        r1, r2 = sat_solver.check(q), enum_solver.check(q)
        assert r1.status == r2.status, (i, q)
        for r in (r1, r2):
            if r.is_sat:
                model = {"w": [r.model.get("w", {}).get(0, 0)]}
                assert eval_concrete(q[0], model) == 1, (i, q)


def test_wider_widths_through_the_sat_backend():
    x16 = sym_read("w", 0, 16)
    r = Solver("sat").check([cmp("eq", binop("mul", x16, bv_const(16, 3)),
                                 bv_const(16, 300))])
    assert r.is_sat and (r.model["w"][0] * 3) & 0xFFFF == 300
    x32 = sym_read("v", 0, 32)
    r = Solver("sat").check([cmp("eq", binop("udiv", x32, bv_const(32, 7)),
                                 bv_const(32, 5)),
                             cmp("eq", binop("and", x32, bv_const(32, 1)),
                                 bv_const(32, 1))])
    assert r.is_sat
    v = r.model["v"][0]
    assert v // 7 == 5 and v & 1 == 1
    unsat = Solver("sat").check([cmp("ult", x32, bv_const(32, 10)),
                                 cmp("ugt", x32, bv_const(32, 1 << 20))])
    assert unsat.status == "unsat"


def test_width_changing_chain_agrees_across_backends():
    w = sym_read("w", 0, 16)
    e = binop("add", sext(trunc(w, 8), 16), zext(extract(w, 15, 8), 16))
    q = [cmp("eq", e, bv_const(16, 0x0134))]
    r1, r2 = Solver("sat").check(q), Solver("enum").check(q)
    assert r1.status == r2.status
    if r1.is_sat:
        for r in (r1, r2):
            assert eval_concrete(q[0], {"w": [r.model["w"][0]]}) == 1


def test_sat_backend_unknown_on_conflict_budget():
    from mse.solver import SolverUnknown
    rng = random.Random(7)
    # a moderately hard random instance; one conflict is never enough
    q = [cmp("eq", binop("mul", X, Y), bv_const(8, 143)),
         cmp("ugt", X, bv_const(8, 1)), cmp("ugt", Y, bv_const(8, 1))]
    s = Solver("sat", max_conflicts=1)
    try:
        r = s.check(q)
    except SolverUnknown:
        return
    # if it solved within a conflict, the result must still be correct
    assert r.status == "sat"
