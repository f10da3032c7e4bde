"""SMT-LIB2 export of queries for cross-checking with external solvers."""

from __future__ import annotations

from .expr import BINOP_NAMES, CMP_NAMES, reads_of, walk

_BV_OP = {"add": "bvadd", "sub": "bvsub", "mul": "bvmul", "udiv": "bvudiv",
          "sdiv": "bvsdiv", "and": "bvand", "or": "bvor", "xor": "bvxor",
          "shl": "bvshl", "lshr": "bvlshr", "ashr": "bvashr"}
_BV_CMP = {"eq": "=", "ne": "distinct", "ult": "bvult", "ule": "bvule",
           "ugt": "bvugt", "uge": "bvuge", "slt": "bvslt", "sle": "bvsle",
           "sgt": "bvsgt", "sge": "bvsge"}


def _atom_name(node):
    return f"|{node.args[0]}.{node.args[1]}|"


def to_smt2(conjuncts):
    """Render pc conjuncts as a full (check-sat) script."""
    lines = ["(set-logic QF_BV)"]
    for a in reads_of(conjuncts):
        lines.append(f"(declare-const {_atom_name(a)} (_ BitVec {a.width}))")
    names = {}
    for i, node in enumerate(walk(conjuncts)):
        op = node.op
        if op == "const":
            names[id(node)] = f"(_ bv{node.value} {node.width})"
            continue
        if op == "read":
            names[id(node)] = _atom_name(node)
            continue
        n = lambda x: names[id(x)]
        if op in BINOP_NAMES:
            body = f"({_BV_OP[op]} {n(node.args[0])} {n(node.args[1])})"
        elif op in CMP_NAMES:
            body = (f"(ite ({_BV_CMP[op]} {n(node.args[0])} {n(node.args[1])}) "
                    "#b1 #b0)")
        elif op == "ite":
            c, t, f = node.args
            body = f"(ite (= {n(c)} #b1) {n(t)} {n(f)})"
        elif op == "zext":
            a = node.args[0]
            body = f"((_ zero_extend {node.width - a.width}) {n(a)})"
        elif op == "sext":
            a = node.args[0]
            body = f"((_ sign_extend {node.width - a.width}) {n(a)})"
        elif op == "trunc":
            body = f"((_ extract {node.width - 1} 0) {n(node.args[0])})"
        elif op == "concat":
            body = f"(concat {n(node.args[0])} {n(node.args[1])})"
        elif op == "extract":
            a, hi, lo = node.args
            body = f"((_ extract {hi} {lo}) {n(a)})"
        else:
            raise ValueError(op)
        nm = f"e{i}"
        lines.append(f"(define-fun {nm} () (_ BitVec {node.width}) {body})")
        names[id(node)] = nm
    for c in conjuncts:
        lines.append(f"(assert (= {names[id(c)]} #b1))")
    lines.append("(check-sat)")
    return "\n".join(lines) + "\n"
