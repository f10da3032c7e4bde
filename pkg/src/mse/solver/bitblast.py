"""Tseitin bit-blasting of bitvector expressions to CNF.

Each expression node becomes a vector of literals (LSB first) over a shared
gate pool; structurally identical gates are memoized.  Variable 1 is the
constant-true anchor.  Shift, division and comparison circuits implement the
same total semantics as the concrete evaluator in expr.py.
"""

from __future__ import annotations

from .expr import BINOP_NAMES, CMP_NAMES


class Blaster:
    def __init__(self):
        self.n_vars = 1                   # var 1 is constant true
        self.clauses = [[1]]
        self.gate_memo = {}
        self.expr_memo = {}
        self.read_vars = {}               # (name, index) -> [vars], LSB first

    TRUE = 1
    FALSE = -1

    def new_var(self):
        self.n_vars += 1
        return self.n_vars

    def add(self, *lits):
        self.clauses.append(list(lits))

    # -- gates ------------------------------------------------------------

    def g_and(self, a, b):
        if a == self.FALSE or b == self.FALSE or a == -b:
            return self.FALSE
        if a == self.TRUE:
            return b
        if b == self.TRUE or a == b:
            return a
        key = ("and",) + tuple(sorted((a, b)))
        g = self.gate_memo.get(key)
        if g is None:
            g = self.new_var()
            self.add(-g, a)
            self.add(-g, b)
            self.add(g, -a, -b)
            self.gate_memo[key] = g
        return g

    def g_or(self, a, b):
        return -self.g_and(-a, -b)

    def g_xor(self, a, b):
        if a == self.FALSE:
            return b
        if b == self.FALSE:
            return a
        if a == self.TRUE:
            return -b
        if b == self.TRUE:
            return -a
        if a == b:
            return self.FALSE
        if a == -b:
            return self.TRUE
        neg = (a < 0) != (b < 0)
        a, b = abs(a), abs(b)
        key = ("xor",) + tuple(sorted((a, b)))
        g = self.gate_memo.get(key)
        if g is None:
            g = self.new_var()
            self.add(-g, a, b)
            self.add(-g, -a, -b)
            self.add(g, -a, b)
            self.add(g, a, -b)
            self.gate_memo[key] = g
        return -g if neg else g

    def g_maj(self, a, b, c):
        for x, y, z in ((a, b, c), (a, c, b), (b, c, a)):
            if x == y:
                return x
            if x == -y:
                return z
        consts = [l for l in (a, b, c) if l in (self.TRUE, self.FALSE)]
        if len(consts) >= 2:
            return self.TRUE if consts.count(self.TRUE) >= 2 else self.FALSE
        if self.TRUE in (a, b, c):
            rest = [l for l in (a, b, c) if l != self.TRUE]
            return self.g_or(rest[0], rest[1])
        if self.FALSE in (a, b, c):
            rest = [l for l in (a, b, c) if l != self.FALSE]
            return self.g_and(rest[0], rest[1])
        key = ("maj",) + tuple(sorted((a, b, c)))
        g = self.gate_memo.get(key)
        if g is None:
            g = self.new_var()
            self.add(-g, a, b)
            self.add(-g, a, c)
            self.add(-g, b, c)
            self.add(g, -a, -b)
            self.add(g, -a, -c)
            self.add(g, -b, -c)
            self.gate_memo[key] = g
        return g

    def g_ite(self, c, t, f):
        if c == self.TRUE:
            return t
        if c == self.FALSE:
            return f
        if t == f:
            return t
        if t == self.TRUE and f == self.FALSE:
            return c
        if t == self.FALSE and f == self.TRUE:
            return -c
        key = ("ite", c, t, f)
        g = self.gate_memo.get(key)
        if g is None:
            g = self.new_var()
            self.add(-g, -c, t)
            self.add(-g, c, f)
            self.add(g, -c, -t)
            self.add(g, c, -f)
            self.gate_memo[key] = g
        return g

    # -- vector helpers ----------------------------------------------------

    def vec_const(self, width, value):
        return [self.TRUE if (value >> i) & 1 else self.FALSE for i in range(width)]

    def vec_add(self, a, b, cin=None):
        carry = cin if cin is not None else self.FALSE
        out = []
        for x, y in zip(a, b):
            out.append(self.g_xor(self.g_xor(x, y), carry))
            carry = self.g_maj(x, y, carry)
        return out, carry

    def vec_neg(self, a):
        out, _ = self.vec_add([-x for x in a], self.vec_const(len(a), 1))
        return out

    def vec_sub(self, a, b):
        out, _ = self.vec_add(a, [-x for x in b], cin=self.TRUE)
        return out

    def vec_ite(self, c, t, f):
        return [self.g_ite(c, x, y) for x, y in zip(t, f)]

    def vec_mul(self, a, b):
        w = len(a)
        acc = self.vec_const(w, 0)
        for i in range(w):
            row = [self.FALSE] * i + [self.g_and(b[i], a[j]) for j in range(w - i)]
            acc, _ = self.vec_add(acc, row)
        return acc

    def vec_is_zero(self, a):
        out = self.TRUE
        for x in a:
            out = self.g_and(out, -x)
        return out

    def vec_ult(self, a, b):
        # a < b unsigned <=> no carry out of a + ~b + 1
        carry = self.TRUE
        for x, y in zip(a, b):
            carry = self.g_maj(x, -y, carry)
        return -carry

    def vec_eq(self, a, b):
        out = self.TRUE
        for x, y in zip(a, b):
            out = self.g_and(out, -self.g_xor(x, y))
        return out

    def vec_udiv(self, a, d):
        """Restoring long division; divisor zero handled by the caller."""
        w = len(a)
        rem = self.vec_const(w, 0)
        quo = [self.FALSE] * w
        for i in range(w - 1, -1, -1):
            rem = [a[i]] + rem[:-1]
            ge = -self.vec_ult(rem, d)
            quo[i] = ge
            rem = self.vec_ite(ge, self.vec_sub(rem, d), rem)
        return quo

    def vec_shift(self, a, amt, kind):
        w = len(a)
        fill = a[w - 1] if kind == "ashr" else self.FALSE
        out = list(a)
        k = 0
        while (1 << k) < w:
            step = 1 << k
            if kind == "shl":
                shifted = [self.FALSE] * step + out[: w - step]
            else:
                shifted = out[step:] + [fill] * step
            out = self.vec_ite(amt[k], shifted, out)
            k += 1
        overshoot = self.FALSE
        for j in range(k, len(amt)):
            overshoot = self.g_or(overshoot, amt[j])
        return self.vec_ite(overshoot, [fill] * w, out)

    # -- expression translation ---------------------------------------------

    def blast(self, node):
        got = self.expr_memo.get(id(node))
        if got is not None:
            return got
        out = self._blast(node)
        assert len(out) == node.width, node
        self.expr_memo[id(node)] = out
        return out

    def _blast(self, node):
        op = node.op
        if op == "const":
            return self.vec_const(node.width, node.value)
        if op == "read":
            key = (node.args[0], node.args[1])
            if key not in self.read_vars:
                self.read_vars[key] = [self.new_var() for _ in range(node.width)]
            return self.read_vars[key]
        if op == "ite":
            c, t, f = node.args
            return self.vec_ite(self.blast(c)[0], self.blast(t), self.blast(f))
        if op == "zext":
            a = self.blast(node.args[0])
            return a + [self.FALSE] * (node.width - len(a))
        if op == "sext":
            a = self.blast(node.args[0])
            return a + [a[-1]] * (node.width - len(a))
        if op == "trunc":
            return self.blast(node.args[0])[: node.width]
        if op == "concat":
            hi, lo = node.args
            return self.blast(lo) + self.blast(hi)
        if op == "extract":
            a, hi, lo = node.args
            return self.blast(a)[lo: hi + 1]
        if op in CMP_NAMES:
            a = self.blast(node.args[0])
            b = self.blast(node.args[1])
            if op in ("slt", "sle", "sgt", "sge"):
                # flip sign bits to reduce signed comparison to unsigned
                a = a[:-1] + [-a[-1]]
                b = b[:-1] + [-b[-1]]
            if op == "eq":
                return [self.vec_eq(a, b)]
            if op == "ne":
                return [-self.vec_eq(a, b)]
            if op in ("ult", "slt"):
                return [self.vec_ult(a, b)]
            if op in ("ugt", "sgt"):
                return [self.vec_ult(b, a)]
            if op in ("ule", "sle"):
                return [-self.vec_ult(b, a)]
            return [-self.vec_ult(a, b)]
        if op in BINOP_NAMES:
            a = self.blast(node.args[0])
            b = self.blast(node.args[1])
            w = node.width
            if op == "add":
                return self.vec_add(a, b)[0]
            if op == "sub":
                return self.vec_sub(a, b)
            if op == "mul":
                return self.vec_mul(a, b)
            if op == "and":
                return [self.g_and(x, y) for x, y in zip(a, b)]
            if op == "or":
                return [self.g_or(x, y) for x, y in zip(a, b)]
            if op == "xor":
                return [self.g_xor(x, y) for x, y in zip(a, b)]
            if op in ("shl", "lshr", "ashr"):
                return self.vec_shift(a, b, op)
            if op == "udiv":
                q = self.vec_udiv(a, b)
                return self.vec_ite(self.vec_is_zero(b), self.vec_const(w, -1), q)
            if op == "sdiv":
                sa, sb = a[-1], b[-1]
                mag_a = self.vec_ite(sa, self.vec_neg(a), a)
                mag_b = self.vec_ite(sb, self.vec_neg(b), b)
                q = self.vec_udiv(mag_a, mag_b)
                qneg = self.g_xor(sa, sb)
                q = self.vec_ite(qneg, self.vec_neg(q), q)
                by_zero = self.vec_ite(sa, self.vec_const(w, 1), self.vec_const(w, -1))
                return self.vec_ite(self.vec_is_zero(b), by_zero, q)
        raise ValueError(f"cannot blast {op}")

    def assert_true(self, node):
        self.add(self.blast(node)[0])


def blast_query(conjuncts):
    """CNF for the conjunction; returns (blaster, clause list, read var map)."""
    bl = Blaster()
    for c in conjuncts:
        assert c.width == 1
        bl.assert_true(c)
    return bl


def extract_model(blaster, sat_model):
    """Read-atom values from a CDCL model (unconstrained bits read as 0)."""
    out = {}
    for (name, index), bits in blaster.read_vars.items():
        value = 0
        for i, v in enumerate(bits):
            if sat_model.get(v, False):
                value |= 1 << i
        out.setdefault(name, {})[index] = value
    return out
