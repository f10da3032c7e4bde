"""Symbolic expressions over fixed-width bitvectors.

Nodes are hash-consed: building the same expression twice returns the same
object, so structural equality is pointer equality and DAG sizes can be
measured by walking unique nodes.  Values are stored as unsigned Python ints
masked to their width; signed interpretations are derived on demand.

Total semantics (shared by every evaluator in the package):
  * udiv/sdiv by zero yield the SMT-LIB values (all-ones; x<0 ? 1 : -1).
    The executor treats division by zero as a crash before building the node,
    so these cases only matter for evaluating excluded assignments.
  * sdiv truncates toward zero and wraps on overflow.
  * shift amounts are unsigned; amounts >= width give 0 (ashr: sign fill).
"""

from __future__ import annotations

BINOP_NAMES = ("add", "sub", "mul", "udiv", "sdiv", "and", "or", "xor",
               "shl", "lshr", "ashr")
CMP_NAMES = ("eq", "ne", "ult", "ule", "ugt", "uge", "slt", "sle", "sgt", "sge")


class SymExpr:
    __slots__ = ("op", "width", "args", "serial", "_hash")

    def __init__(self, op, width, args, serial):
        self.op = op
        self.width = width
        self.args = args
        self.serial = serial
        self._hash = hash((op, width, args))

    def __hash__(self):
        return self._hash

    def __repr__(self):
        if self.op == "const":
            return f"#{self.args[0]}:{self.width}"
        if self.op == "read":
            return f"{self.args[0]}[{self.args[1]}]:{self.width}"
        return f"({self.op} " + " ".join(map(repr, self.args)) + f"):{self.width}"

    @property
    def is_const(self):
        return self.op == "const"

    @property
    def value(self):
        return self.args[0]

    def children(self):
        return tuple(a for a in self.args if isinstance(a, SymExpr))


_table: dict = {}
_next_serial = 0


def _intern(op, width, args):
    global _next_serial
    key = (op, width, args)
    node = _table.get(key)
    if node is None:
        node = SymExpr(op, width, args, _next_serial)
        _next_serial += 1
        _table[key] = node
    return node


def mask(width):
    return (1 << width) - 1


def to_signed(v, width):
    return v - (1 << width) if v >> (width - 1) else v


def to_unsigned(v, width):
    return v & mask(width)


def bv_const(width, value):
    return _intern("const", width, (value & mask(width),))


TRUE = bv_const(1, 1)
FALSE = bv_const(1, 0)


def sym_read(name, index, width):
    return _intern("read", width, (name, index))


def apply_binop(op, a, b, width):
    """Concrete two's-complement semantics for a binary opcode."""
    m = mask(width)
    if op == "add":
        return (a + b) & m
    if op == "sub":
        return (a - b) & m
    if op == "mul":
        return (a * b) & m
    if op == "udiv":
        return m if b == 0 else (a // b) & m
    if op == "sdiv":
        if b == 0:
            return m if a >> (width - 1) == 0 else 1
        sa, sb = to_signed(a, width), to_signed(b, width)
        q = abs(sa) // abs(sb)
        if (sa < 0) != (sb < 0):
            q = -q
        return q & m
    if op == "and":
        return a & b
    if op == "or":
        return a | b
    if op == "xor":
        return a ^ b
    if op == "shl":
        return (a << b) & m if b < width else 0
    if op == "lshr":
        return a >> b if b < width else 0
    if op == "ashr":
        if b >= width:
            return m if a >> (width - 1) else 0
        return (to_signed(a, width) >> b) & m
    raise ValueError(op)


def apply_cmp(pred, a, b, width):
    sa, sb = to_signed(a, width), to_signed(b, width)
    return int({
        "eq": a == b, "ne": a != b,
        "ult": a < b, "ule": a <= b, "ugt": a > b, "uge": a >= b,
        "slt": sa < sb, "sle": sa <= sb, "sgt": sa > sb, "sge": sa >= sb,
    }[pred])


def binop(op, a, b):
    assert a.width == b.width, (op, a, b)
    w = a.width
    if a.is_const and b.is_const:
        return bv_const(w, apply_binop(op, a.value, b.value, w))
    # light identities: keep conditions built from concrete subterms concrete
    if b.is_const:
        v = b.value
        if v == 0 and op in ("add", "sub", "or", "xor", "shl", "lshr", "ashr"):
            return a
        if v == 0 and op in ("mul", "and"):
            return bv_const(w, 0)
        if v == 1 and op in ("mul", "udiv", "sdiv"):
            return a
        if v == mask(w) and op == "and":
            return a
        if v == mask(w) and op == "or":
            return bv_const(w, mask(w))
    if a.is_const:
        v = a.value
        if v == 0 and op in ("add", "or", "xor"):
            return b
        if v == 0 and op in ("mul", "and"):
            return bv_const(w, 0)
        if v == 1 and op == "mul":
            return b
        if v == mask(w) and op == "and":
            return b
        if v == mask(w) and op == "or":
            return bv_const(w, mask(w))
    if a is b:
        if op in ("and", "or"):
            return a
        if op in ("xor", "sub"):
            return bv_const(w, 0)
    return _intern(op, w, (a, b))


def cmp(pred, a, b):
    assert a.width == b.width, (pred, a, b)
    if a.is_const and b.is_const:
        return bv_const(1, apply_cmp(pred, a.value, b.value, a.width))
    if a is b:
        return TRUE if pred in ("eq", "ule", "uge", "sle", "sge") else FALSE
    return _intern(pred, 1, (a, b))


def ite(c, t, f):
    assert c.width == 1 and t.width == f.width
    if c.is_const:
        return t if c.value else f
    if t is f:
        return t
    return _intern("ite", t.width, (c, t, f))


def zext(a, width):
    if a.width == width:
        return a
    assert width > a.width
    if a.is_const:
        return bv_const(width, a.value)
    return _intern("zext", width, (a,))


def sext(a, width):
    if a.width == width:
        return a
    assert width > a.width
    if a.is_const:
        return bv_const(width, to_signed(a.value, a.width))
    return _intern("sext", width, (a,))


def trunc(a, width):
    if a.width == width:
        return a
    assert width < a.width
    if a.is_const:
        return bv_const(width, a.value)
    return _intern("trunc", width, (a,))


def concat(hi, lo):
    """hi holds the most significant bits of the result."""
    if hi.is_const and lo.is_const:
        return bv_const(hi.width + lo.width, (hi.value << lo.width) | lo.value)
    return _intern("concat", hi.width + lo.width, (hi, lo))


def extract(a, hi, lo):
    """Bits lo..hi inclusive."""
    assert 0 <= lo <= hi < a.width
    w = hi - lo + 1
    if w == a.width:
        return a
    if a.is_const:
        return bv_const(w, a.value >> lo)
    return _intern("extract", w, (a, hi, lo))


def notb(c):
    """Boolean negation of a width-1 expression."""
    return binop("xor", c, TRUE)


def conjunct(exprs):
    """Fold a list of width-1 expressions into one AND tree."""
    out = TRUE
    for e in exprs:
        out = binop("and", out, e)
    return out


def disjunct(exprs):
    out = FALSE
    for e in exprs:
        out = binop("or", out, e)
    return out


# ---------------------------------------------------------------------------
# Traversal / evaluation


def walk(roots):
    """Unique nodes reachable from roots, children before parents."""
    seen = set()
    order = []
    stack = [(r, False) for r in reversed(list(roots))]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for ch in node.children():
            stack.append((ch, False))
    return order


def dag_size(roots):
    """Node count of the deduplicated DAG reachable from roots."""
    return len(walk(roots))


def reads_of(roots):
    """Sorted list of distinct read atoms in the expressions."""
    atoms = {n for n in walk(roots) if n.op == "read"}
    return sorted(atoms, key=lambda n: (n.args[0], n.args[1]))


def eval_concrete(expr, model):
    """Evaluate under a model mapping input name -> list of cell values."""
    memo = {}
    for node in walk([expr]):
        op = node.op
        if op == "const":
            memo[id(node)] = node.value
        elif op == "read":
            name, idx = node.args
            memo[id(node)] = model[name][idx] & mask(node.width)
        elif op in BINOP_NAMES:
            a, b = node.args
            memo[id(node)] = apply_binop(op, memo[id(a)], memo[id(b)], node.width)
        elif op in CMP_NAMES:
            a, b = node.args
            memo[id(node)] = apply_cmp(op, memo[id(a)], memo[id(b)], a.width)
        elif op == "ite":
            c, t, f = node.args
            memo[id(node)] = memo[id(t)] if memo[id(c)] else memo[id(f)]
        elif op == "zext":
            memo[id(node)] = memo[id(node.args[0])]
        elif op == "sext":
            a = node.args[0]
            memo[id(node)] = to_signed(memo[id(a)], a.width) & mask(node.width)
        elif op == "trunc":
            memo[id(node)] = memo[id(node.args[0])] & mask(node.width)
        elif op == "concat":
            hi, lo = node.args
            memo[id(node)] = (memo[id(hi)] << lo.width) | memo[id(lo)]
        elif op == "extract":
            a, hi, lo = node.args
            memo[id(node)] = (memo[id(a)] >> lo) & mask(node.width)
        else:
            raise ValueError(f"unknown node {op}")
    return memo[id(expr)]
