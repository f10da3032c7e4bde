"""Minimal SSA intermediate representation ("MIR").

Text format is line oriented: one instruction per line, blocks introduced by
`label:`, functions by `func @name(params) -> type { ... }`.  Trailing
annotations carry bookkeeping that must survive printing:

    !lines 3,11      source line numbers (defaults to the physical line)
    !dead            instruction was inserted by dead-code insertion
    !origin main:b2  merge location that produced this instruction

Widths are 1/8/16/32-bit two's complement.  Address values are produced by
`alloca`/`gep` only; every address type carries a static element count, and
bounds are enforced at execution time against the underlying allocation.

Intrinsics (spelled as calls, parsed to their own opcodes):

    call @sym.make_symbolic(%p, <len>, "name")
    call @sym.assert(%i1)
    %v = call i32 @sym.va_arg(<k>)
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

INT_WIDTHS = (1, 8, 16, 32)

TERMINATORS = ("br", "ret")
BINOPS = ("add", "sub", "mul", "udiv", "sdiv", "and", "or", "xor", "shl", "lshr", "ashr")
CASTS = ("zext", "sext", "trunc")
ICMP_PREDS = ("eq", "ne", "ult", "ule", "ugt", "uge", "slt", "sle", "sgt", "sge")
OPCODES = BINOPS + CASTS + (
    "icmp", "select", "load", "store", "gep", "alloca", "phi",
    "br", "call", "ret", "make_symbolic", "assert", "va_arg",
)


class MirError(Exception):
    """Syntax or resolution error in MIR text."""

    def __init__(self, message, line=None, col=None):
        self.message = message
        self.line = line
        self.col = col
        where = f"line {line}" + (f", col {col}" if col is not None else "") if line else ""
        super().__init__(f"{where}: {message}" if where else message)


# ---------------------------------------------------------------------------
# Types and operands


@dataclass(frozen=True)
class TypeDesc:
    kind: str  # "int" | "addr" | "void"
    width: int = 0          # int width, or element width for addr
    length: int = 0         # element count for addr

    def __post_init__(self):
        if self.kind == "int" and self.width not in INT_WIDTHS:
            raise MirError(f"unsupported integer width {self.width}")
        if self.kind == "addr" and (self.width not in INT_WIDTHS or self.length <= 0):
            raise MirError(f"bad address type [{self.length} x i{self.width}]")

    @property
    def is_int(self):
        return self.kind == "int"

    @property
    def is_addr(self):
        return self.kind == "addr"

    def __str__(self):
        if self.kind == "int":
            return f"i{self.width}"
        if self.kind == "addr":
            return f"[{self.length} x i{self.width}]"
        return "void"


VOID = TypeDesc("void")
I1 = TypeDesc("int", 1)
I8 = TypeDesc("int", 8)
I16 = TypeDesc("int", 16)
I32 = TypeDesc("int", 32)


def int_type(width):
    return TypeDesc("int", width)


def addr_type(length, width):
    return TypeDesc("addr", width, length)


@dataclass(frozen=True)
class Ref:
    """Reference to an SSA value (parameter or instruction result)."""
    name: str

    def __str__(self):
        return f"%{self.name}"


@dataclass(frozen=True)
class Const:
    value: int

    def __str__(self):
        return str(self.value)


@dataclass(frozen=True)
class Label:
    name: str

    def __str__(self):
        return f"%{self.name}"


@dataclass(frozen=True)
class Text:
    s: str

    def __str__(self):
        return '"%s"' % self.s


# ---------------------------------------------------------------------------
# Instructions


@dataclass
class Instruction:
    opcode: str
    id: str | None = None               # result name; None for void ops
    type: TypeDesc = VOID               # result type (value type for store)
    operands: tuple = ()
    pred: str | None = None             # icmp predicate
    src_type: TypeDesc | None = None    # source type of casts
    incoming: tuple = ()                # phi incoming block labels
    callee: str | None = None
    src_lines: frozenset = frozenset()
    dead_mark: bool = False
    origin: str | None = None           # merge location that emitted this

    def is_terminator(self):
        return self.opcode in TERMINATORS

    def refs(self):
        return [o for o in self.operands if isinstance(o, Ref)]

    def labels(self):
        if self.opcode == "phi":
            return list(self.incoming)
        return [o.name for o in self.operands if isinstance(o, Label)]

    def same_shape(self, other):
        """Structural equality ignoring result name, lines and marks."""
        return (self.opcode == other.opcode and self.type == other.type
                and self.operands == other.operands and self.pred == other.pred
                and self.src_type == other.src_type and self.incoming == other.incoming
                and self.callee == other.callee)

    def __eq__(self, other):
        if not isinstance(other, Instruction):
            return NotImplemented
        return (self.same_shape(other) and self.id == other.id
                and self.src_lines == other.src_lines
                and self.dead_mark == other.dead_mark and self.origin == other.origin)

    def __str__(self):
        return print_instruction(self)


@dataclass
class BasicBlock:
    label: str
    instructions: list = field(default_factory=list)

    @property
    def terminator(self):
        return self.instructions[-1] if self.instructions else None

    def phis(self):
        out = []
        for ins in self.instructions:
            if ins.opcode != "phi":
                break
            out.append(ins)
        return out

    def __eq__(self, other):
        return (isinstance(other, BasicBlock) and self.label == other.label
                and self.instructions == other.instructions)


@dataclass
class Function:
    name: str
    params: list                        # [(name, TypeDesc)]
    return_type: TypeDesc
    blocks: list = field(default_factory=list)
    variadic: bool = False

    @property
    def entry(self):
        return self.blocks[0].label

    def block(self, label):
        for b in self.blocks:
            if b.label == label:
                return b
        raise KeyError(label)

    def block_index(self, label):
        for i, b in enumerate(self.blocks):
            if b.label == label:
                return i
        raise KeyError(label)

    def value_ids(self):
        ids = {n for n, _ in self.params}
        for b in self.blocks:
            for ins in b.instructions:
                if ins.id is not None:
                    ids.add(ins.id)
        return ids

    def __eq__(self, other):
        return (isinstance(other, Function) and self.name == other.name
                and self.params == other.params and self.return_type == other.return_type
                and self.variadic == other.variadic and self.blocks == other.blocks)


@dataclass
class Module:
    functions: list = field(default_factory=list)

    def function(self, name):
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)

    def has_function(self, name):
        return any(f.name == name for f in self.functions)

    @property
    def entry_function(self):
        return "main" if self.has_function("main") else (
            self.functions[0].name if self.functions else None)

    def all_src_lines(self):
        out = set()
        for f in self.functions:
            for b in f.blocks:
                for ins in b.instructions:
                    out |= ins.src_lines
        return out

    def __eq__(self, other):
        return isinstance(other, Module) and self.functions == other.functions


# ---------------------------------------------------------------------------
# Parsing

_TYPE_RE = re.compile(r"i(\d+)|\[\s*(\d+)\s*x\s*i(\d+)\s*\]|void")
_FUNC_RE = re.compile(r"func\s+@([\w.]+)\s*\((.*)\)\s*->\s*(.+?)\s*\{\s*$")
_LABEL_RE = re.compile(r"([\w.]+)\s*:\s*$")


class _Parser:
    def __init__(self, text):
        self.lines = text.split("\n")
        self.pos = 0

    def error(self, message, col=None):
        raise MirError(message, self.pos + 1, col)

    def parse(self):
        functions = []
        while self.pos < len(self.lines):
            line = self._strip(self.lines[self.pos])
            if not line:
                self.pos += 1
                continue
            m = _FUNC_RE.match(line)
            if not m:
                self.error(f"expected function definition, got {line!r}")
            functions.append(self._function(m))
        mod = Module(functions)
        seen = set()
        for f in mod.functions:
            if f.name in seen:
                raise MirError(f"duplicate function @{f.name}")
            seen.add(f.name)
        _resolve_check(mod)
        return mod

    @staticmethod
    def _strip(line):
        if ";" in line:
            line = line[: line.index(";")]
        return line.strip()

    def _type(self, tok):
        m = _TYPE_RE.fullmatch(tok.strip())
        if not m:
            self.error(f"bad type {tok!r}")
        if m.group(0) == "void":
            return VOID
        try:
            if m.group(1):
                return int_type(int(m.group(1)))
            return addr_type(int(m.group(2)), int(m.group(3)))
        except MirError as e:
            self.error(e.message)

    def _function(self, m):
        name, params_text, ret_text = m.group(1), m.group(2).strip(), m.group(3)
        params, variadic = [], False
        if params_text:
            parts = [p.strip() for p in params_text.split(",")]
            for i, p in enumerate(parts):
                if p == "...":
                    if i != len(parts) - 1:
                        self.error("'...' must be the last parameter")
                    variadic = True
                    continue
                pm = re.fullmatch(r"(.+?)\s+%([\w.]+)", p)
                if not pm:
                    self.error(f"bad parameter {p!r}")
                params.append((pm.group(2), self._type(pm.group(1))))
        fn = Function(name, params, self._type(ret_text), [], variadic)
        self.pos += 1
        block = None
        while True:
            if self.pos >= len(self.lines):
                self.error(f"unterminated function @{name}")
            line = self._strip(self.lines[self.pos])
            if not line:
                self.pos += 1
                continue
            if line == "}":
                self.pos += 1
                break
            lm = _LABEL_RE.match(line)
            if lm:
                block = BasicBlock(lm.group(1))
                if any(b.label == block.label for b in fn.blocks):
                    self.error(f"duplicate label {block.label!r}")
                fn.blocks.append(block)
                self.pos += 1
                continue
            if block is None:
                self.error("instruction outside of a block")
            block.instructions.append(self._instruction(line))
            self.pos += 1
        if not fn.blocks:
            self.error(f"function @{name} has no blocks")
        return fn

    def _instruction(self, line):
        src_lines = frozenset([self.pos + 1])
        dead = False
        origin = None
        m = re.search(r"!lines\s+([\d,\s]+)", line)
        if m:
            src_lines = frozenset(int(x) for x in m.group(1).replace(" ", "").split(",") if x)
            line = line[: m.start()] + line[m.end():]
        if "!dead" in line:
            dead = True
            line = line.replace("!dead", "")
        m = re.search(r"!origin\s+(\S+)", line)
        if m:
            origin = m.group(1)
            line = line[: m.start()] + line[m.end():]
        line = line.strip()

        dest = None
        m = re.match(r"%([\w.]+)\s*=\s*(.*)", line)
        if m:
            dest, line = m.group(1), m.group(2).strip()
        ins = self._body(line, dest)
        ins.src_lines = src_lines
        ins.dead_mark = dead
        ins.origin = origin
        return ins

    def _operand(self, tok):
        tok = tok.strip()
        if tok.startswith("%"):
            return Ref(tok[1:])
        if re.fullmatch(r"-?\d+", tok):
            return Const(int(tok))
        m = re.fullmatch(r'"([^"]*)"', tok)
        if m:
            return Text(m.group(1))
        self.error(f"bad operand {tok!r}")

    def _split_operands(self, text):
        return [self._operand(t) for t in text.split(",")] if text.strip() else []

    def _body(self, line, dest):
        parts = line.split(None, 1)
        if not parts:
            self.error("empty instruction")
        op, rest = parts[0], parts[1] if len(parts) > 1 else ""

        if op in BINOPS:
            ty, ops = self._typed_operands(rest, 2)
            return Instruction(op, dest, ty, tuple(ops))
        if op == "icmp":
            pparts = rest.split(None, 1)
            if len(pparts) != 2 or pparts[0] not in ICMP_PREDS:
                self.error(f"bad icmp predicate in {line!r}")
            ty, ops = self._typed_operands(pparts[1], 2)
            return Instruction("icmp", dest, I1, tuple(ops), pred=pparts[0], src_type=ty)
        if op in CASTS:
            m = re.fullmatch(r"(.+?)\s+(\S+)\s+to\s+(\S+)", rest)
            if not m:
                self.error(f"bad cast {line!r}")
            return Instruction(op, dest, self._type(m.group(3)),
                               (self._operand(m.group(2)),), src_type=self._type(m.group(1)))
        if op == "select":
            ty, ops = self._typed_operands(rest, 3)
            return Instruction("select", dest, ty, tuple(ops))
        if op == "load":
            ty, ops = self._typed_operands(rest, 1)
            return Instruction("load", dest, ty, tuple(ops))
        if op == "store":
            ty, ops = self._typed_operands(rest, 2)
            if dest is not None:
                self.error("store produces no value")
            return Instruction("store", None, ty, tuple(ops))
        if op == "gep":
            ty, ops = self._typed_operands(rest, 2)
            if not ty.is_addr:
                self.error("gep needs an address type")
            return Instruction("gep", dest, ty, tuple(ops))
        if op == "alloca":
            ty = self._type(rest)
            if not ty.is_addr:
                self.error("alloca needs an address type")
            return Instruction("alloca", dest, ty)
        if op == "phi":
            m = self._TYPE_PREFIX.fullmatch(rest.strip())
            if not m:
                self.error(f"bad phi {line!r}")
            ty = self._type(m.group(1))
            ops, labels = [], []
            for vm in re.finditer(r"\[\s*([^,\]]+)\s*,\s*%([\w.]+)\s*\]", m.group(2)):
                ops.append(self._operand(vm.group(1)))
                labels.append(vm.group(2))
            if not ops:
                self.error(f"phi needs incoming values in {line!r}")
            return Instruction("phi", dest, ty, tuple(ops), incoming=tuple(labels))
        if op == "br":
            ops = self._split_operands(rest)
            if len(ops) == 1:
                if not isinstance(ops[0], Ref):
                    self.error("br target must be a label")
                return Instruction("br", None, VOID, (Label(ops[0].name),))
            if len(ops) == 3:
                if not all(isinstance(o, Ref) for o in ops):
                    self.error("bad br operands")
                return Instruction("br", None, VOID,
                                   (ops[0], Label(ops[1].name), Label(ops[2].name)))
            self.error("br takes 1 or 3 operands")
        if op == "ret":
            if not rest.strip() or rest.strip() == "void":
                return Instruction("ret", None, VOID)
            ty, ops = self._typed_operands(rest, 1)
            return Instruction("ret", None, ty, tuple(ops))
        if op == "call":
            m = re.fullmatch(r"(?:(\S+)\s+)?@([\w.]+)\s*\((.*)\)", rest)
            if not m:
                self.error(f"bad call {line!r}")
            ty = self._type(m.group(1)) if m.group(1) else VOID
            callee = m.group(2)
            ops = tuple(self._split_operands(m.group(3)))
            if callee == "sym.make_symbolic":
                if len(ops) != 3:
                    self.error("make_symbolic takes (addr, length, name)")
                return Instruction("make_symbolic", None, VOID, ops)
            if callee == "sym.assert":
                if len(ops) != 1:
                    self.error("assert takes one i1 operand")
                return Instruction("assert", None, VOID, ops)
            if callee == "sym.va_arg":
                if len(ops) != 1:
                    self.error("va_arg takes one index operand")
                return Instruction("va_arg", dest, ty, ops)
            return Instruction("call", dest, ty, ops, callee=callee)
        self.error(f"unknown opcode {op!r}")

    _TYPE_PREFIX = re.compile(r"(i\d+|\[\s*\d+\s*x\s*i\d+\s*\]|void)\s+(.*)")

    def _typed_operands(self, rest, arity):
        m = self._TYPE_PREFIX.fullmatch(rest.strip())
        if not m:
            self.error(f"expected type and operands in {rest!r}")
        ty = self._type(m.group(1))
        ops = self._split_operands(m.group(2))
        if len(ops) != arity:
            self.error(f"expected {arity} operands, got {len(ops)}")
        return ty, ops


def _resolve_check(mod):
    """Name resolution: every Ref/Label/callee must be defined somewhere."""
    for f in mod.functions:
        ids = f.value_ids()
        labels = {b.label for b in f.blocks}
        for b in f.blocks:
            for ins in b.instructions:
                for r in ins.refs():
                    if r.name not in ids:
                        raise MirError(f"undefined value %{r.name} in @{f.name}")
                for lbl in ins.labels():
                    if lbl not in labels:
                        raise MirError(f"undefined label %{lbl} in @{f.name}")
                if ins.opcode == "call" and not mod.has_function(ins.callee):
                    # tolerated here; validate_module reports it as a diagnostic
                    pass


def parse_module(text):
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# Printing


def _operand_str(o):
    return str(o)


def print_instruction(ins):
    parts = []
    if ins.id is not None:
        parts.append(f"%{ins.id} =")
    op = ins.opcode
    if op in BINOPS or op in ("select", "load", "store", "gep"):
        parts.append(op)
        parts.append(str(ins.type))
        parts.append(", ".join(map(_operand_str, ins.operands)))
    elif op == "icmp":
        parts += ["icmp", ins.pred, str(ins.src_type),
                  ", ".join(map(_operand_str, ins.operands))]
    elif op in CASTS:
        parts += [op, str(ins.src_type), _operand_str(ins.operands[0]), "to", str(ins.type)]
    elif op == "alloca":
        parts += ["alloca", str(ins.type)]
    elif op == "phi":
        inc = ", ".join(f"[{_operand_str(v)}, %{l}]"
                        for v, l in zip(ins.operands, ins.incoming))
        parts += ["phi", str(ins.type), inc]
    elif op == "br":
        parts += ["br", ", ".join(map(_operand_str, ins.operands))]
    elif op == "ret":
        if ins.operands:
            parts += ["ret", str(ins.type), _operand_str(ins.operands[0])]
        else:
            parts.append("ret")
    elif op == "call":
        args = ", ".join(map(_operand_str, ins.operands))
        ty = f"{ins.type} " if ins.type != VOID else ""
        parts += ["call", f"{ty}@{ins.callee}({args})"]
    elif op == "make_symbolic":
        args = ", ".join(map(_operand_str, ins.operands))
        parts += ["call", f"@sym.make_symbolic({args})"]
    elif op == "assert":
        parts += ["call", f"@sym.assert({_operand_str(ins.operands[0])})"]
    elif op == "va_arg":
        parts += ["call", f"{ins.type} @sym.va_arg({_operand_str(ins.operands[0])})"]
    else:
        raise MirError(f"cannot print opcode {op!r}")
    text = " ".join(parts)
    if ins.src_lines:
        text += " !lines " + ",".join(str(n) for n in sorted(ins.src_lines))
    if ins.dead_mark:
        text += " !dead"
    if ins.origin:
        text += f" !origin {ins.origin}"
    return text


def print_module(mod):
    out = []
    for f in mod.functions:
        params = ", ".join(f"{t} %{n}" for n, t in f.params)
        if f.variadic:
            params = f"{params}, ..." if params else "..."
        out.append(f"func @{f.name}({params}) -> {f.return_type} {{")
        for b in f.blocks:
            out.append(f"{b.label}:")
            for ins in b.instructions:
                out.append("  " + print_instruction(ins))
        out.append("}")
        out.append("")
    return "\n".join(out[:-1]) if out else ""


# ---------------------------------------------------------------------------
# CFG, dominators, postdominators


@dataclass
class Diagnostic:
    kind: str
    message: str
    function: str | None = None
    block: str | None = None
    index: int | None = None

    def __str__(self):
        loc = ":".join(x for x in (self.function, self.block,
                                   str(self.index) if self.index is not None else None) if x)
        return f"[{self.kind}] {loc}: {self.message}"


EXIT = "__exit__"


@dataclass
class CfgInfo:
    preds: dict
    succs: dict
    idom: dict       # label -> immediate dominator label (entry -> None)
    ipdom: dict      # label -> immediate postdominator (EXIT/None at boundary)
    rpo: list        # reverse postorder of reachable blocks
    diagnostics: list = field(default_factory=list)

    def dominates(self, a, b):
        while b is not None:
            if a == b:
                return True
            b = self.idom.get(b)
        return False

    def postdominates(self, a, b):
        while b is not None and b != EXIT:
            if a == b:
                return True
            b = self.ipdom.get(b)
        return a == b

    def control_deps(self, of):
        """Blocks whose branch `of` is control-dependent on (postdominance frontier)."""
        out = set()
        for u in self.succs:
            if len(self.succs[u]) < 2:
                continue
            stop = self.ipdom.get(u)
            for v in self.succs[u]:
                w = v
                while w is not None and w != stop and w != EXIT:
                    if w == of:
                        out.add(u)
                        break
                    w = self.ipdom.get(w)
        return out


def _postorder(succs, entry):
    seen, order, stack = set(), [], [(entry, iter(succs.get(entry, ())))]
    seen.add(entry)
    while stack:
        node, it = stack[-1]
        advanced = False
        for s in it:
            if s not in seen:
                seen.add(s)
                stack.append((s, iter(succs.get(s, ()))))
                advanced = True
                break
        if not advanced:
            order.append(node)
            stack.pop()
    return order


def _idoms(succs, preds, entry):
    """Cooper-Harvey-Kennedy iterative dominators over reverse postorder."""
    rpo = list(reversed(_postorder(succs, entry)))
    index = {b: i for i, b in enumerate(rpo)}
    idom = {entry: entry}
    changed = True
    while changed:
        changed = False
        for b in rpo:
            if b == entry:
                continue
            new = None
            for p in preds.get(b, ()):
                if p not in idom:
                    continue
                if new is None:
                    new = p
                else:
                    x, y = new, p
                    while x != y:
                        while index[x] > index[y]:
                            x = idom[x]
                        while index[y] > index[x]:
                            y = idom[y]
                    new = x
            if new is not None and idom.get(b) != new:
                idom[b] = new
                changed = True
    idom[entry] = None
    return idom, rpo


def compute_cfg_info(fn):
    preds = {b.label: [] for b in fn.blocks}
    succs = {b.label: [] for b in fn.blocks}
    diagnostics = []
    for b in fn.blocks:
        term = b.terminator
        if term is None or not term.is_terminator():
            continue  # validate_module reports this
        for lbl in term.labels():
            succs[b.label].append(lbl)
            preds[lbl].append(b.label)
    idom, rpo = _idoms(succs, preds, fn.entry)
    for b in fn.blocks:
        if b.label not in idom and b.label != fn.entry:
            diagnostics.append(Diagnostic("unreachable", f"block {b.label} is unreachable",
                                          fn.name, b.label))

    # postdominators on the reversed graph with a virtual exit
    rsuccs = {b.label: list(preds[b.label]) for b in fn.blocks}
    rpreds = {b.label: list(succs[b.label]) for b in fn.blocks}
    rsuccs[EXIT] = []
    rpreds[EXIT] = []
    for b in fn.blocks:
        term = b.terminator
        if term is not None and term.opcode == "ret":
            rsuccs[EXIT].append(b.label)
            rpreds[b.label].append(EXIT)
    ipdom, _ = _idoms(rsuccs, rpreds, EXIT)
    ipdom.pop(EXIT, None)
    for b in fn.blocks:
        if b.label not in ipdom:
            ipdom[b.label] = None
            if b.label in idom or b.label == fn.entry:
                diagnostics.append(Diagnostic("no-exit-path",
                                              f"block {b.label} cannot reach a return",
                                              fn.name, b.label))
    return CfgInfo(preds, succs, idom, ipdom, rpo, diagnostics)


# ---------------------------------------------------------------------------
# Validation


def _ins_arity_ok(ins):
    n = len(ins.operands)
    op = ins.opcode
    if op in BINOPS or op == "icmp":
        return n == 2
    if op in CASTS or op in ("load", "assert", "va_arg"):
        return n == 1
    if op in ("store", "gep"):
        return n == 2
    if op == "select":
        return n == 3
    if op == "alloca":
        return n == 0
    if op == "phi":
        return n >= 1 and n == len(ins.incoming)
    if op == "br":
        return n in (1, 3)
    if op == "ret":
        return n <= 1
    if op == "make_symbolic":
        return n == 3
    return True


def validate_module(mod):
    """Check all structural invariants; returns a list of diagnostics."""
    diags = []
    for fn in mod.functions:
        diags.extend(_validate_function(mod, fn))
    return diags


def _validate_function(mod, fn):
    diags = []
    d = lambda kind, msg, blk=None, idx=None: diags.append(
        Diagnostic(kind, msg, fn.name, blk, idx))

    types = {n: t for n, t in fn.params}
    defs = {}
    for b in fn.blocks:
        seen_non_phi = False
        for i, ins in enumerate(b.instructions):
            if ins.id is not None:
                if ins.id in types:
                    d("ssa-redef", f"%{ins.id} defined twice", b.label, i)
                types[ins.id] = ins.type
                defs[ins.id] = (b.label, i)
            if ins.opcode == "phi":
                if seen_non_phi:
                    d("phi-placement", "phi after non-phi instruction", b.label, i)
            else:
                seen_non_phi = True
            if not _ins_arity_ok(ins):
                d("arity", f"{ins.opcode} has wrong operand count", b.label, i)
            if ins.is_terminator() and i != len(b.instructions) - 1:
                d("terminator-placement", f"{ins.opcode} before end of block", b.label, i)
        term = b.terminator
        if term is None or not term.is_terminator():
            d("terminator-placement", "block has no terminator", b.label)

    cfg = compute_cfg_info(fn)
    if cfg.preds.get(fn.entry):
        d("entry-preds", "entry block has predecessors", fn.entry)

    def value_type(o):
        if isinstance(o, Const):
            return None  # typed by context
        if isinstance(o, Ref):
            return types.get(o.name)
        return None

    def check_use(o, want, blk, i, allow_any_int=False):
        t = value_type(o)
        if t is None:
            return
        if allow_any_int and t.is_int:
            return
        if want is not None and t != want:
            d("type", f"operand {o} has type {t}, expected {want}", blk, i)

    for b in fn.blocks:
        for i, ins in enumerate(b.instructions):
            op = ins.opcode
            if op in BINOPS:
                for o in ins.operands:
                    check_use(o, ins.type, b.label, i)
                if not ins.type.is_int:
                    d("type", f"{op} result must be an integer", b.label, i)
            elif op == "icmp":
                for o in ins.operands:
                    check_use(o, ins.src_type, b.label, i)
            elif op in CASTS:
                check_use(ins.operands[0], ins.src_type, b.label, i)
                if op in ("zext", "sext") and ins.src_type.width >= ins.type.width:
                    d("type", f"{op} must widen", b.label, i)
                if op == "trunc" and ins.src_type.width <= ins.type.width:
                    d("type", "trunc must narrow", b.label, i)
            elif op == "select":
                check_use(ins.operands[0], I1, b.label, i)
                check_use(ins.operands[1], ins.type, b.label, i)
                check_use(ins.operands[2], ins.type, b.label, i)
            elif op == "load":
                t = value_type(ins.operands[0])
                if t is not None and (not t.is_addr or t.width != ins.type.width):
                    d("type", f"load of {ins.type} from {t}", b.label, i)
            elif op == "store":
                check_use(ins.operands[0], ins.type, b.label, i)
                t = value_type(ins.operands[1])
                if t is not None and (not t.is_addr or t.width != ins.type.width):
                    d("type", f"store of {ins.type} to {t}", b.label, i)
            elif op == "gep":
                t = value_type(ins.operands[0])
                if t is not None and not t.is_addr:
                    d("type", "gep base must be an address", b.label, i)
                check_use(ins.operands[1], None, b.label, i, allow_any_int=True)
            elif op == "phi":
                if len(set(ins.incoming)) != len(ins.incoming):
                    d("phi-incoming", "duplicate incoming labels", b.label, i)
                if set(ins.incoming) != set(cfg.preds.get(b.label, ())):
                    d("phi-incoming", "phi incoming labels do not match predecessors",
                      b.label, i)
                for o in ins.operands:
                    check_use(o, ins.type, b.label, i)
            elif op == "br" and len(ins.operands) == 3:
                check_use(ins.operands[0], I1, b.label, i)
            elif op == "ret":
                if fn.return_type == VOID and ins.operands:
                    d("type", "ret with value in void function", b.label, i)
                elif fn.return_type != VOID:
                    if not ins.operands:
                        d("type", "ret without value", b.label, i)
                    else:
                        check_use(ins.operands[0], fn.return_type, b.label, i)
            elif op == "call":
                if not mod.has_function(ins.callee):
                    d("unresolved-callee", f"call to unknown @{ins.callee}", b.label, i)
                else:
                    callee = mod.function(ins.callee)
                    fixed = len(callee.params)
                    if (len(ins.operands) < fixed
                            or (not callee.variadic and len(ins.operands) != fixed)):
                        d("arity", f"call to @{ins.callee} with wrong argument count",
                          b.label, i)
                    else:
                        for o, (_, t) in zip(ins.operands, callee.params):
                            check_use(o, t, b.label, i)
                    if ins.id is not None and ins.type != callee.return_type:
                        d("type", f"call result type {ins.type} != @{ins.callee} "
                          f"return type {callee.return_type}", b.label, i)
            elif op == "make_symbolic":
                t = value_type(ins.operands[0])
                if t is not None and not t.is_addr:
                    d("type", "make_symbolic target must be an address", b.label, i)
                if not isinstance(ins.operands[2], Text):
                    d("type", "make_symbolic needs a name string", b.label, i)
            elif op == "va_arg" and not fn.variadic:
                d("va-arg", "va_arg outside a variadic function", b.label, i)

    # SSA dominance: each use dominated by its definition
    def dominates_use(def_loc, use_block, use_idx):
        db, di = def_loc
        if db == use_block:
            return di < use_idx
        return cfg.dominates(db, use_block)

    for b in fn.blocks:
        if b.label not in cfg.idom and b.label != fn.entry:
            continue  # unreachable: dominance undefined, already diagnosed
        for i, ins in enumerate(b.instructions):
            if ins.opcode == "phi":
                for o, lbl in zip(ins.operands, ins.incoming):
                    if isinstance(o, Ref) and o.name in defs:
                        pb = fn.block(lbl)
                        if not dominates_use(defs[o.name], lbl, len(pb.instructions)):
                            d("ssa-dominance",
                              f"%{o.name} does not dominate edge {lbl}->{b.label}",
                              b.label, i)
                continue
            for o in ins.refs():
                if o.name in defs and not dominates_use(defs[o.name], b.label, i):
                    d("ssa-dominance", f"use of %{o.name} before definition", b.label, i)
    return diags


def clone_module(mod):
    """Deep copy that preserves structure (instructions are fresh objects)."""
    out = Module()
    for f in mod.functions:
        nf = Function(f.name, list(f.params), f.return_type, [], f.variadic)
        for b in f.blocks:
            nb = BasicBlock(b.label, [replace(i) for i in b.instructions])
            nf.blocks.append(nb)
        out.functions.append(nf)
    return out
