"""Concrete MIR interpreter.

Replays a program on fixed input bytes: the ground truth for crash
verification and for differential checks against the symbolic engine.  The
arithmetic here is written out independently of the solver's evaluator on
purpose; the two implementations cross-check each other in the tests.

Crash conditions (defined behavior, not errors): out-of-bounds load/store,
udiv/sdiv by zero, failed assertion.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .ir import Const

CRASH_KINDS = ("oob-load", "oob-store", "div-by-zero", "assert-fail")


class MissingInputError(Exception):
    pass


class StepBudgetError(Exception):
    pass


@dataclass
class ConcreteOutcome:
    kind: str                  # "normal" or a crash kind
    ret: int | None = None
    memory: dict = field(default_factory=dict)   # stable object key -> cells
    function: str | None = None
    block: str | None = None
    index: int | None = None
    src_lines: frozenset = frozenset()
    branch_trace: list = field(default_factory=list)   # (func, block, taken)

    @property
    def crashed(self):
        return self.kind != "normal"

    @property
    def location(self):
        return f"{self.function}:{self.block}:{self.index}"


def _wrap(v, width):
    return v & ((1 << width) - 1)


def _signed(v, width):
    return v - (1 << width) if v & (1 << (width - 1)) else v


@dataclass
class _Obj:
    key: str
    width: int
    cells: list


class _Frame:
    def __init__(self, fn, args, varargs, ret_to):
        self.fn = fn
        self.block = fn.blocks[0]
        self.index = 0
        self.prev_label = None
        self.regs = dict(args)
        self.varargs = varargs
        self.ret_to = ret_to        # register name in the caller, or None


class _Machine:
    def __init__(self, module, inputs, max_steps, record_branches=False):
        self.module = module
        self.inputs = inputs
        self.max_steps = max_steps
        self.objects = {}
        self.obj_counter = {}
        self.frames = []
        self.steps = 0
        self.branch_trace = [] if record_branches else None

    def run(self):
        entry = self.module.function(self.module.entry_function)
        self.frames.append(_Frame(entry, {}, [], None))
        while self.frames:
            out = self._step()
            if out is not None:
                return out
        raise AssertionError("machine halted without a return")

    def _crash(self, kind, ins):
        fr = self.frames[-1]
        out = ConcreteOutcome(kind, None, self._memory_view(), fr.fn.name,
                              fr.block.label, fr.index, ins.src_lines)
        out.branch_trace = self.branch_trace or []
        return out

    def _memory_view(self):
        return {o.key: list(o.cells) for o in self.objects.values()}

    def _value(self, fr, op, width=None):
        if isinstance(op, Const):
            return _wrap(op.value, width) if width else op.value
        return fr.regs[op.name]

    def _step(self):
        self.steps += 1
        if self.steps > self.max_steps:
            raise StepBudgetError(f"exceeded {self.max_steps} steps")
        fr = self.frames[-1]
        ins = fr.block.instructions[fr.index]
        op = ins.opcode
        w = ins.type.width

        if op == "phi":
            # execute the whole phi group against the incoming edge at once
            group = []
            while fr.block.instructions[fr.index].opcode == "phi":
                p = fr.block.instructions[fr.index]
                k = p.incoming.index(fr.prev_label)
                group.append((p.id, self._value(fr, p.operands[k], p.type.width)))
                fr.index += 1
            fr.regs.update(group)
            return None

        if op in ("add", "sub", "mul", "and", "or", "xor", "shl", "lshr", "ashr",
                  "udiv", "sdiv"):
            a = self._value(fr, ins.operands[0], w)
            b = self._value(fr, ins.operands[1], w)
            if op in ("udiv", "sdiv") and b == 0:
                return self._crash("div-by-zero", ins)
            if op == "add":
                r = a + b
            elif op == "sub":
                r = a - b
            elif op == "mul":
                r = a * b
            elif op == "and":
                r = a & b
            elif op == "or":
                r = a | b
            elif op == "xor":
                r = a ^ b
            elif op == "shl":
                r = a << b if b < w else 0
            elif op == "lshr":
                r = a >> b if b < w else 0
            elif op == "ashr":
                if b >= w:
                    r = -1 if a & (1 << (w - 1)) else 0
                else:
                    r = _signed(a, w) >> b
            elif op == "udiv":
                r = a // b
            else:
                sa, sb = _signed(a, w), _signed(b, w)
                r = abs(sa) // abs(sb)
                if (sa < 0) != (sb < 0):
                    r = -r
            fr.regs[ins.id] = _wrap(r, w)
        elif op == "icmp":
            sw = ins.src_type.width
            a = self._value(fr, ins.operands[0], sw)
            b = self._value(fr, ins.operands[1], sw)
            sa, sb = _signed(a, sw), _signed(b, sw)
            fr.regs[ins.id] = int({
                "eq": a == b, "ne": a != b,
                "ult": a < b, "ule": a <= b, "ugt": a > b, "uge": a >= b,
                "slt": sa < sb, "sle": sa <= sb, "sgt": sa > sb, "sge": sa >= sb,
            }[ins.pred])
        elif op == "zext":
            fr.regs[ins.id] = self._value(fr, ins.operands[0], ins.src_type.width)
        elif op == "sext":
            v = self._value(fr, ins.operands[0], ins.src_type.width)
            fr.regs[ins.id] = _wrap(_signed(v, ins.src_type.width), w)
        elif op == "trunc":
            fr.regs[ins.id] = _wrap(self._value(fr, ins.operands[0]), w)
        elif op == "select":
            c = self._value(fr, ins.operands[0], 1)
            fr.regs[ins.id] = self._value(fr, ins.operands[1 if c else 2], w)
        elif op == "alloca":
            count = self.obj_counter.get((fr.fn.name, ins.id), 0)
            self.obj_counter[(fr.fn.name, ins.id)] = count + 1
            key = f"{fr.fn.name}:{ins.id}:{count}"
            obj = _Obj(key, ins.type.width, [0] * ins.type.length)
            oid = len(self.objects)
            self.objects[oid] = obj
            fr.regs[ins.id] = ("addr", oid, 0)
        elif op == "gep":
            _, oid, off = self._value(fr, ins.operands[0])
            idx = self._value(fr, ins.operands[1], 32)
            fr.regs[ins.id] = ("addr", oid, _wrap(off + _signed(idx, 32), 32))
        elif op == "load":
            _, oid, off = self._value(fr, ins.operands[0])
            obj = self.objects[oid]
            if off >= len(obj.cells):
                return self._crash("oob-load", ins)
            fr.regs[ins.id] = obj.cells[off]
        elif op == "store":
            v = self._value(fr, ins.operands[0], w)
            _, oid, off = self._value(fr, ins.operands[1])
            obj = self.objects[oid]
            if off >= len(obj.cells):
                return self._crash("oob-store", ins)
            obj.cells[off] = v
        elif op == "make_symbolic":
            _, oid, _ = self._value(fr, ins.operands[0])
            obj = self.objects[oid]
            name = ins.operands[2].s
            if name not in self.inputs:
                raise MissingInputError(f"no input bytes for {name!r}")
            data = self.inputs[name]
            if len(data) < len(obj.cells):
                raise MissingInputError(f"input {name!r} too short")
            obj.cells = [_wrap(v, obj.width) for v in data[: len(obj.cells)]]
            obj.key = name
        elif op == "assert":
            if self._value(fr, ins.operands[0], 1) == 0:
                return self._crash("assert-fail", ins)
        elif op == "va_arg":
            k = self._value(fr, ins.operands[0], 32)
            fr.regs[ins.id] = _wrap(fr.varargs[k], w)
        elif op == "call":
            callee = self.module.function(ins.callee)
            fixed = len(callee.params)
            args = {}
            for (pname, pty), a in zip(callee.params, ins.operands):
                args[pname] = self._value(fr, a, pty.width if pty.is_int else None)
            varargs = [self._value(fr, a) for a in ins.operands[fixed:]]
            fr.index += 1
            self.frames.append(_Frame(callee, args, varargs, ins.id))
            return None
        elif op == "br":
            if len(ins.operands) == 1:
                target = ins.operands[0].name
            else:
                c = self._value(fr, ins.operands[0], 1)
                target = ins.operands[1 if c else 2].name
                if self.branch_trace is not None:
                    self.branch_trace.append((fr.fn.name, fr.block.label, bool(c)))
            fr.prev_label = fr.block.label
            fr.block = fr.fn.block(target)
            fr.index = 0
            return None
        elif op == "ret":
            rv = self._value(fr, ins.operands[0], w) if ins.operands else None
            self.frames.pop()
            if not self.frames:
                out = ConcreteOutcome("normal", rv, self._memory_view())
                out.branch_trace = self.branch_trace or []
                return out
            caller = self.frames[-1]
            if fr.ret_to is not None:
                caller.regs[fr.ret_to] = rv
            return None
        else:
            raise ValueError(f"concrete interpreter: unknown opcode {op}")
        fr.index += 1
        return None


def concrete_run(module, inputs, max_steps=2_000_000, record_branches=False):
    """Run `module` on concrete input cells (one list per symbolic object)."""
    return _Machine(module, inputs, max_steps, record_branches).run()
