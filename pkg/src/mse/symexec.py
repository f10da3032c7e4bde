"""Miniature dynamic symbolic executor over MIR.

One worklist of states, dfs or bfs.  Forks only at conditional branches
whose condition is a non-constant expression and only into feasible sides,
so every completed path has a satisfiable path condition by construction.
Select instructions turn into ite expressions without forking or solving.

Crash events (out-of-bounds access, division by zero, failed assertion)
terminate their path and carry a concrete input model obtained from the
feasibility query that exposed them.

Optional state merging pauses the two sides of a fork when they reach the
immediate postdominator of the fork block and combines them: differing
registers and memory cells become ite expressions over the first side's
path condition and the merged path condition is the disjunction.  A merge
retires one of the two states, which counts as a completed path, mirroring
how merged-away states are tallied as explored paths elsewhere.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .ir import Const, compute_cfg_info
from .solver import Solver, SolverUnknown
from .solver import expr as E


@dataclass(frozen=True)
class Addr:
    obj: int
    off: object          # SymExpr, 32-bit


@dataclass
class MemObject:
    oid: int
    key: str             # stable across runs: symbolic name or func:alloca:count
    width: int
    length: int
    cells: list
    sym_name: str | None = None

    def clone(self):
        return MemObject(self.oid, self.key, self.width, self.length,
                         list(self.cells), self.sym_name)


class Frame:
    __slots__ = ("fname", "block", "index", "prev_label", "regs", "varargs",
                 "ret_to")

    def __init__(self, fname, block, index=0, prev_label=None, regs=None,
                 varargs=(), ret_to=None):
        self.fname = fname
        self.block = block
        self.index = index
        self.prev_label = prev_label
        self.regs = regs if regs is not None else {}
        self.varargs = varargs
        self.ret_to = ret_to

    def clone(self):
        return Frame(self.fname, self.block, self.index, self.prev_label,
                     dict(self.regs), self.varargs, self.ret_to)

    def point(self):
        return (self.fname, self.block, self.index)


class MergeToken:
    __slots__ = ("block", "fname", "depth", "holders", "waiting")

    def __init__(self, block, fname, depth):
        self.block = block
        self.fname = fname
        self.depth = depth
        self.holders = 2
        self.waiting = []


class ExecState:
    _next_id = 0

    def __init__(self):
        self.frames = []
        self.memory = {}
        self.pc = []
        self.tokens = []
        self.alloca_counts = {}
        self.sym_objects = {}     # input name -> oid
        self.sid = ExecState._next_id
        ExecState._next_id += 1

    def clone(self):
        out = ExecState()
        out.frames = [f.clone() for f in self.frames]
        out.memory = {k: v.clone() for k, v in self.memory.items()}
        out.pc = list(self.pc)
        out.tokens = list(self.tokens)
        out.alloca_counts = dict(self.alloca_counts)
        out.sym_objects = dict(self.sym_objects)
        return out

    @property
    def top(self):
        return self.frames[-1]

    def program_point(self):
        return tuple(f.point() for f in self.frames)

    def content_equal(self, other):
        if self.program_point() != other.program_point():
            return False
        if [f.regs for f in self.frames] != [f.regs for f in other.frames]:
            return False
        if set(self.memory) != set(other.memory):
            return False
        for k, obj in self.memory.items():
            if obj.cells != other.memory[k].cells:
                return False
        return self.pc == other.pc


def merge_states(s1, s2):
    """Merge two states at the same program point, or None if they cannot be.

    Differing registers and memory cells become ite(pc1, v1, v2); the merged
    path condition is the disjunction of the two sides.
    """
    if s1.program_point() != s2.program_point():
        return None
    if set(s1.memory) != set(s2.memory):
        return None
    for f1, f2 in zip(s1.frames, s2.frames):
        if f1.varargs != f2.varargs or f1.ret_to != f2.ret_to:
            return None
    if s1.content_equal(s2):
        return s1.clone()
    cond = E.conjunct(s1.pc)
    out = s1.clone()
    for fo, f1, f2 in zip(out.frames, s1.frames, s2.frames):
        merged_regs = {}
        for k in f1.regs.keys() & f2.regs.keys():
            v1, v2 = f1.regs[k], f2.regs[k]
            if v1 == v2:
                merged_regs[k] = v1
            elif isinstance(v1, Addr) and isinstance(v2, Addr):
                if v1.obj != v2.obj:
                    return None
                merged_regs[k] = Addr(v1.obj, E.ite(cond, v1.off, v2.off))
            elif isinstance(v1, Addr) or isinstance(v2, Addr):
                return None
            else:
                merged_regs[k] = E.ite(cond, v1, v2)
        fo.regs = merged_regs
    for oid, obj in out.memory.items():
        o1, o2 = s1.memory[oid], s2.memory[oid]
        obj.cells = [c1 if c1 is c2 else E.ite(cond, c1, c2)
                     for c1, c2 in zip(o1.cells, o2.cells)]
    out.pc = [E.disjunct([E.conjunct(s1.pc), E.conjunct(s2.pc)])]
    return out


# ---------------------------------------------------------------------------
# Reports


@dataclass
class CrashReport:
    kind: str
    function: str
    block: str
    index: int
    src_lines: frozenset
    input: dict                  # input name -> list of cell values
    origin: str | None = None    # merge location that emitted the instruction
    classification: str = "unclassified"
    replay_kind: str | None = None      # crash kind observed on the original
    replay_src_lines: frozenset = frozenset()

    @property
    def location(self):
        return f"{self.function}:{self.block}:{self.index}"

    def input_hex(self):
        return {k: "".join(f"{v:02x}" for v in vs) for k, vs in self.input.items()}

    def to_json(self):
        return {"kind": self.kind, "loc": self.location,
                "src_lines": sorted(self.src_lines),
                "origin": self.origin,
                "input_hex": self.input_hex(),
                "classification": self.classification}


@dataclass
class PathRecord:
    pc: tuple
    outcome: str                 # "ret" or a crash kind
    ret: object = None
    memory: dict = field(default_factory=dict)   # object key -> cell exprs


@dataclass
class DseReport:
    mode: str = ""
    time_ms: float = 0.0
    paths: int = 0
    merges: int = 0
    queries: int = 0
    cache_hits: int = 0
    avg_query_size: float = 0.0
    crashes: list = field(default_factory=list)
    covered_lines: set = field(default_factory=set)
    termination: str = "exhausted"

    def to_json(self):
        return {"mode": self.mode, "time_ms": round(self.time_ms, 3),
                "paths": self.paths, "queries": self.queries,
                "cache_hits": self.cache_hits,
                "avg_query_size": round(self.avg_query_size, 3),
                "crashes": [c.to_json() for c in self.crashes],
                "covered_lines": sorted(self.covered_lines),
                "termination": self.termination}


@dataclass
class DseConfig:
    strategy: str = "dfs"
    merge_states: bool = False
    caching: bool = True
    backend: str = "sat"
    max_time: float | None = None
    max_paths: int | None = None
    cap_bits: int = 20
    max_conflicts: int | None = None
    dump_smt2: str | None = None
    collect_paths: bool = False
    crash_hook: object = None      # callable(CrashReport) -> "continue" | "abort"

    def mode_name(self):
        return self.strategy + ("+sm" if self.merge_states else "")


class _PathEnd(Exception):
    """Internal: current state finished (ret, crash, merge, park, drop)."""


class DseEngine:
    def __init__(self, module, config=None):
        self.module = module
        self.config = config or DseConfig()
        self.solver = Solver(backend=self.config.backend,
                             caching=self.config.caching,
                             cap_bits=self.config.cap_bits,
                             max_conflicts=self.config.max_conflicts,
                             dump_dir=self.config.dump_smt2)
        self._cfg = {}
        self._first_nonphi = {}
        self.paths = []              # PathRecord when collect_paths
        self.crashes = []
        self.covered = set()
        self.completed = 0
        self.merges = 0
        self.queries_by_branch = {}  # "func:block" -> feasibility query count
        self._all_tokens = []
        self._abort = False

    # -- plumbing ---------------------------------------------------------

    def cfg(self, fname):
        if fname not in self._cfg:
            self._cfg[fname] = compute_cfg_info(self.module.function(fname))
        return self._cfg[fname]

    def _block(self, fname, label):
        return self.module.function(fname).block(label)

    def _full_model(self, state, model):
        """Extend a solver model to cover every symbolic object with zeros."""
        out = {}
        for name, oid in state.sym_objects.items():
            obj = state.memory[oid]
            got = (model or {}).get(name, {})
            out[name] = [got.get(i, 0) for i in range(obj.length)]
        return out

    # -- value handling -----------------------------------------------------

    @staticmethod
    def _as_expr(v, width):
        if isinstance(v, Const):
            return E.bv_const(width, v.value)
        return v

    def _value(self, state, op, width=None):
        if isinstance(op, Const):
            return E.bv_const(width, op.value)
        v = state.top.regs[op.name]
        return v

    # -- main loop ----------------------------------------------------------

    def run(self):
        t0 = time.monotonic()
        entry = self.module.function(self.module.entry_function)
        init = ExecState()
        init.frames.append(Frame(entry.name, entry.entry))
        worklist = [init]
        termination = "exhausted"
        while True:
            if not worklist:
                # safety valve: revive states parked on tokens whose partner
                # bookkeeping went stale (irreducible flow); they continue solo
                stragglers = []
                for tok in self._all_tokens:
                    while tok.waiting:
                        stragglers.append(tok.waiting.pop(0))
                for s in stragglers:
                    s.tokens = []
                if not stragglers:
                    break
                worklist.extend(stragglers)
                continue
            if self._abort:
                termination = "aborted"
                break
            if self.config.max_time is not None and \
                    time.monotonic() - t0 > self.config.max_time:
                termination = "time-budget"
                break
            if self.config.max_paths is not None and \
                    self.completed >= self.config.max_paths:
                termination = "path-budget"
                break
            state = worklist.pop() if self.config.strategy == "dfs" else worklist.pop(0)
            try:
                successors = self._advance(state)
            except SolverUnknown:
                termination = "time-budget"
                break
            worklist.extend(successors)
        report = DseReport(
            mode=self.config.mode_name(),
            time_ms=(time.monotonic() - t0) * 1000.0,
            paths=self.completed,
            merges=self.merges,
            queries=self.solver.stats.queries,
            cache_hits=self.solver.stats.cache_hits,
            avg_query_size=self.solver.stats.avg_query_size,
            crashes=self.crashes,
            covered_lines=self.covered,
            termination=termination)
        return report

    # -- state stepping -------------------------------------------------------

    def _advance(self, state):
        """Run a state until it forks, parks, or terminates.

        Returns the list of states to schedule next.
        """
        while True:
            frame = state.top
            fn = self.module.function(frame.fname)
            block = fn.block(frame.block)
            if frame.index == 0 and block.phis():
                self._exec_phis(state, block)
            if self.config.merge_states and state.tokens:
                tok = state.tokens[-1]
                if (tok.fname == frame.fname and tok.block == frame.block
                        and tok.depth == len(state.frames)
                        and frame.index == len(block.phis())):
                    outcome = self._try_merge(state, tok)
                    if outcome is not None:
                        return outcome
            if frame.index >= len(block.instructions):
                raise AssertionError(f"fell off block {frame.block}")
            ins = block.instructions[frame.index]
            self.covered |= ins.src_lines
            try:
                successors = self._exec(state, frame, ins)
            except _PathEnd:
                return []
            if successors is not None:
                return successors

    def _exec_phis(self, state, block):
        frame = state.top
        values = []
        for p in block.phis():
            k = p.incoming.index(frame.prev_label)
            self.covered |= p.src_lines
            values.append((p.id, self._value(state, p.operands[k],
                                             p.type.width if p.type.is_int else None)))
        frame.regs.update(values)
        frame.index = len(block.phis())

    def _try_merge(self, state, tok):
        """Returns successor list when the state merged/parked, else None."""
        if tok.waiting:
            partner = tok.waiting.pop(0)
            merged = merge_states(partner, state)
            if merged is None:
                partner.tokens.pop()
                state.tokens.pop()
                tok.holders -= 2
                return [partner, state]
            merged.tokens = state.tokens[:-1]
            for lower in merged.tokens:
                lower.holders -= 1
            tok.holders -= 2
            self.merges += 1
            self._complete_path(state, None)     # absorbed into the merge
            return [merged]
        if tok.holders <= 1:
            state.tokens.pop()
            return None                           # continue alone
        tok.waiting.append(state)
        return []

    def _complete_path(self, state, record, count=True):
        if count:
            self.completed += 1
        if self.config.collect_paths and record is not None:
            self.paths.append(record)

    def _finish_ret(self, state, ret_value):
        mem = {}
        for obj in state.memory.values():
            mem[obj.key] = list(obj.cells)
        self._complete_path(state, PathRecord(tuple(state.pc), "ret", ret_value, mem))

    def _release_tokens(self, state):
        released = []
        for tok in state.tokens:
            tok.holders -= 1
            if tok.holders == 1 and tok.waiting:
                w = tok.waiting.pop(0)
                assert w.tokens and w.tokens[-1] is tok
                w.tokens.pop()
                released.append(w)
        state.tokens = []
        return released

    def _crash(self, state, ins, kind, model):
        frame = state.top
        report = CrashReport(kind, frame.fname, frame.block, frame.index,
                             ins.src_lines, self._full_model(state, model),
                             origin=ins.origin)
        self.crashes.append(report)
        mem = {obj.key: list(obj.cells) for obj in state.memory.values()}
        self._complete_path(state, PathRecord(tuple(state.pc), kind, None, mem))
        released = self._release_tokens(state)
        if self.config.crash_hook is not None:
            if self.config.crash_hook(report) == "abort":
                self._abort = True
        return released

    def _count_branch_query(self, frame, n):
        key = f"{frame.fname}:{frame.block}"
        self.queries_by_branch[key] = self.queries_by_branch.get(key, 0) + n

    # -- instruction dispatch -------------------------------------------------

    def _exec(self, state, frame, ins):
        """Execute one instruction.

        Returns None to keep running this state, a successor list to stop and
        schedule others, or raises _PathEnd when the path terminated.
        """
        op = ins.opcode
        w = ins.type.width

        if op in E.BINOP_NAMES:
            a = self._value(state, ins.operands[0], w)
            b = self._value(state, ins.operands[1], w)
            if op in ("udiv", "sdiv"):
                return self._exec_div(state, frame, ins, a, b)
            frame.regs[ins.id] = E.binop(op, a, b)
        elif op == "icmp":
            sw = ins.src_type.width
            a = self._value(state, ins.operands[0], sw)
            b = self._value(state, ins.operands[1], sw)
            frame.regs[ins.id] = E.cmp(ins.pred, a, b)
        elif op == "zext":
            frame.regs[ins.id] = E.zext(
                self._value(state, ins.operands[0], ins.src_type.width), w)
        elif op == "sext":
            frame.regs[ins.id] = E.sext(
                self._value(state, ins.operands[0], ins.src_type.width), w)
        elif op == "trunc":
            frame.regs[ins.id] = E.trunc(
                self._value(state, ins.operands[0], ins.src_type.width), w)
        elif op == "select":
            c = self._value(state, ins.operands[0], 1)
            if ins.type.is_addr:
                if not c.is_const:
                    raise NotImplementedError("select over addresses with a "
                                              "symbolic condition")
                pick = ins.operands[1] if c.value else ins.operands[2]
                frame.regs[ins.id] = frame.regs[pick.name]
            else:
                t = self._value(state, ins.operands[1], w)
                f = self._value(state, ins.operands[2], w)
                frame.regs[ins.id] = E.ite(c, t, f)
        elif op == "alloca":
            frame.regs[ins.id] = self._alloca(state, frame, ins)
        elif op == "gep":
            base = state.top.regs[ins.operands[0].name]
            idx = self._value(state, ins.operands[1], 32)
            idx32 = idx if idx.width == 32 else E.sext(idx, 32)
            frame.regs[ins.id] = Addr(base.obj, E.binop("add", base.off, idx32))
        elif op == "load":
            return self._exec_mem(state, frame, ins, is_store=False)
        elif op == "store":
            return self._exec_mem(state, frame, ins, is_store=True)
        elif op == "make_symbolic":
            self._make_symbolic(state, frame, ins)
        elif op == "assert":
            return self._exec_assert(state, frame, ins)
        elif op == "va_arg":
            k = self._value(state, ins.operands[0], 32)
            if not k.is_const:
                raise NotImplementedError("va_arg with symbolic index")
            v = frame.varargs[k.value]
            if isinstance(v, Addr):
                frame.regs[ins.id] = v
            elif v.width > w:
                frame.regs[ins.id] = E.trunc(v, w)
            elif v.width < w:
                frame.regs[ins.id] = E.zext(v, w)
            else:
                frame.regs[ins.id] = v
        elif op == "call":
            callee = self.module.function(ins.callee)
            regs = {}
            for (pname, pty), o in zip(callee.params, ins.operands):
                regs[pname] = self._value(state, o,
                                          pty.width if pty.is_int else None)
            varargs = tuple(self._value(state, o, 32) if isinstance(o, Const)
                            else state.top.regs[o.name]
                            for o in ins.operands[len(callee.params):])
            frame.index += 1
            state.frames.append(Frame(callee.name, callee.entry, regs=regs,
                                      varargs=varargs, ret_to=ins.id))
            return None
        elif op == "br":
            return self._exec_br(state, frame, ins)
        elif op == "ret":
            rv = self._value(state, ins.operands[0], w) if ins.operands else None
            done = state.frames.pop()
            if not state.frames:
                self._finish_ret(state, rv)
                return self._release_tokens(state)
            if done.ret_to is not None:
                state.top.regs[done.ret_to] = rv
            return None
        else:
            raise ValueError(f"executor: unknown opcode {op}")
        frame.index += 1
        return None

    def _alloca(self, state, frame, ins):
        count = state.alloca_counts.get((frame.fname, ins.id), 0)
        state.alloca_counts[(frame.fname, ins.id)] = count + 1
        oid = len(state.memory)
        key = f"{frame.fname}:{ins.id}:{count}"
        obj = MemObject(oid, key, ins.type.width, ins.type.length,
                        [E.bv_const(ins.type.width, 0)] * ins.type.length)
        state.memory[oid] = obj
        return Addr(oid, E.bv_const(32, 0))

    def _make_symbolic(self, state, frame, ins):
        addr = state.top.regs[ins.operands[0].name]
        obj = state.memory[addr.obj]
        name = ins.operands[2].s
        if name in state.sym_objects:
            k = 2
            while f"{name}.{k}" in state.sym_objects:
                k += 1
            name = f"{name}.{k}"
        obj.cells = [E.sym_read(name, i, obj.width) for i in range(obj.length)]
        obj.key = name
        obj.sym_name = name
        state.sym_objects[name] = addr.obj

    def _exec_br(self, state, frame, ins):
        if len(ins.operands) == 1:
            self._jump(frame, ins.operands[0].name)
            return None
        cond = self._value(state, ins.operands[0], 1)
        t_label, f_label = ins.operands[1].name, ins.operands[2].name
        if cond.is_const:
            self._jump(frame, t_label if cond.value else f_label)
            return None
        r_true = self.solver.check(state.pc, cond)
        r_false = self.solver.check(state.pc, E.notb(cond))
        self._count_branch_query(frame, 2)
        if r_true.is_sat and r_false.is_sat:
            s_false = state.clone()
            if self.config.merge_states:
                merge_at = self.cfg(frame.fname).ipdom.get(frame.block)
                if merge_at is not None and merge_at != "__exit__":
                    tok = MergeToken(merge_at, frame.fname, len(state.frames))
                    self._all_tokens.append(tok)
                    state.tokens.append(tok)
                    s_false.tokens = state.tokens[:-1] + [tok]
            state.pc.append(cond)
            s_false.pc.append(E.notb(cond))
            self._jump(state.top, t_label)
            self._jump(s_false.top, f_label)
            return [s_false, state] if self.config.strategy == "dfs" else [state, s_false]
        if r_true.is_sat:
            state.pc.append(cond)
            self._jump(frame, t_label)
            return None
        if r_false.is_sat:
            state.pc.append(E.notb(cond))
            self._jump(frame, f_label)
            return None
        # infeasible state: drop silently (cannot happen for a sat pc)
        released = self._release_tokens(state)
        if released:
            return released
        raise _PathEnd

    @staticmethod
    def _jump(frame, label):
        frame.prev_label = frame.block
        frame.block = label
        frame.index = 0

    def _exec_div(self, state, frame, ins, a, b):
        if b.is_const:
            if b.value == 0:
                released = self._crash(state, ins, "div-by-zero",
                                       self._model_for(state))
                if released:
                    return released
                raise _PathEnd
        else:
            zero = E.cmp("eq", b, E.bv_const(b.width, 0))
            r_zero = self.solver.check(state.pc, zero)
            if r_zero.is_sat:
                crash_state = state.clone()
                crash_state.tokens = []       # the live state keeps the holds
                crash_state.pc.append(zero)
                self._crash(crash_state, ins, "div-by-zero", r_zero.model)
            nz = E.notb(zero)
            r_nz = self.solver.check(state.pc, nz)
            if not r_nz.is_sat:
                released = self._release_tokens(state)
                if released:
                    return released
                raise _PathEnd
            state.pc.append(nz)
        frame.regs[ins.id] = E.binop(ins.opcode, a, b)
        frame.index += 1
        return None

    def _model_for(self, state):
        if not state.pc:
            return {}
        return self.solver.check(state.pc).model

    def _exec_assert(self, state, frame, ins):
        c = self._value(state, ins.operands[0], 1)
        if c.is_const:
            if c.value == 0:
                released = self._crash(state, ins, "assert-fail",
                                       self._model_for(state))
                if released:
                    return released
                raise _PathEnd
            frame.index += 1
            return None
        neg = E.notb(c)
        r_fail = self.solver.check(state.pc, neg)
        if r_fail.is_sat:
            crash_state = state.clone()
            crash_state.tokens = []
            crash_state.pc.append(neg)
            self._crash(crash_state, ins, "assert-fail", r_fail.model)
        r_ok = self.solver.check(state.pc, c)
        if not r_ok.is_sat:
            released = self._release_tokens(state)
            if released:
                return released
            raise _PathEnd
        state.pc.append(c)
        frame.index += 1
        return None

    def _exec_mem(self, state, frame, ins, is_store):
        addr_op = ins.operands[1] if is_store else ins.operands[0]
        addr = state.top.regs[addr_op.name]
        obj = state.memory[addr.obj]
        off = addr.off
        kind = "oob-store" if is_store else "oob-load"
        if off.is_const:
            if off.value >= obj.length:
                released = self._crash(state, ins, kind, self._model_for(state))
                if released:
                    return released
                raise _PathEnd
            return self._mem_access(state, frame, ins, obj, off.value, is_store)
        # symbolic offset: report a feasible out-of-bounds, then fork in-bounds
        length = E.bv_const(32, obj.length)
        oob = E.cmp("uge", off, length)
        r_oob = self.solver.check(state.pc, oob)
        if r_oob.is_sat:
            crash_state = state.clone()
            crash_state.tokens = []
            crash_state.pc.append(oob)
            self._crash(crash_state, ins, kind, r_oob.model)
        successors = []
        for i in range(obj.length):
            eq = E.cmp("eq", off, E.bv_const(32, i))
            r = self.solver.check(state.pc, eq)
            if not r.is_sat:
                continue
            child = state.clone()
            child.pc.append(eq)
            self._mem_access(child, child.top, ins, child.memory[obj.oid], i,
                             is_store)
            successors.append(child)
        if not successors:
            released = self._release_tokens(state)
            return released
        # the original state is superseded by its index forks; adjust the
        # token holder counts for the extra copies
        for tok in state.tokens:
            tok.holders += len(successors) - 1
        return successors

    def _mem_access(self, state, frame, ins, obj, index, is_store):
        if is_store:
            obj.cells[index] = self._value(state, ins.operands[0], ins.type.width)
        else:
            frame.regs[ins.id] = obj.cells[index]
        frame.index += 1
        return None


def run_dse(module, config=None):
    return DseEngine(module, config).run()
