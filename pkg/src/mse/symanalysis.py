"""Inter-procedural symbolic-variable analysis.

Marks the values and conditional branches whose runtime outcome can depend
on symbolic input.  Data dependences propagate through operands; phi nodes
additionally pick up the branches that control their incoming edge (control
dependence computed from the postdominator tree).  Memory is abstracted at
allocation-object granularity: an object becomes symbolic when it is a
make_symbolic target, when a symbolic value or symbolically-addressed store
may write it, or when any store to it executes under a symbolic branch.

The analysis is context-insensitive: a callee is reprocessed whenever a call
site contributes a new symbolic argument position, a new points-to target
for an address parameter, or a symbolic variadic tail.  All marks grow
monotonically over finite sets, so the worklist terminates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .ir import Diagnostic, Ref, compute_cfg_info


@dataclass
class SymFacts:
    values: dict = field(default_factory=dict)        # func -> set of value ids
    branches: dict = field(default_factory=dict)      # func -> set of block labels
    sym_params: dict = field(default_factory=dict)    # func -> set of positions
    sym_objects: set = field(default_factory=set)     # (func, alloca id) keys
    param_pts: dict = field(default_factory=dict)     # func -> pos -> set of objects
    returns_symbolic: set = field(default_factory=set)
    varargs_symbolic: set = field(default_factory=set)
    diagnostics: list = field(default_factory=list)

    def is_symbolic(self, func, value):
        return value in self.values.get(func, ())

    def ensure(self, func):
        self.values.setdefault(func, set())
        self.branches.setdefault(func, set())
        self.sym_params.setdefault(func, set())
        self.param_pts.setdefault(func, {})

    def snapshot(self):
        return (
            {f: frozenset(v) for f, v in self.values.items()},
            {f: frozenset(v) for f, v in self.branches.items()},
            {f: frozenset(v) for f, v in self.sym_params.items()},
            frozenset(self.sym_objects),
            {f: {k: frozenset(v) for k, v in d.items()} for f, d in self.param_pts.items()},
            frozenset(self.returns_symbolic),
            frozenset(self.varargs_symbolic),
        )


def mark_symbolic_sources(mod):
    """Initial sources: make_symbolic targets and entry-function parameters."""
    facts = SymFacts()
    for fn in mod.functions:
        facts.ensure(fn.name)
    entry = mod.entry_function
    if entry is not None:
        fn = mod.function(entry)
        for k, (pname, pty) in enumerate(fn.params):
            facts.sym_params[entry].add(k)
            facts.values[entry].add(pname)
            if pty.is_addr:
                ext = (entry, f"<arg{k}>")
                facts.sym_objects.add(ext)
                facts.param_pts[entry].setdefault(k, set()).add(ext)
    for fn in mod.functions:
        pts = _points_to(fn, facts)
        for b in fn.blocks:
            for i, ins in enumerate(b.instructions):
                if ins.opcode != "make_symbolic":
                    continue
                target = ins.operands[0]
                objs = pts.get(target.name, set()) if isinstance(target, Ref) else set()
                if not isinstance(target, Ref) or (not objs and not _maybe_param_addr(fn, target)):
                    facts.diagnostics.append(Diagnostic(
                        "make-symbolic-target",
                        "make_symbolic target is not a memory object",
                        fn.name, b.label, i))
                facts.sym_objects.update(objs)
    return facts


def _maybe_param_addr(fn, ref):
    return any(n == ref.name and t.is_addr for n, t in fn.params)


def _points_to(fn, facts):
    """Flow-insensitive per-function address -> object sets."""
    pts = {}
    for k, (pname, pty) in enumerate(fn.params):
        if pty.is_addr:
            pts[pname] = set(facts.param_pts.get(fn.name, {}).get(k, set()))
    changed = True
    while changed:
        changed = False
        for b in fn.blocks:
            for ins in b.instructions:
                if ins.opcode == "alloca":
                    got = pts.setdefault(ins.id, set())
                    if (fn.name, ins.id) not in got:
                        got.add((fn.name, ins.id))
                        changed = True
                elif ins.opcode == "gep":
                    base = ins.operands[0]
                    if isinstance(base, Ref):
                        got = pts.setdefault(ins.id, set())
                        new = pts.get(base.name, set()) - got
                        if new:
                            got |= new
                            changed = True
                elif ins.opcode in ("phi", "select") and ins.type.is_addr:
                    srcs = ins.operands if ins.opcode == "phi" else ins.operands[1:]
                    got = pts.setdefault(ins.id, set())
                    for o in srcs:
                        if isinstance(o, Ref):
                            new = pts.get(o.name, set()) - got
                            if new:
                                got |= new
                                changed = True
    return pts


def propagate_function(fn, facts, mod=None):
    """Intra-procedural fixed point; returns True if any mark was added."""
    facts.ensure(fn.name)
    marks = facts.values[fn.name]

    def _state():
        return (len(marks), len(facts.branches[fn.name]), len(facts.sym_objects),
                len(facts.returns_symbolic))

    before = _state()
    pts = _points_to(fn, facts)
    cfg = compute_cfg_info(fn)
    phi_ctrl = {}

    for k in facts.sym_params[fn.name]:
        if k < len(fn.params):
            marks.add(fn.params[k][0])

    def sym(op):
        return isinstance(op, Ref) and op.name in marks

    changed = True
    while changed:
        changed = False
        for b in fn.blocks:
            ctrl = None
            for i, ins in enumerate(b.instructions):
                op = ins.opcode
                if op == "br":
                    if len(ins.operands) == 3 and sym(ins.operands[0]):
                        if b.label not in facts.branches[fn.name]:
                            facts.branches[fn.name].add(b.label)
                            changed = True
                    continue
                if op in ("ret",):
                    if ins.operands and sym(ins.operands[0]):
                        if fn.name not in facts.returns_symbolic:
                            facts.returns_symbolic.add(fn.name)
                            changed = True
                    continue
                if op == "store":
                    val, addr = ins.operands
                    if ctrl is None:
                        ctrl = cfg.control_deps(b.label)
                    under_sym_branch = bool(ctrl & facts.branches[fn.name])
                    if sym(val) or sym(addr) or under_sym_branch:
                        objs = pts.get(addr.name, set()) if isinstance(addr, Ref) else set()
                        if objs - facts.sym_objects:
                            facts.sym_objects.update(objs)
                            changed = True
                    continue
                if op in ("make_symbolic", "assert"):
                    continue
                if ins.id is None or ins.id in marks:
                    continue
                is_sym = False
                if op == "load":
                    addr = ins.operands[0]
                    objs = pts.get(addr.name, set()) if isinstance(addr, Ref) else set()
                    is_sym = sym(addr) or bool(objs & facts.sym_objects)
                elif op == "phi":
                    if b.label not in phi_ctrl:
                        deps = set()
                        for p in cfg.preds.get(b.label, ()):
                            deps |= cfg.control_deps(p)
                        phi_ctrl[b.label] = deps
                    is_sym = (any(sym(o) for o in ins.operands)
                              or bool(phi_ctrl[b.label] & facts.branches[fn.name]))
                elif op == "call":
                    if mod is not None and mod.has_function(ins.callee):
                        is_sym = ins.callee in facts.returns_symbolic
                    else:
                        facts.diagnostics.append(Diagnostic(
                            "unresolved-callee",
                            f"@{ins.callee} unresolved; assuming symbolic result",
                            fn.name, b.label, i))
                        is_sym = True
                elif op == "va_arg":
                    is_sym = fn.name in facts.varargs_symbolic
                else:
                    is_sym = any(sym(o) for o in ins.operands)
                if is_sym:
                    marks.add(ins.id)
                    changed = True
    return _state() != before


def analyze_program(mod):
    """Worklist over functions until the inter-procedural fixed point."""
    facts = mark_symbolic_sources(mod)
    fnames = [f.name for f in mod.functions]
    pending = list(fnames)
    rounds = 0
    while pending or rounds == 0:
        rounds += 1
        worklist = pending or list(fnames)
        pending = []
        touched = set()
        for name in worklist:
            if name in touched:
                continue
            touched.add(name)
            fn = mod.function(name)
            propagate_function(fn, facts, mod)
            pending.extend(_update_call_sites(mod, fn, facts))
        if not pending:
            # one more sweep to catch marks that crossed functions indirectly
            # (shared symbolic objects, newly symbolic returns)
            before = facts.snapshot()
            for name in fnames:
                propagate_function(mod.function(name), facts, mod)
                _update_call_sites(mod, mod.function(name), facts)
            if facts.snapshot() != before:
                pending = list(fnames)
    return facts


def _update_call_sites(mod, fn, facts):
    """Push symbolic arguments and address bindings into callees."""
    needs_rerun = []
    pts = _points_to(fn, facts)
    marks = facts.values[fn.name]
    for b in fn.blocks:
        for ins in b.instructions:
            if ins.opcode != "call" or not mod.has_function(ins.callee):
                continue
            callee = mod.function(ins.callee)
            facts.ensure(callee.name)
            changed = False
            fixed = len(callee.params)
            for k, arg in enumerate(ins.operands):
                arg_sym = isinstance(arg, Ref) and arg.name in marks
                if k < fixed:
                    if arg_sym and k not in facts.sym_params[callee.name]:
                        facts.sym_params[callee.name].add(k)
                        changed = True
                    if isinstance(arg, Ref) and callee.params[k][1].is_addr:
                        objs = pts.get(arg.name, set())
                        tgt = facts.param_pts[callee.name].setdefault(k, set())
                        if objs - tgt:
                            tgt.update(objs)
                            changed = True
                elif arg_sym and callee.name not in facts.varargs_symbolic:
                    facts.varargs_symbolic.add(callee.name)
                    changed = True
            if changed:
                needs_rerun.append(callee.name)
    return needs_rerun


def classify_branches(mod, facts):
    """Conditional branches whose condition is marked symbolic, per function."""
    out = {}
    for fn in mod.functions:
        hits = []
        for b in fn.blocks:
            term = b.terminator
            if (term is not None and term.opcode == "br" and len(term.operands) == 3
                    and b.label in facts.branches.get(fn.name, ())):
                hits.append(b.label)
        out[fn.name] = hits
    return out


def facts_to_json(mod, facts):
    out = {}
    for fn in mod.functions:
        branches = []
        for b in fn.blocks:
            if b.label in facts.branches.get(fn.name, ()):
                branches.append(f"{b.label}:{len(b.instructions) - 1}")
        out[fn.name] = {
            "symbolic_values": sorted(facts.values.get(fn.name, ())),
            "symbolic_branches": branches,
        }
    return out
