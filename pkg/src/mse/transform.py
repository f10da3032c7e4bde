"""Branch-merging transformation: control flow to data flow.

Finds diamonds whose condition is symbolic, pads the two arms into identical
opcode sequences by inserting dead instructions, then folds both arms into
the branch block, turning the join-block phis and mismatched operands into
selects.  The transformation is failure preserving but not semantics
preserving: a dead memory access that the branch used to guard may fault.

Rules that keep dead instructions harmless:
  * a dead instruction's value is never used by an original instruction;
  * only ALU-family opcodes and loads/stores may be synthesized;
  * a dead store writes back a value freshly loaded from its own address;
  * a division's divisor operand is always the constant 1;
  * operands mirror the partner's def-use chain when the producing pair is
    aligned, otherwise they take the opcode's neutral constant, except that
    address computations are mirrored verbatim so that no merged memory
    operation ever acquires a select in its address.

Memory pairs merge only when their addresses are statically identical; two
concrete but different addresses are linearized (left unaligned, each
getting a dead partner); any symbolically-addressed access in an arm
disqualifies the whole diamond.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .ir import (BINOPS, CASTS, Const, I1, Instruction, Label, Ref, VOID,
                 clone_module, compute_cfg_info)

MERGEABLE = set(BINOPS) | set(CASTS) | {"icmp", "select", "load", "store", "gep"}
DEAD_INSERTABLE = set(BINOPS) | set(CASTS) | {"icmp", "select", "load", "store", "gep"}

_NEUTRAL_ONE = {"mul"}          # plus division divisors, handled separately


class _Reject(Exception):
    def __init__(self, reason):
        self.reason = reason
        super().__init__(reason)


@dataclass
class DiamondRegion:
    function: str
    branch_block: str
    cond: Ref
    then_label: str
    else_label: str | None      # None until an empty arm is synthesized
    join_label: str
    loc_id: str
    synth_arm: str | None = None  # "then" | "else" when one arm is empty


@dataclass
class Alignment:
    rows: list                  # [(Instruction|None, Instruction|None)]

    @property
    def complete(self):
        return all(a is not None and b is not None for a, b in self.rows)

    @property
    def matched(self):
        return sum(1 for a, b in self.rows if a is not None and b is not None)


@dataclass
class TransformReport:
    found: int = 0
    merged: int = 0
    rejected: int = 0
    rejections: list = field(default_factory=list)      # [(loc, reason)]
    selects: dict = field(default_factory=dict)         # loc -> select count
    dead_inserted: dict = field(default_factory=dict)   # loc -> dead count

    def to_json(self):
        return {
            "found": self.found, "merged": self.merged, "rejected": self.rejected,
            "rejections": [{"location": l, "reason": r} for l, r in self.rejections],
            "selects": dict(sorted(self.selects.items())),
            "dead_inserted": dict(sorted(self.dead_inserted.items())),
        }


class _Namer:
    def __init__(self, fn):
        self.used = fn.value_ids()
        self.counters = {}

    def fresh(self, prefix):
        n = self.counters.get(prefix, 0)
        while f"{prefix}{n}" in self.used:
            n += 1
        self.counters[prefix] = n + 1
        name = f"{prefix}{n}"
        self.used.add(name)
        return name


def _defs_map(fn):
    out = {}
    for b in fn.blocks:
        for ins in b.instructions:
            if ins.id is not None:
                out[ins.id] = ins
    return out


def _branch_tag(fn, block, term):
    return getattr(term, "loc_tag", f"{fn.name}:{block.label}")


def tag_branches(mod):
    """Pin stable location ids to conditional branches before transforming."""
    for fn in mod.functions:
        for b in fn.blocks:
            term = b.terminator
            if term is not None and term.opcode == "br" and len(term.operands) == 3:
                if not hasattr(term, "loc_tag"):
                    term.loc_tag = f"{fn.name}:{b.label}"


# ---------------------------------------------------------------------------
# Candidate discovery


def _value_symbolic(fname, name, facts, defs, memo):
    """Symbolic-ness of a value, covering values created by earlier merges.

    The static analysis only saw the original module; values emitted by a
    merge carry an origin mark and are judged here by data dependence, with
    merged loads treated as symbolic outright (their object-level facts are
    stale).  Both uses of this predicate are safe in the conservative
    direction: more candidates considered, more diamonds rejected.
    """
    if facts.is_symbolic(fname, name):
        return True
    if name in memo:
        return memo[name]
    memo[name] = False           # cycle guard; phis recurse through back edges
    ins = defs.get(name)
    if ins is None:
        out = False
    elif ins.origin is not None and ins.opcode == "load":
        out = True
    else:
        out = any(isinstance(o, Ref)
                  and _value_symbolic(fname, o.name, facts, defs, memo)
                  for o in ins.operands)
    memo[name] = out
    return out


def _arm_ok(fn, label, cfg, branch_label, join_label):
    """Arm must be a straight-line block: one pred, one succ, no phis/calls."""
    if cfg.preds.get(label) != [branch_label]:
        return False
    if cfg.succs.get(label) != [join_label]:
        return False
    blk = fn.block(label)
    term = blk.terminator
    if term is None or term.opcode != "br" or len(term.operands) != 1:
        return False
    return all(i.opcode not in ("phi", "call", "make_symbolic", "assert", "va_arg")
               for i in blk.instructions[:-1])


def find_candidate_diamonds(fn, facts, skip=frozenset()):
    """(candidates, rejections): symbolic conditional branches classified."""
    cfg = compute_cfg_info(fn)
    defs = _defs_map(fn)
    sym_branches = facts.branches.get(fn.name, set())
    candidates, rejections = [], []
    memo = {}
    for b in fn.blocks:
        term = b.terminator
        if term is None or term.opcode != "br" or len(term.operands) != 3:
            continue
        tag = _branch_tag(fn, b, term)
        orig_label = tag.split(":", 1)[1]
        cond = term.operands[0]
        cond_sym = (orig_label in sym_branches
                    or (isinstance(cond, Ref)
                        and _value_symbolic(fn.name, cond.name, facts, defs, memo)))
        if not cond_sym:
            continue
        if tag in skip:
            rejections.append((tag, "location-constrained"))
            continue
        t_label, f_label = term.operands[1].name, term.operands[2].name
        if t_label == f_label or b.label in (t_label, f_label):
            rejections.append((tag, "shape"))
            continue
        then_label = else_label = join = synth = None
        if _arm_ok(fn, t_label, cfg, b.label, f_label):
            # if-then: the false edge goes straight to the join
            then_label, join, synth = t_label, f_label, "else"
        elif _arm_ok(fn, f_label, cfg, b.label, t_label):
            # inverted if-then: the true edge goes straight to the join
            else_label, join, synth = f_label, t_label, "then"
        else:
            jt = (cfg.succs.get(t_label) or [None])[0]
            if (jt is not None and _arm_ok(fn, t_label, cfg, b.label, jt)
                    and _arm_ok(fn, f_label, cfg, b.label, jt)):
                then_label, else_label, join = t_label, f_label, jt
        if join is None or join == b.label:
            rejections.append((tag, "shape"))
            continue
        arm_blocks = [l for l in (then_label, else_label) if l is not None]
        if any(_has_symbolic_address(fn, fn.block(l), facts, defs, memo)
               for l in arm_blocks):
            rejections.append((tag, "symbolic-address"))
            continue
        candidates.append(DiamondRegion(fn.name, b.label, cond, then_label,
                                        else_label, join, tag, synth))
    return candidates, rejections


def _has_symbolic_address(fn, blk, facts, defs, memo):
    for ins in blk.instructions:
        if ins.opcode == "load":
            addr = ins.operands[0]
        elif ins.opcode == "store":
            addr = ins.operands[1]
        else:
            continue
        if isinstance(addr, Ref) and _value_symbolic(fn.name, addr.name, facts,
                                                     defs, memo):
            return True
    return False


# ---------------------------------------------------------------------------
# Memory criteria and alignment


def _addr_identical(a, b, defs, depth=0):
    """Statically identical addresses: same value, or same-base constant gep."""
    if isinstance(a, Ref) and isinstance(b, Ref):
        if a.name == b.name:
            return True
        if depth > 4:
            return False
        da, db = defs.get(a.name), defs.get(b.name)
        if (da is not None and db is not None
                and da.opcode == "gep" and db.opcode == "gep"):
            ia, ib = da.operands[1], db.operands[1]
            if isinstance(ia, Const) and isinstance(ib, Const) and ia.value == ib.value:
                return _addr_identical(da.operands[0], db.operands[0], defs, depth + 1)
    return False


def check_memory_criteria(pair, facts, fname, defs):
    """Classify an aligned memory pair: merge / split-to-unaligned / reject-diamond."""
    a, b = pair
    addr_a = a.operands[0] if a.opcode == "load" else a.operands[1]
    addr_b = b.operands[0] if b.opcode == "load" else b.operands[1]
    for addr in (addr_a, addr_b):
        if isinstance(addr, Ref) and facts.is_symbolic(fname, addr.name):
            return "reject-diamond"
    if _addr_identical(addr_a, addr_b, defs):
        return "merge"
    return "split-to-unaligned"


def _compatible(a, b, facts, fname, defs):
    if a.opcode != b.opcode or a.opcode not in MERGEABLE:
        return False
    if a.type != b.type or a.src_type != b.src_type or a.pred != b.pred:
        return False
    if a.opcode in ("load", "store"):
        return check_memory_criteria((a, b), facts, fname, defs) == "merge"
    if a.opcode == "gep":
        ia, ib = a.operands[1], b.operands[1]
        idx_same = ia == ib or (isinstance(ia, Const) and isinstance(ib, Const)
                                and ia.value == ib.value)
        return idx_same and _addr_identical(a.operands[0], b.operands[0], defs)
    return True


def align_instructions(seq_t, seq_f, facts, fname, defs):
    """Order-preserving alignment maximizing compatible pairs.

    Dynamic program over suffixes; ties prefer the earliest match, then
    advancing the then-side, which makes the result canonical.
    """
    n, m = len(seq_t), len(seq_f)
    comp = [[_compatible(seq_t[i], seq_f[j], facts, fname, defs)
             for j in range(m)] for i in range(n)]
    score = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        for j in range(m - 1, -1, -1):
            best = max(score[i + 1][j], score[i][j + 1])
            if comp[i][j]:
                best = max(best, 1 + score[i + 1][j + 1])
            score[i][j] = best
    rows, i, j = [], 0, 0
    while i < n or j < m:
        if (i < n and j < m and comp[i][j]
                and score[i][j] == 1 + score[i + 1][j + 1]):
            rows.append((seq_t[i], seq_f[j]))
            i += 1
            j += 1
        elif i < n and score[i][j] == score[i + 1][j]:
            rows.append((seq_t[i], None))
            i += 1
        else:
            rows.append((None, seq_f[j]))
            j += 1
    return Alignment(rows)


# ---------------------------------------------------------------------------
# Dead-code insertion


def _address_feeders(seq):
    """Ids of arm instructions whose value transitively feeds a memory address."""
    ids = {ins.id: ins for ins in seq if ins.id is not None}
    work = []
    for ins in seq:
        if ins.opcode == "load":
            work.append(ins.operands[0])
        elif ins.opcode == "store":
            work.append(ins.operands[1])
        elif ins.opcode == "gep":
            work.extend(ins.operands)
    feeders = set()
    while work:
        o = work.pop()
        if isinstance(o, Ref) and o.name in ids and o.name not in feeders:
            feeders.add(o.name)
            work.extend(ids[o.name].operands)
    return feeders


def _neutral(opcode, pos):
    if opcode in ("udiv", "sdiv") and pos == 1:
        return 1
    return 1 if opcode in _NEUTRAL_ONE else 0


def insert_dead_instructions(diamond, alignment, fn, facts, namer):
    """Complete the alignment by synthesizing dead partners for every gap."""
    t_feed = _address_feeders([a for a, _ in alignment.rows if a is not None])
    f_feed = _address_feeders([b for _, b in alignment.rows if b is not None])
    t2f, f2t = {}, {}
    rows = []
    dead_count = 0

    def mirror(o, cmap):
        if isinstance(o, Ref) and o.name in cmap:
            return Ref(cmap[o.name])
        return o

    def note_pair(a, b):
        if a is not None and b is not None and a.id is not None:
            t2f[a.id] = b.id
            f2t[b.id] = a.id

    def synth(src, cmap, feeders):
        nonlocal dead_count
        op = src.opcode
        if op not in DEAD_INSERTABLE:
            raise _Reject("unsupported-opcode")
        dead_count += 1
        name = namer.fresh("d")
        if op == "load":
            ops = (mirror(src.operands[0], cmap),)
        elif op == "gep" or (src.id in feeders if src.id else False):
            ops = tuple(mirror(o, cmap) for o in src.operands)
        else:
            new = []
            for pos, o in enumerate(src.operands):
                if op in ("udiv", "sdiv") and pos == 1:
                    new.append(Const(1))
                elif isinstance(o, Ref) and o.name in cmap:
                    new.append(Ref(cmap[o.name]))
                else:
                    new.append(Const(_neutral(op, pos)))
            ops = tuple(new)
        return Instruction(op, name, src.type, ops, pred=src.pred,
                           src_type=src.src_type, src_lines=src.src_lines,
                           dead_mark=True)

    def synth_store(src, cmap):
        """Dead store re-stores its own address' current value via fresh loads."""
        nonlocal dead_count
        addr_far = mirror(src.operands[1], cmap)
        fresh_far = Instruction("load", namer.fresh("d"), src.type, (addr_far,),
                                src_lines=src.src_lines, dead_mark=True)
        fresh_near = Instruction("load", namer.fresh("d"), src.type,
                                 (src.operands[1],), src_lines=src.src_lines,
                                 dead_mark=True)
        dead_count += 3
        dead = Instruction("store", None, src.type,
                           (Ref(fresh_far.id), addr_far),
                           src_lines=src.src_lines, dead_mark=True)
        return fresh_near, fresh_far, dead

    for a, b in alignment.rows:
        if a is not None and b is not None:
            note_pair(a, b)
            rows.append((a, b))
            continue
        if a is not None:                     # gap on the else side
            if a.opcode == "store":
                near, far, dead = synth_store(a, t2f)
                note_pair(near, far)
                rows.append((near, far))
                rows.append((a, dead))
            else:
                dead = synth(a, t2f, t_feed)
                note_pair(a, dead)
                rows.append((a, dead))
        else:                                  # gap on the then side
            if b.opcode == "store":
                near, far, dead = synth_store(b, f2t)
                note_pair(far, near)
                rows.append((far, near))
                rows.append((dead, b))
            else:
                dead = synth(b, f2t, f_feed)
                note_pair(dead, b)
                rows.append((dead, b))
    out = Alignment(rows)
    assert out.complete
    return out, dead_count


# ---------------------------------------------------------------------------
# Merging


def _operand_type(ins, pos):
    op = ins.opcode
    if op == "select":
        return I1 if pos == 0 else ins.type
    if op == "icmp" or op in CASTS:
        return ins.src_type
    if op == "store":
        return ins.type if pos == 0 else None    # address: must never select
    if op in ("load", "gep"):
        return None
    return ins.type


def merge_diamond(fn, diamond, alignment, namer):
    """Fold both arms into the branch block; returns the select count."""
    branch_blk = fn.block(diamond.branch_block)
    cond = diamond.cond
    join = fn.block(diamond.join_label)
    loc = diamond.loc_id
    remap = {}
    emitted = []
    selects = 0

    def rm(o):
        if isinstance(o, Ref) and o.name in remap:
            return remap[o.name]
        return o

    def select_of(ty, ot, of, lines):
        nonlocal selects
        selects += 1
        s = Instruction("select", namer.fresh("s"), ty, (cond, ot, of),
                        src_lines=lines, origin=loc)
        emitted.append(s)
        return Ref(s.id)

    for a, b in alignment.rows:
        ops = []
        for pos in range(len(a.operands)):
            oa, ob = rm(a.operands[pos]), rm(b.operands[pos])
            if oa == ob:
                ops.append(oa)
                continue
            ty = _operand_type(a, pos)
            if ty is None:
                raise AssertionError(
                    f"address operand mismatch while merging at {loc}")
            ops.append(select_of(ty, oa, ob, a.src_lines | b.src_lines))
        # keep the innermost merge location on re-emitted instructions so a
        # crash is attributed to the diamond whose merge unconditionalized it
        merged = Instruction(a.opcode, namer.fresh("m") if a.id else None,
                             a.type, tuple(ops), pred=a.pred, src_type=a.src_type,
                             src_lines=a.src_lines | b.src_lines,
                             origin=a.origin or b.origin or loc)
        emitted.append(merged)
        if a.id is not None:
            remap[a.id] = Ref(merged.id)
        if b.id is not None:
            remap[b.id] = Ref(merged.id)

    # join phis: route both arm edges through selects
    phi_repl = {}
    new_join_instructions = []
    arm_labels = {diamond.then_label, diamond.else_label}
    for ins in join.instructions:
        if ins.opcode != "phi":
            new_join_instructions.append(ins)
            continue
        entries = dict(zip(ins.incoming, ins.operands))
        vt = rm(entries.pop(diamond.then_label))
        vf = rm(entries.pop(diamond.else_label))
        value = vt if vt == vf else select_of(ins.type, vt, vf, ins.src_lines)
        if entries:
            labels, operands = zip(*[(l, v) for l, v in entries.items()])
            ins.incoming = labels + (diamond.branch_block,)
            ins.operands = operands + (value,)
            new_join_instructions.append(ins)
        else:
            phi_repl[ins.id] = value
    join.instructions = new_join_instructions

    branch_blk.instructions = branch_blk.instructions[:-1] + emitted + [
        Instruction("br", None, VOID, (Label(diamond.join_label),))]
    fn.blocks = [blk for blk in fn.blocks if blk.label not in arm_labels]
    if phi_repl:
        _rewrite_refs(fn, phi_repl)
    return selects


def _rewrite_refs(fn, repl):
    for blk in fn.blocks:
        for ins in blk.instructions:
            if any(isinstance(o, Ref) and o.name in repl for o in ins.operands):
                ins.operands = tuple(
                    repl[o.name] if isinstance(o, Ref) and o.name in repl else o
                    for o in ins.operands)


def synthesize_empty_arm(fn, diamond, namer):
    """Canonicalize if-then into if-then-else with a fresh empty block."""
    from .ir import BasicBlock
    if diamond.synth_arm is None:
        return
    label = f"{diamond.branch_block}.{diamond.synth_arm}"
    while any(b.label == label for b in fn.blocks):
        label += "_"
    blk = BasicBlock(label, [Instruction("br", None, VOID,
                                         (Label(diamond.join_label),))])
    branch_blk = fn.block(diamond.branch_block)
    term = branch_blk.instructions[-1]
    c, t, f = term.operands
    if diamond.synth_arm == "else":
        term.operands = (c, t, Label(label))
        diamond.else_label = label
    else:
        term.operands = (c, Label(label), f)
        diamond.then_label = label
    join = fn.block(diamond.join_label)
    for phi in join.phis():
        phi.incoming = tuple(label if l == diamond.branch_block else l
                             for l in phi.incoming)
    idx = fn.block_index(diamond.branch_block)
    fn.blocks.insert(idx + 1, blk)


def simplify_chains(fn):
    """Fuse straight-line block chains left behind by merging."""
    changed = True
    while changed:
        changed = False
        cfg = compute_cfg_info(fn)
        for blk in list(fn.blocks):
            term = blk.terminator
            if term is None or term.opcode != "br" or len(term.operands) != 1:
                continue
            succ = term.operands[0].name
            if succ == blk.label or cfg.preds.get(succ) != [blk.label]:
                continue
            target = fn.block(succ)
            repl = {}
            body = []
            for ins in target.instructions:
                if ins.opcode == "phi":
                    repl[ins.id] = ins.operands[0]
                else:
                    body.append(ins)
            blk.instructions = blk.instructions[:-1] + body
            fn.blocks.remove(target)
            for other in fn.blocks:
                for ins in other.instructions:
                    if ins.opcode == "phi":
                        ins.incoming = tuple(blk.label if l == succ else l
                                             for l in ins.incoming)
                    elif ins.opcode == "br":
                        ins.operands = tuple(
                            Label(blk.label) if isinstance(o, Label) and o.name == succ
                            else o for o in ins.operands)
            if repl:
                _rewrite_refs(fn, repl)
            changed = True
            break


# ---------------------------------------------------------------------------
# Driver


def merge_branches(mod, facts, skip=frozenset()):
    """Apply the whole pipeline until no candidate remains.

    Inner diamonds merge first by construction: an outer branch only becomes
    a single-block diamond after its arm's inner diamond has been folded and
    the leftover chain fused.
    """
    out = clone_module(mod)
    tag_branches(out)
    disposition = {}
    selects = {}
    dead = {}
    for fn in out.functions:
        local_skip = set(skip)
        namer = _Namer(fn)
        while True:
            candidates, rejections = find_candidate_diamonds(fn, facts, local_skip)
            for loc, reason in rejections:
                disposition.setdefault(loc, reason)
            if not candidates:
                break
            diamond = candidates[0]
            try:
                synthesize_empty_arm(fn, diamond, namer)
                defs = _defs_map(fn)
                seq_t = fn.block(diamond.then_label).instructions[:-1]
                seq_f = fn.block(diamond.else_label).instructions[:-1]
                alignment = align_instructions(seq_t, seq_f, facts, fn.name, defs)
                alignment, n_dead = insert_dead_instructions(
                    diamond, alignment, fn, facts, namer)
                n_sel = merge_diamond(fn, diamond, alignment, namer)
            except _Reject as rej:
                disposition[diamond.loc_id] = rej.reason
                local_skip.add(diamond.loc_id)
                # undo nothing: rejection happens before any mutation besides
                # the canonical empty arm, which is harmless and re-fusable
                simplify_chains(fn)
                continue
            disposition[diamond.loc_id] = "merged"
            selects[diamond.loc_id] = n_sel
            dead[diamond.loc_id] = n_dead
            simplify_chains(fn)
    report = TransformReport()
    for loc in sorted(disposition):
        report.found += 1
        if disposition[loc] == "merged":
            report.merged += 1
        else:
            report.rejected += 1
            report.rejections.append((loc, disposition[loc]))
    report.selects = selects
    report.dead_inserted = dead
    return out, report
