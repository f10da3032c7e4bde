"""Enumeration kernels: evaluate an expression DAG over a whole input space.

The DAG is linearized into an int64 opcode table and evaluated either by a
numba-jitted scalar loop with early exit (default) or by a chunked
vectorized numpy sweep.  `MSE_NO_NUMBA=1` selects the numpy path; it is also
used automatically when numba is unavailable.  Both paths return the
smallest satisfying assignment index, so results are bit-identical.

Values are kept in int64; widths never exceed 32 bits so intermediate
products wrap harmlessly and masking recovers the low bits.

benchmarks/bench_kernels.py compares the two paths on synthetic DAGs.
"""

from __future__ import annotations

import os

import numpy as np

from .expr import BINOP_NAMES, CMP_NAMES

OP_CONST, OP_READ = 0, 1
_BIN_BASE = 2
_CMP_BASE = _BIN_BASE + len(BINOP_NAMES)
OP_ITE = _CMP_BASE + len(CMP_NAMES)
OP_ZEXT, OP_SEXT, OP_TRUNC, OP_CONCAT, OP_EXTRACT = (OP_ITE + 1, OP_ITE + 2,
                                                     OP_ITE + 3, OP_ITE + 4,
                                                     OP_ITE + 5)
_OPNUM = {name: _BIN_BASE + i for i, name in enumerate(BINOP_NAMES)}
_OPNUM.update({name: _CMP_BASE + i for i, name in enumerate(CMP_NAMES)})

CHUNK = 1 << 16


class Program:
    """Linearized DAG: code rows are (op, a, b, c, width)."""

    def __init__(self, code, conj_slots, reads, total_bits):
        self.code = code
        self.conj_slots = conj_slots
        self.reads = reads          # [(name, index, width, bit_offset)]
        self.total_bits = total_bits
        self.n_assign = 1 << total_bits


def compile_program(conjuncts):
    from .expr import walk, reads_of

    atoms = reads_of(conjuncts)
    offsets, off = {}, 0
    reads = []
    for a in atoms:
        offsets[id(a)] = off
        reads.append((a.args[0], a.args[1], a.width, off))
        off += a.width

    order = walk(conjuncts)
    slot = {}
    rows = []
    for node in order:
        op = node.op
        if op == "const":
            rows.append((OP_CONST, node.value, 0, 0, node.width))
        elif op == "read":
            rows.append((OP_READ, offsets[id(node)], 0, 0, node.width))
        elif op in _OPNUM:
            a, b = node.args
            rows.append((_OPNUM[op], slot[id(a)], slot[id(b)], 0,
                         node.width if op in BINOP_NAMES else a.width))
        elif op == "ite":
            c, t, f = node.args
            rows.append((OP_ITE, slot[id(c)], slot[id(t)], slot[id(f)], node.width))
        elif op == "zext":
            rows.append((OP_ZEXT, slot[id(node.args[0])], 0, 0, node.width))
        elif op == "sext":
            a = node.args[0]
            rows.append((OP_SEXT, slot[id(a)], a.width, 0, node.width))
        elif op == "trunc":
            rows.append((OP_TRUNC, slot[id(node.args[0])], 0, 0, node.width))
        elif op == "concat":
            hi, lo = node.args
            rows.append((OP_CONCAT, slot[id(hi)], slot[id(lo)], lo.width, node.width))
        elif op == "extract":
            a, hi, lo = node.args
            rows.append((OP_EXTRACT, slot[id(a)], lo, 0, node.width))
        else:
            raise ValueError(op)
        slot[id(node)] = len(rows) - 1
    code = np.asarray(rows, dtype=np.int64).reshape(len(rows), 5)
    conj = np.asarray([slot[id(c)] for c in conjuncts], dtype=np.int64)
    return Program(code, conj, reads, off)


# ---------------------------------------------------------------------------
# numpy path


def _np_signed(v, width):
    return v - ((v >> (width - 1)) << width)


def _np_eval_chunk(code, conj, base, count):
    a_idx = np.arange(base, base + count, dtype=np.int64)
    regs = [None] * code.shape[0]
    for i in range(code.shape[0]):
        op, x, y, z, w = code[i]
        m = (1 << w) - 1
        if op == OP_CONST:
            v = np.full(count, x, dtype=np.int64)
        elif op == OP_READ:
            v = (a_idx >> x) & m
        elif op == OP_ITE:
            v = np.where(regs[x] != 0, regs[y], regs[z])
        elif op == OP_ZEXT:
            v = regs[x]
        elif op == OP_SEXT:
            v = _np_signed(regs[x], y) & m
        elif op == OP_TRUNC:
            v = regs[x] & m
        elif op == OP_CONCAT:
            v = ((regs[x] << z) | regs[y]) & m
        elif op == OP_EXTRACT:
            v = (regs[x] >> y) & m
        else:
            va, vb = regs[x], regs[y]
            name = _OPNAME[op]
            if name == "add":
                v = (va + vb) & m
            elif name == "sub":
                v = (va - vb) & m
            elif name == "mul":
                v = (va * vb) & m
            elif name == "udiv":
                safe = np.where(vb == 0, 1, vb)
                v = np.where(vb == 0, m, va // safe)
            elif name == "sdiv":
                sa, sb = _np_signed(va, w), _np_signed(vb, w)
                q = np.abs(sa) // np.where(sb == 0, 1, np.abs(sb))
                q = np.where((sa < 0) != (sb < 0), -q, q)
                zero = np.where(sa < 0, 1, m)
                v = np.where(vb == 0, zero, q & m)
            elif name == "and":
                v = va & vb
            elif name == "or":
                v = va | vb
            elif name == "xor":
                v = va ^ vb
            elif name == "shl":
                amt = np.minimum(vb, w)
                v = np.where(vb < w, (va << amt) & m, 0)
            elif name == "lshr":
                amt = np.minimum(vb, w)
                v = np.where(vb < w, va >> amt, 0)
            elif name == "ashr":
                amt = np.minimum(vb, w)
                sa = _np_signed(va, w)
                fill = np.where(sa < 0, m, 0)
                v = np.where(vb < w, (sa >> amt) & m, fill)
            else:  # comparison
                sa, sb = _np_signed(va, w), _np_signed(vb, w)
                v = {
                    "eq": va == vb, "ne": va != vb,
                    "ult": va < vb, "ule": va <= vb,
                    "ugt": va > vb, "uge": va >= vb,
                    "slt": sa < sb, "sle": sa <= sb,
                    "sgt": sa > sb, "sge": sa >= sb,
                }[name].astype(np.int64)
        regs[i] = v
    sat = np.ones(count, dtype=bool)
    for j in conj:
        sat &= regs[j] != 0
    return sat


_OPNAME = {v: k for k, v in _OPNUM.items()}


def _numpy_first_sat(prog):
    for base in range(0, prog.n_assign, CHUNK):
        count = min(CHUNK, prog.n_assign - base)
        sat = _np_eval_chunk(prog.code, prog.conj_slots, base, count)
        hits = np.flatnonzero(sat)
        if hits.size:
            return base + int(hits[0])
    return -1


def _numpy_sat_mask(prog):
    parts = []
    for base in range(0, prog.n_assign, CHUNK):
        count = min(CHUNK, prog.n_assign - base)
        parts.append(_np_eval_chunk(prog.code, prog.conj_slots, base, count))
    return np.concatenate(parts) if parts else np.zeros(0, dtype=bool)


# ---------------------------------------------------------------------------
# numba path


def _kernel_source():
    # shared body for the scalar kernels; numba compiles it once per process
    import numba

    @numba.njit(cache=False)
    def eval_one(code, regs, a_idx):
        for i in range(code.shape[0]):
            op = code[i, 0]
            x = code[i, 1]
            y = code[i, 2]
            z = code[i, 3]
            w = code[i, 4]
            m = (np.int64(1) << w) - 1
            if op == 0:      # const
                regs[i] = x
            elif op == 1:    # read
                regs[i] = (a_idx >> x) & m
            elif op == 23:   # ite
                regs[i] = regs[y] if regs[x] != 0 else regs[z]
            elif op == 24:   # zext
                regs[i] = regs[x]
            elif op == 25:   # sext
                v = regs[x]
                regs[i] = (v - ((v >> (y - 1)) << y)) & m
            elif op == 26:   # trunc
                regs[i] = regs[x] & m
            elif op == 27:   # concat
                regs[i] = ((regs[x] << z) | regs[y]) & m
            elif op == 28:   # extract
                regs[i] = (regs[x] >> y) & m
            elif op < 13:    # binops, order matches BINOP_NAMES
                va = regs[x]
                vb = regs[y]
                if op == 2:
                    regs[i] = (va + vb) & m
                elif op == 3:
                    regs[i] = (va - vb) & m
                elif op == 4:
                    regs[i] = (va * vb) & m
                elif op == 5:
                    regs[i] = m if vb == 0 else (va // vb) & m
                elif op == 6:
                    sa = va - ((va >> (w - 1)) << w)
                    sb = vb - ((vb >> (w - 1)) << w)
                    if vb == 0:
                        regs[i] = 1 if sa < 0 else m
                    else:
                        q = abs(sa) // abs(sb)
                        if (sa < 0) != (sb < 0):
                            q = -q
                        regs[i] = q & m
                elif op == 7:
                    regs[i] = va & vb
                elif op == 8:
                    regs[i] = va | vb
                elif op == 9:
                    regs[i] = va ^ vb
                elif op == 10:
                    regs[i] = (va << min(vb, 63)) & m if vb < w else 0
                elif op == 11:
                    regs[i] = va >> min(vb, 63) if vb < w else 0
                else:
                    sa = va - ((va >> (w - 1)) << w)
                    if vb < w:
                        regs[i] = (sa >> vb) & m
                    else:
                        regs[i] = m if sa < 0 else 0
            else:            # comparisons, order matches CMP_NAMES
                va = regs[x]
                vb = regs[y]
                sa = va - ((va >> (w - 1)) << w)
                sb = vb - ((vb >> (w - 1)) << w)
                if op == 13:
                    regs[i] = 1 if va == vb else 0
                elif op == 14:
                    regs[i] = 1 if va != vb else 0
                elif op == 15:
                    regs[i] = 1 if va < vb else 0
                elif op == 16:
                    regs[i] = 1 if va <= vb else 0
                elif op == 17:
                    regs[i] = 1 if va > vb else 0
                elif op == 18:
                    regs[i] = 1 if va >= vb else 0
                elif op == 19:
                    regs[i] = 1 if sa < sb else 0
                elif op == 20:
                    regs[i] = 1 if sa <= sb else 0
                elif op == 21:
                    regs[i] = 1 if sa > sb else 0
                else:
                    regs[i] = 1 if sa >= sb else 0

    @numba.njit(cache=False)
    def first_sat(code, conj, n_assign):
        regs = np.zeros(code.shape[0], dtype=np.int64)
        for a_idx in range(n_assign):
            eval_one(code, regs, a_idx)
            ok = True
            for j in conj:
                if regs[j] == 0:
                    ok = False
                    break
            if ok:
                return a_idx
        return -1

    @numba.njit(cache=False)
    def sat_mask(code, conj, n_assign):
        out = np.zeros(n_assign, dtype=np.bool_)
        regs = np.zeros(code.shape[0], dtype=np.int64)
        for a_idx in range(n_assign):
            eval_one(code, regs, a_idx)
            ok = True
            for j in conj:
                if regs[j] == 0:
                    ok = False
                    break
            out[a_idx] = ok
        return out

    return first_sat, sat_mask


_jit_fns = None


def _get_jit():
    global _jit_fns
    if _jit_fns is None:
        _jit_fns = _kernel_source()
    return _jit_fns


def use_numba():
    if os.environ.get("MSE_NO_NUMBA"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def backend_name():
    return "numba" if use_numba() else "numpy"


def first_sat(prog):
    """Smallest satisfying assignment index, or -1."""
    if prog.code.shape[0] == 0:
        return 0 if prog.conj_slots.size == 0 else -1
    if use_numba():
        fs, _ = _get_jit()
        return int(fs(prog.code, prog.conj_slots, prog.n_assign))
    return _numpy_first_sat(prog)


def sat_mask(prog):
    """Boolean mask over the full assignment space."""
    if prog.code.shape[0] == 0:
        fill = prog.conj_slots.size == 0
        return np.full(prog.n_assign, fill, dtype=bool)
    if use_numba():
        _, sm = _get_jit()
        return sm(prog.code, prog.conj_slots, prog.n_assign)
    return _numpy_sat_mask(prog)
