"""Shared oracle machinery for exhaustive, mask-based checks.

A module's whole symbolic input space is enumerated as assignment indices;
every completed DSE path contributes a boolean mask (the assignments that
satisfy its path condition).  Crash-set containment, input-space partition
and P-vs-P' memory equality all become cheap mask algebra plus vectorized
expression evaluation.
"""

from __future__ import annotations

import numpy as np

from mse import corpus
from mse.solver import kernels
from mse.solver.expr import SymExpr, bv_const, cmp, sym_read
from mse.symexec import DseConfig, DseEngine


def input_atoms(module):
    atoms = []
    for name, width, length in corpus.symbolic_objects(module):
        for i in range(length):
            atoms.append(sym_read(name, i, width))
    return atoms


def anchors(atoms):
    """Always-true conjuncts mentioning every atom, pinning the bit layout."""
    return [cmp("uge", a, bv_const(a.width, 0)) for a in atoms]


def full_mask(exprs, atoms):
    """Mask over the full input space where all width-1 exprs hold."""
    prog = kernels.compile_program(list(exprs) + anchors(atoms))
    return kernels.sat_mask(prog)


def explore(module, backend="enum", **kw):
    """Exhaustive DSE with per-path records."""
    cfg = DseConfig(backend=backend, collect_paths=True, **kw)
    engine = DseEngine(module, cfg)
    report = engine.run()
    assert report.termination == "exhausted", report.termination
    return engine, report


def path_masks(module, **kw):
    """[(PathRecord, mask)] plus the atom list, over exhaustive exploration."""
    atoms = input_atoms(module)
    engine, report = explore(module, **kw)
    out = []
    for rec in engine.paths:
        out.append((rec, full_mask(rec.pc, atoms)))
    return atoms, out, report


def crash_mask(records_masks):
    masks = [m for rec, m in records_masks if rec.outcome != "ret"]
    if not masks:
        size = len(records_masks[0][1]) if records_masks else 0
        return np.zeros(size, dtype=bool)
    out = masks[0].copy()
    for m in masks[1:]:
        out |= m
    return out


def assignment_inputs(module, idx):
    """Concrete input cells for one assignment index."""
    out = {}
    off = 0
    for name, width, length in corpus.symbolic_objects(module):
        out[name] = [(idx >> (off + i * width)) & ((1 << width) - 1)
                     for i in range(length)]
        off += width * length
    return out


def memory_equal_mask(rec_a, rec_b, atoms):
    """Mask of assignments on which two ret paths leave identical state."""
    eqs = []
    keys = set(rec_a.memory) | set(rec_b.memory)
    for key in keys:
        ca, cb = rec_a.memory.get(key), rec_b.memory.get(key)
        assert ca is not None and cb is not None, f"object sets differ at {key}"
        for va, vb in zip(ca, cb):
            if va is not vb:
                eqs.append(cmp("eq", va, vb))
    ra, rb = rec_a.ret, rec_b.ret
    if isinstance(ra, SymExpr) or isinstance(rb, SymExpr):
        if ra is not rb:
            eqs.append(cmp("eq", ra, rb))
    return full_mask(eqs, atoms)


def check_failure_preservation(original, transformed):
    """crash-set(P) within crash-set(P'); equal state on mutually safe inputs.

    Returns (#inputs crashing P, #inputs crashing P', #inputs compared).
    """
    atoms, paths_p, _ = path_masks(original)
    atoms2, paths_t, _ = path_masks(transformed)
    assert [(a.args, a.width) for a in atoms] == [(a.args, a.width) for a in atoms2]
    crash_p = crash_mask(paths_p)
    crash_t = crash_mask(paths_t)
    escaped = crash_p & ~crash_t
    assert not escaped.any(), \
        f"{int(escaped.sum())} crashing inputs of P do not crash P'"
    safe = ~crash_p & ~crash_t
    compared = 0
    for rec_p, mask_p in paths_p:
        if rec_p.outcome != "ret":
            continue
        for rec_t, mask_t in paths_t:
            if rec_t.outcome != "ret":
                continue
            overlap = mask_p & mask_t & safe
            if not overlap.any():
                continue
            eq = memory_equal_mask(rec_p, rec_t, atoms)
            bad = overlap & ~eq
            assert not bad.any(), \
                f"{int(bad.sum())} safe inputs diverge in final state"
            compared += int(overlap.sum())
    return int(crash_p.sum()), int(crash_t.sum()), compared


def check_partition(module):
    """Per-path input sets partition the whole space; returns path count."""
    atoms, paths, _ = path_masks(module)
    if not atoms:
        return len(paths)
    size = 1 << sum(a.width for a in atoms)
    total = np.zeros(size, dtype=np.int64)
    for rec, mask in paths:
        assert mask.any(), "completed path with unsatisfiable condition"
        total += mask
    assert (total == 1).all(), \
        f"path masks do not partition the space: min={total.min()} max={total.max()}"
    return len(paths)
