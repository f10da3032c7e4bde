"""Satisfiability facade used by the executor.

A query is a path condition (width-1 conjuncts) plus an optional goal
expression.  Queries are canonicalized by hash-consing and conjunct sorting,
so an exact-match cache hits regardless of conjunct order.  "Queries issued"
and "average query size" in reports count cache misses only; query size is
the node count of the deduplicated expression DAG.

Backends: "sat" (Tseitin bit-blasting + CDCL, no width cap) and "enum"
(exhaustive sweep up to a bit cap).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from . import smt2
from .bitblast import blast_query, extract_model
from .cdcl import CdclSolver
from .enum_backend import DEFAULT_CAP_BITS, EnumerationBackend, EnumerationCapError
from .expr import dag_size

__all__ = ["Solver", "SolverResult", "Query", "SolverUnknown",
           "EnumerationCapError", "DEFAULT_CAP_BITS"]


class SolverUnknown(Exception):
    """Resource budget exceeded before a verdict was reached."""


@dataclass(frozen=True)
class Query:
    conjuncts: tuple          # deduplicated, serial-sorted width-1 exprs

    @property
    def size(self):
        return dag_size(self.conjuncts)

    @property
    def key(self):
        return tuple(c.serial for c in self.conjuncts)


def make_query(pc, goal=None):
    seen = {}
    for c in list(pc) + ([goal] if goal is not None else []):
        seen[c.serial] = c
    return Query(tuple(seen[s] for s in sorted(seen)))


@dataclass
class SolverResult:
    status: str                         # "sat" | "unsat"
    model: dict | None = None           # name -> {cell index -> value}

    @property
    def is_sat(self):
        return self.status == "sat"


@dataclass
class SolverStats:
    queries: int = 0
    cache_hits: int = 0
    size_total: int = 0
    sizes: list = field(default_factory=list)

    @property
    def avg_query_size(self):
        return self.size_total / self.queries if self.queries else 0.0


class Solver:
    def __init__(self, backend="sat", caching=True, cap_bits=DEFAULT_CAP_BITS,
                 max_conflicts=None, dump_dir=None):
        if backend not in ("sat", "enum"):
            raise ValueError(f"unknown backend {backend!r}")
        self.backend = backend
        self.caching = caching
        self.max_conflicts = max_conflicts
        self.dump_dir = dump_dir
        self._enum = EnumerationBackend(cap_bits)
        self._cache = {}
        self.stats = SolverStats()
        self._dump_count = 0

    def reset_cache(self):
        self._cache.clear()

    def check(self, pc, goal=None):
        """Satisfiability of conjunction(pc) ∧ goal."""
        q = make_query(pc, goal)
        if self.caching:
            hit = self._cache.get(q.key)
            if hit is not None:
                self.stats.cache_hits += 1
                return hit
        result = self._solve(q)
        self.stats.queries += 1
        size = q.size
        self.stats.size_total += size
        self.stats.sizes.append(size)
        if self.dump_dir:
            self._dump(q)
        if self.caching:
            self._cache[q.key] = result
        return result

    def _solve(self, q):
        consts = [c for c in q.conjuncts if c.is_const]
        if any(c.value == 0 for c in consts):
            return SolverResult("unsat")
        live = [c for c in q.conjuncts if not c.is_const]
        if not live:
            return SolverResult("sat", {})
        if self.backend == "enum":
            status, model = self._enum.solve(live)
            return SolverResult(status, model)
        bl = blast_query(live)
        solver = CdclSolver(bl.n_vars)
        for cl in bl.clauses:
            solver.add_clause(cl)
        verdict = solver.solve(max_conflicts=self.max_conflicts)
        if verdict is None:
            raise SolverUnknown(f"conflict budget {self.max_conflicts} exceeded")
        if not verdict:
            return SolverResult("unsat")
        return SolverResult("sat", extract_model(bl, solver.model()))

    def _dump(self, q):
        os.makedirs(self.dump_dir, exist_ok=True)
        path = os.path.join(self.dump_dir, f"query{self._dump_count:05d}.smt2")
        self._dump_count += 1
        with open(path, "w") as fh:
            fh.write(smt2.to_smt2(q.conjuncts))
