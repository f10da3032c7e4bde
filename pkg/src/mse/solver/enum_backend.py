"""Exhaustive enumeration backend.

Sound and complete for queries whose total symbolic bit-width stays under a
configurable cap (default 20 bits).  Used both as a solving backend and as
the oracle for cross-checking the SAT backend; `sat_mask` exposes the full
satisfying set for partition-style tests.
"""

from __future__ import annotations

from . import kernels
from .expr import reads_of

DEFAULT_CAP_BITS = 20


class EnumerationCapError(Exception):
    def __init__(self, bits, cap):
        super().__init__(f"query has {bits} symbolic bits, enumeration cap is {cap}")
        self.bits = bits
        self.cap = cap


class EnumerationBackend:
    def __init__(self, cap_bits=DEFAULT_CAP_BITS):
        self.cap_bits = cap_bits

    def _compile(self, conjuncts):
        atoms = reads_of(conjuncts)
        bits = sum(a.width for a in atoms)
        if bits > self.cap_bits:
            raise EnumerationCapError(bits, self.cap_bits)
        return kernels.compile_program(conjuncts)

    def solve(self, conjuncts):
        """Return ("sat", model) with the smallest assignment, or ("unsat", None)."""
        prog = self._compile(conjuncts)
        idx = kernels.first_sat(prog)
        if idx < 0:
            return "unsat", None
        return "sat", self.model_at(prog, idx)

    @staticmethod
    def model_at(prog, idx):
        model = {}
        for name, cell, width, off in prog.reads:
            model.setdefault(name, {})[cell] = (idx >> off) & ((1 << width) - 1)
        return model

    def sat_mask(self, conjuncts):
        """(program, bool mask over the full assignment space)."""
        prog = self._compile(conjuncts)
        return prog, kernels.sat_mask(prog)
