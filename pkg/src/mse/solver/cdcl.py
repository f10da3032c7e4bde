"""Conflict-driven clause learning SAT solver.

Classic recipe: two-watched-literal propagation, 1UIP conflict analysis with
clause learning, VSIDS-style decaying activities with a lazy heap, phase
saving and Luby restarts.  Fully deterministic: ties fall back to the lowest
variable index.  A conflict budget turns the answer into None ("unknown").
"""

from __future__ import annotations

import heapq


def _luby(i):
    size, seq = 1, 0
    while size < i + 1:
        seq += 1
        size = 2 * size + 1
    while size - 1 != i:
        size = (size - 1) // 2
        seq -= 1
        i %= size
    return 1 << seq


class CdclSolver:
    def __init__(self, n_vars):
        self.n_vars = n_vars
        self.clauses = []
        self.watches = [[] for _ in range(2 * n_vars + 2)]
        self.assign = [0] * (n_vars + 1)       # 0 unset, 1 true, -1 false
        self.level = [0] * (n_vars + 1)
        self.reason = [-1] * (n_vars + 1)
        self.trail = []
        self.trail_lim = []
        self.qhead = 0
        self.activity = [0.0] * (n_vars + 1)
        self.saved_phase = [False] * (n_vars + 1)
        self.var_inc = 1.0
        self.heap = []
        for v in range(1, n_vars + 1):
            heapq.heappush(self.heap, (0.0, v))
        self.conflicts = 0
        self.ok = True

    @staticmethod
    def _widx(lit):
        return 2 * abs(lit) + (lit < 0)

    def value(self, lit):
        v = self.assign[abs(lit)]
        return v if lit > 0 else -v

    def add_clause(self, lits):
        lits = sorted(set(lits), key=abs)
        if any(-l in lits for l in lits):
            return
        if len(lits) == 0:
            self.ok = False
            return
        if len(lits) == 1:
            if self.value(lits[0]) == -1:
                self.ok = False
            elif self.value(lits[0]) == 0:
                self._enqueue(lits[0], -1)
            return
        self._attach(list(lits))

    def _attach(self, lits):
        ci = len(self.clauses)
        self.clauses.append(lits)
        self.watches[self._widx(lits[0])].append(ci)
        self.watches[self._widx(lits[1])].append(ci)
        return ci

    def _enqueue(self, lit, reason):
        v = abs(lit)
        self.assign[v] = 1 if lit > 0 else -1
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason
        self.trail.append(lit)

    def _propagate(self):
        """Returns a conflicting clause index or -1."""
        while self.qhead < len(self.trail):
            lit = self.trail[self.qhead]
            self.qhead += 1
            falsified = -lit
            wl = self.watches[self._widx(falsified)]
            new_wl = []
            conflict = -1
            for pos, ci in enumerate(wl):
                cl = self.clauses[ci]
                if cl[0] == falsified:
                    cl[0], cl[1] = cl[1], cl[0]
                if self.value(cl[0]) == 1:
                    new_wl.append(ci)
                    continue
                moved = False
                for k in range(2, len(cl)):
                    if self.value(cl[k]) != -1:
                        cl[1], cl[k] = cl[k], cl[1]
                        self.watches[self._widx(cl[1])].append(ci)
                        moved = True
                        break
                if moved:
                    continue
                new_wl.append(ci)
                if self.value(cl[0]) == -1:
                    conflict = pos
                    break
                self._enqueue(cl[0], ci)
            if conflict >= 0:
                self.watches[self._widx(falsified)] = new_wl + wl[conflict + 1:]
                self.qhead = len(self.trail)
                return wl[conflict]
            self.watches[self._widx(falsified)] = new_wl
        return -1

    def _bump(self, v):
        self.activity[v] += self.var_inc
        if self.activity[v] > 1e100:
            for u in range(1, self.n_vars + 1):
                self.activity[u] *= 1e-100
            self.var_inc *= 1e-100
        heapq.heappush(self.heap, (-self.activity[v], v))

    def _analyze(self, conflict_ci):
        """1UIP learning scheme; returns (learnt clause, backjump level)."""
        seen = [False] * (self.n_vars + 1)
        learnt = [0]                      # slot 0 for the asserting literal
        counter = 0
        idx = len(self.trail) - 1
        cur_level = len(self.trail_lim)
        ci = conflict_ci
        first = True
        while True:
            cl = self.clauses[ci]
            for q in (cl if first else cl[1:]):
                v = abs(q)
                if not seen[v] and self.level[v] > 0:
                    seen[v] = True
                    self._bump(v)
                    if self.level[v] >= cur_level:
                        counter += 1
                    else:
                        learnt.append(q)
            first = False
            while not seen[abs(self.trail[idx])]:
                idx -= 1
            p = self.trail[idx]
            v = abs(p)
            seen[v] = False
            counter -= 1
            idx -= 1
            if counter == 0:
                break
            ci = self.reason[v]
        learnt[0] = -p
        if len(learnt) == 1:
            back = 0
        else:
            back = max(self.level[abs(q)] for q in learnt[1:])
            k = max(range(1, len(learnt)), key=lambda j: self.level[abs(learnt[j])])
            learnt[1], learnt[k] = learnt[k], learnt[1]
        return learnt, back

    def _backtrack(self, to_level):
        while len(self.trail_lim) > to_level:
            limit = self.trail_lim.pop()
            while len(self.trail) > limit:
                lit = self.trail.pop()
                v = abs(lit)
                self.saved_phase[v] = lit > 0
                self.assign[v] = 0
                self.reason[v] = -1
                heapq.heappush(self.heap, (-self.activity[v], v))
        self.qhead = len(self.trail)

    def _decide(self):
        while self.heap:
            act, v = heapq.heappop(self.heap)
            if self.assign[v] == 0 and -act == self.activity[v]:
                return v
        for v in range(1, self.n_vars + 1):
            if self.assign[v] == 0:
                return v
        return 0

    def solve(self, max_conflicts=None):
        """True / False, or None when the conflict budget runs out."""
        if not self.ok:
            return False
        restart_round = 0
        budget = 100 * _luby(restart_round)
        base_conflicts = self.conflicts
        while True:
            conflict = self._propagate()
            if conflict >= 0:
                self.conflicts += 1
                if max_conflicts is not None and self.conflicts > max_conflicts:
                    return None
                if len(self.trail_lim) == 0:
                    return False
                learnt, back = self._analyze(conflict)
                self._backtrack(back)
                if len(learnt) == 1:
                    self._enqueue(learnt[0], -1)
                else:
                    ci = self._attach(learnt)
                    self._enqueue(learnt[0], ci)
                self.var_inc /= 0.95
                if self.conflicts - base_conflicts >= budget:
                    base_conflicts = self.conflicts
                    restart_round += 1
                    budget = 100 * _luby(restart_round)
                    self._backtrack(0)
            else:
                v = self._decide()
                if v == 0:
                    return True
                self.trail_lim.append(len(self.trail))
                self._enqueue(v if self.saved_phase[v] else -v, -1)

    def model(self):
        return {v: self.assign[v] == 1 for v in range(1, self.n_vars + 1)}
