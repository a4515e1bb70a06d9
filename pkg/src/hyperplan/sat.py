"""Conflict-driven clause learning SAT core.

Complete and deterministic: VSIDS scores break ties on variable index,
decisions default to false (saved phases afterwards), Luby restarts.
Supports solving under assumptions and adding variables/clauses between
calls, which is what the synthesis refinement loop needs.  Resource
limits surface as :class:`SatBudgetExceeded`, never as a wrong answer.
"""
from __future__ import annotations

from heapq import heappop, heappush


class SatBudgetExceeded(RuntimeError):
    pass


def _luby(i: int) -> int:
    # Luby sequence 1,1,2,1,1,2,4,...  (1-indexed)
    while True:
        k = i.bit_length()
        if i == (1 << k) - 1:
            return 1 << (k - 1)
        i = i - (1 << (k - 1)) + 1


def _widx(lit: int) -> int:
    # watch slot inspected when `lit` becomes true
    return 2 * lit - 2 if lit > 0 else -2 * lit - 1


class CdclSolver:
    """Incremental CDCL solver over integer literals (1-indexed vars).

    A model is only valid until the next ``add_clause``/``solve`` call.
    """

    def __init__(self) -> None:
        self.nvars = 0
        self.ok = True
        self.clauses: list[list[int]] = []
        self.learned: list[list[int]] = []
        self.watches: list[list[list[int]]] = []
        self.assigns: list[int] = [0]  # 1 true, -1 false, 0 unassigned
        self.levels: list[int] = [0]
        self.reasons: list[list[int] | None] = [None]
        self.seen: list[bool] = [False]
        self.phase: list[bool] = [False]
        self.activity: list[float] = [0.0]
        self.heap: list[tuple[float, int]] = []
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.qhead = 0
        self.var_inc = 1.0
        self.conflicts = 0

    # -- variables ------------------------------------------------------

    def new_var(self) -> int:
        self.nvars += 1
        self.assigns.append(0)
        self.levels.append(0)
        self.reasons.append(None)
        self.seen.append(False)
        self.phase.append(False)
        self.activity.append(0.0)
        self.watches.append([])
        self.watches.append([])
        heappush(self.heap, (0.0, self.nvars))
        return self.nvars

    def ensure_vars(self, n: int) -> None:
        while self.nvars < n:
            self.new_var()

    def value(self, lit: int) -> int:
        a = self.assigns[lit if lit > 0 else -lit]
        return a if lit > 0 else -a

    # -- clause management ------------------------------------------------

    def add_clause(self, lits: list[int]) -> None:
        if not self.ok:
            return
        self._cancel_until(0)
        out: list[int] = []
        seen: set[int] = set()
        for lit in lits:
            self.ensure_vars(abs(lit))
            if -lit in seen:
                return  # tautology
            if lit in seen:
                continue
            v = self.value(lit)
            if v == 1:
                return  # satisfied at level 0
            if v == -1:
                continue  # false at level 0 forever
            seen.add(lit)
            out.append(lit)
        if not out:
            self.ok = False
            return
        if len(out) == 1:
            if not self._enqueue(out[0], None) or self._propagate() is not None:
                self.ok = False
            return
        self.clauses.append(out)
        self.watches[_widx(-out[0])].append(out)
        self.watches[_widx(-out[1])].append(out)

    # -- trail -------------------------------------------------------------

    def _enqueue(self, lit: int, reason: list[int] | None) -> bool:
        v = self.value(lit)
        if v != 0:
            return v == 1
        var = abs(lit)
        self.assigns[var] = 1 if lit > 0 else -1
        self.levels[var] = len(self.trail_lim)
        self.reasons[var] = reason
        self.trail.append(lit)
        return True

    def _cancel_until(self, level: int) -> None:
        if len(self.trail_lim) <= level:
            return
        bound = self.trail_lim[level]
        assigns = self.assigns
        phase = self.phase
        activity = self.activity
        heap = self.heap
        for i in range(len(self.trail) - 1, bound - 1, -1):
            lit = self.trail[i]
            var = lit if lit > 0 else -lit
            phase[var] = lit > 0
            assigns[var] = 0
            self.reasons[var] = None
            heappush(heap, (-activity[var], var))
        del self.trail[bound:]
        del self.trail_lim[level:]
        self.qhead = len(self.trail)

    # -- propagation ---------------------------------------------------------

    def _propagate(self) -> list[int] | None:
        trail = self.trail
        watches = self.watches
        assigns = self.assigns
        levels = self.levels
        reasons = self.reasons
        while self.qhead < len(trail):
            p = trail[self.qhead]
            self.qhead += 1
            ws = watches[2 * p - 2 if p > 0 else -2 * p - 1]
            i = j = 0
            n = len(ws)
            while i < n:
                c = ws[i]
                i += 1
                if c[0] == -p:
                    c[0] = c[1]
                    c[1] = -p
                first = c[0]
                fv = assigns[first] if first > 0 else -assigns[-first]
                if fv == 1:
                    ws[j] = c
                    j += 1
                    continue
                moved = False
                for k in range(2, len(c)):
                    lk = c[k]
                    if (assigns[lk] if lk > 0 else -assigns[-lk]) != -1:
                        c[1] = lk
                        c[k] = -p
                        # attach to the slot woken when lk becomes false
                        watches[-2 * lk - 2 if lk < 0 else 2 * lk - 1].append(c)
                        moved = True
                        break
                if moved:
                    continue
                ws[j] = c
                j += 1
                if fv == -1:
                    while i < n:
                        ws[j] = ws[i]
                        j += 1
                        i += 1
                    del ws[j:]
                    return c
                var = first if first > 0 else -first
                assigns[var] = 1 if first > 0 else -1
                levels[var] = len(self.trail_lim)
                reasons[var] = c
                trail.append(first)
            del ws[j:]
        return None

    # -- heuristics -------------------------------------------------------------

    def _bump_var(self, var: int) -> None:
        act = self.activity[var] + self.var_inc
        self.activity[var] = act
        if act > 1e100:
            for v in range(1, self.nvars + 1):
                self.activity[v] *= 1e-100
            self.var_inc *= 1e-100
            self.heap = [(-self.activity[v], v) for v in range(1, self.nvars + 1)
                         if self.assigns[v] == 0]
            self.heap.sort()
        elif self.assigns[var] == 0:
            heappush(self.heap, (-act, var))

    def _pick_branch_var(self) -> int:
        heap = self.heap
        assigns = self.assigns
        activity = self.activity
        while heap:
            act, var = heappop(heap)
            if assigns[var] == 0 and -act == activity[var]:
                return var
        for var in range(1, self.nvars + 1):
            if assigns[var] == 0:
                return var
        return 0

    # -- conflict analysis ---------------------------------------------------------

    def _analyze(self, conflict: list[int]) -> tuple[list[int], int]:
        learnt: list[int] = [0]
        seen = self.seen
        levels = self.levels
        trail = self.trail
        cur_level = len(self.trail_lim)
        counter = 0
        p = 0
        index = len(trail) - 1
        cleanup: list[int] = []
        c: list[int] | None = conflict
        while True:
            assert c is not None
            for q in (c[1:] if p else c):
                var = abs(q)
                if not seen[var] and levels[var] > 0:
                    seen[var] = True
                    cleanup.append(var)
                    self._bump_var(var)
                    if levels[var] >= cur_level:
                        counter += 1
                    else:
                        learnt.append(q)
            while True:
                p = trail[index]
                index -= 1
                if seen[abs(p)]:
                    break
            counter -= 1
            if counter == 0:
                break
            c = self.reasons[abs(p)]
            seen[abs(p)] = False
        learnt[0] = -p
        for var in cleanup:
            seen[var] = False

        if len(learnt) == 1:
            return learnt, 0
        max_i = 1
        for i in range(2, len(learnt)):
            if levels[abs(learnt[i])] > levels[abs(learnt[max_i])]:
                max_i = i
        learnt[1], learnt[max_i] = learnt[max_i], learnt[1]
        return learnt, levels[abs(learnt[1])]

    # -- learned clause reduction ------------------------------------------------

    def _reduce_learned(self) -> None:
        locked = {id(r) for r in self.reasons if r is not None}
        keep: list[list[int]] = []
        drop: list[list[int]] = []
        for c in self.learned:
            if len(c) <= 2 or id(c) in locked:
                keep.append(c)
            else:
                drop.append(c)
        drop.sort(key=len)
        cut = len(drop) // 2
        keep.extend(drop[:cut])
        dead = {id(c) for c in drop[cut:]}
        if dead:
            for ws in self.watches:
                ws[:] = [c for c in ws if id(c) not in dead]
        self.learned = keep

    # -- main search ----------------------------------------------------------------

    def solve(self, assumptions: tuple[int, ...] = (), *,
              conflict_budget: int | None = None) -> bool:
        if not self.ok:
            return False
        self._cancel_until(0)
        for lit in assumptions:
            self.ensure_vars(abs(lit))
        if self._propagate() is not None:
            self.ok = False
            return False

        restart_round = 1
        conflicts_here = 0
        limit = 100 * _luby(restart_round)
        max_learned = max(4000, len(self.clauses) // 3)

        while True:
            conflict = self._propagate()
            if conflict is not None:
                self.conflicts += 1
                conflicts_here += 1
                if conflict_budget is not None and conflicts_here > conflict_budget:
                    self._cancel_until(0)
                    raise SatBudgetExceeded(f"exceeded {conflict_budget} conflicts")
                if not self.trail_lim:
                    self.ok = False
                    return False
                learnt, back_level = self._analyze(conflict)
                self._cancel_until(back_level)
                if len(learnt) == 1:
                    if not self._enqueue(learnt[0], None):
                        self.ok = False
                        return False
                else:
                    self.learned.append(learnt)
                    self.watches[_widx(-learnt[0])].append(learnt)
                    self.watches[_widx(-learnt[1])].append(learnt)
                    self._enqueue(learnt[0], learnt)
                self.var_inc /= 0.95
                if len(self.learned) > max_learned + len(self.trail):
                    self._reduce_learned()
                if conflicts_here >= limit:
                    restart_round += 1
                    limit = conflicts_here + 100 * _luby(restart_round)
                    self._cancel_until(0)
                continue

            level = len(self.trail_lim)
            if level < len(assumptions):
                p = assumptions[level]
                v = self.value(p)
                if v == -1:
                    self._cancel_until(0)
                    return False
                self.trail_lim.append(len(self.trail))
                if v == 0:
                    self._enqueue(p, None)
                continue

            var = self._pick_branch_var()
            if var == 0:
                return True
            self.trail_lim.append(len(self.trail))
            self._enqueue(var if self.phase[var] else -var, None)

    def model(self) -> list[int]:
        """Assignment array after a successful solve; index 0 unused."""
        return list(self.assigns)
