"""Finite-trace evaluation of core formulas, and witness checking.

Traces are finite label-set sequences; reads past the end repeat the
last entry (index clamping), which makes evaluation total on ragged
multi-path assignments and agrees with the infinite extension obtained
by repeating the last entry.  This evaluator is the oracle every solver
backend is checked against.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import TYPE_CHECKING, Mapping

from .dts import Dts, Strategy, UndefinedTransition, correspond, count_strategies, iter_strategies
from .formula import EXISTS, FORALL, And, Atom, Next, Node, Not, Until
from .horizon import NEG_INF, action_count

if TYPE_CHECKING:  # pragma: no cover
    from .solver import Problem

Trace = list  # list[frozenset[str]]
Assignment = Mapping[str, Trace]


class MissingPathVar(KeyError):
    def __init__(self, var: str):
        super().__init__(f"assignment has no trace for path variable {var!r}")
        self.var = var


class WitnessPathUndefined(ValueError):
    def __init__(self, var: str, cause: UndefinedTransition):
        super().__init__(f"witness strategy for {var!r} leaves the transition function: {cause}")
        self.var = var
        self.cause = cause


class PrefixUnsupported(ValueError):
    pass


class BudgetExhausted(RuntimeError):
    pass


def evaluate(body: Node, assignment: Assignment, t: int = 0) -> bool:
    """Recursive satisfaction check of a core body at time ``t``.

    Every trace value is constant from index ``max_len - 1`` on, so
    until-scans stop once they reach that region (also the bound used
    for untils without a finite bound).
    """
    if not assignment:
        raise MissingPathVar("<any>")
    const_from = max(len(tr) for tr in assignment.values()) - 1
    memo: dict[tuple[int, int], bool] = {}

    def rec(n: Node, t: int) -> bool:
        key = (id(n), min(t, const_from))
        cached = memo.get(key)
        if cached is not None:
            return cached
        if isinstance(n, Atom):
            trace = assignment.get(n.path)
            if trace is None:
                raise MissingPathVar(n.path)
            value = n.prop in trace[min(t, len(trace) - 1)]
        elif isinstance(n, Not):
            value = not rec(n.operand, t)
        elif isinstance(n, And):
            value = rec(n.left, t) and rec(n.right, t)
        elif isinstance(n, Next):
            value = rec(n.operand, t + 1)
        elif isinstance(n, Until):
            d_hi = max(const_from - t, 0)
            if n.bound is not None:
                d_hi = min(n.bound, d_hi)
            value = False
            for d in range(d_hi + 1):
                if rec(n.right, t + d):
                    value = True
                    break
                if not rec(n.left, t + d):
                    break
        else:
            raise TypeError(f"evaluate expects a desugared core body, got {type(n).__name__}")
        memo[key] = value
        return value

    return rec(body, t)


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    mode: str  # "exhaustive" or "sampled"

    def __bool__(self) -> bool:
        return self.ok


def witness_traces(m: Dts, problem_horizons: Mapping[str, int | float],
                   witness: Mapping[str, Strategy]) -> dict[str, Trace]:
    """Augmented traces for the witness strategies, with length checks."""
    out: dict[str, Trace] = {}
    for var, strat in witness.items():
        need = action_count(problem_horizons[var])
        if len(strat.acts) != need:
            raise ValueError(
                f"witness for {var!r} has {len(strat.acts)} actions, horizon requires {need}")
        try:
            out[var] = correspond(m, strat)
        except UndefinedTransition as exc:
            raise WitnessPathUndefined(var, exc) from exc
    return out


def check_witness(problem: "Problem", witness: Mapping[str, Strategy], *,
                  budget: int = 200_000, samples: int = 64,
                  seed: int = 0) -> CheckResult:
    """Check a witness against an exists*-forall* problem.

    Existential variables present in the witness are fixed to their
    generated traces; any remaining existentials are searched, and the
    universal block is enumerated exhaustively when the space fits the
    budget.  Beyond the budget the check falls back to random sampling
    plus a constraint-based counterexample search, and the result is
    flagged ``sampled``: a sampled "true" is evidence, not a proof.
    """
    prefix = problem.formula.prefix
    seen_forall = False
    for q in prefix:
        if q.kind == FORALL:
            seen_forall = True
        elif seen_forall:
            raise PrefixUnsupported("prefix must be exists*-forall*")
    for var in witness:
        q = next((q for q in prefix if q.var == var), None)
        if q is None:
            raise ValueError(f"witness names unknown path variable {var!r}")
        if q.kind != EXISTS:
            raise ValueError(f"witness fixes universally quantified variable {var!r}")

    fixed = witness_traces(problem.dts, problem.horizons, witness)
    open_vars = [q for q in prefix if q.var not in fixed]

    space = 1
    for q in open_vars:
        h = action_count(problem.horizons[q.var])
        space = min(space * count_strategies(problem.dts, h, budget + 1), budget + 1)
    if space <= budget:
        ok = _decide(problem, dict(fixed), open_vars, [0], budget)
        return CheckResult(ok, "exhaustive")

    if any(q.kind == EXISTS for q in open_vars):
        raise BudgetExhausted(
            "universal space exceeds the budget and the witness leaves "
            "existential variables open")
    return _check_sampled(problem, fixed, open_vars, samples, seed)


def _decide(problem: "Problem", assignment: dict[str, Trace],
            remaining: list, nodes: list[int], budget: int) -> bool:
    """Game-tree evaluation of the remaining quantifiers."""
    if not remaining:
        return evaluate(problem.formula.body, assignment)
    q = remaining[0]
    h = action_count(problem.horizons[q.var])
    for strat in iter_strategies(problem.dts, h):
        nodes[0] += 1
        if nodes[0] > budget:
            raise BudgetExhausted(f"enumeration exceeded {budget} nodes")
        assignment[q.var] = correspond(problem.dts, strat)
        ok = _decide(problem, assignment, remaining[1:], nodes, budget)
        del assignment[q.var]
        if q.kind == EXISTS and ok:
            return True
        if q.kind == FORALL and not ok:
            return False
    return q.kind == FORALL


def _random_strategy(m: Dts, h: int, rng: random.Random) -> Strategy | None:
    state = rng.choice(m.states)
    init = state
    acts: list[str] = []
    for _ in range(h):
        options = [a for a in m.actions if (state, a) in m.trans]
        if not options:
            return None
        a = rng.choice(options)
        acts.append(a)
        state = m.trans[(state, a)]
    return Strategy(init, tuple(acts))


def _check_sampled(problem: "Problem", fixed: dict[str, Trace], open_vars: list,
                   samples: int, seed: int) -> CheckResult:
    rng = random.Random(seed)
    for _ in range(samples):
        assignment = dict(fixed)
        aborted = False
        for q in open_vars:
            h = action_count(problem.horizons[q.var])
            strat = _random_strategy(problem.dts, h, rng)
            if strat is None:
                aborted = True
                break
            assignment[q.var] = correspond(problem.dts, strat)
        if aborted:
            continue
        if not evaluate(problem.formula.body, assignment):
            return CheckResult(False, "sampled")

    # Constraint-based counterexample search over the universal block.
    # Imported lazily: the encoder depends on this module's oracle role,
    # not the other way around.
    from .encoder import find_counterexample

    cex = find_counterexample(problem, fixed)
    if cex is None:
        return CheckResult(True, "sampled")
    assignment = dict(fixed)
    for var, strat in cex.items():
        assignment[var] = correspond(problem.dts, strat)
    assert not evaluate(problem.formula.body, assignment)
    return CheckResult(False, "sampled")
