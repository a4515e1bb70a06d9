"""Realizability backends and witness production.

Three ways to decide a problem: exhaustive game-tree enumeration (the
oracle; handles any quantifier alternation), a counterexample-guided
loop over the built-in SAT core for exists*-forall* prefixes, and
export to an external solver.  Every realizable outcome is re-verified
through the trace-semantics witness checker before it is returned.
"""
from __future__ import annotations

import json
import os
import re
import shlex
import subprocess
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .dts import Dts, Strategy, UndefinedTransition, correspond, iter_strategies
from .encoder import (Cnf, EncodingContext, MutatedView, TraceView,
                      UnknownAtom, block_views, build_atlas, decode_model,
                      encode_path_constraint, encode_problem, sidecar_map,
                      to_solver_text, unroll)
from .formula import EXISTS, FORALL, Atom, Formula, is_core, validate
from .horizon import action_count, horizons
from .sat import CdclSolver
from .semantics import (BudgetExhausted, CheckResult, PrefixUnsupported,
                        check_witness, evaluate)

BACKENDS = ("cegis", "enumeration", "external")
SOLVER_CMD_ENV = "HYPERPLAN_SOLVER_CMD"


@dataclass(frozen=True)
class SolveOptions:
    backend: str = "cegis"
    max_cegis_iters: int = 400
    enum_budget: int = 2_000_000
    check_budget: int = 200_000
    check_samples: int = 64
    seed: int = 0
    export_dialect: str = "smtlib2"
    export_path: str | None = None
    solver_cmd: str | None = None

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.max_cegis_iters <= 0 or self.enum_budget <= 0 or self.check_budget <= 0:
            raise ValueError("budgets must be positive")


@dataclass(frozen=True)
class Problem:
    dts: Dts
    formula: Formula  # desugared, prenex, closed
    horizons: dict[str, int | float]
    options: SolveOptions = SolveOptions()

    @classmethod
    def make(cls, dts: Dts, formula: Formula,
             options: SolveOptions | None = None) -> "Problem":
        validate(formula)
        if not is_core(formula.body):
            raise ValueError("problems take desugared core formulas")
        vocab = dts.atom_vocabulary()
        stack = [formula.body]
        while stack:
            n = stack.pop()
            if isinstance(n, Atom):
                if n.prop not in vocab:
                    raise UnknownAtom(n.prop)
            else:
                stack.extend(getattr(n, f) for f in ("operand", "left", "right")
                             if hasattr(n, f))
        return cls(dts, formula, horizons(formula), options or SolveOptions())


@dataclass(frozen=True)
class SatResult:
    model: list[int] | None

    @property
    def is_sat(self) -> bool:
        return self.model is not None


def sat_solve(cnf: Cnf, assumptions: Sequence[int] = ()) -> SatResult:
    """Complete decision procedure over a clause set; models are
    re-checked against every clause before being returned."""
    solver = CdclSolver()
    solver.ensure_vars(cnf.nvars)
    for clause in cnf.clauses:
        solver.add_clause(clause)
    if not solver.solve(tuple(assumptions)):
        return SatResult(None)
    model = solver.model()
    for clause in cnf.clauses:
        assert any(model[abs(l)] == (1 if l > 0 else -1) for l in clause), \
            "model fails a clause"
    return SatResult(model)


@dataclass
class Outcome:
    status: str  # realizable | unrealizable | unknown
    witness: dict[str, Strategy] | None = None
    reason: str | None = None
    verified: str | None = None  # exhaustive | sampled
    stats: dict = field(default_factory=dict)

    @property
    def is_realizable(self) -> bool:
        return self.status == "realizable"


def _split_prefix(formula: Formula):
    """Leading existential block and trailing universal block, or raise."""
    es, us = [], []
    for q in formula.prefix:
        if q.kind == EXISTS:
            if us:
                raise PrefixUnsupported("prefix must be exists*-forall*")
            es.append(q)
        else:
            us.append(q)
    return es, us


# ---------------------------------------------------------------------------
# Enumeration backend
# ---------------------------------------------------------------------------


def solve_enumeration(problem: Problem, budget: int | None = None) -> Outcome:
    """Game-tree evaluation over the quantifier prefix.

    Exact for any alternation pattern; the returned witness covers the
    leading existential block (inner existentials vary per branch).
    """
    budget = budget if budget is not None else problem.options.enum_budget
    prefix = problem.formula.prefix
    n_leading = 0
    while n_leading < len(prefix) and prefix[n_leading].kind == EXISTS:
        n_leading += 1

    assignment: dict[str, list] = {}
    choices: dict[str, Strategy] = {}
    nodes = [0]

    def rec(idx: int) -> bool:
        if idx == len(prefix):
            return evaluate(problem.formula.body, assignment)
        q = prefix[idx]
        h = action_count(problem.horizons[q.var])
        for strat in iter_strategies(problem.dts, h):
            nodes[0] += 1
            if nodes[0] > budget:
                raise BudgetExhausted(f"enumeration exceeded {budget} nodes")
            assignment[q.var] = correspond(problem.dts, strat)
            ok = rec(idx + 1)
            del assignment[q.var]
            if q.kind == EXISTS and ok:
                if idx < n_leading:
                    choices[q.var] = strat
                return True
            if q.kind == FORALL and not ok:
                return False
        return q.kind == FORALL

    try:
        sat = rec(0)
    except BudgetExhausted as exc:
        return Outcome("unknown", reason=f"budget: {exc}", stats={"nodes": nodes[0]})
    if not sat:
        return Outcome("unrealizable", stats={"nodes": nodes[0]})
    return Outcome("realizable", witness=dict(choices), stats={"nodes": nodes[0]})


# ---------------------------------------------------------------------------
# CEGIS backend
# ---------------------------------------------------------------------------


def _feed(solver: CdclSolver, cnf: Cnf, cursor: int) -> int:
    solver.ensure_vars(cnf.nvars)
    for clause in cnf.clauses[cursor:]:
        solver.add_clause(clause)
    return len(cnf.clauses)


def _harvest_cexes(problem: Problem, es, us, candidate: Mapping[str, Strategy],
                   cap: int = 32) -> list[dict[str, Strategy]]:
    """Cheap counterexample candidates by simulation.

    Any valid path is a sound instantiation of a universal variable, so
    mutations of the candidate's own strategy (one action replaced, or
    the start moved) are screened with the trace evaluator and every
    failing one is returned.  Purely an accelerator: the constraint
    search in :class:`_Verifier` remains the completeness backstop.
    """
    if len(us) != 1:
        return []
    u = us[0]
    h_u = action_count(problem.horizons[u.var])
    mate = next((e.var for e in es
                 if action_count(problem.horizons[e.var]) == h_u), None)
    if mate is None:
        return []
    base = candidate[mate]
    fixed = {var: correspond(problem.dts, strat) for var, strat in candidate.items()}

    def fails(strat: Strategy) -> bool:
        try:
            trace = correspond(problem.dts, strat)
        except UndefinedTransition:
            return False  # not a valid universal instance
        assignment = dict(fixed)
        assignment[u.var] = trace
        return not evaluate(problem.formula.body, assignment)

    out: list[dict[str, Strategy]] = []
    for k in range(h_u):
        for b in problem.dts.actions:
            if b == base.acts[k]:
                continue
            strat = Strategy(base.init, base.acts[:k] + (b,) + base.acts[k + 1:])
            if fails(strat):
                out.append({u.var: strat})
                if len(out) >= cap:
                    return out
    for s0 in problem.dts.states:
        if s0 == base.init:
            continue
        strat = Strategy(s0, base.acts)
        if fails(strat):
            out.append({u.var: strat})
            if len(out) >= cap:
                return out
    return out


def solve_cegis(problem: Problem, max_iters: int | None = None) -> Outcome:
    """Propose-verify-refine over the built-in SAT core.

    Candidates are models of the existential path constraints plus all
    accumulated ground instantiations of the objective; verification
    fixes the candidate with assumptions and searches the universal
    block for a valid violating path, whose trace is then substituted
    into the objective as a new ground constraint.  Before paying for a
    constraint search, single-mutation counterexamples are harvested by
    simulation and learned in batches.
    """
    max_iters = max_iters if max_iters is not None else problem.options.max_cegis_iters
    es, us = _split_prefix(problem.formula)
    body = problem.formula.body

    if not us:
        enc = encode_problem(problem)
        res = sat_solve(enc.cnf)
        if not res.is_sat:
            return Outcome("unrealizable", stats={"iterations": 1})
        return Outcome("realizable", witness=decode_model(enc.atlas, res.model),
                       stats={"iterations": 1})
    if not es:
        # pure-universal: nothing to synthesize, decide by counterexample search
        verifier = _Verifier(problem)
        cex = verifier.search(())
        if cex is None:
            return Outcome("realizable", witness={}, stats={"iterations": 1})
        return Outcome("unrealizable", stats={"iterations": 1})

    cand_ctx = EncodingContext(problem.dts)
    cand_atlas = build_atlas(cand_ctx.cnf, problem.dts, es, problem.horizons)
    for block in cand_atlas.blocks:
        encode_path_constraint(cand_ctx.cnf, problem.dts, block)
    base_views = block_views(cand_ctx, cand_atlas)

    # Implied diagonal instance: every universal variable may in
    # particular follow an existential path of the same horizon, so the
    # candidate must already satisfy the body under that identification.
    mates: dict[str, str] = {}
    for q in us:
        mate = next((e.var for e in es
                     if cand_atlas.by_var[e.var].horizon
                     == action_count(problem.horizons[q.var])), None)
        if mate is None:
            mates = {}
            break
        mates[q.var] = mate
    if mates:
        views = dict(base_views)
        views.update({u: base_views[mate] for u, mate in mates.items()})
        cand_ctx.cnf.add([unroll(cand_ctx, views, body)])

    cand_solver = CdclSolver()
    cursor = _feed(cand_solver, cand_ctx.cnf, 0)

    verifier = _Verifier(problem)
    seen: set[tuple] = set()
    strengthened = False

    n_instances = 0
    for iteration in range(1, max_iters + 1):
        if not cand_solver.solve():
            return Outcome("unrealizable",
                           stats={"iterations": iteration, "instances": n_instances})
        candidate = decode_model(cand_atlas, cand_solver.model())

        cexes = _harvest_cexes(problem, es, us, candidate)
        if not cexes:
            cex = verifier.search(tuple(candidate[q.var] for q in es))
            if cex is None:
                return Outcome("realizable", witness=candidate,
                               stats={"iterations": iteration,
                                      "instances": n_instances,
                                      "strengthened": strengthened})
            key = tuple(sorted((v, s.init, s.acts) for v, s in cex.items()))
            if key in seen:
                raise RuntimeError("refinement made no progress; encoder and "
                                   "verifier disagree on a counterexample")
            cexes = [cex]

        for cex in cexes:
            key = tuple(sorted((v, s.init, s.acts) for v, s in cex.items()))
            if key in seen:
                continue
            seen.add(key)
            fixed = {v: correspond(problem.dts, s) for v, s in cex.items()}
            views = dict(base_views)
            views.update({v: TraceView(cand_ctx, tr) for v, tr in fixed.items()})
            cand_ctx.cnf.add([unroll(cand_ctx, views, body)])
            n_instances += 1

        if not strengthened and iteration >= _STALL_ITERS and mates \
                and cand_ctx.total and len(us) == 1:
            _strengthen_with_mutations(problem, cand_ctx, cand_atlas, base_views,
                                       us[0].var, mates[us[0].var], body)
            strengthened = True
        cursor = _feed(cand_solver, cand_ctx.cnf, cursor)

    return Outcome("unknown", reason=f"cegis: no decision in {max_iters} iterations",
                   stats={"iterations": max_iters, "instances": n_instances})


# iterations of plain ground refinement before the mutation family is
# encoded symbolically into the candidate constraints
_STALL_ITERS = 12


def _strengthen_with_mutations(problem: Problem, ctx: EncodingContext, atlas,
                               base_views, u_var: str, mate: str, body) -> None:
    """Conjoin the whole single-action-mutation family of the witness.

    Ground refinement can stall when every learned instance is evaded
    by an irrelevant change of the candidate (the instance pins the full
    action sequence of one counterexample).  On a total model the
    mutated paths exist for every candidate, so quantifying them
    symbolically is sound: for each step k and replacement action b,
    the path that copies the witness except for taking b at k is traced
    by a lazily-built state chain and the objective is asserted on it.
    """
    block = atlas.by_var[mate]
    for k in range(block.horizon):
        for b in problem.dts.actions:
            views = dict(base_views)
            views[u_var] = MutatedView(ctx, block, k, b)
            ctx.cnf.add([unroll(ctx, views, body)])


class _Verifier:
    """Reusable counterexample search: the full two-sided matrix with the
    objective root negated, candidate fixed through assumptions."""

    def __init__(self, problem: Problem):
        self.problem = problem
        ctx = EncodingContext(problem.dts)
        self.atlas = build_atlas(ctx.cnf, problem.dts, problem.formula.prefix,
                                 problem.horizons)
        for block in self.atlas.blocks:
            encode_path_constraint(ctx.cnf, problem.dts, block)
        root = unroll(ctx, block_views(ctx, self.atlas), problem.formula.body)
        ctx.cnf.add([-root])
        self.solver = CdclSolver()
        _feed(self.solver, ctx.cnf, 0)
        self.exists_vars = [q.var for q in problem.formula.prefix if q.kind == EXISTS]

    def search(self, candidate: tuple[Strategy, ...]) -> dict[str, Strategy] | None:
        assumptions: list[int] = []
        for var, strat in zip(self.exists_vars, candidate):
            block = self.atlas.by_var[var]
            assumptions.append(block.state_vars[0][strat.init])
            for t, a in enumerate(strat.acts):
                assumptions.append(block.action_vars[t][a])
        if not self.solver.solve(tuple(assumptions)):
            return None
        model = self.solver.model()
        out = decode_model(self.atlas, model, kinds=(FORALL,))
        return out


# ---------------------------------------------------------------------------
# External backend
# ---------------------------------------------------------------------------

_DEFINE_FUN = re.compile(r"\(\s*define-fun\s+([^\s()]+)\s*\(\s*\)\s*[^\s()]+\s+([^\s()]+)\s*\)")


def solve_external(problem: Problem) -> Outcome:
    """Export solver text (plus the variable-map sidecar) and, when a
    solver command is configured, run it and decode the model."""
    opts = problem.options
    enc = encode_problem(problem)
    dialect = opts.export_dialect
    ext = ".cnf" if dialect == "cnf-dimacs" else ".smt2"
    path = opts.export_path or ("problem" + ext)
    with open(path, "w") as fh:
        fh.write(to_solver_text(enc, dialect))
    with open(path + ".map.json", "w") as fh:
        fh.write(sidecar_map(enc, dialect))

    cmd = opts.solver_cmd or os.environ.get(SOLVER_CMD_ENV)
    if not cmd:
        return Outcome("unknown", reason="exported", stats={"export_path": path})

    proc = subprocess.run(shlex.split(cmd) + [path], capture_output=True, text=True)
    out = proc.stdout
    if re.search(r"^\s*unsat\b", out, re.MULTILINE):
        return Outcome("unrealizable", stats={"export_path": path})
    if not re.search(r"^\s*sat\b", out, re.MULTILINE):
        return Outcome("unknown", reason=f"solver output not understood: {out[:200]!r}",
                       stats={"export_path": path})

    if dialect == "cnf-dimacs":
        model = [0] * (enc.cnf.nvars + 1)
        for tok in re.findall(r"-?\d+", "".join(
                line[1:] for line in out.splitlines() if line.startswith("v"))):
            lit = int(tok)
            if lit != 0 and abs(lit) <= enc.cnf.nvars:
                model[abs(lit)] = 1 if lit > 0 else -1
        witness = decode_model(enc.atlas, model)
    else:
        defs = dict(_DEFINE_FUN.findall(out))
        side = json.loads(sidecar_map(enc, dialect))
        st_back, act_back = side["states"], side["actions"]
        witness = {}
        for block in enc.atlas.blocks:
            if block.kind != EXISTS:
                continue
            init = st_back[defs[f"s_{block.var}_0"]]
            acts = tuple(act_back[defs[f"a_{block.var}_{t}"]]
                         for t in range(block.horizon))
            witness[block.var] = Strategy(init, acts)
    return Outcome("realizable", witness=witness, stats={"export_path": path})


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------


def synthesize(problem: Problem) -> Outcome:
    """Backend dispatch; realizable outcomes are re-verified before
    being returned (an unverifiable witness is an internal error)."""
    backend = problem.options.backend
    if backend == "enumeration":
        outcome = solve_enumeration(problem)
    elif backend == "external":
        outcome = solve_external(problem)
    else:
        try:
            outcome = solve_cegis(problem)
        except PrefixUnsupported:
            outcome = solve_enumeration(problem)

    if outcome.is_realizable:
        try:
            check = check_witness(problem, outcome.witness or {},
                                  budget=problem.options.check_budget,
                                  samples=problem.options.check_samples,
                                  seed=problem.options.seed)
        except PrefixUnsupported:
            # enumeration already decided prefixes the checker cannot handle
            outcome.verified = "exhaustive"
            return outcome
        if not check.ok:
            raise RuntimeError("witness failed independent verification; "
                               "this indicates an encoder or solver defect")
        outcome.verified = check.mode
    return outcome


# ---------------------------------------------------------------------------
# Witness JSON
# ---------------------------------------------------------------------------


def witness_to_json(witness: Mapping[str, Strategy], verified: str | None = None) -> str:
    doc = {
        "paths": {
            var: {"init": strat.init, "actions": list(strat.acts)}
            for var, strat in sorted(witness.items())
        },
    }
    if verified is not None:
        doc["verified"] = verified
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def witness_from_json(text: str) -> tuple[dict[str, Strategy], str | None]:
    doc = json.loads(text)
    witness = {
        var: Strategy(entry["init"], tuple(entry["actions"]))
        for var, entry in doc.get("paths", {}).items()
    }
    return witness, doc.get("verified")
