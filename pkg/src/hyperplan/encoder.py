"""Lowering of synthesis problems into finite constraint form.

Each path variable gets one-hot state variables ``x[i][t][s]`` for
``t = 0..H_i`` and one-hot action variables ``y[i][t][a]`` for
``t = 0..H_i-1``.  Path validity says defined transitions propagate the
state and undefined (state, action) pairs are blocked.  The objective
body is unrolled into Tseitin definitions with bidirectional clauses,
so negating the root literal negates the formula; atoms read the
augmented-trace convention (the action label at time t is the action
that produced the state, epsilon at time 0) and clamp their time index
at the path's horizon.

The same machinery emits external solver text: DIMACS CNF for
quantifier-free problems and an SMT-LIB2 script with enumerated sorts
and native universal quantifiers otherwise.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Mapping, Sequence

from .dts import Dts, Strategy
from .formula import (EPSILON, EXISTS, FORALL, And, Atom, Next, Node, Not,
                      Quantifier, Until)
from .horizon import NEG_INF, UnboundedOperator, action_count

if TYPE_CHECKING:  # pragma: no cover
    from .solver import Problem


class UnknownAtom(ValueError):
    def __init__(self, prop: str):
        super().__init__(f"atom {prop!r} is not a state, an action, or a label proposition")
        self.prop = prop


class AlternationUnsupported(ValueError):
    pass


class Cnf:
    """Clause database over positive integer variables."""

    def __init__(self) -> None:
        self.nvars = 0
        self.clauses: list[list[int]] = []
        self._true: int | None = None

    def new_var(self) -> int:
        self.nvars += 1
        return self.nvars

    def add(self, clause: Sequence[int]) -> None:
        self.clauses.append(list(clause))

    def true_lit(self) -> int:
        if self._true is None:
            self._true = self.new_var()
            self.add([self._true])
        return self._true


@dataclass
class PathBlock:
    var: str
    kind: str  # exists | forall
    horizon: int  # >= 0; a never-occurring variable contributes 0 steps
    state_vars: list[dict[str, int]]
    action_vars: list[dict[str, int]]


@dataclass
class VarAtlas:
    blocks: list[PathBlock]
    by_var: dict[str, PathBlock] = field(init=False)

    def __post_init__(self):
        self.by_var = {b.var: b for b in self.blocks}

    @property
    def max_horizon(self) -> int:
        return max((b.horizon for b in self.blocks), default=0)


def build_atlas(cnf: Cnf, dts: Dts, prefix: Sequence[Quantifier],
                horizons: Mapping[str, int | float]) -> VarAtlas:
    """Allocate one-hot blocks in prefix order; numbering is a pure
    function of (model, prefix, horizons)."""
    blocks = []
    for q in prefix:
        h = action_count(horizons[q.var])
        state_vars = [{s: cnf.new_var() for s in dts.states} for _ in range(h + 1)]
        action_vars = [{a: cnf.new_var() for a in dts.actions} for _ in range(h)]
        blocks.append(PathBlock(q.var, q.kind, h, state_vars, action_vars))
    return VarAtlas(blocks)


def exactly_one(cnf: Cnf, lits: Sequence[int]) -> None:
    lits = list(lits)
    cnf.add(lits)
    n = len(lits)
    if n <= 6:
        for i in range(n):
            for j in range(i + 1, n):
                cnf.add([-lits[i], -lits[j]])
        return
    # sequential at-most-one: aux[i] = "one of lits[..i] is true"
    aux = [cnf.new_var() for _ in range(n - 1)]
    cnf.add([-lits[0], aux[0]])
    for i in range(1, n - 1):
        cnf.add([-lits[i], aux[i]])
        cnf.add([-aux[i - 1], aux[i]])
        cnf.add([-lits[i], -aux[i - 1]])
    cnf.add([-lits[n - 1], -aux[n - 2]])


def encode_path_constraint(cnf: Cnf, dts: Dts, block: PathBlock) -> None:
    """One-hot groups plus transition propagation/blocking clauses."""
    for t in range(block.horizon + 1):
        exactly_one(cnf, [block.state_vars[t][s] for s in dts.states])
    for t in range(block.horizon):
        exactly_one(cnf, [block.action_vars[t][a] for a in dts.actions])
    for t in range(1, block.horizon + 1):
        xs = block.state_vars[t - 1]
        ys = block.action_vars[t - 1]
        for s in dts.states:
            for a in dts.actions:
                s2 = dts.trans.get((s, a))
                if s2 is None:
                    cnf.add([-xs[s], -ys[a]])
                else:
                    cnf.add([-xs[s], -ys[a], block.state_vars[t][s2]])


class EncodingContext:
    """Shared Tseitin state: structural AND/OR sharing across unrolls."""

    def __init__(self, dts: Dts, cnf: Cnf | None = None):
        self.dts = dts
        self.cnf = cnf or Cnf()
        self._and_cache: dict[tuple[int, ...], int] = {}
        props: dict[str, list[str]] = {}
        for s in dts.states:
            for p in dts.labels[s]:
                props.setdefault(p, []).append(s)
        self.label_states: dict[str, tuple[str, ...]] = {
            p: tuple(ss) for p, ss in props.items()}
        self.total = all((s, a) in dts.trans
                         for s in dts.states for a in dts.actions)

    @property
    def true(self) -> int:
        return self.cnf.true_lit()

    @property
    def false(self) -> int:
        return -self.cnf.true_lit()

    def conj(self, lits: Sequence[int]) -> int:
        true = self.true
        out = []
        seen = set()
        for lit in lits:
            if lit == true or lit in seen:
                continue
            if lit == -true or -lit in seen:
                return -true
            seen.add(lit)
            out.append(lit)
        if not out:
            return true
        if len(out) == 1:
            return out[0]
        key = tuple(sorted(out))
        cached = self._and_cache.get(key)
        if cached is not None:
            return cached
        v = self.cnf.new_var()
        for lit in key:
            self.cnf.add([-v, lit])
        self.cnf.add([v] + [-lit for lit in key])
        self._and_cache[key] = v
        return v

    def disj(self, lits: Sequence[int]) -> int:
        return -self.conj([-lit for lit in lits])


class BlockView:
    """Atom resolution against a path's own one-hot variable block."""

    def __init__(self, ctx: EncodingContext, block: PathBlock):
        self.ctx = ctx
        self.block = block
        self.horizon = block.horizon

    def atom(self, prop: str, t: int) -> int:
        ctx, block = self.ctx, self.block
        tc = min(t, self.horizon)
        if prop in block.state_vars[tc]:
            return block.state_vars[tc][prop]
        if prop == EPSILON:
            return ctx.true if tc == 0 else ctx.false
        if prop in ctx.dts.actions:
            if tc == 0:
                return ctx.false
            return block.action_vars[tc - 1][prop]
        states = ctx.label_states.get(prop)
        if states is None:
            raise UnknownAtom(prop)
        return ctx.disj([block.state_vars[tc][s] for s in states])


class TraceView:
    """Atom resolution against a concrete augmented trace (constants)."""

    def __init__(self, ctx: EncodingContext, trace: list):
        self.ctx = ctx
        self.trace = trace
        self.horizon = len(trace) - 1

    def atom(self, prop: str, t: int) -> int:
        holds = prop in self.trace[min(t, self.horizon)]
        return self.ctx.true if holds else self.ctx.false


class MutatedView:
    """A path that copies another block's strategy except for one step.

    The view shares the base block's variables up to the mutation time
    ``k``; from ``k + 1`` on it tracks its own one-hot state chain,
    driven by the fixed replacement action at ``k`` and by the base
    block's action variables afterwards.  Chains grow lazily to the
    latest time an atom asks for.  Requires a total transition function
    (so the mutated path always exists and is a sound universal
    instance).
    """

    def __init__(self, ctx: EncodingContext, base: PathBlock, k: int, b: str):
        if not ctx.total:
            raise ValueError("mutation views require a total transition function")
        self.ctx = ctx
        self.base = base
        self.horizon = base.horizon
        self.k = k
        self.b = b
        self._chain: list[dict[str, int]] = []  # index 0 holds time k+1

    def _states_at(self, t: int) -> dict[str, int]:
        if t <= self.k:
            return self.base.state_vars[t]
        ctx, dts = self.ctx, self.ctx.dts
        while len(self._chain) < t - self.k:
            tau = self.k + 1 + len(self._chain)
            group = {s: ctx.cnf.new_var() for s in dts.states}
            exactly_one(ctx.cnf, list(group.values()))
            prev = self.base.state_vars[tau - 1] if tau - 1 <= self.k \
                else self._chain[tau - 1 - self.k - 1]
            if tau - 1 == self.k:
                for s in dts.states:
                    ctx.cnf.add([-prev[s], group[dts.trans[(s, self.b)]]])
            else:
                ys = self.base.action_vars[tau - 1]
                for s in dts.states:
                    for a in dts.actions:
                        ctx.cnf.add([-prev[s], -ys[a], group[dts.trans[(s, a)]]])
            self._chain.append(group)
        return self._chain[t - self.k - 1]

    def atom(self, prop: str, t: int) -> int:
        ctx = self.ctx
        tc = min(t, self.horizon)
        if prop == EPSILON:
            return ctx.true if tc == 0 else ctx.false
        if prop in ctx.dts.actions:
            if tc == 0:
                return ctx.false
            if tc - 1 == self.k:
                return ctx.true if prop == self.b else ctx.false
            return self.base.action_vars[tc - 1][prop]
        states = self._states_at(tc)
        if prop in states:
            return states[prop]
        labelled = ctx.label_states.get(prop)
        if labelled is None:
            raise UnknownAtom(prop)
        return ctx.disj([states[s] for s in labelled])


def block_views(ctx: EncodingContext, atlas: VarAtlas) -> dict[str, BlockView]:
    return {b.var: BlockView(ctx, b) for b in atlas.blocks}


def unroll(ctx: EncodingContext, views: Mapping[str, "BlockView | TraceView | MutatedView"],
           body: Node, t: int = 0) -> int:
    """Tseitin literal equivalent to evaluating the body at time ``t``,
    with each path variable's atoms resolved through its view."""
    clamp = max((v.horizon for v in views.values()), default=0)
    memo: dict[tuple[int, int], int] = {}

    def rec(n: Node, t: int) -> int:
        key = (id(n), min(t, clamp))
        lit = memo.get(key)
        if lit is not None:
            return lit
        if isinstance(n, Atom):
            view = views.get(n.path)
            if view is None:
                raise KeyError(f"path variable {n.path!r} has no view")
            lit = view.atom(n.prop, t)
        elif isinstance(n, Not):
            lit = -rec(n.operand, t)
        elif isinstance(n, And):
            lit = ctx.conj([rec(n.left, t), rec(n.right, t)])
        elif isinstance(n, Next):
            lit = rec(n.operand, t + 1)
        elif isinstance(n, Until):
            if n.bound is None:
                raise UnboundedOperator("until without a finite bound cannot be unrolled")
            disjuncts = []
            chain = ctx.true
            for d in range(n.bound + 1):
                disjuncts.append(ctx.conj([rec(n.right, t + d), chain]))
                if d < n.bound:
                    chain = ctx.conj([chain, rec(n.left, t + d)])
                    if chain == ctx.false:
                        break
            lit = ctx.disj(disjuncts)
        else:
            raise TypeError(f"unroll expects a core body, got {type(n).__name__}")
        memo[key] = lit
        return lit

    return rec(body, t)


@dataclass
class QuantifiedEncoding:
    problem: "Problem"
    cnf: Cnf
    atlas: VarAtlas
    root: int

    @property
    def quantifier_free(self) -> bool:
        return all(b.kind == EXISTS for b in self.atlas.blocks)


def encode_problem(problem: "Problem") -> QuantifiedEncoding:
    """Full matrix: path constraints for every block plus the unrolled
    objective asserted as a unit on its root literal."""
    ctx = EncodingContext(problem.dts)
    atlas = build_atlas(ctx.cnf, problem.dts, problem.formula.prefix, problem.horizons)
    for block in atlas.blocks:
        encode_path_constraint(ctx.cnf, problem.dts, block)
    root = unroll(ctx, block_views(ctx, atlas), problem.formula.body)
    ctx.cnf.add([root])
    return QuantifiedEncoding(problem, ctx.cnf, atlas, root)


def decode_model(atlas: VarAtlas, model: Sequence[int],
                 kinds: tuple[str, ...] = (EXISTS,)) -> dict[str, Strategy]:
    """Read (initial state, action sequence) strategies off a SAT model."""
    out: dict[str, Strategy] = {}
    for block in atlas.blocks:
        if block.kind not in kinds:
            continue
        init = [s for s, v in block.state_vars[0].items() if model[v] == 1]
        acts = []
        for t in range(block.horizon):
            chosen = [a for a, v in block.action_vars[t].items() if model[v] == 1]
            assert len(chosen) == 1, "action group must be one-hot in a model"
            acts.append(chosen[0])
        assert len(init) == 1, "state group must be one-hot in a model"
        out[block.var] = Strategy(init[0], tuple(acts))
    return out


def find_counterexample(problem: "Problem",
                        fixed: Mapping[str, list]) -> dict[str, Strategy] | None:
    """Search a valid instantiation of the non-fixed (universal) block
    that falsifies the body once the fixed traces are substituted."""
    from .sat import CdclSolver  # local import keeps module layering flat

    open_prefix = [q for q in problem.formula.prefix if q.var not in fixed]
    ctx = EncodingContext(problem.dts)
    atlas = build_atlas(ctx.cnf, problem.dts, open_prefix, problem.horizons)
    for block in atlas.blocks:
        encode_path_constraint(ctx.cnf, problem.dts, block)
    views: dict = block_views(ctx, atlas)
    views.update({var: TraceView(ctx, trace) for var, trace in fixed.items()})
    root = unroll(ctx, views, problem.formula.body)
    ctx.cnf.add([-root])
    solver = CdclSolver()
    solver.ensure_vars(ctx.cnf.nvars)
    for clause in ctx.cnf.clauses:
        solver.add_clause(clause)
    if not solver.solve():
        return None
    return decode_model(atlas, solver.model(), kinds=(EXISTS, FORALL))


# ---------------------------------------------------------------------------
# External solver text
# ---------------------------------------------------------------------------

_SYMBOL_OK = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")


def _sanitize(names: Sequence[str], prefix: str) -> dict[str, str]:
    out: dict[str, str] = {}
    used: set[str] = set()
    for name in names:
        base = re.sub(r"[^A-Za-z0-9_]", "_", name)
        if not _SYMBOL_OK.match(base):
            base = "x" + base
        sym = f"{prefix}{base}"
        k = 1
        while sym in used:
            sym = f"{prefix}{base}_{k}"
            k += 1
        used.add(sym)
        out[name] = sym
    return out


def to_dimacs(encoding: QuantifiedEncoding) -> str:
    """Canonical DIMACS text; quantifier-free encodings only."""
    if not encoding.quantifier_free:
        raise AlternationUnsupported("DIMACS export requires an exists-only prefix")
    cnf = encoding.cnf
    clauses = sorted(sorted(c, key=lambda l: (abs(l), l < 0)) for c in cnf.clauses)
    lines = [f"p cnf {cnf.nvars} {len(clauses)}"]
    lines.extend(" ".join(map(str, c)) + " 0" for c in clauses)
    return "\n".join(lines) + "\n"


class _SmtBody:
    """Renders the core body as S-expressions with let-shared subterms."""

    def __init__(self, dts: Dts, atlas: VarAtlas, st_syms: dict[str, str],
                 act_syms: dict[str, str]):
        self.dts = dts
        self.atlas = atlas
        self.st_syms = st_syms
        self.act_syms = act_syms
        self.bindings: list[tuple[str, str]] = []
        self.memo: dict[tuple[int, int], str] = {}
        label_states: dict[str, list[str]] = {}
        for s in dts.states:
            for p in dts.labels[s]:
                label_states.setdefault(p, []).append(s)
        self.label_states = label_states

    def _bind(self, key: tuple[int, int], expr: str) -> str:
        name = f"f{len(self.bindings)}"
        self.bindings.append((name, expr))
        self.memo[key] = name
        return name

    def atom(self, n: Atom, t: int) -> str:
        block = self.atlas.by_var[n.path]
        tc = min(t, block.horizon)
        if n.prop in self.st_syms:
            return f"(= s_{block.var}_{tc} {self.st_syms[n.prop]})"
        if n.prop == EPSILON:
            return "true" if tc == 0 else "false"
        if n.prop in self.dts.actions:
            if tc == 0:
                return "false"
            return f"(= a_{block.var}_{tc - 1} {self.act_syms[n.prop]})"
        states = self.label_states.get(n.prop)
        if states is None:
            raise UnknownAtom(n.prop)
        eqs = [f"(= s_{block.var}_{tc} {self.st_syms[s]})" for s in states]
        return eqs[0] if len(eqs) == 1 else "(or " + " ".join(eqs) + ")"

    def render(self, n: Node, t: int) -> str:
        clamp = self.atlas.max_horizon
        key = (id(n), min(t, clamp))
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        if isinstance(n, Atom):
            return self._bind(key, self.atom(n, t))
        if isinstance(n, Not):
            return self._bind(key, f"(not {self.render(n.operand, t)})")
        if isinstance(n, And):
            return self._bind(key, f"(and {self.render(n.left, t)} {self.render(n.right, t)})")
        if isinstance(n, Next):
            expr = self.render(n.operand, t + 1)
            self.memo[key] = expr
            return expr
        if isinstance(n, Until):
            if n.bound is None:
                raise UnboundedOperator("until without a finite bound cannot be unrolled")
            disjuncts = []
            firsts: list[str] = []
            for d in range(n.bound + 1):
                parts = [self.render(n.right, t + d)] + firsts
                disjuncts.append(parts[0] if len(parts) == 1 else "(and " + " ".join(parts) + ")")
                if d < n.bound:
                    firsts.append(self.render(n.left, t + d))
            expr = disjuncts[0] if len(disjuncts) == 1 else "(or " + " ".join(disjuncts) + ")"
            return self._bind(key, expr)
        raise TypeError(f"unsupported node {type(n).__name__}")


def to_smtlib2(encoding: QuantifiedEncoding) -> str:
    """SMT-LIB2 script: enumerated state/action sorts, declared constants
    for existential blocks, a native forall for the universal suffix."""
    problem = encoding.problem
    dts = problem.dts
    atlas = encoding.atlas
    st_syms = _sanitize(dts.states, "st_")
    act_syms = _sanitize(dts.actions, "act_")

    lines: list[str] = ["(set-logic ALL)"]
    lines.append("(declare-datatypes ((State 0)) ((" +
                 " ".join(f"({st_syms[s]})" for s in dts.states) + ")))")
    lines.append("(declare-datatypes ((Action 0)) ((" +
                 " ".join(f"({act_syms[a]})" for a in dts.actions) + ")))")

    pairs = [(s, a) for s in dts.states for a in dts.actions if (s, a) in dts.trans]
    ok_terms = [f"(and (= s {st_syms[s]}) (= a {act_syms[a]}))" for s, a in pairs]
    lines.append("(define-fun trans_ok ((s State) (a Action)) Bool " +
                 ("false" if not ok_terms else
                  ok_terms[0] if len(ok_terms) == 1 else "(or " + " ".join(ok_terms) + ")") + ")")
    nxt = f"{st_syms[dts.states[0]]}"
    for s, a in reversed(pairs):
        nxt = (f"(ite (and (= s {st_syms[s]}) (= a {act_syms[a]})) "
               f"{st_syms[dts.trans[(s, a)]]} {nxt})")
    lines.append(f"(define-fun trans_next ((s State) (a Action)) State {nxt})")

    exists_blocks = [b for b in atlas.blocks if b.kind == EXISTS]
    forall_blocks = [b for b in atlas.blocks if b.kind != EXISTS]

    for b in exists_blocks:
        for t in range(b.horizon + 1):
            lines.append(f"(declare-const s_{b.var}_{t} State)")
        for t in range(b.horizon):
            lines.append(f"(declare-const a_{b.var}_{t} Action)")
        for t in range(1, b.horizon + 1):
            lines.append(f"(assert (trans_ok s_{b.var}_{t - 1} a_{b.var}_{t - 1}))")
            lines.append(f"(assert (= s_{b.var}_{t} "
                         f"(trans_next s_{b.var}_{t - 1} a_{b.var}_{t - 1})))")

    renderer = _SmtBody(dts, atlas, st_syms, act_syms)
    root = renderer.render(problem.formula.body, 0)

    if not forall_blocks:
        goal = root
    else:
        valid = []
        for b in forall_blocks:
            valid.extend(f"(trans_ok s_{b.var}_{t - 1} a_{b.var}_{t - 1})"
                         for t in range(1, b.horizon + 1))
        guard = "true" if not valid else (valid[0] if len(valid) == 1
                                          else "(and " + " ".join(valid) + ")")
        goal = f"(=> {guard} {root})"

    # let-bind shared subterms innermost around the goal
    lets = "".join(f"(let (({name} {expr})) " for name, expr in renderer.bindings)
    goal = lets + goal + ")" * len(renderer.bindings)

    if forall_blocks:
        bound = []
        defs = []
        for b in forall_blocks:
            bound.append(f"(s_{b.var}_0 State)")
            bound.extend(f"(a_{b.var}_{t} Action)" for t in range(b.horizon))
            defs.extend(
                (f"s_{b.var}_{t}", f"(trans_next s_{b.var}_{t - 1} a_{b.var}_{t - 1})")
                for t in range(1, b.horizon + 1))
        chain = "".join(f"(let (({name} {expr})) " for name, expr in defs)
        goal = chain + goal + ")" * len(defs)
        lines.append(f"(assert (forall ({' '.join(bound)}) {goal}))")
    else:
        lines.append(f"(assert {goal})")

    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"


def to_solver_text(encoding: QuantifiedEncoding, dialect: str) -> str:
    if dialect == "cnf-dimacs":
        return to_dimacs(encoding)
    if dialect == "smtlib2":
        return to_smtlib2(encoding)
    raise ValueError(f"unknown dialect {dialect!r}; expected cnf-dimacs or smtlib2")


def sidecar_map(encoding: QuantifiedEncoding, dialect: str) -> str:
    """JSON mapping solver variables back to (path, time, state/action)."""
    atlas = encoding.atlas
    doc: dict = {
        "dialect": dialect,
        "paths": {b.var: {"kind": b.kind, "horizon": b.horizon} for b in atlas.blocks},
        "vars": {},
    }
    if dialect == "cnf-dimacs":
        for b in atlas.blocks:
            for t, group in enumerate(b.state_vars):
                for s, v in group.items():
                    doc["vars"][str(v)] = {"path": b.var, "time": t, "kind": "state", "value": s}
            for t, group in enumerate(b.action_vars):
                for a, v in group.items():
                    doc["vars"][str(v)] = {"path": b.var, "time": t, "kind": "action", "value": a}
    elif dialect == "smtlib2":
        dts = encoding.problem.dts
        st_syms = _sanitize(dts.states, "st_")
        act_syms = _sanitize(dts.actions, "act_")
        for b in atlas.blocks:
            for t in range(b.horizon + 1):
                doc["vars"][f"s_{b.var}_{t}"] = {"path": b.var, "time": t, "kind": "state"}
            for t in range(b.horizon):
                doc["vars"][f"a_{b.var}_{t}"] = {"path": b.var, "time": t, "kind": "action"}
        doc["states"] = {sym: s for s, sym in st_syms.items()}
        doc["actions"] = {sym: a for a, sym in act_syms.items()}
    else:
        raise ValueError(f"unknown dialect {dialect!r}")
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
