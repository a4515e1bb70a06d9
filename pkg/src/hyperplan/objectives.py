"""Hyper-objective templates: optimality, robustness, opacity.

Each template instantiates a two-path quantified formula against a
concrete model.  Two variants ship: ``literal`` reproduces the classic
formula shapes verbatim (with every temporal operator bounded by the
horizon), and ``guarded`` (the default, also answering to ``strict``)
repairs the two known pathologies of the literal shapes:

* robustness conjoins universal-side requirements such as "starts in
  the region" that any stray path can falsify, so the guarded variant
  turns them into the antecedent of an implication;
* the shortest/longest comparator ``F (goal' -> F goal)`` is vacuously
  satisfied whenever the antecedent never fires, so the guarded variant
  uses a no-earlier-arrival until-encoding instead.

Opacity templates optionally conjoin stepwise observation equality over
an observation alphabet (for grid models, the row propositions); that
is what makes an observer unable to distinguish the two runs along the
way rather than only at the end.
"""
from __future__ import annotations

from dataclasses import dataclass

from .dts import Dts
from .formula import (ActEq, Always, And, Atom, EmptyAlphabet, Eventually,
                      Formula, Implies, Next, Node, Not, ObsEq, Or,
                      Quantifier, Until, EXISTS, FORALL, desugar)
from .solver import Problem, SolveOptions

KINDS = (
    "shortest-path",
    "longest-path",
    "init-state-robust",
    "action-robust",
    "init-state-opaque",
    "current-state-opaque",
)

VARIANTS = ("guarded", "literal")


class UnknownLabel(ValueError):
    def __init__(self, name: str):
        super().__init__(f"{name!r} is not a state, label, or action of the model")
        self.name = name


class EmptyInitialSet(ValueError):
    pass


@dataclass(frozen=True)
class ObjectiveSpec:
    kind: str
    horizon: int  # the time bound T
    init: str
    goal_label: str | None = "goal"
    init_region: str | tuple[str, ...] | None = None
    obs_labels: tuple[str, ...] = ()
    variant: str = "guarded"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown objective kind {self.kind!r}")
        variant = "guarded" if self.variant == "strict" else self.variant
        object.__setattr__(self, "variant", variant)
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.horizon < 0:
            raise ValueError("horizon must be nonnegative")
        object.__setattr__(self, "obs_labels", tuple(self.obs_labels))


def catalog() -> tuple[tuple[str, str, tuple[str, ...]], ...]:
    """Stable listing of the objective kinds for CLI discovery."""
    return (
        ("shortest-path", "reach the goal no later than any other path from the start", VARIANTS),
        ("longest-path", "among goal-reaching paths, arrive no earlier than any other", VARIANTS),
        ("init-state-robust", "one action sequence succeeds from every state of the initial region", VARIANTS),
        ("action-robust", "the plan still succeeds if any single action is replaced", VARIANTS),
        ("init-state-opaque", "a second start, same actions and observations, also reaches the goal", VARIANTS),
        ("current-state-opaque", "two observably identical runs from the start differ in their actions", VARIANTS),
    )


def _check_vocab(dts: Dts, name: str) -> None:
    if name not in dts.atom_vocabulary():
        raise UnknownLabel(name)


def _region_atom(spec: ObjectiveSpec, dts: Dts, path: str) -> Node:
    region = spec.init_region
    if region is None or region == () or region == "":
        raise EmptyInitialSet("an initial set is required for this objective")
    if isinstance(region, str):
        _check_vocab(dts, region)
        return Atom(region, path)
    states = set(dts.states)
    for s in region:
        if s not in states:
            raise UnknownLabel(s)
    out: Node = Atom(region[0], path)
    for s in region[1:]:
        out = Or(out, Atom(s, path))
    return out


def instantiate(spec: ObjectiveSpec, dts: Dts) -> Formula:
    """Expand the template into a surface formula over variables p1, p2."""
    T = spec.horizon
    if spec.init not in set(dts.states):
        raise UnknownLabel(spec.init)
    if spec.goal_label is not None:
        _check_vocab(dts, spec.goal_label)
    for o in spec.obs_labels:
        _check_vocab(dts, o)

    def sI(p: str) -> Node:
        return Atom(spec.init, p)

    def g(p: str) -> Node:
        assert spec.goal_label is not None
        return Atom(spec.goal_label, p)

    def F(n: Node) -> Node:
        return Eventually(n, T)

    def G(n: Node) -> Node:
        return Always(n, T)

    act_eq = ActEq("p1", "p2")
    obs_eq = ObsEq("p1", "p2")
    guarded = spec.variant == "guarded"

    if spec.kind in ("shortest-path", "longest-path"):
        if spec.goal_label is None:
            raise UnknownLabel("goal")
        # watched path is p2, compared against every p1 from the start
        prefix = (Quantifier(EXISTS, "p2"), Quantifier(FORALL, "p1"))
        if spec.kind == "shortest-path":
            if guarded:
                earlier = Until(Not(g("p2")), And(g("p1"), Not(g("p2"))), T)
                body = And(And(sI("p2"), F(g("p2"))), Implies(sI("p1"), Not(earlier)))
            else:
                body = And(And(And(sI("p1"), sI("p2")), F(g("p2"))),
                           F(Implies(g("p2"), F(g("p1")))))
        else:
            if guarded:
                later = Until(Not(g("p1")), And(g("p2"), Not(g("p1"))), T)
                body = And(And(sI("p2"), F(g("p2"))), Implies(sI("p1"), Not(later)))
            else:
                body = And(And(sI("p1"), sI("p2")), F(Implies(g("p1"), F(g("p2")))))
        return Formula(prefix, body)

    if spec.kind == "init-state-robust":
        if spec.goal_label is None:
            raise UnknownLabel("goal")
        prefix = (Quantifier(EXISTS, "p1"), Quantifier(FORALL, "p2"))
        region = _region_atom(spec, dts, "p2")
        if guarded:
            body = And(And(sI("p1"), F(g("p1"))),
                       Implies(And(region, G(act_eq)), F(g("p2"))))
        else:
            body = And(And(And(sI("p1"), region), And(F(g("p1")), F(g("p2")))),
                       G(act_eq))
        return Formula(prefix, body)

    if spec.kind == "action-robust":
        if spec.goal_label is None:
            raise UnknownLabel("goal")
        prefix = (Quantifier(EXISTS, "p1"), Quantifier(FORALL, "p2"))
        single_swap = G(Implies(Not(act_eq), Next(Always(act_eq, T))))
        if guarded:
            body = And(And(sI("p1"), F(g("p1"))),
                       Implies(And(sI("p2"), single_swap), F(g("p2"))))
        else:
            body = And(And(And(sI("p1"), sI("p2")), And(F(g("p1")), F(g("p2")))),
                       single_swap)
        return Formula(prefix, body)

    if spec.kind == "init-state-opaque":
        if spec.goal_label is None:
            raise UnknownLabel("goal")
        prefix = (Quantifier(EXISTS, "p1"), Quantifier(EXISTS, "p2"))
        body = And(And(And(sI("p1"), Not(sI("p2"))), G(act_eq)),
                   And(F(g("p1")), F(g("p2"))))
        if spec.obs_labels:
            body = And(body, G(obs_eq))
        return Formula(prefix, body)

    assert spec.kind == "current-state-opaque"
    if not spec.obs_labels:
        raise EmptyAlphabet("current-state opacity needs observation labels")
    prefix = (Quantifier(EXISTS, "p1"), Quantifier(EXISTS, "p2"))
    body = And(And(sI("p1"), sI("p2")),
               And(Not(G(act_eq)), G(obs_eq)))
    if spec.goal_label is not None:
        body = And(body, And(F(g("p1")), F(g("p2"))))
    return Formula(prefix, body)


def build_problem(spec: ObjectiveSpec, dts: Dts,
                  options: SolveOptions | None = None) -> Problem:
    """Instantiate, desugar against the model's alphabets, and package."""
    surface = instantiate(spec, dts)
    core = desugar(surface, action_alphabet=dts.actions, obs_alphabet=spec.obs_labels)
    return Problem.make(dts, core, options)


def objective_from_dict(doc: dict) -> ObjectiveSpec:
    """Objective spec files are JSON documents like
    ``{"objective": "current-state-opaque", "T": 20, "init": "r9c0",
    "goal_label": "goal", "variant": "guarded"}``."""
    try:
        kind = doc["objective"]
        T = int(doc["T"])
        init = doc["init"]
    except KeyError as exc:
        raise ValueError(f"objective file is missing required key {exc}") from exc
    region = doc.get("init_region")
    if isinstance(region, list):
        region = tuple(region)
    obs = doc.get("obs_labels", ())
    if isinstance(obs, str):
        obs = (obs,)
    return ObjectiveSpec(
        kind=kind,
        horizon=T,
        init=init,
        goal_label=doc.get("goal_label", "goal"),
        init_region=region,
        obs_labels=tuple(obs),
        variant=doc.get("variant", "guarded"),
    )
