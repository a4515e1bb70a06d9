"""Discrete transition systems, their augmentation, and grid-world models.

A DTS has finite states and actions, a *partial* deterministic
transition function and a propositional labeling.  The augmented DTS
pairs each state with the action that produced it, so action names (and
state names) become ordinary labels; open-loop strategies then generate
label traces that the semantics layer can evaluate directly.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator

from .formula import EPSILON

CRASH = "crash"

GRID_ACTIONS = ("U", "D", "L", "R")
_GRID_MOVES = {"U": (-1, 0), "D": (1, 0), "L": (0, -1), "R": (0, 1)}

_CELL_RE = re.compile(r"r(\d+)c(\d+)$")


class UndefinedTransition(ValueError):
    """A strategy step left the partial transition function."""

    def __init__(self, t: int, state: str, action: str):
        super().__init__(f"no transition from {state!r} under {action!r} at step {t}")
        self.t = t
        self.state = state
        self.action = action


class GridError(ValueError):
    pass


class EmptyGrid(GridError):
    pass


class NoFreeCell(GridError):
    pass


@dataclass(frozen=True)
class Dts:
    states: tuple[str, ...]
    actions: tuple[str, ...]
    trans: dict[tuple[str, str], str]
    labels: dict[str, frozenset[str]]

    def __post_init__(self):
        states = set(self.states)
        actions = set(self.actions)
        if EPSILON in actions:
            raise ValueError(f"{EPSILON!r} is reserved and cannot be an action name")
        if states & actions:
            raise ValueError(f"states and actions must be disjoint: {sorted(states & actions)}")
        for (s, a), s2 in self.trans.items():
            if s not in states or a not in actions or s2 not in states:
                raise ValueError(f"transition ({s},{a})->{s2} uses unknown identifiers")
        for s in self.states:
            if s not in self.labels:
                raise ValueError(f"state {s!r} has no label entry")

    def label_props(self) -> frozenset[str]:
        out: set[str] = set()
        for props in self.labels.values():
            out |= props
        return frozenset(out)

    def atom_vocabulary(self) -> frozenset[str]:
        """Everything an atom may name: labels, states, actions, epsilon."""
        return self.label_props() | set(self.states) | set(self.actions) | {EPSILON}


@dataclass(frozen=True)
class Strategy:
    """Open-loop plan: an initial state plus a finite action sequence."""

    init: str
    acts: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "acts", tuple(self.acts))


@dataclass(frozen=True)
class AugDts:
    dts: Dts
    origin: Dts
    pairs: dict[str, tuple[str, str]]

    @staticmethod
    def state_name(prev: str, base: str) -> str:
        return f"({prev},{base})"

    def lift(self, strategy: Strategy) -> Strategy:
        return Strategy(self.state_name(EPSILON, strategy.init), strategy.acts)


def augment(m: Dts) -> AugDts:
    """Pair every state with the action that produced it.

    The augmented labeling of ``(a, s)`` is ``labels(s) | {a, s}``, so
    state and action names become label propositions.
    """
    pairs: list[tuple[str, str]] = [(EPSILON, s) for s in m.states]
    reachable = {(a, s2) for (_, a), s2 in m.trans.items()}
    for s in m.states:
        for a in m.actions:
            if (a, s) in reachable:
                pairs.append((a, s))

    names = {p: AugDts.state_name(*p) for p in pairs}
    trans: dict[tuple[str, str], str] = {}
    for prev, s in pairs:
        for a in m.actions:
            s2 = m.trans.get((s, a))
            if s2 is not None:
                trans[(names[(prev, s)], a)] = names[(a, s2)]
    labels = {
        names[(prev, s)]: m.labels[s] | {prev, s}
        for prev, s in pairs
    }
    aug = Dts(
        states=tuple(names[p] for p in pairs),
        actions=m.actions,
        trans=trans,
        labels=labels,
    )
    return AugDts(dts=aug, origin=m, pairs={names[p]: p for p in pairs})


def state_path(m: Dts, strategy: Strategy) -> list[str]:
    """States visited under the strategy; raises UndefinedTransition."""
    if strategy.init not in set(m.states):
        raise ValueError(f"unknown initial state {strategy.init!r}")
    out = [strategy.init]
    for t, a in enumerate(strategy.acts):
        nxt = m.trans.get((out[-1], a))
        if nxt is None:
            raise UndefinedTransition(t, out[-1], a)
        out.append(nxt)
    return out


def path_of(m: Dts, strategy: Strategy) -> list[frozenset[str]]:
    """Label trace of the unique path generated by the strategy."""
    return [m.labels[s] for s in state_path(m, strategy)]


def correspond(m: Dts, strategy: Strategy) -> list[frozenset[str]]:
    """Augmented label trace: time t also carries the arriving action and
    the state name (epsilon at time 0)."""
    states = state_path(m, strategy)
    trace = [m.labels[states[0]] | {EPSILON, states[0]}]
    for t, a in enumerate(strategy.acts):
        s = states[t + 1]
        trace.append(m.labels[s] | {a, s})
    return trace


def iter_strategies(m: Dts, horizon: int) -> Iterator[Strategy]:
    """All strategies of the given length whose path is defined.

    Deterministic order: initial states in declaration order, then
    depth-first over actions in declaration order.
    """
    def walk(state: str, acts: tuple[str, ...]) -> Iterator[tuple[str, ...]]:
        if len(acts) == horizon:
            yield acts
            return
        for a in m.actions:
            nxt = m.trans.get((state, a))
            if nxt is not None:
                yield from walk(nxt, acts + (a,))

    for s0 in m.states:
        for acts in walk(s0, ()):
            yield Strategy(s0, acts)


def count_strategies(m: Dts, horizon: int, cap: int) -> int:
    """Number of valid strategies of the given length, saturating at cap."""
    counts = {s: 1 for s in m.states}
    for _ in range(horizon):
        nxt = {s: 0 for s in m.states}
        for (s, _a), s2 in m.trans.items():
            nxt[s] += counts[s2]
        counts = {s: min(c, cap) for s, c in nxt.items()}
    return min(sum(counts.values()), cap)


# ---------------------------------------------------------------------------
# Text format:  states: / actions: / trans: s a s' / label: s p1 p2 ...
# ---------------------------------------------------------------------------


def parse_dts(text: str) -> Dts:
    states: list[str] = []
    actions: list[str] = []
    trans: dict[tuple[str, str], str] = {}
    labels: dict[str, frozenset[str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(";"):
            continue
        head, _, rest = line.partition(":")
        head = head.strip()
        fields = rest.split()
        if head == "states":
            states.extend(fields)
        elif head == "actions":
            actions.extend(fields)
        elif head == "trans":
            if len(fields) != 3:
                raise ValueError(f"line {lineno}: trans needs 'state action state'")
            trans[(fields[0], fields[1])] = fields[2]
        elif head == "label":
            if not fields:
                raise ValueError(f"line {lineno}: label needs a state")
            labels[fields[0]] = labels.get(fields[0], frozenset()) | frozenset(fields[1:])
        else:
            raise ValueError(f"line {lineno}: unknown section {head!r}")
    for s in states:
        labels.setdefault(s, frozenset())
    return Dts(tuple(states), tuple(actions), trans, labels)


def format_dts(m: Dts) -> str:
    lines = [
        "states: " + " ".join(m.states),
        "actions: " + " ".join(m.actions),
    ]
    for s in m.states:
        for a in m.actions:
            s2 = m.trans.get((s, a))
            if s2 is not None:
                lines.append(f"trans: {s} {a} {s2}")
    for s in m.states:
        props = sorted(m.labels[s])
        if props:
            lines.append(f"label: {s} " + " ".join(props))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Grid worlds
# ---------------------------------------------------------------------------

_GRID_CHARS = set("#.SGR")


@dataclass(frozen=True)
class GridMap:
    """Rectangular ASCII map: '#' obstacle, '.' free, 'S' start,
    'G' goal, 'R' initial-region cell."""

    rows: tuple[str, ...]

    def __post_init__(self):
        if not self.rows or not self.rows[0]:
            raise EmptyGrid("grid has no cells")
        width = len(self.rows[0])
        for r, row in enumerate(self.rows):
            if len(row) != width:
                raise GridError(f"row {r} has width {len(row)}, expected {width}")
            bad = set(row) - _GRID_CHARS
            if bad:
                raise GridError(f"row {r} has unknown cells {sorted(bad)}")
        if all(c == "#" for row in self.rows for c in row):
            raise NoFreeCell("grid has no free cell")

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def n_cols(self) -> int:
        return len(self.rows[0])

    def is_free(self, r: int, c: int) -> bool:
        return 0 <= r < self.n_rows and 0 <= c < self.n_cols and self.rows[r][c] != "#"

    @staticmethod
    def cell_name(r: int, c: int) -> str:
        return f"r{r}c{c}"

    def cells_marked(self, mark: str) -> tuple[str, ...]:
        return tuple(
            self.cell_name(r, c)
            for r, row in enumerate(self.rows)
            for c, ch in enumerate(row)
            if ch == mark
        )

    @property
    def start_cells(self) -> tuple[str, ...]:
        return self.cells_marked("S")

    @property
    def goal_cells(self) -> tuple[str, ...]:
        return self.cells_marked("G")

    @property
    def region_cells(self) -> tuple[str, ...]:
        return self.cells_marked("R")


@dataclass(frozen=True)
class GridOptions:
    row_observation: bool = False


def parse_grid(text: str) -> tuple[GridMap, GridOptions]:
    """Parse map rows followed by an optional ``options:`` block of flags."""
    rows: list[str] = []
    flags: set[str] = set()
    in_options = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(";"):
            continue
        if line == "options:":
            in_options = True
            continue
        if in_options:
            flags.add(line)
        else:
            rows.append(line)
    unknown = flags - {"row_observation"}
    if unknown:
        raise GridError(f"unknown options {sorted(unknown)}")
    return GridMap(tuple(rows)), GridOptions(row_observation="row_observation" in flags)


def cell_coords(name: str) -> tuple[int, int] | None:
    m = _CELL_RE.match(name)
    return (int(m.group(1)), int(m.group(2))) if m else None


def from_grid(grid: GridMap, opts: GridOptions | None = None) -> Dts:
    """Totalized grid dynamics: moving into an obstacle or off the map
    lands in an absorbing ``crash`` state."""
    opts = opts or GridOptions()
    states: list[str] = []
    labels: dict[str, frozenset[str]] = {}
    for r, row in enumerate(grid.rows):
        for c, ch in enumerate(row):
            if ch == "#":
                continue
            name = grid.cell_name(r, c)
            states.append(name)
            props = set()
            if ch == "G":
                props.add("goal")
            if ch == "S":
                props.add("start")
            if ch == "R":
                props.add("init_region")
            if opts.row_observation:
                props.add(f"row_{r}")
            labels[name] = frozenset(props)
    if not states:
        raise NoFreeCell("grid has no free cell")

    trans: dict[tuple[str, str], str] = {}
    for r, row in enumerate(grid.rows):
        for c, ch in enumerate(row):
            if ch == "#":
                continue
            name = grid.cell_name(r, c)
            for a in GRID_ACTIONS:
                dr, dc = _GRID_MOVES[a]
                r2, c2 = r + dr, c + dc
                trans[(name, a)] = grid.cell_name(r2, c2) if grid.is_free(r2, c2) else CRASH
    for a in GRID_ACTIONS:
        trans[(CRASH, a)] = CRASH
    states.append(CRASH)
    labels[CRASH] = frozenset({CRASH})
    return Dts(tuple(states), GRID_ACTIONS, trans, labels)
