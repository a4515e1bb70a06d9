"""HyperLTL surface syntax: AST, parser, printer, validation and desugaring.

Formulas are a quantifier prefix (``exists p1. forall p2.``) over a
quantifier-free body.  The body mixes the four core connectives
(negation, conjunction, next, bounded until) with derived sugar:
disjunction, implication, bounded finally/globally, action equality
``act(p1)=act(p2)`` and observation equality ``obs(p1)=obs(p2)``.
``desugar`` rewrites everything into the core fragment; downstream
modules (horizon analysis, trace semantics, the constraint encoder)
only ever see core bodies.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

EXISTS = "exists"
FORALL = "forall"

# Reserved "no previous action" token.  Augmented traces carry it as a
# label at time 0, so it doubles as the anchor for the desugared
# tautology `true`.
EPSILON = "eps"


class FormulaError(ValueError):
    """Base class for everything the formula layer can reject."""


class FormulaSyntaxError(FormulaError):
    def __init__(self, message: str, pos: int, expected: Sequence[str] = ()):
        detail = f"at position {pos}: {message}"
        if expected:
            detail += " (expected " + " | ".join(expected) + ")"
        super().__init__(detail)
        self.pos = pos
        self.expected = tuple(expected)


class UnboundPathVar(FormulaError):
    def __init__(self, var: str):
        super().__init__(f"path variable {var!r} is not bound in the prefix")
        self.var = var


class DuplicateQuantifier(FormulaError):
    def __init__(self, var: str):
        super().__init__(f"path variable {var!r} is quantified more than once")
        self.var = var


class QuantifierNotInPrefix(FormulaError):
    def __init__(self, pos: int):
        super().__init__(f"at position {pos}: quantifiers are only allowed in the prefix")
        self.pos = pos


# Quantifiers never nest under connectives in this AST, so a formula
# that exists is prenex by construction.
NonPrenex = QuantifierNotInPrefix


class EmptyAlphabet(FormulaError):
    pass


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


class Node:
    """Base class for body nodes."""

    __slots__ = ()


@dataclass(frozen=True)
class Atom(Node):
    prop: str
    path: str


@dataclass(frozen=True)
class TrueConst(Node):
    pass


@dataclass(frozen=True)
class FalseConst(Node):
    pass


@dataclass(frozen=True)
class Not(Node):
    operand: Node


@dataclass(frozen=True)
class And(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Or(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Implies(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Next(Node):
    operand: Node


@dataclass(frozen=True)
class Until(Node):
    left: Node
    right: Node
    bound: int | None = None  # None = unbounded


@dataclass(frozen=True)
class Eventually(Node):
    operand: Node
    bound: int | None = None


@dataclass(frozen=True)
class Always(Node):
    operand: Node
    bound: int | None = None


@dataclass(frozen=True)
class ActEq(Node):
    left_path: str
    right_path: str


@dataclass(frozen=True)
class ObsEq(Node):
    left_path: str
    right_path: str


@dataclass(frozen=True)
class Quantifier:
    kind: str  # EXISTS or FORALL
    var: str


@dataclass(frozen=True)
class Formula:
    prefix: tuple[Quantifier, ...]
    body: Node

    def prefix_vars(self) -> tuple[str, ...]:
        return tuple(q.var for q in self.prefix)


CORE_NODES = (Atom, Not, And, Next, Until)


def path_vars(node: Node) -> Iterator[str]:
    """Yield every path variable occurring in ``node`` (with repeats)."""
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, Atom):
            yield n.path
        elif isinstance(n, (ActEq, ObsEq)):
            yield n.left_path
            yield n.right_path
        elif isinstance(n, (Not, Next, Eventually, Always)):
            stack.append(n.operand)
        elif isinstance(n, (And, Or, Implies, Until)):
            stack.append(n.left)
            stack.append(n.right)


def is_core(node: Node) -> bool:
    """True iff the body uses only atoms and the four core connectives."""
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, Atom):
            continue
        if isinstance(n, Not):
            stack.append(n.operand)
        elif isinstance(n, Next):
            stack.append(n.operand)
        elif isinstance(n, (And, Until)):
            stack.append(n.left)
            stack.append(n.right)
        else:
            return False
    return True


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_SYMBOLS = ("->", "[<=", "(", ")", "[", "]", "&", "|", "!", "@", "=", ".")
_KEYWORDS = {"exists", "forall", "true", "false", "act", "obs", "X", "F", "G", "U"}


@dataclass(frozen=True)
class _Token:
    kind: str  # IDENT, INT, symbol text, keyword text, EOF
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    toks: list[_Token] = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        matched = False
        for sym in _SYMBOLS:
            if text.startswith(sym, i):
                toks.append(_Token(sym, sym, i))
                i += len(sym)
                matched = True
                break
        if matched:
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(_Token("INT", text[i:j], i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = word if word in _KEYWORDS else "IDENT"
            toks.append(_Token(kind, word, i))
            i = j
            continue
        raise FormulaSyntaxError(f"unexpected character {c!r}", i)
    toks.append(_Token("EOF", "", n))
    return toks


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        if tok.kind != "EOF":
            self.i += 1
        return tok

    def expect(self, kind: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            raise FormulaSyntaxError(f"got {tok.text or 'end of input'!r}", tok.pos, [kind])
        return self.advance()

    def parse_formula(self) -> Formula:
        prefix: list[Quantifier] = []
        while self.peek().kind in (EXISTS, FORALL):
            kind = self.advance().kind
            var = self.expect("IDENT").text
            self.expect(".")
            prefix.append(Quantifier(kind, var))
        body = self.parse_implies()
        tok = self.peek()
        if tok.kind in (EXISTS, FORALL):
            raise QuantifierNotInPrefix(tok.pos)
        if tok.kind != "EOF":
            raise FormulaSyntaxError(f"trailing input {tok.text!r}", tok.pos, ["EOF"])
        return Formula(tuple(prefix), body)

    # Precedence, loosest first: -> (right), |, &, U (right), unary.
    def parse_implies(self) -> Node:
        left = self.parse_or()
        if self.peek().kind == "->":
            self.advance()
            right = self.parse_implies()
            return Implies(left, right)
        return left

    def parse_or(self) -> Node:
        left = self.parse_and()
        while self.peek().kind == "|":
            self.advance()
            left = Or(left, self.parse_and())
        return left

    def parse_and(self) -> Node:
        left = self.parse_until()
        while self.peek().kind == "&":
            self.advance()
            left = And(left, self.parse_until())
        return left

    def parse_until(self) -> Node:
        left = self.parse_unary()
        if self.peek().kind == "U":
            self.advance()
            bound = self.parse_bound()
            right = self.parse_until()
            return Until(left, right, bound)
        return left

    def parse_bound(self) -> int | None:
        if self.peek().kind != "[<=":
            return None
        self.advance()
        tok = self.expect("INT")
        self.expect("]")
        return int(tok.text)

    def parse_unary(self) -> Node:
        tok = self.peek()
        if tok.kind == "!":
            self.advance()
            return Not(self.parse_unary())
        if tok.kind == "X":
            self.advance()
            return Next(self.parse_unary())
        if tok.kind == "F":
            self.advance()
            bound = self.parse_bound()
            return Eventually(self.parse_unary(), bound)
        if tok.kind == "G":
            self.advance()
            bound = self.parse_bound()
            return Always(self.parse_unary(), bound)
        return self.parse_primary()

    def parse_primary(self) -> Node:
        tok = self.peek()
        if tok.kind in (EXISTS, FORALL):
            raise QuantifierNotInPrefix(tok.pos)
        if tok.kind == "(":
            self.advance()
            inner = self.parse_implies()
            self.expect(")")
            return inner
        if tok.kind == "true":
            self.advance()
            return TrueConst()
        if tok.kind == "false":
            self.advance()
            return FalseConst()
        if tok.kind in ("act", "obs"):
            return self.parse_equality(tok.kind)
        if tok.kind == "IDENT":
            self.advance()
            self.expect("@")
            path = self.expect("IDENT").text
            return Atom(tok.text, path)
        raise FormulaSyntaxError(
            f"got {tok.text or 'end of input'!r}", tok.pos,
            ["atom", "(", "!", "X", "F", "G", "true", "false"])

    def parse_equality(self, head: str) -> Node:
        self.advance()
        self.expect("(")
        left = self.expect("IDENT").text
        self.expect(")")
        self.expect("=")
        again = self.peek()
        if again.kind != head:
            raise FormulaSyntaxError(f"got {again.text!r}", again.pos, [head])
        self.advance()
        self.expect("(")
        right = self.expect("IDENT").text
        self.expect(")")
        return ActEq(left, right) if head == "act" else ObsEq(left, right)


def parse(text: str) -> Formula:
    """Parse and validate a formula in the published grammar."""
    f = _Parser(_tokenize(text)).parse_formula()
    validate(f)
    return f


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------


def _fmt_bound(bound: int | None) -> str:
    return "" if bound is None else f"[<={bound}]"


def format_body(node: Node) -> str:
    if isinstance(node, Atom):
        return f"{node.prop}@{node.path}"
    if isinstance(node, TrueConst):
        return "true"
    if isinstance(node, FalseConst):
        return "false"
    if isinstance(node, Not):
        return f"!{format_body(node.operand)}"
    if isinstance(node, Next):
        return f"X {format_body(node.operand)}"
    if isinstance(node, Eventually):
        return f"F{_fmt_bound(node.bound)} {format_body(node.operand)}"
    if isinstance(node, Always):
        return f"G{_fmt_bound(node.bound)} {format_body(node.operand)}"
    if isinstance(node, And):
        return f"({format_body(node.left)} & {format_body(node.right)})"
    if isinstance(node, Or):
        return f"({format_body(node.left)} | {format_body(node.right)})"
    if isinstance(node, Implies):
        return f"({format_body(node.left)} -> {format_body(node.right)})"
    if isinstance(node, Until):
        return f"({format_body(node.left)} U{_fmt_bound(node.bound)} {format_body(node.right)})"
    if isinstance(node, ActEq):
        return f"act({node.left_path})=act({node.right_path})"
    if isinstance(node, ObsEq):
        return f"obs({node.left_path})=obs({node.right_path})"
    raise TypeError(f"not a formula node: {node!r}")


def format_formula(f: Formula) -> str:
    parts = [f"{q.kind} {q.var}." for q in f.prefix]
    parts.append(format_body(f.body))
    return " ".join(parts)


# ---------------------------------------------------------------------------
# Validation and desugaring
# ---------------------------------------------------------------------------


def validate(f: Formula) -> None:
    """Reject open formulas and duplicate quantifiers."""
    seen: set[str] = set()
    for q in f.prefix:
        if q.var in seen:
            raise DuplicateQuantifier(q.var)
        seen.add(q.var)
    for pv in path_vars(f.body):
        if pv not in seen:
            raise UnboundPathVar(pv)


def _iff(a: Node, b: Node) -> Node:
    return And(Not(And(a, Not(b))), Not(And(b, Not(a))))


def desugar(f: Formula, action_alphabet: Sequence[str] = (),
            obs_alphabet: Sequence[str] = (), *,
            equality_as_conjunction: bool = False) -> Formula:
    """Rewrite a validated formula into the core fragment.

    Equality sugar expands pointwise over the given alphabets, as
    biconditionals by default.  ``equality_as_conjunction`` switches to
    the plain-conjunction reading (both atoms required true on both
    paths), kept only for fidelity experiments; it is unsatisfiable for
    almost every model.
    """
    validate(f)
    actions = sorted(set(action_alphabet))
    observations = sorted(set(obs_alphabet))

    def tautology() -> Node:
        if not f.prefix:
            raise FormulaError("true/false require at least one quantified path variable")
        anchor = Atom(EPSILON, f.prefix[0].var)
        return Not(And(anchor, Not(anchor)))

    def expand(paths: tuple[str, str], alphabet: list[str], what: str) -> Node:
        if not alphabet:
            raise EmptyAlphabet(f"{what} equality used with an empty alphabet")
        mk = And if equality_as_conjunction else _iff
        out = mk(Atom(alphabet[0], paths[0]), Atom(alphabet[0], paths[1]))
        for sym in alphabet[1:]:
            out = And(out, mk(Atom(sym, paths[0]), Atom(sym, paths[1])))
        return out

    def rec(n: Node) -> Node:
        if isinstance(n, Atom):
            return n
        if isinstance(n, TrueConst):
            return tautology()
        if isinstance(n, FalseConst):
            return Not(tautology())
        if isinstance(n, Not):
            return Not(rec(n.operand))
        if isinstance(n, And):
            return And(rec(n.left), rec(n.right))
        if isinstance(n, Or):
            return Not(And(Not(rec(n.left)), Not(rec(n.right))))
        if isinstance(n, Implies):
            # a -> b  ==  !(a & !b)
            return Not(And(rec(n.left), Not(rec(n.right))))
        if isinstance(n, Next):
            return Next(rec(n.operand))
        if isinstance(n, Until):
            return Until(rec(n.left), rec(n.right), n.bound)
        if isinstance(n, Eventually):
            return Until(tautology(), rec(n.operand), n.bound)
        if isinstance(n, Always):
            # G_T a == !(true U_T !a)
            return Not(Until(tautology(), Not(rec(n.operand)), n.bound))
        if isinstance(n, ActEq):
            return expand((n.left_path, n.right_path), actions, "action")
        if isinstance(n, ObsEq):
            return expand((n.left_path, n.right_path), observations, "observation")
        raise TypeError(f"not a formula node: {n!r}")

    out = Formula(f.prefix, rec(f.body))
    assert is_core(out.body)
    return out
