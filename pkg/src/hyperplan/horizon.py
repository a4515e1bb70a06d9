"""Required time horizon per path variable.

An atom contributes 0 to its own variable and -inf to every other;
``X`` adds one step, a bounded until adds its bound to the larger of its
operands, and negation/conjunction/quantifiers are transparent.  The
conventions ``x + (-inf) = -inf`` and ``max(x, -inf) = x`` come for free
from float arithmetic, with finite horizons kept as ints.

The result is an upper bound on how far a formula can look into each
path, not a minimal one.
"""
from __future__ import annotations

from .formula import And, Atom, Formula, Next, Node, Not, Until, is_core

NEG_INF = float("-inf")


class UnboundedOperator(ValueError):
    """An until without a finite bound reached horizon analysis."""


def horizon(f: Formula | Node, pv: str) -> int | float:
    """H(f, pv): finite steps if pv occurs in the body, else -inf."""
    body = f.body if isinstance(f, Formula) else f
    if not is_core(body):
        raise ValueError("horizon analysis expects a desugared core body")

    def rec(n: Node) -> int | float:
        if isinstance(n, Atom):
            return 0 if n.path == pv else NEG_INF
        if isinstance(n, Not):
            return rec(n.operand)
        if isinstance(n, Next):
            return rec(n.operand) + 1
        if isinstance(n, And):
            return max(rec(n.left), rec(n.right))
        assert isinstance(n, Until)
        if n.bound is None:
            raise UnboundedOperator("until without a finite bound")
        return max(rec(n.left), rec(n.right)) + n.bound

    return rec(body)


def horizons(f: Formula) -> dict[str, int | float]:
    """Horizon map over every prefix variable."""
    return {q.var: horizon(f, q.var) for q in f.prefix}


def action_count(h: int | float) -> int:
    """Length of the action sequence a variable needs: zero when the
    variable never occurs (only an initial state is quantified)."""
    return int(h) if h != NEG_INF else 0
