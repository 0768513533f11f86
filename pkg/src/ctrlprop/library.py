"""The case-study constraints as expression builders.

Each builder returns a template; post it on a controlled solver for lazy,
relevance-driven decomposition, or on an uncontrolled one for the eager
baseline (``build_uncontrolled`` gives the rewritten template explicitly).
"""

from __future__ import annotations

from typing import Optional, Sequence

from .constraints import (
    And,
    Const,
    EqConst,
    Eq,
    Expr,
    Leq,
    Lt,
    Neq,
    Or,
    OrImplied,
    Prim,
    all_of,
    any_of,
    to_eager,
)

TupleVar = Sequence[int]


def _span(names: Optional[Sequence[str]], vars: Sequence[int]) -> str:
    if names is None:
        return ",".join(f"v{v}" for v in vars)
    if len(vars) <= 2:
        return ",".join(names[v] for v in vars)
    return f"{names[vars[0]]}..{names[vars[-1]]}"


def build_clause(vars: Sequence[int], names: Optional[Sequence[str]] = None) -> Expr:
    """``clause(x1..xn) := x1 = 1 or clause(x2..xn)``; the empty clause is false."""
    vars = list(vars)
    if not vars:
        return Const(False, "clause()")
    acc: Expr = Prim(EqConst(vars[-1], 1))
    for i in range(len(vars) - 2, -1, -1):
        acc = Or(Prim(EqConst(vars[i], 1)), acc, f"clause({_span(names, vars[i:])})")
    return acc


def build_different_tp(xs: TupleVar, ys: TupleVar, names: Optional[Sequence[str]] = None) -> Expr:
    """Two tuples differ in at least one position."""
    if len(xs) != len(ys):
        raise ValueError(f"tuple arities differ: {len(xs)} vs {len(ys)}")
    if not xs:
        raise ValueError("different_tp needs tuples of arity >= 1")
    label = f"different_tp(<{_span(names, xs)}>,<{_span(names, ys)}>)"
    return any_of([Prim(Neq(x, y)) for x, y in zip(xs, ys)], label)


def build_alldifferent_tp(tuples: Sequence[TupleVar], names: Optional[Sequence[str]] = None) -> Expr:
    """Pairwise ``different_tp`` over all tuples; fewer than two tuples is trivially true."""
    tuples = [list(t) for t in tuples]
    if len(tuples) < 2:
        return Const(True, "alldifferent_tp()")
    arity = len(tuples[0])
    if any(len(t) != arity for t in tuples):
        raise ValueError("all tuples must have the same arity")
    pairs = [
        build_different_tp(tuples[i], tuples[j], names)
        for i in range(len(tuples))
        for j in range(i + 1, len(tuples))
    ]
    return all_of(pairs, f"alldifferent_tp({len(tuples)} tuples)")


def build_lex(
    xs: TupleVar,
    ys: TupleVar,
    annotated: bool = True,
    names: Optional[Sequence[str]] = None,
) -> Expr:
    """Non-strict lexicographic ordering ``xs <=lex ys``.

    ``lex(x, y) := x1 < y1  or  (x1 = y1 and lex(x[1:], y[1:]))`` with the
    empty case true.  With ``annotated`` each disjunction carries the implied
    constraint ``x1 <= y1``, which is what makes propagation domain-consistent.
    """
    if len(xs) != len(ys):
        raise ValueError(f"tuple arities differ: {len(xs)} vs {len(ys)}")
    xs, ys = list(xs), list(ys)
    acc: Expr = Const(True, "lex(<>,<>)")
    for i in range(len(xs) - 1, -1, -1):
        x, y = xs[i], ys[i]
        label = f"lex(<{_span(names, xs[i:])}>,<{_span(names, ys[i:])}>)"
        rest = And(Prim(Eq(x, y)), acc)
        if annotated:
            acc = OrImplied(Prim(Lt(x, y)), rest, Prim(Leq(x, y)), label)
        else:
            acc = Or(Prim(Lt(x, y)), rest, label)
    return acc


def build_uncontrolled(expr: Expr) -> Expr:
    """The eager baseline form of ``expr`` (implied annotations become conjuncts)."""
    return to_eager(expr)


__all__ = [
    "TupleVar",
    "build_clause",
    "build_different_tp",
    "build_alldifferent_tp",
    "build_lex",
    "build_uncontrolled",
]
