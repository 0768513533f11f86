"""Primitive constraints, expression templates, and the reified nodes that
propagate them under relevance control.

A template (``Prim``, ``Or``, ``And``, ``Not``, ``OrImplied``, ``Const``) is an
immutable description of a complex constraint.  Templates are shared by
identity: using the same object twice inside an expression yields a DAG, and
the solver materializes it once with a reference count.

A node is the materialized form ``C == b with F``: it owns a truth variable
``b`` and a control set ``F`` and is decomposed lazily, when its relevance
test first passes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .control import CF, CT, IR
from .domains import ANY, INST, MAX, MIN, DomainStore, format_values

UNKNOWN = -1

# Bits used for the per-edge record of flags a parent has issued to a child.
CF_BIT = 1 << CF
CT_BIT = 1 << CT


# ---------------------------------------------------------------------------
# primitive constraints


class Primitive:
    """A primitive constraint with truth/falsity queries and DC enforcement.

    ``truth_wake``/``falsity_wake``/``enforce_wake`` give, per variable, the
    domain events after which the corresponding procedure may answer
    differently.
    """

    vars: tuple[int, ...] = ()
    truth_wake: tuple[int, ...] = ()
    falsity_wake: tuple[int, ...] = ()
    true_wake: tuple[int, ...] = ()
    false_wake: tuple[int, ...] = ()

    def is_true(self, st: DomainStore) -> bool:
        raise NotImplementedError

    def is_false(self, st: DomainStore) -> bool:
        raise NotImplementedError

    def enforce_true(self, st: DomainStore) -> None:
        raise NotImplementedError

    def enforce_false(self, st: DomainStore) -> None:
        raise NotImplementedError

    def holds(self, values: Sequence[int]) -> bool:
        """Evaluate on concrete values for ``self.vars`` (used by oracles)."""
        raise NotImplementedError

    def label(self, names: Sequence[str]) -> str:
        raise NotImplementedError

    def enforce(self, st: DomainStore, polarity: bool) -> None:
        if polarity:
            self.enforce_true(st)
        else:
            self.enforce_false(st)


class Member(Primitive):
    def __init__(self, x: int, values):
        self.x = x
        self.values = frozenset(values)
        self.vars = (x,)
        self.truth_wake = self.falsity_wake = (ANY,)
        self.true_wake = self.false_wake = (0,)

    def is_true(self, st):
        return st.masks[self.x] & ~st.mask_of(self.x, self.values) == 0

    def is_false(self, st):
        return st.masks[self.x] & st.mask_of(self.x, self.values) == 0

    def enforce_true(self, st):
        st.intersect(self.x, self.values)

    def enforce_false(self, st):
        st.set_mask(self.x, st.masks[self.x] & ~st.mask_of(self.x, self.values))

    def holds(self, values):
        return values[0] in self.values

    def label(self, names):
        return f"{names[self.x]} in {format_values(self.values)}"


class EqConst(Primitive):
    def __init__(self, x: int, a: int):
        self.x = x
        self.a = a
        self.vars = (x,)
        self.truth_wake = (INST,)
        self.falsity_wake = (ANY,)
        self.true_wake = self.false_wake = (0,)

    def is_true(self, st):
        return st.is_fixed(self.x) and st.contains(self.x, self.a)

    def is_false(self, st):
        return not st.contains(self.x, self.a)

    def enforce_true(self, st):
        st.assign(self.x, self.a)

    def enforce_false(self, st):
        st.remove_value(self.x, self.a)

    def holds(self, values):
        return values[0] == self.a

    def label(self, names):
        return f"{names[self.x]}={self.a}"


class _Binary(Primitive):
    op = "?"

    def __init__(self, x: int, y: int):
        self.x = x
        self.y = y
        self.vars = (x, y)
        # over a single variable the relation is constantly true or false
        self.reflexive = self.holds((0, 0)) if x == y else None

    def _constant(self, st: DomainStore, polarity: bool) -> None:
        if self.reflexive != polarity:
            st.set_mask(self.x, 0)

    def label(self, names):
        return f"{names[self.x]}{self.op}{names[self.y]}"


class Eq(_Binary):
    op = "="
    truth_wake = (INST, INST)
    falsity_wake = (ANY, ANY)
    true_wake = (ANY, ANY)
    false_wake = (INST, INST)

    def is_true(self, st):
        if self.reflexive is not None:
            return self.reflexive
        return st.is_fixed(self.x) and st.is_fixed(self.y) and st.min(self.x) == st.min(self.y)

    def is_false(self, st):
        if self.reflexive is not None:
            return not self.reflexive
        return st.masks[self.x] & st.mask_in(self.x, self.y) == 0

    def enforce_true(self, st):
        if self.reflexive is not None:
            return self._constant(st, True)
        st.intersect_var(self.x, self.y)
        st.intersect_var(self.y, self.x)

    def enforce_false(self, st):
        if self.reflexive is not None:
            return self._constant(st, False)
        _enforce_neq(st, self.x, self.y)

    def holds(self, values):
        return values[0] == values[1]


class Neq(_Binary):
    op = "!="
    truth_wake = (ANY, ANY)
    falsity_wake = (INST, INST)
    true_wake = (INST, INST)
    false_wake = (ANY, ANY)

    def is_true(self, st):
        if self.reflexive is not None:
            return self.reflexive
        return st.masks[self.x] & st.mask_in(self.x, self.y) == 0

    def is_false(self, st):
        if self.reflexive is not None:
            return not self.reflexive
        return st.is_fixed(self.x) and st.is_fixed(self.y) and st.min(self.x) == st.min(self.y)

    def enforce_true(self, st):
        if self.reflexive is not None:
            return self._constant(st, True)
        _enforce_neq(st, self.x, self.y)

    def enforce_false(self, st):
        if self.reflexive is not None:
            return self._constant(st, False)
        st.intersect_var(self.x, self.y)
        st.intersect_var(self.y, self.x)

    def holds(self, values):
        return values[0] != values[1]


def _enforce_neq(st: DomainStore, x: int, y: int) -> None:
    changed = True
    while changed:
        changed = False
        if st.is_fixed(x) and st.remove_value(y, st.min(x)):
            changed = True
        if st.is_fixed(y) and st.remove_value(x, st.min(y)):
            changed = True


class Leq(_Binary):
    op = "<="
    truth_wake = (MAX, MIN)
    falsity_wake = (MIN, MAX)
    true_wake = (MIN, MAX)
    false_wake = (MAX, MIN)

    def is_true(self, st):
        if self.reflexive is not None:
            return self.reflexive
        return st.max(self.x) <= st.min(self.y)

    def is_false(self, st):
        if self.reflexive is not None:
            return not self.reflexive
        return st.min(self.x) > st.max(self.y)

    def enforce_true(self, st):
        if self.reflexive is not None:
            return self._constant(st, True)
        st.tighten_max(self.x, st.max(self.y))
        st.tighten_min(self.y, st.min(self.x))

    def enforce_false(self, st):
        if self.reflexive is not None:
            return self._constant(st, False)
        # y < x
        st.tighten_max(self.y, st.max(self.x) - 1)
        st.tighten_min(self.x, st.min(self.y) + 1)

    def holds(self, values):
        return values[0] <= values[1]


class Lt(_Binary):
    op = "<"
    truth_wake = (MAX, MIN)
    falsity_wake = (MIN, MAX)
    true_wake = (MIN, MAX)
    false_wake = (MAX, MIN)

    def is_true(self, st):
        if self.reflexive is not None:
            return self.reflexive
        return st.max(self.x) < st.min(self.y)

    def is_false(self, st):
        if self.reflexive is not None:
            return not self.reflexive
        return st.min(self.x) >= st.max(self.y)

    def enforce_true(self, st):
        if self.reflexive is not None:
            return self._constant(st, True)
        st.tighten_max(self.x, st.max(self.y) - 1)
        st.tighten_min(self.y, st.min(self.x) + 1)

    def enforce_false(self, st):
        if self.reflexive is not None:
            return self._constant(st, False)
        # y <= x
        st.tighten_max(self.y, st.max(self.x))
        st.tighten_min(self.x, st.min(self.y))

    def holds(self, values):
        return values[0] < values[1]


# ---------------------------------------------------------------------------
# expression templates


class Expr:
    """Base class of constraint expression templates (compared by identity)."""

    children: tuple["Expr", ...] = ()
    label: Optional[str] = None


@dataclass(frozen=True, eq=False)
class Prim(Expr):
    kind: Primitive
    label: Optional[str] = None

    @property
    def children(self):
        return ()


@dataclass(frozen=True, eq=False)
class Const(Expr):
    value: bool
    label: Optional[str] = None

    @property
    def children(self):
        return ()


@dataclass(frozen=True, eq=False)
class Or(Expr):
    left: Expr
    right: Expr
    label: Optional[str] = None

    @property
    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True, eq=False)
class And(Expr):
    left: Expr
    right: Expr
    label: Optional[str] = None

    @property
    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True, eq=False)
class Not(Expr):
    arg: Expr
    label: Optional[str] = None

    @property
    def children(self):
        return (self.arg,)


@dataclass(frozen=True, eq=False)
class OrImplied(Expr):
    """``left or right``, annotated with a constraint ``implied`` that the
    disjunction entails."""

    left: Expr
    right: Expr
    implied: Expr
    label: Optional[str] = None

    @property
    def children(self):
        return (self.left, self.right, self.implied)


TRUE = Const(True)
FALSE = Const(False)


def any_of(exprs: Sequence[Expr], label: Optional[str] = None) -> Expr:
    """Right-nested binary disjunction; the empty disjunction is false."""
    if not exprs:
        return Const(False, label)
    acc = exprs[-1]
    for e in reversed(exprs[:-1]):
        acc = Or(e, acc)
    if label is not None and isinstance(acc, (Or, Prim)):
        acc = type(acc)(*_fields(acc)[:-1], label)
    return acc


def all_of(exprs: Sequence[Expr], label: Optional[str] = None) -> Expr:
    """Right-nested binary conjunction; the empty conjunction is true."""
    if not exprs:
        return Const(True, label)
    acc = exprs[-1]
    for e in reversed(exprs[:-1]):
        acc = And(e, acc)
    if label is not None and isinstance(acc, (And, Prim)):
        acc = type(acc)(*_fields(acc)[:-1], label)
    return acc


def _fields(e):
    return [getattr(e, f) for f in e.__dataclass_fields__]


def evaluate(expr: Expr, value_of) -> bool:
    """Truth of ``expr`` under a total assignment ``value_of(var) -> int``."""
    if isinstance(expr, Prim):
        return expr.kind.holds([value_of(v) for v in expr.kind.vars])
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Or):
        return evaluate(expr.left, value_of) or evaluate(expr.right, value_of)
    if isinstance(expr, OrImplied):
        return evaluate(expr.left, value_of) or evaluate(expr.right, value_of)
    if isinstance(expr, And):
        return evaluate(expr.left, value_of) and evaluate(expr.right, value_of)
    if isinstance(expr, Not):
        return not evaluate(expr.arg, value_of)
    raise TypeError(f"not an expression: {expr!r}")


def to_eager(expr: Expr) -> Expr:
    """Uncontrolled form: implied annotations become plain conjuncts.

    ``(C1 or C2 |> Ci)`` turns into ``(C1 or C2) and Ci``.  Sharing is kept.
    """
    memo: dict[int, Expr] = {}

    def go(e: Expr) -> Expr:
        key = id(e)
        if key in memo:
            return memo[key]
        if isinstance(e, OrImplied):
            out = And(Or(go(e.left), go(e.right)), go(e.implied), e.label)
        elif isinstance(e, Or):
            l, r = go(e.left), go(e.right)
            out = e if (l is e.left and r is e.right) else Or(l, r, e.label)
        elif isinstance(e, And):
            l, r = go(e.left), go(e.right)
            out = e if (l is e.left and r is e.right) else And(l, r, e.label)
        elif isinstance(e, Not):
            a = go(e.arg)
            out = e if a is e.arg else Not(a, e.label)
        else:
            out = e
        memo[key] = out
        return out

    return go(expr)


def variables_of(expr: Expr) -> list[int]:
    seen_nodes: set[int] = set()
    out: dict[int, None] = {}
    stack = [expr]
    while stack:
        e = stack.pop()
        if id(e) in seen_nodes:
            continue
        seen_nodes.add(id(e))
        if isinstance(e, Prim):
            for v in e.kind.vars:
                out.setdefault(v)
        stack.extend(reversed(e.children))
    return list(out)


# ---------------------------------------------------------------------------
# reified nodes
#
# Every node method receives the solver ``S`` (see kernel.Solver); nodes hold
# no reference to it so that templates and nodes stay picklable.


class Node:
    """Materialized ``template == b with ctrl``."""

    high_priority = True

    def __init__(self, nid: int, template: Optional[Expr], b: int, ctrl: int):
        self.id = nid
        self.template = template
        self.b = b
        self.ctrl = ctrl
        self.refc = 1
        self.deleted = False
        self.expanded = False
        self.children: tuple[Node, ...] = ()
        self.issued: list[int] = []
        # children that inherit this node's irrelevance once it is complete
        self.ir_heirs: list[Node] = []
        self.ir_passed = False
        self.queued = 0
        self.queries = 0

    def __repr__(self):
        kind = type(self).__name__
        return f"<{kind} #{self.id} b={self.b}>"

    def wants(self, S, var: int, events: int) -> bool:
        return False

    def propagate(self, S) -> None:
        raise NotImplementedError

    def is_high(self, S) -> bool:
        return True


class PrimNode(Node):
    """A reified primitive constraint."""

    def __init__(self, nid, template, b, ctrl):
        super().__init__(nid, template, b, ctrl)
        self.kind: Primitive = template.kind
        self.expanded = True

    def is_high(self, S):
        return S.tv[self.b] != UNKNOWN or S.irrelevant(self)

    def wants(self, S, var, events):
        kind = self.kind
        val = S.tv[self.b]
        if val == 1:
            masks = kind.true_wake
        elif val == 0:
            masks = kind.false_wake
        elif not S.controlled:
            masks = tuple(a | b for a, b in zip(kind.truth_wake, kind.falsity_wake))
        else:
            counts = S.ctrl.counts[self.ctrl]
            if counts[CF]:
                masks = kind.falsity_wake
                if counts[CT]:
                    masks = tuple(a | b for a, b in zip(masks, kind.truth_wake))
            elif counts[CT]:
                masks = kind.truth_wake
            else:
                return False
        for v, m in zip(kind.vars, masks):
            if v == var and m & events:
                return True
        return False

    def propagate(self, S):
        st = S.store
        kind = self.kind
        if S.controlled and S.irrelevant(self):
            S.delete(self)
            return
        val = S.tv[self.b]
        if val == 1:
            S.count_query(self)
            if kind.is_true(st):
                S.solved(self)
            else:
                kind.enforce_true(st)
            return
        if val == 0:
            S.count_query(self)
            if kind.is_false(st):
                S.solved(self)
            else:
                kind.enforce_false(st)
            return
        if S.controlled:
            counts = S.ctrl.counts[self.ctrl]
            check_true = counts[CT] > 0
            check_false = counts[CF] > 0
        else:
            check_true = check_false = True
        if check_true:
            S.count_query(self)
            if kind.is_true(st):
                S.decided(self, 1)
                return
        if check_false:
            S.count_query(self)
            if kind.is_false(st):
                S.decided(self, 0)


class ConstNode(Node):
    def __init__(self, nid, template, b, ctrl):
        super().__init__(nid, template, b, ctrl)
        self.expanded = True

    def propagate(self, S):
        S.set_truth(self.b, 1 if self.template.value else 0)


class BoolEq(Node):
    """``a == c`` between two truth variables, left behind when a connective
    reduces to one of its children."""

    def __init__(self, nid, a, c):
        super().__init__(nid, None, a, -1)
        self.other = c
        self.expanded = True

    def propagate(self, S):
        a, c = self.b, self.other
        va, vc = S.tv[a], S.tv[c]
        if va != UNKNOWN:
            S.set_truth(c, va)
            S.solved(self)
        elif vc != UNKNOWN:
            S.set_truth(a, vc)
            S.solved(self)


class _Connective(Node):
    def activate(self, S) -> bool:
        """Expand if relevant.  Returns False if the node stays dormant."""
        if self.expanded:
            return True
        if not S.controlled:
            S.expand(self)
            return True
        if S.irrelevant(self):
            S.delete(self)
            return False
        if not S.relevant(self):
            return False
        S.expand(self)
        return True


class OrNode(_Connective):
    """``or(b, b1, b2)``; with ``dual`` set it is ``and(b, b1, b2)``.

    Conjunction is handled as the De Morgan dual of disjunction: truth values
    and the roles of chk-true / chk-false swap.
    """

    dual = False

    def propagate(self, S):
        if not self.activate(S):
            return
        if S.controlled:
            self._controlled(S)
        else:
            self._eager(S)

    def _controlled(self, S):
        tv = S.tv
        c1, c2 = self.children[0], self.children[1]
        b, b1, b2 = self.b, c1.b, c2.b
        # "one" is the child value that decides the connective (1 for or,
        # 0 for and), "zero" the value that reduces it to the other child.
        one = 0 if self.dual else 1
        zero = 1 - one
        if tv[b1] == one or tv[b2] == one:
            S.set_truth(b, one)
        if tv[b] == zero:
            S.set_truth(b1, zero)
            S.set_truth(b2, zero)
        v1, v2 = tv[b1], tv[b2]
        if v1 == zero:
            S.equate(b, b2)
            S.forward(self, c2)
            self.on_reduce(S)
            S.delete(self)
            return
        if v2 == zero:
            S.equate(b, b1)
            S.forward(self, c1)
            self.on_reduce(S)
            S.delete(self)
            return
        if v1 == one:
            S.send_irrelevant(c2)
            self.on_reduce(S)
            S.delete(self)
            return
        if v2 == one:
            S.send_irrelevant(c1)
            self.on_reduce(S)
            S.delete(self)
            return
        if S.irrelevant(self):
            S.send_irrelevant(c1)
            S.send_irrelevant(c2)
            self.on_reduce(S)
            S.delete(self)
            return
        counts = S.ctrl.counts[self.ctrl]
        # For or: chk-false is the "watched" query sent to one child only and
        # b=1 asks for falsity of both.  For and the roles are swapped.
        watch, spread = (CT, CF) if self.dual else (CF, CT)
        wbit, sbit = 1 << watch, 1 << spread
        d1 = d2 = 0
        if tv[b] == one:
            d1 |= wbit
            d2 |= wbit
        if counts[watch]:
            d1 |= wbit
        if counts[spread]:
            d1 |= sbit
            d2 |= sbit
        S.issue(self, 0, d1)
        S.issue(self, 1, d2)

    def on_reduce(self, S):
        pass

    def _eager(self, S):
        tv = S.tv
        c1, c2 = self.children[0], self.children[1]
        b, b1, b2 = self.b, c1.b, c2.b
        one = 0 if self.dual else 1
        zero = 1 - one
        if tv[b1] == one or tv[b2] == one:
            S.set_truth(b, one)
        if tv[b] == zero:
            S.set_truth(b1, zero)
            S.set_truth(b2, zero)
        if tv[b1] == zero:
            if tv[b] != UNKNOWN:
                S.set_truth(b2, tv[b])
            elif tv[b2] != UNKNOWN:
                S.set_truth(b, tv[b2])
        if tv[b2] == zero:
            if tv[b] != UNKNOWN:
                S.set_truth(b1, tv[b])
            elif tv[b1] != UNKNOWN:
                S.set_truth(b, tv[b1])
        vb, v1, v2 = tv[b], tv[b1], tv[b2]
        if vb != UNKNOWN and (v1 == one or v2 == one or (v1 != UNKNOWN and v2 != UNKNOWN)):
            S.solved(self)


class AndNode(OrNode):
    dual = True


class OrImpliedNode(OrNode):
    """``or_impl(b, b1, b2, bi)``: a disjunction carrying an implied child.

    On top of the disjunction rules: ``bi = 0`` makes the disjunction false,
    ``b = 1`` asserts the implied child, and once the disjunction reduces to a
    single disjunct (or is otherwise retired) the implied child becomes
    irrelevant.
    """

    def _controlled(self, S):
        tv = S.tv
        ci = self.children[2]
        if tv[ci.b] == 0:
            S.set_truth(self.b, 0)
        if tv[self.b] == 1:
            S.set_truth(ci.b, 1)
        super()._controlled(S)

    def on_reduce(self, S):
        S.send_irrelevant(self.children[2])

    def _eager(self, S):  # pragma: no cover - eager mode rewrites the template
        raise AssertionError("or-implied nodes only exist under controlled propagation")


class NotNode(_Connective):
    def propagate(self, S):
        if not self.activate(S):
            return
        tv = S.tv
        child = self.children[0]
        b, bn = self.b, child.b
        if tv[b] != UNKNOWN:
            S.set_truth(bn, 1 - tv[b])
            S.delete(self)
            return
        if tv[bn] != UNKNOWN:
            S.set_truth(b, 1 - tv[bn])
            S.delete(self)
            return
        if not S.controlled:
            return
        if S.irrelevant(self):
            S.send_irrelevant(child)
            S.delete(self)
            return
        counts = S.ctrl.counts[self.ctrl]
        d = (CT_BIT if counts[CF] else 0) | (CF_BIT if counts[CT] else 0)
        S.issue(self, 0, d)


NODE_CLASSES = {
    Prim: PrimNode,
    Const: ConstNode,
    Or: OrNode,
    And: AndNode,
    Not: NotNode,
    OrImplied: OrImpliedNode,
}
