"""The propagation kernel: truth variables, node registry, agenda, fixpoint.

The agenda has two FIFO tiers.  Boolean connectives, truth-variable links and
asserted primitives run first; evaluation of inconclusive primitive queries
runs only when the first tier is empty.  Both tiers deduplicate per node.
Fixpoints do not depend on this ordering; it only fixes which intermediate
states are observable (see ``Solver.on_milestone``).
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, fields
from typing import Callable, Iterable, Optional

from .constraints import (
    NODE_CLASSES,
    UNKNOWN,
    BoolEq,
    Const,
    Expr,
    Node,
    Prim,
    PrimNode,
    to_eager,
)
from .control import CF, CT, IR, ControlStore
from .domains import DomainStore, Inconsistency, Trail, UsageError

HIGH = 1
LOW = 2


@dataclass
class Counters:
    activations: int = 0
    queries: int = 0
    created: int = 0
    deleted: int = 0
    domain_mutations: int = 0
    search_nodes: int = 0
    backtracks: int = 0
    ct_created: int = 0

    def as_dict(self) -> dict[str, int]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def __iadd__(self, other: "Counters"):
        for f in fields(self):
            setattr(self, f.name, getattr(self, f.name) + getattr(other, f.name))
        return self


class Solver:
    """One constraint store with its domains, control sets and agenda.

    ``controlled=False`` gives the eager baseline: every template is fully
    decomposed when posted, implied annotations become conjuncts, and every
    undecided reified primitive evaluates both of its queries whenever woken.
    """

    def __init__(
        self,
        controlled: bool = True,
        agenda_rng: Optional[random.Random] = None,
        delete_solved: bool = True,
    ):
        self.controlled = controlled
        self.delete_solved = delete_solved
        self.trail = Trail()
        self.store = DomainStore(self.trail)
        self.store.listener = self._on_domain
        self.ctrl = ControlStore(self.trail)
        self.ctrl.listener = self._on_flag
        self.tv: list[int] = []
        self.tv_subs: list[list[Node]] = []
        self.var_subs: list[list[Node]] = []
        self.nodes: list[Node] = []
        self.node_of: dict[int, Node] = {}
        self.roots: list[Node] = []
        self.high: deque[Node] = deque()
        self.low: deque[Node] = deque()
        self.agenda_rng = agenda_rng
        self.current: Optional[Node] = None
        self._activations = 0
        self._queries = 0
        self._created = 0
        self._deleted = 0
        self.dirty = False
        self.failed = False
        self.on_milestone: Optional[Callable[["Solver"], None]] = None
        self._templates: list[Expr] = []

    # -- variables -------------------------------------------------------

    def new_int_var(self, initial: Iterable[int], name: Optional[str] = None) -> int:
        var = self.store.new_int_var(initial, name)
        self.trail.append(self.var_subs, [])
        return var

    def new_truth_var(self) -> int:
        t = len(self.tv)
        self.trail.append(self.tv, UNKNOWN)
        self.trail.append(self.tv_subs, [])
        return t

    def truth(self, t: int) -> int:
        return self.tv[t]

    def set_truth(self, t: int, value: int) -> None:
        cur = self.tv[t]
        if cur == value:
            return
        if cur != UNKNOWN:
            raise Inconsistency(f"truth variable {t} is {cur}, cannot become {value}")
        self.trail.set_item(self.tv, t, value)
        for node in self.tv_subs[t]:
            self.schedule(node)

    # -- frames ----------------------------------------------------------

    def push_frame(self) -> int:
        return self.trail.push()

    def pop_frame(self, frame: int) -> None:
        self.clear_agenda()
        self.trail.pop(frame)

    def clear_agenda(self) -> None:
        for node in self.high:
            node.queued = 0
        for node in self.low:
            node.queued = 0
        self.high.clear()
        self.low.clear()

    # -- counters --------------------------------------------------------

    @property
    def counters(self) -> Counters:
        return Counters(
            activations=self._activations,
            queries=self._queries,
            created=self._created,
            deleted=self._deleted,
            domain_mutations=self.store.mutations,
            ct_created=self.ctrl.ct_created,
        )

    def count_query(self, node: Node) -> None:
        self._queries += 1
        node.queries += 1

    # -- relevance -------------------------------------------------------

    def relevant(self, node: Node) -> bool:
        return is_relevant(self.tv[node.b], self.ctrl.counts[node.ctrl])

    def irrelevant(self, node: Node) -> bool:
        if node.ctrl < 0:
            return False
        return self.ctrl.counts[node.ctrl][IR] >= node.refc

    # -- node lifecycle --------------------------------------------------

    def _new_node(self, cls, template, b, ctrl) -> Node:
        node = cls(len(self.nodes), template, b, ctrl)
        self.trail.append(self.nodes, node)
        self._created += 1
        return node

    def materialize(self, template: Expr, _expand: bool = True) -> Node:
        """The node for ``template``, created on first use, shared afterwards."""
        key = id(template)
        node = self.node_of.get(key)
        if node is not None and not (
            node.deleted and self.irrelevant(node) and self.tv[node.b] == UNKNOWN
        ):
            self.trail.set_attr(node, "refc", node.refc + 1)
            if not node.deleted and self.relevant(node):
                # the new parent may change what this node has to do
                self.schedule(node)
            return node
        self._templates.append(template)  # keeps id() keys alive
        cls = NODE_CLASSES[type(template)]
        b = self.new_truth_var()
        node = self._new_node(cls, template, b, -1)
        node.ctrl = self.ctrl.new_set(owner=node)
        if key in self.node_of:
            self.trail.set_item(self.node_of, key, node)
        else:
            self.node_of[key] = node
            self.trail.record(_dict_del, self.node_of, key, None)
        self.trail.append(self.tv_subs[b], node)
        if isinstance(template, Const):
            self.set_truth(b, 1 if template.value else 0)
        elif isinstance(template, Prim):
            for v in dict.fromkeys(template.kind.vars):
                self.trail.append(self.var_subs[v], node)
            if not self.controlled:
                self.schedule(node)
        elif not self.controlled and _expand:
            self.expand(node)
        return node

    def expand(self, node: Node) -> None:
        """Decompose ``node``: create or reuse child nodes and watch their truth.

        Under controlled propagation only ``node`` itself is decomposed; its
        children wait for their own relevance.  The eager baseline decomposes
        the whole template, iteratively.
        """
        if self.controlled:
            self._expand_one(node)
            return
        pending = [node]
        while pending:
            n = pending.pop()
            if not n.expanded:
                self._expand_one(n)
                pending.extend(c for c in n.children if not c.expanded)

    def _expand_one(self, node: Node) -> None:
        self.trail.set_attr(node, "expanded", True)
        children = tuple(self.materialize(t, _expand=False) for t in node.template.children)
        self.trail.set_attr(node, "children", children)
        self.trail.set_attr(node, "issued", [0] * len(children))
        for c in children:
            self.trail.append(self.tv_subs[c.b], node)
        self.schedule(node)

    def delete(self, node: Node) -> None:
        """Remove ``node`` from the store, withdrawing flags it issued."""
        if node.deleted:
            return
        self.trail.set_attr(node, "deleted", True)
        self._deleted += 1
        if node.issued and any(node.issued):
            for i in range(len(node.issued)):
                self.issue(node, i, 0)

    # -- control-flag plumbing used by connective nodes -------------------

    def issue(self, node: Node, i: int, desired: int) -> None:
        """Make the flags ``node`` contributes to child ``i`` equal ``desired``."""
        old = node.issued[i]
        if old == desired:
            return
        self.trail.set_item(node.issued, i, desired)
        s = node.children[i].ctrl
        added = desired & ~old
        removed = old & ~desired
        for flag in (CF, CT):
            if added >> flag & 1:
                self.ctrl.add_flag(s, flag)
        for flag in (CF, CT):
            if removed >> flag & 1:
                self.ctrl.subtract_flag(s, flag)

    def send_irrelevant(self, child: Node) -> None:
        self.ctrl.add_flag(child.ctrl, IR)

    def forward(self, node: Node, child: Node) -> None:
        """``F ~> F_child``.

        Query flags are mirrored count for count.  Irrelevance is different:
        an ir count means something only against the node's own reference
        count, so the child gets a single ir once ``node`` is irrelevant to
        all of its parents.
        """
        self.ctrl.link_forward(node.ctrl, child.ctrl, (CF, CT))
        self.trail.append(node.ir_heirs, child)
        self._pass_irrelevance(node)

    def _pass_irrelevance(self, node: Node) -> None:
        if node.ir_heirs and not node.ir_passed and self.irrelevant(node):
            self.trail.set_attr(node, "ir_passed", True)
            for child in node.ir_heirs:
                self.send_irrelevant(child)

    def equate(self, a: int, c: int) -> None:
        va, vc = self.tv[a], self.tv[c]
        if va != UNKNOWN:
            self.set_truth(c, va)
        elif vc != UNKNOWN:
            self.set_truth(a, vc)
        else:
            link = BoolEq(len(self.nodes), a, c)
            self.trail.append(self.nodes, link)
            self._created += 1
            self.trail.append(self.tv_subs[a], link)
            self.trail.append(self.tv_subs[c], link)

    def solved(self, node: Node) -> None:
        """``node`` is entailed or disentailed; retire it unless configured otherwise."""
        if self.delete_solved:
            self.delete(node)

    def decided(self, node: Node, value: int) -> None:
        """A query on ``node`` answered decisively."""
        self.set_truth(node.b, value)
        self.solved(node)
        self.dirty = True

    # -- posting ---------------------------------------------------------

    def post(self, expr: Expr, truth: Optional[bool] = True) -> Node:
        """Add ``expr`` to the store, asserted true/false, or reified if ``truth`` is None."""
        if not self.controlled:
            expr = to_eager(expr)
        node = self.materialize(expr)
        self.roots.append(node)
        if truth is not None:
            try:
                self.set_truth(node.b, 1 if truth else 0)
            except Inconsistency:
                # reported by the next propagate(); undone with the frame
                self.trail.set_attr(self, "failed", True)
        self.schedule(node)
        self.dirty = True
        return node

    # -- agenda ----------------------------------------------------------

    def schedule(self, node: Node) -> None:
        if node.deleted:
            return
        if node.is_high(self):
            if not node.queued & HIGH:
                node.queued |= HIGH
                self.high.append(node)
        elif not node.queued & LOW:
            node.queued |= LOW
            self.low.append(node)

    def _on_domain(self, var: int, events: int) -> None:
        cur = self.current
        for node in self.var_subs[var]:
            if node is not cur and not node.deleted and node.wants(self, var, events):
                self.schedule(node)

    def _on_flag(self, s: int, flag: int) -> None:
        node = self.ctrl.owner[s]
        if node is None:
            return
        if flag == IR and node.ir_heirs:
            self._pass_irrelevance(node)
        if not node.deleted:
            self.schedule(node)

    def _take(self, queue: deque, bit: int) -> Node:
        if self.agenda_rng is None or len(queue) == 1:
            node = queue.popleft()
        else:
            i = self.agenda_rng.randrange(len(queue))
            queue.rotate(-i)
            node = queue.popleft()
            queue.rotate(i)
        node.queued &= ~bit
        return node

    def propagate(self) -> bool:
        """Run the agenda to fixpoint.  False means an inconsistency was found."""
        high, low = self.high, self.low
        if self.failed:
            self.clear_agenda()
            return False
        try:
            while True:
                if high:
                    node = self._take(high, HIGH)
                elif low:
                    if self.dirty and self.on_milestone is not None:
                        self.dirty = False
                        self.on_milestone(self)
                    node = self._take(low, LOW)
                else:
                    break
                if node.deleted:
                    continue
                self._activations += 1
                self.current = node
                node.propagate(self)
                self.current = None
            if self.dirty and self.on_milestone is not None:
                self.on_milestone(self)
            self.dirty = False
            return True
        except Inconsistency:
            self.current = None
            self.clear_agenda()
            self.dirty = False
            return False

    run_to_fixpoint = propagate

    # -- inspection ------------------------------------------------------

    def live_nodes(self) -> list[Node]:
        return [n for n in self.nodes if not n.deleted]

    def prim_nodes(self) -> list[PrimNode]:
        return [n for n in self.nodes if isinstance(n, PrimNode)]

    def falsity_queried(self) -> list[PrimNode]:
        """Primitive nodes currently holding a pending falsity query."""
        return self._queried(CF)

    def truth_queried(self) -> list[PrimNode]:
        return self._queried(CT)

    def _queried(self, flag: int) -> list[PrimNode]:
        counts = self.ctrl.counts
        tv = self.tv
        return [
            n
            for n in self.nodes
            if isinstance(n, PrimNode)
            and not n.deleted
            and tv[n.b] == UNKNOWN
            and (counts[n.ctrl][flag] > 0 if self.controlled else True)
            and not self.irrelevant(n)
        ]

    def asserted_prims(self) -> list[PrimNode]:
        tv = self.tv
        return [n for n in self.nodes if isinstance(n, PrimNode) and not n.deleted and tv[n.b] != UNKNOWN]

    def snapshot(self) -> tuple:
        """Full engine state, for undo-law checks."""
        st = self.store
        return (
            tuple(st.masks),
            tuple(st.offsets),
            tuple(self.tv),
            tuple(tuple(c) for c in self.ctrl.counts),
            tuple(tuple(f) for f in self.ctrl.forwards),
            tuple(
                (
                    n.id,
                    n.deleted,
                    n.expanded,
                    n.refc,
                    tuple(n.issued),
                    tuple(c.id for c in n.children),
                    tuple(c.id for c in n.ir_heirs),
                    n.ir_passed,
                )
                for n in self.nodes
            ),
            tuple(sorted((k, n.id) for k, n in self.node_of.items())),
            tuple(len(s) for s in self.var_subs),
            tuple(len(s) for s in self.tv_subs),
        )


def _dict_del(d, key, _):
    del d[key]


def is_relevant(b_value: int, counts) -> bool:
    """Whether reasoning about ``C == b with F`` is worthwhile."""
    return b_value == 1 or counts[CT] > 0 or b_value == 0 or counts[CF] > 0


__all__ = ["Solver", "Counters", "Inconsistency", "UsageError", "is_relevant"]
