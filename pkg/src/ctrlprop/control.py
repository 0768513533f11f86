"""Trailed multisets of control flags with one-way forwarding links."""

from __future__ import annotations

from typing import Callable, Optional

from .domains import Trail, UsageError

CF = 0  # chk-false: the falsity of the constraint is queried
CT = 1  # chk-true: the truth of the constraint is queried
IR = 2  # irrelevant until the next backtrack

FLAGS = (CF, CT, IR)
FLAG_NAMES = {CF: "chk-false", CT: "chk-true", IR: "irrelevant"}


class ControlStore:
    """All control sets of one solver instance.

    A set is identified by an integer handle.  ``counts[s]`` is a three-slot
    list indexed by flag; ``forwards[s]`` lists ``(target, mask)`` links: the
    target mirrors every change to ``s`` of the flags whose bit is in ``mask``.
    ``listener(s, flag)`` fires on each change.
    """

    def __init__(self, trail: Optional[Trail] = None):
        self.trail = trail if trail is not None else Trail()
        self.counts: list[list[int]] = []
        self.forwards: list[list[int]] = []
        self.owner: list[object] = []
        self.listener: Optional[Callable[[int, int], None]] = None
        self.ct_created = 0

    def __len__(self):
        return len(self.counts)

    def new_set(self, owner=None) -> int:
        s = len(self.counts)
        t = self.trail
        t.append(self.counts, [0, 0, 0])
        t.append(self.forwards, [])
        t.append(self.owner, owner)
        return s

    def count(self, s: int, flag: int) -> int:
        return self.counts[s][flag]

    def contains(self, s: int, flag: int) -> bool:
        return self.counts[s][flag] > 0

    def flags(self, s: int) -> set[str]:
        return {FLAG_NAMES[f] for f in FLAGS if self.counts[s][f] > 0}

    def add_flag(self, s: int, flag: int, k: int = 1) -> None:
        if k <= 0:
            return
        c = self.counts[s]
        self.trail.set_item(c, flag, c[flag] + k)
        if flag == CT:
            self.ct_created += k
        if self.listener is not None:
            self.listener(s, flag)
        for t, mask in self.forwards[s]:
            if mask >> flag & 1:
                self.add_flag(t, flag, k)

    def subtract_flag(self, s: int, flag: int, k: int = 1) -> None:
        if k <= 0:
            return
        c = self.counts[s]
        if c[flag] < k:
            raise AssertionError(f"control set {s}: {FLAG_NAMES[flag]} count would go negative")
        self.trail.set_item(c, flag, c[flag] - k)
        if self.listener is not None:
            self.listener(s, flag)
        for t, mask in self.forwards[s]:
            if mask >> flag & 1:
                self.subtract_flag(t, flag, k)

    def mark_irrelevant(self, s: int) -> None:
        self.add_flag(s, IR)

    def reaches(self, src: int, dst: int) -> bool:
        """True if a chain of forwards leads from ``src`` to ``dst``."""
        stack, seen = [src], set()
        while stack:
            s = stack.pop()
            if s == dst:
                return True
            if s in seen:
                continue
            seen.add(s)
            stack.extend(t for t, _ in self.forwards[s])
        return False

    def link_forward(self, src: int, dst: int, flags=FLAGS) -> None:
        """``src ~> dst``: replicate the current ``flags`` of ``src`` and mirror later changes."""
        if src == dst or self.reaches(dst, src):
            raise UsageError(f"forwarding {src} -> {dst} would create a cycle")
        mask = sum(1 << f for f in flags)
        self.trail.append(self.forwards[src], (dst, mask))
        for flag in flags:
            self.add_flag(dst, flag, self.counts[src][flag])
