"""Integer variables over finite domains, domain events, and the trail.

Domains are stored as Python ints used as bitsets, relative to a per-variable
offset (the smallest value of the initial domain).  Every mutation made while
a frame is open is recorded on the trail so that popping the frame restores
the exact previous state.
"""

from __future__ import annotations

from operator import setitem
from typing import Callable, Iterable, Optional

# Domain event bits.  ANY is set on every change.
INST = 1
MIN = 2
MAX = 4
ANY = 8
BOUNDS = MIN | MAX

EVENT_NAMES = {INST: "instantiated", MIN: "min-changed", MAX: "max-changed", ANY: "any-removed"}


class Inconsistency(Exception):
    """A domain wiped out or a truth value was contradicted; search must backtrack."""


class UsageError(Exception):
    pass


def event_names(events: int) -> set[str]:
    return {name for bit, name in EVENT_NAMES.items() if events & bit}


def _pop_last(lst, _a, _b):
    lst.pop()


class Trail:
    """Stack of frames over a log of undo records.

    An undo record is ``(fn, a, b, c)`` and is undone by calling ``fn(a, b, c)``.
    Nothing is recorded while no frame is open: root-level state is permanent.
    """

    def __init__(self):
        self.entries: list[tuple] = []
        self.frames: list[int] = []

    @property
    def depth(self) -> int:
        return len(self.frames)

    def record(self, fn, a, b, c):
        if self.frames:
            self.entries.append((fn, a, b, c))

    def set_item(self, container, key, value):
        if self.frames:
            self.entries.append((setitem, container, key, container[key]))
        container[key] = value

    def set_attr(self, obj, name, value):
        if self.frames:
            self.entries.append((setattr, obj, name, getattr(obj, name)))
        setattr(obj, name, value)

    def append(self, lst, item):
        lst.append(item)
        if self.frames:
            self.entries.append((_pop_last, lst, None, None))

    def push(self) -> int:
        self.frames.append(len(self.entries))
        return len(self.frames) - 1

    def pop(self, frame: int) -> None:
        if frame != len(self.frames) - 1:
            raise UsageError(f"can only pop the topmost frame {len(self.frames) - 1}, got {frame}")
        mark = self.frames.pop()
        entries = self.entries
        while len(entries) > mark:
            fn, a, b, c = entries.pop()
            fn(a, b, c)


class FiniteDomain:
    """Immutable view of a domain: its sorted values plus min and max."""

    __slots__ = ("values", "min", "max")

    def __init__(self, values: Iterable[int]):
        vals = tuple(sorted(set(int(v) for v in values)))
        self.values = vals
        self.min = vals[0] if vals else None
        self.max = vals[-1] if vals else None

    @classmethod
    def interval(cls, lo: int, hi: int) -> "FiniteDomain":
        return cls(range(lo, hi + 1))

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __contains__(self, v):
        return v in self.values

    def __eq__(self, other):
        if isinstance(other, FiniteDomain):
            return self.values == other.values
        if isinstance(other, (set, frozenset)):
            return set(self.values) == other
        return NotImplemented

    def __hash__(self):
        return hash(self.values)

    def __repr__(self):
        return f"FiniteDomain({format_values(self.values)})"


def format_values(values: Iterable[int]) -> str:
    """Render a set of integers as ``{1,3..5}``; runs of two or more use ``..``."""
    vals = sorted(values)
    parts = []
    i = 0
    while i < len(vals):
        j = i
        while j + 1 < len(vals) and vals[j + 1] == vals[j] + 1:
            j += 1
        parts.append(str(vals[i]) if i == j else f"{vals[i]}..{vals[j]}")
        i = j + 1
    return "{" + ",".join(parts) + "}"


def _low(mask: int) -> int:
    return (mask & -mask).bit_length() - 1


class DomainStore:
    """Finite-domain integer variables.

    ``listener(var, events)`` is called after every effective change; the
    kernel uses it to wake suspended constraints.
    """

    def __init__(self, trail: Optional[Trail] = None):
        self.trail = trail if trail is not None else Trail()
        self.masks: list[int] = []
        self.offsets: list[int] = []
        self.names: list[str] = []
        self.listener: Optional[Callable[[int, int], None]] = None
        self.mutations = 0

    def __len__(self):
        return len(self.masks)

    def new_int_var(self, initial: Iterable[int], name: Optional[str] = None) -> int:
        values = list(initial)
        if not values:
            raise ValueError("cannot create a variable with an empty domain")
        offset = min(values)
        mask = 0
        for v in values:
            mask |= 1 << (v - offset)
        var = len(self.masks)
        t = self.trail
        t.append(self.masks, mask)
        t.append(self.offsets, offset)
        t.append(self.names, name if name is not None else f"v{var}")
        return var

    # -- queries ---------------------------------------------------------

    def min(self, var: int) -> int:
        m = self.masks[var]
        return (m & -m).bit_length() - 1 + self.offsets[var]

    def max(self, var: int) -> int:
        return self.masks[var].bit_length() - 1 + self.offsets[var]

    def size(self, var: int) -> int:
        return bin(self.masks[var]).count("1")

    def is_fixed(self, var: int) -> bool:
        m = self.masks[var]
        return m & (m - 1) == 0

    def contains(self, var: int, v: int) -> bool:
        i = v - self.offsets[var]
        return i >= 0 and (self.masks[var] >> i) & 1 == 1

    def values(self, var: int) -> list[int]:
        m = self.masks[var]
        off = self.offsets[var]
        out = []
        i = 0
        while m:
            if m & 1:
                out.append(i + off)
            m >>= 1
            i += 1
        return out

    def domain(self, var: int) -> FiniteDomain:
        return FiniteDomain(self.values(var))

    def mask_in(self, var: int, other: int) -> int:
        """Domain of ``other`` expressed as a bitmask in ``var``'s coordinates."""
        shift = self.offsets[other] - self.offsets[var]
        m = self.masks[other]
        if shift >= 0:
            return m << shift
        return m >> -shift

    def mask_of(self, var: int, values: Iterable[int]) -> int:
        off = self.offsets[var]
        mask = 0
        for v in values:
            if v >= off:
                mask |= 1 << (v - off)
        return mask

    # -- mutations -------------------------------------------------------

    def set_mask(self, var: int, new: int) -> int:
        """Replace the domain of ``var`` by the subset ``new``; return event bits."""
        old = self.masks[var]
        new &= old
        if new == old:
            return 0
        if new == 0:
            raise Inconsistency(f"domain of {self.names[var]} wiped out")
        events = ANY
        if (old & -old) != (new & -new):
            events |= MIN
        if old.bit_length() != new.bit_length():
            events |= MAX
        if new & (new - 1) == 0:
            events |= INST
        self.trail.set_item(self.masks, var, new)
        self.mutations += 1
        if self.listener is not None:
            self.listener(var, events)
        return events

    def remove_value(self, var: int, v: int) -> int:
        i = v - self.offsets[var]
        if i < 0:
            return 0
        return self.set_mask(var, self.masks[var] & ~(1 << i))

    def tighten_min(self, var: int, lb: int) -> int:
        i = lb - self.offsets[var]
        if i <= 0:
            return 0
        return self.set_mask(var, (self.masks[var] >> i) << i)

    def tighten_max(self, var: int, ub: int) -> int:
        i = ub - self.offsets[var]
        if i < 0:
            raise Inconsistency(f"domain of {self.names[var]} wiped out")
        return self.set_mask(var, self.masks[var] & ((1 << (i + 1)) - 1))

    def assign(self, var: int, v: int) -> int:
        if not self.contains(var, v):
            raise Inconsistency(f"{v} not in domain of {self.names[var]}")
        return self.set_mask(var, 1 << (v - self.offsets[var]))

    def intersect(self, var: int, values: Iterable[int]) -> int:
        return self.set_mask(var, self.mask_of(var, values))

    def intersect_var(self, var: int, other: int) -> int:
        return self.set_mask(var, self.mask_in(var, other))
