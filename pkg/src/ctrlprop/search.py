"""Seeded random search, the controlled-vs-uncontrolled benchmark, and traces.

Search branches by picking a random uninstantiated variable and a random value
of its domain, then randomly either assigning or excluding the value; the
other choice is the alternative branch.  Three independent ``random.Random``
streams (variable, value, branch) are seeded from the run seed, so a seed
fixes the whole search tree in both propagation modes.
"""

from __future__ import annotations

import csv
import logging
import random
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

from .constraints import Expr, evaluate
from .domains import Inconsistency, format_values
from .kernel import Counters, Solver
from .library import build_alldifferent_tp, build_clause, build_different_tp, build_lex

log = logging.getLogger(__name__)

CONSTRAINTS = ("clause", "different_tp", "alldifferent_tp", "lex")
ALIASES = {"diff": "different_tp", "alldiff": "alldifferent_tp"}
MODES = ("controlled", "uncontrolled")

CSV_COLUMNS = ("constraint", "n", "mode", "seed", "activations", "queries", "created", "deleted", "nodes", "backtracks")
RATIO_COUNTERS = ("activations", "queries", "created", "deleted", "domain_mutations")


def canonical_constraint(name: str) -> str:
    name = ALIASES.get(name, name)
    if name not in CONSTRAINTS:
        raise ValueError(f"unknown constraint {name!r}; expected one of {CONSTRAINTS} or {tuple(ALIASES)}")
    return name


@dataclass(frozen=True)
class SearchConfig:
    constraint: str
    n: int
    tuples: int = 20
    domain: tuple[int, int] = (1, 10)
    seed: int = 0
    mode: str = "controlled"
    runs: int = 1
    annotated: bool = True

    def __post_init__(self):
        object.__setattr__(self, "constraint", canonical_constraint(self.constraint))
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.mode not in MODES + ("both",):
            raise ValueError(f"unknown mode {self.mode!r}")
        lo, hi = self.domain
        if lo > hi:
            raise ValueError(f"empty domain {lo}..{hi}")

    @property
    def modes(self) -> tuple[str, ...]:
        return MODES if self.mode == "both" else (self.mode,)


@dataclass
class SearchResult:
    solution: Optional[dict[str, int]]
    counters: Counters
    decisions: list[tuple] = field(default_factory=list)

    @property
    def satisfiable(self) -> bool:
        return self.solution is not None


def build_instance(config: SearchConfig, solver: Solver) -> tuple[Expr, list[int]]:
    """Create the variables of a benchmark instance and its constraint."""
    new = solver.new_int_var
    names = solver.store.names
    lo, hi = config.domain
    dom = range(lo, hi + 1)
    n = config.n
    kind = config.constraint
    if kind == "clause":
        xs = [new((0, 1), f"x{i + 1}") for i in range(n)]
        return build_clause(xs, names), xs
    if kind == "different_tp":
        xs = [new(dom, f"x{i + 1}") for i in range(n)]
        ys = [new(dom, f"y{i + 1}") for i in range(n)]
        return build_different_tp(xs, ys, names), xs + ys
    if kind == "lex":
        xs = [new(dom, f"x{i + 1}") for i in range(n)]
        ys = [new(dom, f"y{i + 1}") for i in range(n)]
        return build_lex(xs, ys, config.annotated, names), xs + ys
    tuples = [[new(dom, f"t{j + 1}_{i + 1}") for i in range(n)] for j in range(config.tuples)]
    return build_alldifferent_tp(tuples, names), [v for t in tuples for v in t]


def random_search(
    config: SearchConfig,
    seed: Optional[int] = None,
    controlled: Optional[bool] = None,
    on_fixpoint: Optional[Callable[[Solver], None]] = None,
) -> SearchResult:
    """Depth-first random search for one solution of the configured instance.

    ``on_fixpoint`` is called after every successful propagation, including
    the initial one.
    """
    seed = config.seed if seed is None else seed
    if controlled is None:
        controlled = config.mode != "uncontrolled"
    S = Solver(controlled=controlled)
    expr, vars = build_instance(config, S)
    var_rng = random.Random(f"{seed}/variable")
    val_rng = random.Random(f"{seed}/value")
    branch_rng = random.Random(f"{seed}/branch")
    st = S.store
    decisions: list[tuple] = []
    nodes = backtracks = 0

    S.post(expr)
    ok = S.propagate()
    if ok and on_fixpoint:
        on_fixpoint(S)

    # entries: [frame, var, value, assign_first, second_tried]
    stack: list[list] = []

    def branch(entry, first):
        nonlocal nodes
        frame = S.push_frame()
        entry[0] = frame
        nodes += 1
        _, var, value, assign_first, _ = entry
        assign = assign_first if first else not assign_first
        try:
            if assign:
                st.assign(var, value)
            else:
                st.remove_value(var, value)
            good = S.propagate()
        except Inconsistency:
            S.clear_agenda()
            good = False
        decisions.append((var, value, "=" if assign else "!=", good))
        if good and on_fixpoint:
            on_fixpoint(S)
        return good

    solution = None
    if ok:
        while True:
            if ok:
                free = [v for v in vars if not st.is_fixed(v)]
                if not free:
                    solution = {st.names[v]: st.min(v) for v in vars}
                    if not evaluate(expr, st.min):
                        raise AssertionError("search accepted an assignment that violates the constraint")
                    break
                var = var_rng.choice(free)
                value = val_rng.choice(st.values(var))
                entry = [None, var, value, branch_rng.random() < 0.5, False]
                stack.append(entry)
                ok = branch(entry, True)
                continue
            backtracks += 1
            while stack:
                top = stack[-1]
                S.pop_frame(top[0])
                if not top[4]:
                    top[4] = True
                    ok = branch(top, False)
                    break
                stack.pop()
            else:
                break
    counters = S.counters
    counters.search_nodes = nodes
    counters.backtracks = backtracks
    return SearchResult(solution, counters, decisions)


# ---------------------------------------------------------------------------
# benchmark


def _run_one(args) -> dict:
    config, mode, seed = args
    res = random_search(config, seed=seed, controlled=(mode == "controlled"))
    c = res.counters
    return {
        "constraint": config.constraint,
        "n": config.n,
        "tuples": config.tuples if config.constraint == "alldifferent_tp" else "",
        "mode": mode,
        "seed": seed,
        "satisfiable": res.satisfiable,
        **c.as_dict(),
    }


def run_benchmark(configs: Iterable[SearchConfig], jobs: int = 1) -> list[dict]:
    """One row per (config, mode, seed); seeds are ``config.seed + i`` for each run."""
    tasks = [
        (cfg, mode, cfg.seed + i)
        for cfg in configs
        for i in range(cfg.runs)
        for mode in cfg.modes
    ]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_one, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    rows = []
    for t in tasks:
        rows.append(_run_one(t))
        log.debug("%s n=%d %s seed=%d done", t[0].constraint, t[0].n, t[1], t[2])
    return rows


def summarize(rows: Sequence[dict]) -> list[dict]:
    """Controlled/uncontrolled ratio of each counter, summed over seeds."""
    groups: dict[tuple, dict[str, dict[str, int]]] = {}
    for r in rows:
        key = (r["constraint"], r["n"], r.get("tuples", ""))
        g = groups.setdefault(key, {})
        acc = g.setdefault(r["mode"], {k: 0 for k in RATIO_COUNTERS + ("runs",)})
        for k in RATIO_COUNTERS:
            acc[k] += r[k]
        acc["runs"] += 1
    out = []
    for (constraint, n, tuples), g in groups.items():
        if "controlled" not in g or "uncontrolled" not in g:
            continue
        c, u = g["controlled"], g["uncontrolled"]
        row = {"constraint": constraint, "n": n, "tuples": tuples, "runs": c["runs"]}
        for k in RATIO_COUNTERS:
            row[f"{k}_ratio"] = c[k] / u[k] if u[k] else float("nan")
        out.append(row)
    return out


def write_csv(rows: Sequence[dict], path, columns: Sequence[str] = CSV_COLUMNS) -> None:
    aliases = {"nodes": "search_nodes"}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([r[aliases.get(c, c)] if aliases.get(c, c) in r else r.get(c, "") for c in columns])


def write_summary_csv(summary: Sequence[dict], path) -> None:
    if not summary:
        Path(path).write_text("")
        return
    columns = list(summary[0])
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns)
        w.writeheader()
        for r in summary:
            w.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in r.items()})


# ---------------------------------------------------------------------------
# instance files and traces


@dataclass
class Instance:
    domains: dict[str, list[int]]
    xs: list[str]
    ys: list[str]


@dataclass
class TraceEvent:
    step: int
    asserted: list[str]
    falsity_queried: list[str]
    truth_queried: list[str]
    domains: dict[str, tuple[int, ...]]

    def key(self):
        return (self.asserted, self.falsity_queried, self.truth_queried, self.domains)


_RANGE_NAMES = re.compile(r"^([A-Za-z_]+)(\d+)\.\.\1?(\d+)$")


def _parse_values(text: str) -> list[int]:
    values: list[int] = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if ".." in item:
            lo, hi = item.split("..")
            values.extend(range(int(lo), int(hi) + 1))
        else:
            values.append(int(item))
    return values


def _parse_names(text: str) -> list[str]:
    text = text.strip()
    m = _RANGE_NAMES.match(text)
    if m:
        prefix, lo, hi = m.group(1), int(m.group(2)), int(m.group(3))
        return [f"{prefix}{i}" for i in range(lo, hi + 1)]
    return [t.strip() for t in text.split(",") if t.strip()]


def parse_instance(text: str) -> Instance:
    """Parse the line-oriented instance format.

    ::

        # comment
        x1: 2
        x2: 1,3,4
        x3: 1..5
        ...
        lex x1..x5 <= y1..y5
    """
    domains: dict[str, list[int]] = {}
    lex_line = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("lex "):
            if lex_line is not None:
                raise ValueError(f"line {lineno}: only one constraint line is allowed")
            lex_line = (lineno, line[4:])
            continue
        if ":" not in line:
            raise ValueError(f"line {lineno}: expected 'name: values' or a lex line, got {raw!r}")
        name, values = line.split(":", 1)
        name = name.strip()
        if name in domains:
            raise ValueError(f"line {lineno}: variable {name} declared twice")
        vals = _parse_values(values)
        if not vals:
            raise ValueError(f"line {lineno}: variable {name} has an empty domain")
        domains[name] = vals
    if lex_line is None:
        raise ValueError("no 'lex ... <= ...' constraint line")
    lineno, body = lex_line
    if "<=" not in body:
        raise ValueError(f"line {lineno}: expected 'lex X <= Y'")
    left, right = body.split("<=", 1)
    xs, ys = _parse_names(left), _parse_names(right)
    if len(xs) != len(ys):
        raise ValueError(f"line {lineno}: tuples have different lengths {len(xs)} and {len(ys)}")
    for name in xs + ys:
        if name not in domains:
            raise ValueError(f"line {lineno}: undeclared variable {name}")
    return Instance(domains, xs, ys)


def load_instance(path) -> Instance:
    return parse_instance(Path(path).read_text())


def capture_state(S: Solver, step: int, vars: Sequence[int]) -> TraceEvent:
    names = S.store.names
    asserted = []
    tv = S.tv
    for n in S.nodes:
        if n.deleted or n.template is None or tv[n.b] != 1:
            continue
        if hasattr(n, "kind"):
            asserted.append(n.kind.label(names))
        elif not n.expanded and n.template.label:
            asserted.append(n.template.label)
    return TraceEvent(
        step=step,
        asserted=asserted,
        falsity_queried=[n.kind.label(names) for n in S.falsity_queried()],
        truth_queried=[n.kind.label(names) for n in S.truth_queried()],
        domains={names[v]: tuple(S.store.values(v)) for v in vars},
    )


def trace_lex(instance: Instance, annotated: bool = True) -> list[TraceEvent]:
    """States of controlled propagation of ``lex`` between inference milestones.

    A milestone is reached whenever all Boolean, control and enforcement work
    caused by the last decisive primitive query (or by posting) has run.
    Consecutive identical states are reported once.
    """
    S = Solver(controlled=True)
    var_of = {name: S.new_int_var(vals, name) for name, vals in instance.domains.items()}
    xs = [var_of[n] for n in instance.xs]
    ys = [var_of[n] for n in instance.ys]
    order = list(var_of.values())
    events: list[TraceEvent] = []

    def record(s: Solver):
        ev = capture_state(s, len(events), order)
        if events and events[-1].key() == ev.key():
            return
        events.append(ev)

    S.post(build_lex(xs, ys, annotated, S.store.names))
    record(S)
    S.on_milestone = record
    if not S.propagate():
        events.append(TraceEvent(len(events), ["<failure>"], [], [], {}))
    return events


def render_trace(events: Sequence[TraceEvent]) -> str:
    lines = []
    for ev in events:
        lines.append(f"step {ev.step}")
        lines.append("  asserted: " + (", ".join(ev.asserted) or "-"))
        lines.append("  queried for falsity: " + (", ".join(ev.falsity_queried) or "-"))
        lines.append("  queried for truth: " + (", ".join(ev.truth_queried) or "-"))
        if ev.domains:
            lines.append("  domains: " + " ".join(f"{k}={format_values(v)}" for k, v in ev.domains.items()))
    return "\n".join(lines) + "\n"


def emit_trace(instance: Instance, annotated: bool = True) -> str:
    return render_trace(trace_lex(instance, annotated))
