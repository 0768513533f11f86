import csv
import itertools
from pathlib import Path

import pytest

from ctrlprop import evaluate
from ctrlprop.cli import main
from ctrlprop.search import (
    CSV_COLUMNS,
    SearchConfig,
    build_instance,
    emit_trace,
    load_instance,
    parse_instance,
    random_search,
    run_benchmark,
    summarize,
    trace_lex,
    write_csv,
)
from ctrlprop import Solver, build_clause, build_lex

ROOT = Path(__file__).resolve().parents[1]
LEX_EXAMPLE = ROOT / "instances" / "lex_example.txt"


def test_config_validation_and_aliases():
    assert SearchConfig("diff", 3).constraint == "different_tp"
    assert SearchConfig("alldiff", 3).constraint == "alldifferent_tp"
    assert SearchConfig("lex", 3, mode="both").modes == ("controlled", "uncontrolled")
    for bad in [dict(constraint="nope", n=3), dict(constraint="lex", n=0), dict(constraint="lex", n=2, runs=0),
                dict(constraint="lex", n=2, domain=(3, 1)), dict(constraint="lex", n=2, mode="fast")]:
        with pytest.raises(ValueError):
            SearchConfig(**bad)


def test_same_seed_same_run():
    cfg = SearchConfig("alldiff", 4, tuples=5, domain=(1, 3))
    a, b = random_search(cfg, seed=9), random_search(cfg, seed=9)
    assert a.decisions == b.decisions and a.solution == b.solution
    assert a.counters == b.counters


@pytest.mark.parametrize("constraint", ["clause", "different_tp", "alldifferent_tp", "lex"])
@pytest.mark.parametrize("n", [5, 10])
def test_modes_agree_on_search_tree_and_solution(constraint, n):
    cfg = SearchConfig(constraint, n, tuples=4, domain=(1, 4))
    for seed in range(25):
        c = random_search(cfg, seed=seed, controlled=True)
        u = random_search(cfg, seed=seed, controlled=False)
        assert c.decisions == u.decisions
        assert c.solution == u.solution
        if n >= 10:
            assert c.counters.queries <= u.counters.queries


def test_solutions_satisfy_the_constraint():
    for constraint in ["clause", "different_tp", "alldifferent_tp", "lex"]:
        cfg = SearchConfig(constraint, 4, tuples=3, domain=(0, 2))
        for seed in range(10):
            res = random_search(cfg, seed=seed)
            S = Solver()
            expr, vars = build_instance(cfg, S)
            names = S.store.names
            assert evaluate(expr, lambda v: res.solution[names[v]])


def test_clause_with_all_but_last_excluded():
    S = Solver()
    xs = [S.new_int_var([0]) for _ in range(4)] + [S.new_int_var([0, 1])]
    S.post(build_clause(xs))
    assert S.propagate()
    assert S.store.values(xs[4]) == [1]
    # brute force: exactly one assignment satisfies the clause with x1..x4 = 0
    oracle = [v for v in itertools.product([0, 1], repeat=5) if any(v) and not any(v[:4])]
    assert oracle == [(0, 0, 0, 0, 1)]


def test_search_solutions_are_clause_models():
    cfg = SearchConfig("clause", 5)
    for seed in range(40):
        sol = random_search(cfg, seed=seed).solution
        assert any(sol[f"x{i}"] == 1 for i in range(1, 6))


def test_counters_are_consistent():
    res = random_search(SearchConfig("lex", 6, domain=(1, 3)), seed=2)
    c = res.counters
    assert c.search_nodes == len(res.decisions)
    assert c.backtracks == sum(not ok for *_, ok in res.decisions)
    assert c.deleted <= c.created
    assert min(c.as_dict().values()) >= 0


def test_empty_benchmark():
    assert run_benchmark([]) == []
    assert summarize([]) == []


def test_benchmark_rows_and_summary(tmp_path):
    rows = run_benchmark([SearchConfig("diff", 3, mode="both", runs=2, seed=7, domain=(1, 3))])
    assert [(r["mode"], r["seed"]) for r in rows] == [
        ("controlled", 7), ("uncontrolled", 7), ("controlled", 8), ("uncontrolled", 8)
    ]
    summary = summarize(rows)
    assert len(summary) == 1 and summary[0]["runs"] == 2
    assert 0 < summary[0]["queries_ratio"]
    out = tmp_path / "rows.csv"
    write_csv(rows, out)
    with open(out) as fh:
        table = list(csv.reader(fh))
    assert tuple(table[0]) == CSV_COLUMNS
    assert len(table) == 5


def test_parallel_benchmark_matches_sequential():
    cfgs = [SearchConfig("lex", n, mode="both", runs=2, domain=(1, 3)) for n in (3, 4)]
    assert run_benchmark(cfgs, jobs=2) == run_benchmark(cfgs, jobs=1)


# -- instances and traces ----------------------------------------------------


def test_parse_instance_grammar():
    inst = parse_instance("# c\nx1: 2\nx2: 1,3..4\ny1: 0..2  # trailing\ny2: 1\nlex x1..x2 <= y1, y2\n")
    assert inst.domains == {"x1": [2], "x2": [1, 3, 4], "y1": [0, 1, 2], "y2": [1]}
    assert inst.xs == ["x1", "x2"] and inst.ys == ["y1", "y2"]


@pytest.mark.parametrize(
    "text",
    [
        "x1: 1\n",
        "x1: 1\nx1: 2\nlex x1 <= x1\n",
        "x1:\nlex x1 <= x1\n",
        "x1: 1\ny1: 1\nlex x1 y1\n",
        "x1: 1\nlex x1 <= y1\n",
        "x1: 1\nx2: 1\ny1: 1\nlex x1..x2 <= y1\n",
        "garbage\n",
    ],
)
def test_parse_instance_errors(text):
    with pytest.raises(ValueError):
        parse_instance(text)


def test_unsatisfiable_lex_trace_reports_failure():
    inst = parse_instance("x1: 1\nx2: 1\ny1: 0\ny2: 0\nlex x1..x2 <= y1..y2\n")
    events = trace_lex(inst)
    assert events[-1].asserted == ["<failure>"]


def test_lex_search_on_larger_tuple_is_unsat():
    S = Solver()
    inst = parse_instance("x1: 1\nx2: 1\ny1: 0\ny2: 0\nlex x1..x2 <= y1..y2\n")
    var = {k: S.new_int_var(v, k) for k, v in inst.domains.items()}
    S.post(build_lex([var["x1"], var["x2"]], [var["y1"], var["y2"]]))
    assert not S.propagate()


def test_trace_is_deterministic_and_unannotated_misses_pruning():
    inst = load_instance(LEX_EXAMPLE)
    assert emit_trace(inst) == emit_trace(inst)
    plain = trace_lex(inst, annotated=False)
    annotated = trace_lex(inst)
    # the implied x1<=y1 prunes y1 at the first milestone; without it nothing is asserted yet
    assert annotated[1].asserted == ["x1<=y1"] and annotated[1].domains["y1"] == (2,)
    assert plain[1].asserted == [] and plain[1].domains["y1"] == (0, 1, 2)


def test_trace_of_solved_instance_ends_quiet():
    inst = parse_instance("x1: 1\nx2: 2\ny1: 2\ny2: 0\nlex x1..x2 <= y1..y2\n")
    events = trace_lex(inst)
    assert events[0].asserted == ["lex(<x1,x2>,<y1,y2>)"]
    last = events[-1]
    assert last.asserted == [] and last.falsity_queried == [] and last.truth_queried == []
    assert all(ev.domains == events[0].domains for ev in events)


# -- CLI ---------------------------------------------------------------------


def test_cli_bench_writes_csv_ratios_and_figure(tmp_path, capsys):
    out = tmp_path / "sub" / "lex.csv"
    rc = main(["bench", "--constraint", "lex", "--n", "3,5", "--domain", "1..4", "--runs", "3", "--out", str(out)])
    assert rc == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2 * 2 * 3
    assert {r["mode"] for r in rows} == {"controlled", "uncontrolled"}
    assert (tmp_path / "sub" / "lex_ratios.csv").exists()
    png = tmp_path / "sub" / "lex_ratios.png"
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    assert "queries" in capsys.readouterr().out


def test_cli_bench_single_mode_skips_report(tmp_path):
    out = tmp_path / "c.csv"
    assert main(["bench", "--constraint", "clause", "--n", "4", "--runs", "2", "--mode", "controlled",
                 "--out", str(out)]) == 0
    assert not (tmp_path / "c_ratios.png").exists()


def test_cli_trace(capsys):
    assert main(["trace", "--constraint", "lex", "--instance", str(LEX_EXAMPLE), "--annotated", "on"]) == 0
    text = capsys.readouterr().out
    assert text.startswith("step 0\n  asserted: lex(<x1..x5>,<y1..y5>)")
    assert "x3={1..3}" in text and "y3={2..4}" in text


def test_cli_errors(tmp_path, capsys):
    assert main(["trace", "--instance", str(tmp_path / "missing.txt")]) == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("x1: 1\n")
    assert main(["trace", "--instance", str(bad)]) == 2
    with pytest.raises(SystemExit):
        main(["bench", "--constraint", "clause", "--n", "x", "--out", "o.csv"])
