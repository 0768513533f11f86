"""Command line: ``ctrlprop bench`` and ``ctrlprop trace``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .search import (
    SearchConfig,
    emit_trace,
    load_instance,
    run_benchmark,
    summarize,
    write_csv,
    write_summary_csv,
)


def _domain(text: str) -> tuple[int, int]:
    try:
        lo, hi = text.split("..")
        return int(lo), int(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO..HI, got {text!r}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or a comma-separated list, got {text!r}")


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on or off")
    return text == "on"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ctrlprop", description="Controlled vs. uncontrolled constraint propagation.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="run seeded random search and write per-run counters as CSV")
    b.add_argument("--constraint", required=True, choices=["clause", "diff", "alldiff", "lex"])
    b.add_argument("--n", required=True, type=_int_list, help="tuple length, or a comma-separated list")
    b.add_argument("--tuples", type=int, default=20, help="number of tuples (alldiff only)")
    b.add_argument("--domain", type=_domain, default=(1, 10), help="LO..HI (ignored for clause)")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--runs", type=int, default=10)
    b.add_argument("--mode", choices=["controlled", "uncontrolled", "both"], default="both")
    b.add_argument("--out", required=True, type=Path)
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--no-figure", action="store_true", help="skip the ratio summary and figure")

    t = sub.add_parser("trace", help="print the controlled propagation trace of a lex instance")
    t.add_argument("--constraint", default="lex", choices=["lex"])
    t.add_argument("--instance", required=True, type=Path)
    t.add_argument("--annotated", type=_on_off, default=True, help="on|off")
    return p


def cmd_bench(args) -> int:
    configs = [
        SearchConfig(
            constraint=args.constraint,
            n=n,
            tuples=args.tuples,
            domain=args.domain,
            seed=args.seed,
            mode=args.mode,
            runs=args.runs,
        )
        for n in args.n
    ]
    rows = run_benchmark(configs, jobs=args.jobs)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(rows, args.out)
    print(f"wrote {len(rows)} rows to {args.out}")
    if args.mode == "both" and not args.no_figure:
        summary = summarize(rows)
        stem = args.out.with_suffix("")
        ratio_csv = Path(f"{stem}_ratios.csv")
        write_summary_csv(summary, ratio_csv)
        print(f"wrote {ratio_csv}")
        for r in summary:
            print(
                f"  {r['constraint']} n={r['n']}: queries {100 * r['queries_ratio']:.1f}%  "
                f"activations {100 * r['activations_ratio']:.1f}%"
            )
        if summary:
            from .plotting import plot_ratios

            fig = plot_ratios(summary, Path(f"{stem}_ratios.png"))
            print(f"wrote {fig}")
    return 0


def cmd_trace(args) -> int:
    instance = load_instance(args.instance)
    sys.stdout.write(emit_trace(instance, annotated=args.annotated))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        if args.command == "bench":
            return cmd_bench(args)
        return cmd_trace(args)
    except (ValueError, OSError) as exc:
        print(f"ctrlprop: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
