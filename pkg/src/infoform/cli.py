"""Command-line entry point: ``infoform <subcommand> [flags]``.

Exit status is 0 when every invariant and asserted direction holds, 1 when
one fails (outputs are still written), and 2 for usage or config errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Sequence

from . import experiments as ex
from .grid import Cell, GridMap, to_ascii

import numpy as np


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="key=value config file; flags override it")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, help="output directory (default: ./out/<subcommand>)")
    p.add_argument("--reps", type=int)
    p.add_argument("--budget", type=int)
    p.add_argument("--replan-interval", type=int, dest="replan_interval")
    p.add_argument("--modules", type=int)
    p.add_argument("--spots", type=int)
    p.add_argument("--allocator", choices=ex.ALLOCATORS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="infoform",
        description="Informative configuration formation experiments on a grid.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="full pipeline: bids, allocation, acting")
    _common(p)

    p = sub.add_parser("sweep-budget", help="EPS expansions between fixed endpoints per budget")
    _common(p)
    p.add_argument("--budgets", type=_ints, default=[45, 50, 55])
    p.add_argument("--eps-trace", action="store_true",
                   help="write every expansion as eps-<rep>-B<budget>.jsonl")

    p = sub.add_parser("compare-alloc", help="SA against the auction on the same instances")
    _common(p)
    p.add_argument("--sizes", type=_ints, default=[10, 20],
                   help="configuration sizes; modules = spots = n")

    p = sub.add_parser("sweep-replan", help="single-module runs per replan interval")
    _common(p)
    p.add_argument("--intervals", type=_ints,
                   help="replan intervals (default: B/2, B/5, B/10)")

    p = sub.add_parser("show-trace", help="summarize a trace-<run>.jsonl file")
    p.add_argument("trace", type=Path)
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    return parser


def _config(args) -> ex.ExperimentConfig:
    text = args.config.read_text() if args.config else ""
    overrides = {k: getattr(args, k, None) for k in
                 ("seed", "reps", "budget", "replan_interval", "modules", "spots", "allocator")}
    cfg = ex.ExperimentConfig.loads(text, **overrides)
    if args.out is not None:
        cfg.out = str(args.out)
    elif cfg.out is None:
        cfg.out = str(Path("out") / args.command)
    errs = cfg.validate()
    if errs:
        raise ValueError("; ".join(errs))
    return cfg


def _write(out: Path, name: str, rows: list[list], header: list[str]):
    (out / name).write_text(ex._table(rows, header))


def cmd_run(cfg: ex.ExperimentConfig) -> int:
    out = Path(cfg.out)
    results = ex.run(cfg, out)
    bad = 0
    for r in results:
        m = r.metrics
        flag = "ok" if m.ok else "FAIL"
        print(f"{m.run}  est={m.est_info:.3f}  collected={m.collected_info:.3f}  "
              f"messages={m.messages_total}  steps={m.acting_steps}  {flag}"
              + (f"  {m.error}" if m.error else ""))
        bad += not m.ok
    print(f"{len(results)} runs, {bad} failed; outputs in {out}")
    return 1 if bad else 0


def cmd_sweep_budget(cfg: ex.ExperimentConfig, budgets: list[int], eps_trace: bool) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config-echo.txt").write_text(cfg.dumps() + f"budgets={budgets}\n")
    rows = ex.sweep_budget(cfg, budgets, trace_dir=out if eps_trace else None)
    _write(out, "sweep-budget.csv",
           [[r["budget"], r["mean_expansions"], r["found_fraction"],
             " ".join(map(str, r["expansions"]))] for r in rows],
           ["budget", "mean_expansions", "found_fraction", "expansions"])
    _write(out, "sweep-budget-timings.csv",
           [[r["budget"], r["mean_runtime"]] for r in rows], ["budget", "mean_runtime"])
    print(f"{'budget':>6} {'mean_exp':>10} {'found':>6} {'runtime_ms':>10}")
    for r in rows:
        print(f"{r['budget']:>6} {r['mean_expansions']:>10.1f} {r['found_fraction']:>6.2f} "
              f"{1e3 * r['mean_runtime']:>10.2f}")
    means = [r["mean_expansions"] for r in sorted(rows, key=lambda r: r["budget"])]
    monotone = all(a <= b for a, b in zip(means, means[1:]))
    if len(means) > 1 and means[0] > 0:
        print(f"expansion ratio (largest/smallest budget): {means[-1] / means[0]:.2f}")
    if not monotone:
        print("mean expansions are not non-decreasing in the budget")
    return 0 if monotone else 1


def cmd_compare(cfg: ex.ExperimentConfig, sizes: list[int]) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config-echo.txt").write_text(cfg.dumps() + f"sizes={sizes}\n")
    rows = ex.compare_allocators(cfg, sizes)
    _write(out, "compare-alloc.csv",
           [[r["n"], r["info_sa"], r["info_auction"], r["info_rel_gap"],
             " ".join(map(str, r["messages_sa"])), " ".join(map(str, r["messages_auction"])),
             r["all_ok"]] for r in rows],
           ["n", "info_sa", "info_auction", "info_rel_gap", "messages_sa", "messages_auction",
            "all_ok"])
    _write(out, "compare-alloc-timings.csv",
           [[r["n"], r["time_sa"], r["time_auction"]] for r in rows],
           ["n", "time_sa", "time_auction"])
    ok = True
    print(f"{'n':>4} {'info_sa':>10} {'info_auc':>10} {'gap':>6} {'msg_sa':>8} {'msg_auc':>10}")
    for r in rows:
        msa, mau = np.mean(r["messages_sa"]), np.mean(r["messages_auction"])
        print(f"{r['n']:>4} {r['info_sa']:>10.2f} {r['info_auction']:>10.2f} "
              f"{r['info_rel_gap']:>6.3f} {msa:>8.0f} {mau:>10.0f}")
        if r["info_rel_gap"] > 0.15:
            print(f"n={r['n']}: informativeness gap above 15%")
            ok = False
        if min(r["messages_auction"]) <= max(r["messages_sa"]):
            print(f"n={r['n']}: auction did not use more messages than SA")
            ok = False
        if not r["all_ok"]:
            print(f"n={r['n']}: a run failed its invariants")
            ok = False
    return 0 if ok else 1


def cmd_sweep_replan(cfg: ex.ExperimentConfig, intervals: list[int] | None) -> int:
    if intervals is None:
        intervals = sorted({max(1, cfg.budget // k) for k in (2, 5, 10)}, reverse=True)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config-echo.txt").write_text(cfg.dumps() + f"intervals={intervals}\n")
    rows = ex.sweep_replan(cfg, intervals)
    _write(out, "sweep-replan.csv",
           [[r["interval"], r["mean_collected"], r["mean_estimated"], r["mean_replans"],
             r["max_replans"], r["all_ok"]] for r in rows],
           ["interval", "mean_collected", "mean_estimated", "mean_replans", "max_replans",
            "all_ok"])
    _write(out, "sweep-replan-timings.csv",
           [[r["interval"], r["mean_runtime"]] for r in rows], ["interval", "mean_runtime"])
    ok = True
    print(f"{'O':>4} {'collected':>10} {'replans':>8} {'max':>4} {'runtime_ms':>10}")
    for r in rows:
        print(f"{r['interval']:>4} {r['mean_collected']:>10.4f} {r['mean_replans']:>8.2f} "
              f"{r['max_replans']:>4} {1e3 * r['mean_runtime']:>10.2f}")
        if r["max_replans"] > math.ceil(cfg.budget / r["interval"]):
            print(f"O={r['interval']}: replan count exceeds ceil(B/O)")
            ok = False
        if not r["all_ok"]:
            print(f"O={r['interval']}: a run failed its invariants")
            ok = False
    by_o = sorted(rows, key=lambda r: r["interval"])
    if any(a["mean_collected"] < b["mean_collected"] for a, b in zip(by_o, by_o[1:])):
        print("mean collected information increases with the replan interval")
        ok = False
    return 0 if ok else 1


def cmd_show_trace(path: Path, width: int | None, height: int | None) -> int:
    records = [json.loads(line) for line in path.read_text().splitlines() if line.strip()]
    if not records:
        print("empty trace")
        return 0
    if width is None or height is None:
        echo = path.parent / "config-echo.txt"
        dims = {}
        if echo.exists():
            for line in echo.read_text().splitlines():
                k, _, v = line.partition("=")
                if k in ("width", "height"):
                    dims[k] = int(v)
        xs = [r["cell"][0] for r in records]
        ys = [r["cell"][1] for r in records]
        width = width or dims.get("width", max(xs) + 1)
        height = height or dims.get("height", max(ys) + 1)
    per: dict[int, dict] = {}
    for r in records:
        d = per.setdefault(r["module"], {"cells": [], "collected": 0.0, "events": {}})
        if r["event"] == "move":
            d["cells"].append(Cell(*r["cell"]))
            d["collected"] += r["entropy_collected"]
        d["events"][r["event"]] = d["events"].get(r["event"], 0) + 1
        d["last"] = r
    print(f"{len(records)} records, {len(per)} modules, last t={records[-1]['t']}")
    for mid, d in per.items():
        ev = " ".join(f"{k}={v}" for k, v in sorted(d["events"].items()))
        end = d["last"]["cell"]
        print(f"module {mid:>3}: steps={len(d['cells']):>3} collected={d['collected']:8.3f} "
              f"end=({end[0]},{end[1]}) b_left={d['last']['b_remaining']}  {ev}")
    grid = GridMap(width, height, np.zeros((height, width)))
    explored = [c for d in per.values() for c in d["cells"]]
    finals = [Cell(*d["last"]["cell"]) for d in per.values()]
    print(to_ascii(grid, explored=explored, path=finals))
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "show-trace":
        try:
            return cmd_show_trace(args.trace, args.width, args.height)
        except (OSError, ValueError, KeyError) as exc:
            print(f"infoform: cannot read trace {args.trace}: {exc}", file=sys.stderr)
            return 2
    try:
        cfg = _config(args)
    except (ValueError, OSError) as exc:
        print(f"infoform: {exc}", file=sys.stderr)
        return 2
    if args.command == "run":
        return cmd_run(cfg)
    if args.command == "sweep-budget":
        return cmd_sweep_budget(cfg, args.budgets, args.eps_trace)
    if args.command == "compare-alloc":
        return cmd_compare(cfg, args.sizes)
    return cmd_sweep_replan(cfg, args.intervals)


if __name__ == "__main__":
    sys.exit(main())
