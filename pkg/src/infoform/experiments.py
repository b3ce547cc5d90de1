"""Desk-scale experiment pipeline: field, GP training, bids, allocation, acting.

Every quantity written to ``metrics.csv`` and the trace files is a pure
function of the config. Wall-clock timings go to ``timings.csv`` instead so
metrics stay byte-identical across runs.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .acting import BlockedArrival, SimWorld, check_no_hole, run_acting
from .allocation import Assignment, Bid, allocate_auction, allocate_sa, compute_bids
from .configuration import TargetConfig, acting_order, generate_random, validate
from .gp import NEG_ENTROPY, GpState, fit_hyperparameters
from .grid import Cell, GridMap, generate_field, to_ascii, to_pgm
from .planner import eps_search

ALLOCATORS = ("sa", "auction", "both")


@dataclass
class ExperimentConfig:
    seed: int = 0
    width: int = 30
    height: int = 30
    low: float = 1.0
    high: float = 10.0
    modules: int = 10
    spots: int = 10
    budget: int = 45
    replan_interval: Optional[int] = None  # None means budget // 2
    allocator: str = "sa"
    reps: int = 5
    train_fraction: float = 0.4
    epsilon: float = 1e-3
    out: Optional[str] = None

    def __post_init__(self):
        if self.replan_interval is None:
            self.replan_interval = max(1, self.budget // 2)

    def validate(self) -> list[str]:
        errs = []
        if self.modules < self.spots:
            errs.append("modules must be >= spots")
        if self.spots < 1:
            errs.append("spots must be >= 1")
        if self.budget < 1:
            errs.append("budget must be >= 1")
        if not 1 <= self.replan_interval <= self.budget:
            errs.append("replan_interval must lie in [1, budget]")
        if not 0 < self.train_fraction < 1:
            errs.append("train_fraction must lie in (0, 1)")
        if self.allocator not in ALLOCATORS:
            errs.append(f"allocator must be one of {ALLOCATORS}")
        if self.reps < 1:
            errs.append("reps must be >= 1")
        if self.width < 1 or self.height < 1:
            errs.append("grid dimensions must be positive")
        elif self.modules + self.spots > self.width * self.height:
            errs.append("grid too small for modules and spots")
        if not self.low < self.high:
            errs.append("field range needs low < high")
        if self.epsilon <= 0:
            errs.append("epsilon must be positive")
        return errs

    def dumps(self) -> str:
        return "".join(f"{f.name}={getattr(self, f.name)}\n" for f in dataclasses.fields(self))

    @classmethod
    def loads(cls, text: str, **overrides) -> ExperimentConfig:
        """Parse flat ``key=value`` lines; ``overrides`` that are not None win."""
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected key=value")
            key, val = (p.strip() for p in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in types:
                raise ValueError(f"line {lineno}: unknown key {key!r}")
            values[key] = _coerce(types[key], val)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


def _coerce(typ: str, val: str):
    if val in ("None", ""):
        return None
    if "int" in typ:
        return int(val)
    if "float" in typ:
        return float(val)
    return val


@dataclass
class Instance:
    """Everything shared by the allocators for one repetition."""

    seed: int
    grid: GridMap
    gp: GpState
    config: TargetConfig
    starts: dict[int, Cell]
    bids: dict[int, list[Bid]]
    eps_calls: int
    expansions: int
    order_seed: int
    alloc_seed: int
    planning_time: float


@dataclass
class RunMetrics:
    run: str
    seed: int
    allocator: str
    modules: int
    spots: int
    budget: int
    replan_interval: int
    messages_setup: int = 0
    messages_planning: int = 0
    messages_acting: int = 0
    messages_total: int = 0
    est_info: float = 0.0
    collected_info: float = 0.0
    eps_calls: int = 0
    expansions_mean: float = 0.0
    replans: int = 0
    replans_accepted: int = 0
    replans_rejected: int = 0
    detours: int = 0
    acting_steps: int = 0
    max_path_cost: int = 0
    injective: bool = True
    no_hole: bool = False
    budget_ok: bool = False
    error: str = ""
    # Not written to metrics.csv.
    planning_time: float = field(default=0.0, metadata={"timing": True})
    allocation_time: float = field(default=0.0, metadata={"timing": True})
    acting_time: float = field(default=0.0, metadata={"timing": True})

    @property
    def ok(self) -> bool:
        return self.injective and self.no_hole and self.budget_ok and not self.error


METRIC_FIELDS = [f.name for f in dataclasses.fields(RunMetrics) if not f.metadata.get("timing")]
TIMING_FIELDS = ["run", "planning_time", "allocation_time", "acting_time"]


def _seed_words(seed: int, rep: int, n: int = 6) -> list[int]:
    ss = np.random.SeedSequence(seed).spawn(rep + 1)[rep]
    return [int(w) for w in ss.generate_state(n)]


def train_gp(grid: GridMap, fraction: float, seed: int) -> GpState:
    """Fit hyperparameters on a random ``fraction`` of cells and condition on them."""
    rng = np.random.default_rng(seed)
    cells = grid.free_cells()
    k = max(2, int(round(fraction * len(cells))))
    idx = np.sort(rng.choice(len(cells), size=k, replace=False))
    training = [(cells[i], grid.value(cells[i])) for i in idx]
    hp = fit_hyperparameters(training)
    return GpState(hp, training)


def draw_starts(grid: GridMap, n: int, exclude: set[Cell], seed: int) -> dict[int, Cell]:
    """Distinct uniform start cells outside ``exclude`` (rejection sampling)."""
    rng = np.random.default_rng(seed)
    starts: dict[int, Cell] = {}
    taken = set(exclude)
    free = len(grid.free_cells()) - len(taken)
    if free < n:
        raise ValueError("not enough free cells for module starts")
    while len(starts) < n:
        c = Cell(int(rng.integers(grid.width)), int(rng.integers(grid.height)))
        if c in taken or c in grid.obstacles:
            continue
        taken.add(c)
        starts[len(starts)] = c
    return starts


def prepare(cfg: ExperimentConfig, rep: int) -> Instance:
    w_field, w_train, w_config, w_starts, w_alloc, w_order = _seed_words(cfg.seed, rep)
    t0 = time.perf_counter()
    grid = generate_field(w_field, cfg.width, cfg.height, cfg.low, cfg.high)
    gp = train_gp(grid, cfg.train_fraction, w_train)
    config = generate_random(w_config, cfg.spots, grid)
    problems = validate(config, grid)
    if problems:
        raise RuntimeError(f"generated configuration is invalid: {problems}")
    starts = draw_starts(grid, cfg.modules, set(config.cells.values()), w_starts)
    start_cells = set(starts.values())
    expansions = [0]

    def count(cell, g, hu):
        expansions[0] += 1

    bids = {
        mid: compute_bids(mid, start, config, cfg.budget, gp, grid, start_cells - {start},
                          on_expand=count)
        for mid, start in starts.items()
    }
    n_calls = len(starts) * len(config)
    return Instance(w_field, grid, gp, config, starts, bids, n_calls, expansions[0], w_order, w_alloc,
                    time.perf_counter() - t0)


def allocate(inst: Instance, allocator: str, epsilon: float = 1e-3) -> Assignment:
    ids = inst.config.ids
    if allocator == "sa":
        return allocate_sa(inst.bids, ids, seed=inst.alloc_seed)
    if allocator == "auction":
        return allocate_auction(inst.bids, ids, epsilon=epsilon, seed=inst.alloc_seed)
    raise ValueError(f"unknown allocator {allocator!r}")


@dataclass
class RunResult:
    metrics: RunMetrics
    world: Optional[SimWorld]
    assignment: Assignment


def execute(cfg: ExperimentConfig, inst: Instance, allocator: str, run_id: str) -> RunResult:
    """Allocate, act, and check the end-state invariants for one allocator."""
    n = len(inst.starts)
    m = RunMetrics(run_id, inst.seed, allocator, n, len(inst.config), cfg.budget,
                   cfg.replan_interval)
    m.planning_time = inst.planning_time
    m.eps_calls = inst.eps_calls
    m.expansions_mean = inst.expansions / inst.eps_calls
    assignment = allocate(inst, allocator, cfg.epsilon)
    m.allocation_time = assignment.elapsed
    m.injective = assignment.is_injective() and len(assignment.spot_to_module) == len(inst.config)
    m.est_info = assignment.total_informativeness()
    m.messages_setup = n * (n - 1)
    m.messages_planning = assignment.message_count
    order = acting_order(inst.config, inst.order_seed)
    world = SimWorld.create(inst.grid, inst.gp, inst.config, assignment, inst.starts, order,
                            cfg.budget, cfg.replan_interval)
    t0 = time.perf_counter()
    try:
        report = run_acting(world)
    except (BlockedArrival, RuntimeError) as exc:
        m.error = f"{type(exc).__name__}: {exc}"
    m.acting_time = time.perf_counter() - t0
    mods = [world.modules[mid] for mid in assignment.spot_to_module.values()]
    m.messages_acting = world.messages
    m.messages_total = m.messages_setup + m.messages_planning + m.messages_acting
    m.collected_info = world.collected
    m.replans = sum(x.replans for x in mods)
    m.replans_accepted = sum(x.replans_accepted for x in mods)
    m.replans_rejected = m.replans - m.replans_accepted
    m.detours = sum(x.detours for x in mods)
    m.acting_steps = world.t
    m.max_path_cost = max((x.steps for x in mods), default=0)
    m.budget_ok = m.max_path_cost <= cfg.budget
    m.no_hole = not m.error and check_no_hole(world)
    return RunResult(m, world, assignment)


def _allocators(cfg: ExperimentConfig) -> list[str]:
    return ["sa", "auction"] if cfg.allocator == "both" else [cfg.allocator]


def run(cfg: ExperimentConfig, out: Optional[Path] = None) -> list[RunResult]:
    """Full pipeline for ``cfg.reps`` repetitions; writes files when ``out`` is given."""
    errs = cfg.validate()
    if errs:
        raise ValueError("; ".join(errs))
    results = []
    for rep in range(cfg.reps):
        inst = prepare(cfg, rep)
        for alloc in _allocators(cfg):
            results.append(execute(cfg, inst, alloc, f"{rep:03d}-{alloc}"))
    if out is not None:
        write_outputs(cfg, results, Path(out))
    return results


def metrics_csv(rows: Sequence[RunMetrics]) -> str:
    return _table([[getattr(r, k) for k in METRIC_FIELDS] for r in rows], METRIC_FIELDS)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, bool):
        return "1" if v else "0"
    return str(v)


def _table(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def write_outputs(cfg: ExperimentConfig, results: Sequence[RunResult], out: Path):
    out.mkdir(parents=True, exist_ok=True)
    (out / "config-echo.txt").write_text(cfg.dumps())
    (out / "metrics.csv").write_text(metrics_csv([r.metrics for r in results]))
    (out / "timings.csv").write_text(_table(
        [[getattr(r.metrics, k) for k in TIMING_FIELDS] for r in results], TIMING_FIELDS))
    for r in results:
        run_id = r.metrics.run
        (out / f"assignment-{run_id}.csv").write_text(r.assignment.to_csv())
        if r.world is None:
            continue
        (out / f"trace-{run_id}.jsonl").write_text(r.world.trace_jsonl())
        (out / f"timeline-{run_id}.csv").write_text(timeline_csv(r))
        ent = r.world.gp.entropy_grid(r.world.grid.width, r.world.grid.height)
        (out / f"grid-{run_id}.pgm").write_bytes(to_pgm(np.where(ent > NEG_ENTROPY, ent, np.nan)))
        mods = r.world.modules.values()
        visited = [c for m in mods for c in m.visited]
        (out / f"grid-{run_id}.txt").write_text(
            to_ascii(r.world.grid, explored=visited, path=[m.cell for m in mods]))


def timeline_csv(result: RunResult) -> str:
    """Cumulative messages against the event index (setup, planning, then arrivals)."""
    m = result.metrics
    total = m.messages_setup
    rows = [[0, "setup", "broadcast", -1, total]]
    total += m.messages_planning
    rows.append([0, "planning", m.allocator, -1, total])
    if result.world is not None:
        per_arrival = len(result.world.modules) - 1
        for r in result.world.trace:
            if r["event"] == "reached":
                total += per_arrival
                rows.append([r["t"], "acting", "reached", r["module"], total])
    return _table(rows, ["t", "phase", "event", "module", "messages_cumulative"])


# --- sweeps -----------------------------------------------------------------


def sweep_endpoints(grid: GridMap, budget: int) -> tuple[Cell, Cell]:
    """Centred diagonal start/goal pair at Manhattan distance ``budget - 1``.

    This is the tightest pair a search with budget ``budget`` can still
    connect; longer pairs are pruned at the start cell.
    """
    d = min(max(budget - 1, 1), grid.width + grid.height - 2)
    dx = min(d // 2, grid.width - 1)
    dy = min(d - dx, grid.height - 1)
    dx = d - dy
    x0, y0 = (grid.width - 1 - dx) // 2, (grid.height - 1 - dy) // 2
    return Cell(x0, y0), Cell(x0 + dx, y0 + dy)


def sweep_budget(
    cfg: ExperimentConfig,
    budgets: Sequence[int],
    start: Optional[Cell] = None,
    goal: Optional[Cell] = None,
    trace_dir: Optional[Path] = None,
) -> list[dict]:
    """EPS expansions and runtime between fixed endpoints for each budget."""
    if any(b < 1 for b in budgets):
        raise ValueError("budgets must be >= 1")
    per_budget = {b: {"expansions": [], "runtime": [], "found": [], "cost": []} for b in budgets}
    for rep in range(cfg.reps):
        w_field, w_train, *_ = _seed_words(cfg.seed, rep)
        grid = generate_field(w_field, cfg.width, cfg.height, cfg.low, cfg.high)
        gp = train_gp(grid, cfg.train_fraction, w_train)
        s, g = sweep_endpoints(grid, min(budgets))
        s, g = start or s, goal or g
        gp.entropy_grid(grid.width, grid.height)
        for b in budgets:
            records = []
            t0 = time.perf_counter()
            plan = eps_search(s, g, b, gp, grid,
                              on_expand=lambda c, gc, hu: records.append((c, gc, hu)))
            dt = time.perf_counter() - t0
            row = per_budget[b]
            row["expansions"].append(len(records))
            row["runtime"].append(dt)
            row["found"].append(plan is not None)
            row["cost"].append(plan.cost if plan is not None else -1)
            if trace_dir is not None:
                trace_dir.mkdir(parents=True, exist_ok=True)
                path = trace_dir / f"eps-{rep:03d}-B{b}.jsonl"
                path.write_text("".join(
                    f'{{"cell": [{c.x}, {c.y}], "g": {gc}, "hu": {hu!r}}}\n'
                    for c, gc, hu in records))
    return [
        {
            "budget": b,
            "mean_expansions": float(np.mean(v["expansions"])),
            "mean_runtime": float(np.mean(v["runtime"])),
            "found_fraction": float(np.mean(v["found"])),
            "expansions": v["expansions"],
        }
        for b, v in per_budget.items()
    ]


def compare_allocators(cfg: ExperimentConfig, sizes: Sequence[int]) -> list[dict]:
    """SA vs auction on the same instances for each configuration size."""
    rows = []
    for n in sizes:
        sub = dataclasses.replace(cfg, modules=n, spots=n, allocator="both")
        results = run(sub)
        sa = [r.metrics for r in results if r.metrics.allocator == "sa"]
        au = [r.metrics for r in results if r.metrics.allocator == "auction"]
        info_sa = float(np.sum([m.est_info for m in sa]))
        info_au = float(np.sum([m.est_info for m in au]))
        rows.append({
            "n": n,
            "info_sa": info_sa,
            "info_auction": info_au,
            "info_rel_gap": abs(info_sa - info_au) / abs(info_au) if info_au else math.inf,
            "messages_sa": [m.messages_planning for m in sa],
            "messages_auction": [m.messages_planning for m in au],
            "time_sa": float(np.mean([m.allocation_time for m in sa])),
            "time_auction": float(np.mean([m.allocation_time for m in au])),
            "all_ok": all(m.ok for m in sa + au),
        })
    return rows


def sweep_replan(cfg: ExperimentConfig, intervals: Sequence[int]) -> list[dict]:
    """Single-module runs for each replan interval on identical instances."""
    if any(not 1 <= o <= cfg.budget for o in intervals):
        raise ValueError("intervals must lie in [1, budget]")
    base = dataclasses.replace(cfg, modules=1, spots=1, allocator="sa")
    instances = [prepare(base, rep) for rep in range(cfg.reps)]
    rows = []
    for o in intervals:
        sub = dataclasses.replace(base, replan_interval=o)
        ms = [execute(sub, inst, "sa", f"{rep:03d}-O{o}").metrics
              for rep, inst in enumerate(instances)]
        rows.append({
            "interval": o,
            "mean_collected": float(np.mean([m.collected_info for m in ms])),
            "mean_estimated": float(np.mean([m.est_info for m in ms])),
            "mean_runtime": float(np.mean([m.acting_time for m in ms])),
            "mean_replans": float(np.mean([m.replans for m in ms])),
            "max_replans": max(m.replans for m in ms),
            "collected": [m.collected_info for m in ms],
            "all_ok": all(m.ok for m in ms),
        })
    return rows
