"""Shared drivers for oracle sweeps used by both unit and acceptance tests."""

from __future__ import annotations

from collections import defaultdict

import numpy as np

from infoform.gp import GpHyperparams, GpState
from infoform.grid import Cell, GridMap
from infoform.planner import eps_search

from oracles import simple_paths


def random_small_state(seed: int, w: int = 4, h: int = 4):
    """GP state, field and blocked set for a small grid.

    Low noise makes observed cells drop below zero entropy, so the entropy
    gate actually bites.
    """
    rng = np.random.default_rng(seed)
    grid = GridMap(w, h, rng.uniform(1, 10, size=(h, w)))
    hp = GpHyperparams(float(rng.uniform(0.5, 2.0)), 1.0, float(rng.choice([0.001, 0.01, 0.1])),
                       5.5)
    cells = [Cell(x, y) for y in range(h) for x in range(w)]
    k = min(int(rng.integers(0, 6)), len(cells) - 2)
    obs = [cells[i] for i in rng.choice(len(cells), size=k, replace=False)]
    gp = GpState(hp, [(c, grid.value(c)) for c in obs])
    nb = min(int(rng.integers(0, 3)), len(cells) - 2)
    blocked = frozenset(cells[i] for i in rng.choice(len(cells), size=nb, replace=False))
    return grid, gp, blocked


def eps_oracle_sweep(seeds, budgets=range(3, 10), w: int = 4, h: int = 4):
    """Run EPS on every start/goal pair and compare with full path enumeration.

    Returns a dict of counters; ``invalid`` and ``above_optimum`` must be 0.
    ``incomplete`` counts searches that returned nothing although an
    entropy-admissible path under the budget exists.
    """
    stats = defaultdict(int)
    max_cost = max(budgets) - 1
    for seed in seeds:
        grid, gp, blocked = random_small_state(seed, w, h)
        H = gp.entropy_grid(w, h)
        clamp = np.maximum(H, 0.0)
        cells = [Cell(x, y) for y in range(h) for x in range(w) if Cell(x, y) not in blocked]
        for s in cells:
            by_goal = defaultdict(list)
            for p in simple_paths(s, w, h, max_cost, blocked):
                if len(p) > 1:
                    by_goal[p[-1]].append(p)
            for g in cells:
                if g == s:
                    continue
                paths = by_goal[g]
                infos = [sum(clamp[c[1], c[0]] for c in p) for p in paths]
                gated = [all(H[c[1], c[0]] > 0 for c in p[1:-1]) for p in paths]
                for b in budgets:
                    stats["searches"] += 1
                    plan = eps_search(s, g, b, gp, grid, blocked)
                    feasible = [i for p, i in zip(paths, infos) if len(p) - 1 < b]
                    admissible = any(ok and len(p) - 1 < b for p, ok in zip(paths, gated))
                    if plan is None:
                        stats["none"] += 1
                        stats["incomplete"] += admissible
                        continue
                    cs = plan.cells
                    valid = (
                        cs[0] == s and cs[-1] == g and plan.cost < b
                        and all(abs(a.x - c.x) + abs(a.y - c.y) == 1 for a, c in zip(cs, cs[1:]))
                        and not any(c in blocked for c in cs)
                        and len(set(cs)) == len(cs)
                        and all(H[c.y, c.x] > 0 for c in cs[1:-1])
                    )
                    stats["invalid"] += not valid
                    if plan.informativeness > max(feasible) + 1e-9:
                        stats["above_optimum"] += 1
    return dict(stats)

