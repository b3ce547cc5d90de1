"""Spot allocation by the supervisor, plus an epsilon-auction baseline.

Message accounting:

* SA: one bid-list message per module, one allotment broadcast per module.
* Auction: one message per submitted bid, and ``n_modules`` messages for
  every price update broadcast.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .configuration import TargetConfig
from .gp import GpState
from .grid import Cell, GridMap
from .planner import PathPlan, eps_search, make_plan, shortest_path

TIE_TOL = 1e-9
# Auction value of an over-budget pairing is -(OVER_BUDGET_PENALTY + cost).
OVER_BUDGET_PENALTY = 1e6
UNREACHABLE_VALUE = -1e9


@dataclass(frozen=True)
class Bid:
    module: int
    spot: int
    path: Optional[PathPlan] = None
    fallback_path: Optional[PathPlan] = None

    @property
    def chosen(self) -> Optional[PathPlan]:
        return self.path if self.path is not None else self.fallback_path

    @property
    def within_budget(self) -> bool:
        return self.path is not None

    @property
    def reachable(self) -> bool:
        return self.chosen is not None

    @property
    def informativeness(self) -> float:
        p = self.chosen
        return p.informativeness if p is not None else -math.inf

    @property
    def cost(self) -> float:
        p = self.chosen
        return p.cost if p is not None else math.inf


@dataclass
class Assignment:
    spot_to_module: dict[int, int]
    paths: dict[int, Optional[PathPlan]]
    allocator: str
    message_count: int
    elapsed: float = 0.0
    # Spot ids in the order they were settled, for planning timelines.
    rounds: list[int] = field(default_factory=list)

    @property
    def module_to_spot(self) -> dict[int, int]:
        return {m: s for s, m in self.spot_to_module.items()}

    def is_injective(self) -> bool:
        return len(set(self.spot_to_module.values())) == len(self.spot_to_module)

    def total_informativeness(self) -> float:
        return float(sum(p.informativeness for p in self.paths.values() if p is not None))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["spot_id", "module_id", "cost", "informativeness", "allocator", "messages"])
        for sid in sorted(self.spot_to_module):
            p = self.paths.get(sid)
            w.writerow([
                sid,
                self.spot_to_module[sid],
                p.cost if p is not None else "inf",
                repr(p.informativeness) if p is not None else "-inf",
                self.allocator,
                self.message_count,
            ])
        return buf.getvalue()


def compute_bids(
    module: int,
    start: Cell,
    config: TargetConfig,
    budget: int,
    gp: GpState,
    grid: GridMap,
    blocked: frozenset | set = frozenset(),
    on_expand=None,
) -> list[Bid]:
    """One bid per spot: the EPS path, or a shortest-path fallback when EPS fails.

    A module already standing on a spot bids the zero-cost plan for it.
    """
    if start in blocked:
        raise ValueError(f"module {module} starts on a blocked cell")
    bids = []
    for s in config.spots:
        path = fallback = None
        if s.cell == start:
            here = make_plan([start], gp.entropy_grid(grid.width, grid.height), budget)
            path = here if budget > 0 else None
            fallback = None if budget > 0 else here
        else:
            path = eps_search(start, s.cell, budget, gp, grid, blocked, on_expand=on_expand)
            if path is None:
                fallback = shortest_path(start, s.cell, gp, grid, blocked)
                if fallback is not None:
                    fallback = PathPlan(fallback.cells, fallback.informativeness, budget)
        bids.append(Bid(module, s.id, path, fallback))
    return bids


def _by_spot(bids: Mapping[int, Sequence[Bid]]) -> dict[tuple[int, int], Bid]:
    return {(b.module, b.spot): b for blist in bids.values() for b in blist}


def allocate_sa(
    bids: Mapping[int, Sequence[Bid]],
    spot_ids: Sequence[int],
    seed: int = 0,
) -> Assignment:
    """Sequential spot allocation in ``spot_ids`` order.

    Each round the free module with the most informative within-budget path
    wins; near-equal informativeness (within ``TIE_TOL``) goes to the cheaper
    path, then to a seeded random pick. If no free module can reach the spot
    within budget, the cheapest fallback path wins.
    """
    t0 = time.perf_counter()
    modules = sorted(bids)
    if len(modules) < len(spot_ids):
        raise ValueError(f"{len(modules)} modules cannot fill {len(spot_ids)} spots")
    rng = np.random.default_rng(seed)
    table = _by_spot(bids)
    free = list(modules)
    f: dict[int, int] = {}
    paths: dict[int, Optional[PathPlan]] = {}
    for sid in spot_ids:
        offers = [table[m, sid] for m in free if (m, sid) in table]
        within = [b for b in offers if b.within_budget]
        if within:
            best = max(b.informativeness for b in within)
            pool = [b for b in within if b.informativeness >= best - TIE_TOL]
        else:
            pool = [b for b in offers if b.reachable]
        if pool:
            low = min(b.cost for b in pool)
            pool = [b for b in pool if b.cost == low]
            winner = pool[int(rng.integers(len(pool)))] if len(pool) > 1 else pool[0]
            m, path = winner.module, winner.chosen
        else:
            m, path = free[int(rng.integers(len(free)))], None
        f[sid] = m
        paths[sid] = path
        free.remove(m)
    messages = 2 * len(modules)
    return Assignment(f, paths, "sa", messages, time.perf_counter() - t0, list(spot_ids))


def value_matrix(
    bids: Mapping[int, Sequence[Bid]], spot_ids: Sequence[int]
) -> tuple[list[int], np.ndarray]:
    """Module x spot auction values derived from the bids."""
    modules = sorted(bids)
    table = _by_spot(bids)
    V = np.full((len(modules), len(spot_ids)), UNREACHABLE_VALUE)
    for i, m in enumerate(modules):
        for j, sid in enumerate(spot_ids):
            b = table.get((m, sid))
            if b is None or not b.reachable:
                continue
            V[i, j] = b.informativeness if b.within_budget else -(OVER_BUDGET_PENALTY + b.cost)
    return modules, V


def auction(values: np.ndarray, epsilon: float = 1e-3, seed: int = 0, max_rounds: int = 10**7):
    """Jacobi epsilon-auction for a square or tall benefit matrix.

    Returns ``(item_of_bidder, prices, n_bids, n_price_updates)``;
    ``item_of_bidder[i]`` is ``-1`` for bidders left without a real item when
    there are more bidders than items.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    V = np.asarray(values, dtype=float)
    n, m = V.shape
    if n < m:
        raise ValueError("fewer bidders than items")
    if n > m:
        # Dummy items, uniformly worse than anything real, absorb surplus bidders.
        V = np.hstack([V, np.full((n, n - m), V.min() - 1.0)])
    rng = np.random.default_rng(seed)
    k = V.shape[1]
    prices = np.zeros(k)
    owner = np.full(k, -1)
    item_of = np.full(n, -1)
    n_bids = n_updates = 0
    for _ in range(max_rounds):
        unassigned = np.flatnonzero(item_of < 0)
        if unassigned.size == 0:
            break
        offers: dict[int, list[tuple[float, int]]] = {}
        for i in unassigned:
            net = V[i] - prices
            top = net.max()
            cand = np.flatnonzero(net >= top - 1e-12)
            j = int(cand[rng.integers(cand.size)]) if cand.size > 1 else int(cand[0])
            second = np.max(np.delete(net, j)) if k > 1 else top
            offers.setdefault(j, []).append((prices[j] + top - second + epsilon, int(i)))
            n_bids += 1
        for j in sorted(offers):
            bid, i = max(offers[j], key=lambda t: (t[0], -t[1]))
            prev = owner[j]
            if prev >= 0:
                item_of[prev] = -1
            owner[j], item_of[i] = i, j
            prices[j] = bid
            n_updates += 1
    else:
        raise RuntimeError("auction did not converge")
    item_of = np.where(item_of < m, item_of, -1)
    return item_of, prices[:m], n_bids, n_updates


def allocate_auction(
    bids: Mapping[int, Sequence[Bid]],
    spot_ids: Sequence[int],
    epsilon: float = 1e-3,
    seed: int = 0,
) -> Assignment:
    t0 = time.perf_counter()
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    modules, V = value_matrix(bids, spot_ids)
    if len(modules) < len(spot_ids):
        raise ValueError(f"{len(modules)} modules cannot fill {len(spot_ids)} spots")
    item_of, _, n_bids, n_updates = auction(V, epsilon, seed)
    table = _by_spot(bids)
    f, paths = {}, {}
    for i, j in enumerate(item_of):
        if j < 0:
            continue
        sid, m = spot_ids[j], modules[i]
        f[sid] = m
        paths[sid] = table[m, sid].chosen if (m, sid) in table else None
    messages = n_bids + n_updates * len(modules)
    rounds = [s for s in spot_ids if s in f]
    return Assignment(f, paths, "auction", messages, time.perf_counter() - t0, rounds)
