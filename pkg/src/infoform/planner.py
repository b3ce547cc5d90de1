"""Budget-bounded informative path search on the grid.

:func:`eps_search` is a greedy best-first bounded-cost search keyed on the
entropic potential ``(B - g) / h + H(c|O)``. :func:`shortest_path` is a
plain optimal-cost search used when no within-budget path exists.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from .gp import GpState
from .grid import Cell, GridMap, manhattan_distance, neighbors4


ExpandHook = Callable[[Cell, int, float], None]


@dataclass(frozen=True)
class PathPlan:
    cells: tuple[Cell, ...]
    informativeness: float
    budget: Optional[int] = None

    @property
    def cost(self) -> int:
        return len(self.cells) - 1

    @property
    def start(self) -> Cell:
        return self.cells[0]

    @property
    def goal(self) -> Cell:
        return self.cells[-1]

    @property
    def within_budget(self) -> bool:
        return self.budget is not None and self.cost < self.budget


def path_informativeness(cells: Iterable[Cell], entropy: np.ndarray) -> float:
    """Sum of per-cell entropies against one frozen snapshot.

    Cells with non-positive entropy (already-sensed cells) contribute zero.
    """
    return float(sum(max(float(entropy[c[1], c[0]]), 0.0) for c in cells))


def make_plan(cells, entropy: np.ndarray, budget: Optional[int] = None) -> PathPlan:
    cells = tuple(Cell(int(c[0]), int(c[1])) for c in cells)
    return PathPlan(cells, path_informativeness(cells, entropy), budget)


def potential(budget: float, g: float, h: float) -> float:
    if h == 0:
        return math.inf
    return (budget - g) / h


def entropic_potential(budget: float, g: float, h: float, entropy: float) -> float:
    return potential(budget, g, h) + entropy


def euclidean_distance(a: Cell, b: Cell) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


HEURISTICS = {"manhattan": manhattan_distance, "euclidean": euclidean_distance}


def _check_cells(grid: GridMap, *cells: Cell):
    for c in cells:
        if not grid.in_bounds(c):
            raise ValueError(f"cell {c} outside the {grid.width}x{grid.height} grid")


def _reconstruct(parent: dict, end: Cell) -> list[Cell]:
    out = [end]
    while parent[out[-1]] is not None:
        out.append(parent[out[-1]])
    out.reverse()
    return out


def eps_search(
    start: Cell,
    goal: Cell,
    budget: int,
    gp: GpState,
    grid: GridMap,
    blocked: frozenset | set = frozenset(),
    on_expand: ExpandHook | None = None,
    heuristic: str = "manhattan",
) -> PathPlan | None:
    """Entropic potential search from ``start`` to ``goal`` under ``budget``.

    Returns a path of cost strictly below ``budget`` or ``None``. Nodes are
    pruned when ``g + h >= budget``, the goal is tested when generated, and
    non-goal cells with non-positive entropy never enter OPEN. A node already
    in OPEN or CLOSED is re-parented (CLOSED ones re-opened) only on a
    strictly smaller ``g``.

    OPEN ties on equal key go to larger ``g``, then to the N/E/S/W direction
    the node was generated from, then to insertion order. ``on_expand`` is
    called with ``(cell, g, hu)`` for every expanded node.
    """
    start, goal = Cell(*start), Cell(*goal)
    _check_cells(grid, start, goal)
    if start == goal:
        raise ValueError("start and goal coincide")
    entropy = gp.entropy_grid(grid.width, grid.height)

    def H(c: Cell) -> float:
        return float(entropy[c.y, c.x])

    hfun = HEURISTICS[heuristic]
    g = {start: 0}
    parent: dict[Cell, Cell | None] = {start: None}
    hu = {start: entropic_potential(budget, 0, hfun(start, goal), H(start))}
    open_set = {start}
    closed: set[Cell] = set()
    heap = [(-hu[start], 0, 0, 0, start)]
    seq = 1

    while heap:
        key, _, _, _, n = heapq.heappop(heap)
        if n not in open_set or -key != hu[n]:
            continue
        open_set.discard(n)
        gn = g[n]
        if on_expand is not None:
            on_expand(n, gn, hu[n])
        for d, m in _dir_neighbors(n, grid, blocked):
            gm = gn + 1
            known = m in open_set or m in closed
            if known and g[m] <= gm:
                continue
            hm = hfun(m, goal)
            if gm + hm >= budget:
                continue
            if m == goal:
                parent[m] = n
                return make_plan(_reconstruct(parent, m), entropy, budget)
            if m in open_set:
                g[m], parent[m] = gm, n
            elif m in closed:
                closed.discard(m)
                open_set.add(m)
                g[m], parent[m] = gm, n
            elif H(m) > 0:
                open_set.add(m)
                g[m], parent[m] = gm, n
            else:
                continue
            hu[m] = entropic_potential(budget, gm, hm, H(m))
            heapq.heappush(heap, (-hu[m], -gm, d, seq, m))
            seq += 1
        closed.add(n)
    return None


def _dir_neighbors(c: Cell, grid: GridMap, blocked) -> list[tuple[int, Cell]]:
    # neighbors4 keeps N/E/S/W order; recover the direction index for tie-breaks.
    return [
        (_DIR_INDEX[(m.x - c.x, m.y - c.y)], m) for m in neighbors4(c, grid, blocked)
    ]


_DIR_INDEX = {(0, 1): 0, (1, 0): 1, (0, -1): 2, (-1, 0): 3}


def shortest_path(
    start: Cell,
    goal: Cell,
    gp: GpState,
    grid: GridMap,
    blocked: frozenset | set = frozenset(),
) -> PathPlan | None:
    """Optimal-cost 4-connected path (A* with the Manhattan heuristic).

    Ties are broken by neighbour order then insertion sequence. The plan is
    annotated with informativeness from ``gp`` and carries no budget.
    """
    start, goal = Cell(*start), Cell(*goal)
    _check_cells(grid, start, goal)
    entropy = gp.entropy_grid(grid.width, grid.height)
    if start == goal:
        return make_plan([start], entropy)
    g = {start: 0}
    parent: dict[Cell, Cell | None] = {start: None}
    heap = [(manhattan_distance(start, goal), 0, start)]
    seq = 1
    done = set()
    while heap:
        _, _, n = heapq.heappop(heap)
        if n in done:
            continue
        if n == goal:
            return make_plan(_reconstruct(parent, n), entropy)
        done.add(n)
        for m in neighbors4(n, grid, blocked):
            gm = g[n] + 1
            if m in g and g[m] <= gm:
                continue
            g[m], parent[m] = gm, n
            heapq.heappush(heap, (gm + manhattan_distance(m, goal), seq, m))
            seq += 1
    return None
