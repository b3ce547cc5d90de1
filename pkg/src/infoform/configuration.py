"""Target configuration graphs: spots, validation, generation, centrality."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .grid import DIRECTIONS, Cell, GridMap, Pose, manhattan_distance


@dataclass(frozen=True)
class Spot:
    id: int
    pose: Pose
    neighbors: tuple[int, ...] = ()

    @property
    def cell(self) -> Cell:
        return self.pose.cell


class ConfigError(RuntimeError):
    pass


@dataclass(eq=False)
class TargetConfig:
    spots: list[Spot]
    edges: frozenset[frozenset[int]] = field(default_factory=frozenset)

    @classmethod
    def from_edges(cls, poses: dict[int, Pose], edges) -> TargetConfig:
        edge_set = frozenset(frozenset(e) for e in edges)
        nbrs: dict[int, list[int]] = {i: [] for i in poses}
        for e in edge_set:
            a, b = sorted(e)
            nbrs[a].append(b)
            nbrs[b].append(a)
        spots = [Spot(i, poses[i], tuple(sorted(nbrs[i]))) for i in sorted(poses)]
        return cls(spots, edge_set)

    def __len__(self):
        return len(self.spots)

    def spot(self, sid: int) -> Spot:
        return self._by_id[sid]

    @cached_property
    def _by_id(self) -> dict[int, Spot]:
        return {s.id: s for s in self.spots}

    @property
    def ids(self) -> list[int]:
        return [s.id for s in self.spots]

    @property
    def cells(self) -> dict[int, Cell]:
        return {s.id: s.cell for s in self.spots}

    @cached_property
    def adjacency(self) -> dict[int, list[int]]:
        adj: dict[int, set[int]] = {s.id: set() for s in self.spots}
        for e in self.edges:
            if len(e) != 2:
                continue
            a, b = tuple(e)
            if a in adj and b in adj:
                adj[a].add(b)
                adj[b].add(a)
        return {k: sorted(v) for k, v in adj.items()}

    @cached_property
    def centrality(self) -> dict[int, float]:
        return betweenness(self)

    def dumps(self) -> str:
        lines = [f"{s.id} {s.cell.x} {s.cell.y} {s.pose.theta!r}" for s in self.spots]
        lines += [f"{a} {b}" for a, b in sorted(tuple(sorted(e)) for e in self.edges)]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> TargetConfig:
        """Parse ``id x y theta`` spot lines and ``id id`` edge lines in any order."""
        poses, edges = {}, []
        for lineno, raw in enumerate(text.splitlines(), 1):
            parts = raw.split("#", 1)[0].split()
            if not parts:
                continue
            if len(parts) == 4:
                sid, x, y = (int(p) for p in parts[:3])
                if sid in poses:
                    raise ConfigError(f"line {lineno}: duplicate spot id {sid}")
                poses[sid] = Pose(Cell(x, y), float(parts[3]))
            elif len(parts) == 2:
                edges.append((int(parts[0]), int(parts[1])))
            else:
                raise ConfigError(f"line {lineno}: expected 2 or 4 fields, got {len(parts)}")
        unknown = {i for e in edges for i in e} - set(poses)
        if unknown:
            raise ConfigError(f"edges reference unknown spots {sorted(unknown)}")
        return cls.from_edges(poses, edges)


def validate(config: TargetConfig, grid: GridMap) -> list[str]:
    """Every violated structural constraint; an empty list means valid."""
    problems = []
    ids = config.ids
    if not ids:
        return ["configuration has no spots"]
    if len(set(ids)) != len(ids):
        problems.append("duplicate spot ids")
    cells = [s.cell for s in config.spots]
    if len(set(cells)) != len(cells):
        problems.append("two spots share a cell")
    for s in config.spots:
        if not grid.in_bounds(s.cell):
            problems.append(f"spot {s.id} at {tuple(s.cell)} is out of bounds")
        elif s.cell in grid.obstacles:
            problems.append(f"spot {s.id} sits on an obstacle")
    known = set(ids)
    adj = config.adjacency
    for e in config.edges:
        if len(e) != 2:
            problems.append(f"degenerate edge {sorted(e)}")
            continue
        a, b = sorted(e)
        if a not in known or b not in known:
            problems.append(f"edge {a}-{b} references an unknown spot")
            continue
        d = manhattan_distance(config.spot(a).cell, config.spot(b).cell)
        if d != 1:
            problems.append(f"edge {a}-{b} spans distance {d}, expected 1")
    for s in config.spots:
        if set(s.neighbors) != set(adj.get(s.id, [])):
            problems.append(f"spot {s.id} neighbour list disagrees with edge set")
        deg = len(adj.get(s.id, []))
        if len(ids) > 1 and not 1 <= deg <= 4:
            problems.append(f"spot {s.id} has degree {deg}, expected 1..4")
    if len(ids) > 1 and len(_bfs_layers(adj, ids[0])[1]) != len(ids):
        problems.append("configuration graph is disconnected")
    return problems


def _bfs_layers(adj: dict[int, list[int]], root: int) -> tuple[list[list[int]], dict[int, int]]:
    dist = {root: 0}
    layers = [[root]]
    q = deque([root])
    while q:
        v = q.popleft()
        for w in adj[v]:
            if w not in dist:
                dist[w] = dist[v] + 1
                if dist[w] == len(layers):
                    layers.append([])
                layers[dist[w]].append(w)
                q.append(w)
    return layers, dist


def generate_random(
    seed: int,
    n: int,
    grid: GridMap,
    center: Cell | None = None,
    edge_prob: float = 0.5,
    max_tries: int = 10_000,
) -> TargetConfig:
    """Grow a connected configuration of ``n`` spots by seeded accretion.

    Starts at ``center`` (map centre by default). Each new spot lands on a
    free cell 4-adjacent to a random existing spot and is linked to it; every
    other existing spot it touches is linked with probability ``edge_prob``.
    Placements that would enclose a free cell are rejected, so every spot
    keeps an approach from the open map.
    """
    if n < 1:
        raise ValueError("need at least one spot")
    rng = np.random.default_rng(seed)
    if center is None:
        center = Cell(grid.width // 2, grid.height // 2)
    if not grid.in_bounds(center) or center in grid.obstacles:
        raise ConfigError(f"centre {center} is not a free cell")
    cells = [center]
    occupied = {center: 0}
    edges = set()
    tries = 0
    while len(cells) < n:
        tries += 1
        if tries > max_tries:
            raise ConfigError(f"could not place {n} spots on a {grid.width}x{grid.height} map")
        base = int(rng.integers(len(cells)))
        dx, dy = DIRECTIONS[int(rng.integers(4))]
        c = Cell(cells[base].x + dx, cells[base].y + dy)
        if not grid.in_bounds(c) or c in grid.obstacles or c in occupied:
            continue
        if _encloses(grid, set(occupied) | {c}, c):
            continue
        sid = len(cells)
        cells.append(c)
        occupied[c] = sid
        edges.add(frozenset((base, sid)))
        for ddx, ddy in DIRECTIONS:
            other = occupied.get(Cell(c.x + ddx, c.y + ddy))
            if other is None or other == base or other == sid:
                continue
            if rng.random() < edge_prob:
                edges.add(frozenset((other, sid)))
    thetas = rng.integers(4, size=n)
    poses = {i: Pose(c, [0.0, math.pi / 2, math.pi, 3 * math.pi / 2][int(t)])
             for i, (c, t) in enumerate(zip(cells, thetas))}
    return TargetConfig.from_edges(poses, edges)


def _encloses(grid: GridMap, filled: set[Cell], new: Cell) -> bool:
    """True if adding ``new`` cuts some free neighbour off from the map border."""
    for dx, dy in DIRECTIONS:
        start = Cell(new.x + dx, new.y + dy)
        if not grid.in_bounds(start) or start in filled:
            continue
        seen = {start}
        q = deque([start])
        escaped = False
        while q and not escaped:
            v = q.popleft()
            for ex, ey in DIRECTIONS:
                w = Cell(v.x + ex, v.y + ey)
                if not grid.in_bounds(w):
                    escaped = True
                    break
                if w in filled or w in seen or w in grid.obstacles:
                    continue
                # Anything outside the bounding box of the filled cells is open map.
                if not _inside_bbox(w, filled):
                    escaped = True
                    break
                seen.add(w)
                q.append(w)
        if not escaped:
            return True
    return False


def _inside_bbox(c: Cell, filled: set[Cell]) -> bool:
    xs = [f.x for f in filled]
    ys = [f.y for f in filled]
    return min(xs) <= c.x <= max(xs) and min(ys) <= c.y <= max(ys)


def betweenness(config: TargetConfig) -> dict[int, float]:
    """Exact unweighted betweenness (Brandes), endpoints excluded, halved for undirected."""
    adj = config.adjacency
    cb = {v: 0.0 for v in adj}
    for s in adj:
        stack = []
        preds: dict[int, list[int]] = {v: [] for v in adj}
        sigma = dict.fromkeys(adj, 0)
        sigma[s] = 1
        dist = dict.fromkeys(adj, -1)
        dist[s] = 0
        q = deque([s])
        while q:
            v = q.popleft()
            stack.append(v)
            for w in adj[v]:
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    q.append(w)
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        delta = dict.fromkeys(adj, 0.0)
        while stack:
            w = stack.pop()
            for v in preds[w]:
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w])
            if w != s:
                cb[w] += delta[w]
    return {v: c / 2.0 for v, c in cb.items()}


def acting_order(config: TargetConfig, seed: int) -> list[int]:
    """Spot ids in movement order: the most central spot, then BFS layers outward.

    Within a layer spots go by descending centrality; remaining ties and the
    choice of centre are decided by a seeded shuffle.
    """
    rng = np.random.default_rng(seed)
    cb = config.centrality
    ids = config.ids
    rank = {sid: r for r, sid in enumerate(rng.permutation(ids).tolist())}
    top = max(cb.values())
    center = min((i for i in ids if math.isclose(cb[i], top, rel_tol=1e-12, abs_tol=1e-12)),
                 key=rank.__getitem__)
    layers, dist = _bfs_layers(config.adjacency, center)
    if len(dist) != len(ids):
        raise ConfigError("configuration graph is disconnected")
    order = []
    for layer in layers:
        order.extend(sorted(layer, key=lambda i: (-round(cb[i], 9), rank[i])))
    return order
