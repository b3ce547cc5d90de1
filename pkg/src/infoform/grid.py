"""Discretized 4-connected environment with a ground-truth information field."""

from __future__ import annotations

import math
import dataclasses
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np


class Cell(NamedTuple):
    x: int
    y: int


# Fixed expansion order N, E, S, W; every downstream tie-break depends on it.
DIRECTIONS: tuple[tuple[int, int], ...] = ((0, 1), (1, 0), (0, -1), (-1, 0))

THETAS = (0.0, math.pi / 2, math.pi, 3 * math.pi / 2)


@dataclass(frozen=True)
class Pose:
    """Cell plus a cardinal heading. Heading never affects motion cost."""

    cell: Cell
    theta: float = 0.0

    def __post_init__(self):
        if not any(math.isclose(self.theta, t) for t in THETAS):
            raise ValueError(f"theta must be a cardinal direction, got {self.theta}")


@dataclass(frozen=True, eq=False)
class GridMap:
    """Bounded (non-wrapping) rectangle of cells.

    ``field`` is indexed ``field[y, x]`` (row-major) and holds the ground-truth
    information value of every cell. Obstacle cells keep a value in the array
    but it is never read.
    """

    width: int
    height: int
    field: np.ndarray
    obstacles: frozenset[Cell] = dataclasses.field(default_factory=frozenset)
    low: float = 1.0
    high: float = 10.0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("grid dimensions must be positive")
        if self.field.shape != (self.height, self.width):
            raise ValueError(
                f"field shape {self.field.shape} does not match {(self.height, self.width)}"
            )
        for c in self.obstacles:
            if not self.in_bounds(c):
                raise ValueError(f"obstacle {c} outside the grid")

    def in_bounds(self, c: Cell) -> bool:
        return 0 <= c[0] < self.width and 0 <= c[1] < self.height

    def value(self, c: Cell) -> float:
        return float(self.field[c[1], c[0]])

    def cells(self) -> Iterable[Cell]:
        """All cells in row-major order (y outer, x inner)."""
        for y in range(self.height):
            for x in range(self.width):
                yield Cell(x, y)

    def free_cells(self) -> list[Cell]:
        return [c for c in self.cells() if c not in self.obstacles]

    @property
    def size(self) -> int:
        return self.width * self.height


def manhattan_distance(a: Cell, b: Cell) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def neighbors4(c: Cell, grid: GridMap, blocked: frozenset | set = frozenset()) -> list[Cell]:
    """In-bounds von Neumann neighbours of ``c`` in N, E, S, W order.

    Obstacles and ``blocked`` cells are excluded.
    """
    out = []
    for dx, dy in DIRECTIONS:
        n = Cell(c[0] + dx, c[1] + dy)
        if grid.in_bounds(n) and n not in grid.obstacles and n not in blocked:
            out.append(n)
    return out


def generate_field(
    seed: int,
    width: int,
    height: int,
    low: float = 1.0,
    high: float = 10.0,
) -> GridMap:
    """Obstacle-free map whose cell values are i.i.d. uniform in [low, high]."""
    if not low < high:
        raise ValueError(f"need low < high, got [{low}, {high}]")
    if width < 1 or height < 1:
        raise ValueError("grid dimensions must be positive")
    rng = np.random.default_rng(seed)
    values = rng.uniform(low, high, size=(height, width))
    return GridMap(width=width, height=height, field=values, low=low, high=high)


def to_ascii(
    grid: GridMap,
    blocked: Iterable[Cell] = (),
    explored: Iterable[Cell] = (),
    path: Iterable[Cell] = (),
) -> str:
    """One character per cell, top row is the largest y.

    ``.`` free, ``#`` obstacle or blocked, ``o`` explored, ``*`` path. Later
    layers win: path over explored over blocked.
    """
    canvas = [["." for _ in range(grid.width)] for _ in range(grid.height)]
    for c in grid.obstacles:
        canvas[c.y][c.x] = "#"
    for layer, ch in ((blocked, "#"), (explored, "o"), (path, "*")):
        for c in layer:
            canvas[c[1]][c[0]] = ch
    return "\n".join("".join(row) for row in reversed(canvas)) + "\n"


def to_pgm(values: np.ndarray) -> bytes:
    """Binary 8-bit PGM (P5) heatmap of a ``[y, x]`` array.

    Values are min-max normalized; non-finite entries map to 0. Row 0 of the
    image is the largest y so it lines up with :func:`to_ascii`.
    """
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 2:
        raise ValueError("expected a 2-D array")
    finite = np.isfinite(arr)
    out = np.zeros(arr.shape, dtype=np.uint8)
    if finite.any():
        lo, hi = arr[finite].min(), arr[finite].max()
        span = hi - lo if hi > lo else 1.0
        out[finite] = np.round(255 * (arr[finite] - lo) / span).astype(np.uint8)
    out = out[::-1]
    h, w = out.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + out.tobytes()
