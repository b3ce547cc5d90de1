"""Sequential acting phase: modules move one at a time in centrality order.

The active module advances one cell per step, senses it into the shared GP,
and every ``replan_interval`` visited cells re-runs EPS with its remaining
budget, switching paths only when the new one is strictly more informative.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .allocation import Assignment
from .configuration import TargetConfig
from .gp import GpState
from .grid import Cell, GridMap, manhattan_distance
from .planner import eps_search, path_informativeness, shortest_path


class BlockedArrival(RuntimeError):
    """The active module has no route left to its spot."""


class Status(str, Enum):
    WAITING = "waiting"
    MOVING = "moving"
    REACHED = "reached"


@dataclass
class ModuleState:
    id: int
    cell: Cell
    spot: int
    goal: Cell
    remaining: list[Cell]
    budget_left: int
    visited: list[Cell]
    since_replan: int = 0
    replans: int = 0
    replans_accepted: int = 0
    detours: int = 0
    status: Status = Status.WAITING

    @property
    def steps(self) -> int:
        return len(self.visited) - 1


@dataclass
class ActingReport:
    paths: dict[int, list[Cell]]
    collected: float
    replans: int
    replans_accepted: int
    detours: int
    messages: int
    steps: int
    wall_time: float


@dataclass
class SimWorld:
    grid: GridMap
    gp: GpState
    config: TargetConfig
    assignment: Assignment
    order: list[int]
    budget: int
    replan_interval: int
    modules: dict[int, ModuleState] = field(default_factory=dict)
    trace: list[dict] = field(default_factory=list)
    collected: float = 0.0
    messages: int = 0
    t: int = 0
    turn: int = 0

    @classmethod
    def create(
        cls,
        grid: GridMap,
        gp: GpState,
        config: TargetConfig,
        assignment: Assignment,
        starts: dict[int, Cell],
        order: list[int],
        budget: int,
        replan_interval: int,
    ) -> SimWorld:
        if not 1 <= replan_interval:
            raise ValueError("replan interval must be at least 1")
        if not assignment.is_injective():
            raise ValueError("assignment maps two spots to one module")
        world = cls(grid, gp, config, assignment, [s for s in order if s in assignment.spot_to_module],
                     budget, replan_interval)
        for sid, mid in assignment.spot_to_module.items():
            plan = assignment.paths.get(sid)
            start = Cell(*starts[mid])
            remaining = list(plan.cells[1:]) if plan is not None and plan.start == start else []
            world.modules[mid] = ModuleState(
                id=mid,
                cell=start,
                spot=sid,
                goal=config.spot(sid).cell,
                remaining=remaining,
                budget_left=budget,
                visited=[start],
            )
        # Unassigned modules stay parked where they started.
        for mid, c in starts.items():
            if mid not in world.modules:
                world.modules[mid] = ModuleState(mid, Cell(*c), -1, Cell(*c), [], budget, [Cell(*c)])
        return world

    @property
    def done(self) -> bool:
        return self.turn >= len(self.order)

    @property
    def active(self) -> Optional[ModuleState]:
        if self.done:
            return None
        return self.modules[self.assignment.spot_to_module[self.order[self.turn]]]

    def occupied(self, exclude: int) -> set[Cell]:
        return {m.cell for m in self.modules.values() if m.id != exclude}

    def _log(self, mod: ModuleState, event: str, entropy: float = 0.0):
        self.trace.append({
            "t": self.t,
            "module": mod.id,
            "cell": [mod.cell.x, mod.cell.y],
            "entropy_collected": entropy,
            "b_remaining": mod.budget_left,
            "event": event,
        })

    def _reroute(self, mod: ModuleState, blocked: set[Cell]):
        plan = eps_search(mod.cell, mod.goal, mod.budget_left, self.gp, self.grid, blocked)
        if plan is None:
            plan = shortest_path(mod.cell, mod.goal, self.gp, self.grid, blocked)
        if plan is None:
            raise BlockedArrival(
                f"module {mod.id} at {tuple(mod.cell)} cannot reach spot {mod.spot}"
            )
        mod.remaining = list(plan.cells[1:])
        mod.detours += 1
        self._log(mod, "detour")

    def _replan(self, mod: ModuleState, blocked: set[Cell]):
        mod.since_replan = 0
        mod.replans += 1
        new = eps_search(mod.cell, mod.goal, mod.budget_left, self.gp, self.grid, blocked)
        entropy = self.gp.entropy_grid(self.grid.width, self.grid.height)
        current = path_informativeness([mod.cell, *mod.remaining], entropy)
        if new is not None and new.informativeness > current and new.cost <= mod.budget_left:
            mod.remaining = list(new.cells[1:])
            mod.replans_accepted += 1
            self._log(mod, "replan_accept")
        else:
            self._log(mod, "replan_reject")

    def _arrive(self, mod: ModuleState):
        mod.status = Status.REACHED
        mod.remaining = []
        self.messages += len(self.modules) - 1
        self._log(mod, "reached")
        self.turn += 1

    def step(self):
        """Advance the active module by one cell."""
        mod = self.active
        if mod is None:
            raise RuntimeError("acting phase already finished")
        if mod.cell == mod.goal:
            # Already on the spot: arrival without a move.
            self._arrive(mod)
            return
        mod.status = Status.MOVING
        blocked = self.occupied(mod.id)
        if mod.goal in blocked:
            raise BlockedArrival(f"spot {mod.spot} is occupied by another module")
        if not mod.remaining or mod.remaining[0] in blocked or \
                manhattan_distance(mod.remaining[0], mod.cell) != 1:
            self._reroute(mod, blocked)
        nxt = mod.remaining.pop(0)
        mod.cell = nxt
        mod.visited.append(nxt)
        mod.budget_left -= 1
        mod.since_replan += 1
        # Cells with non-positive entropy add nothing to the collected total.
        gain = max(self.gp.entropy(nxt), 0.0)
        self.collected += gain
        self.gp = self.gp.observe(nxt, self.grid.value(nxt))
        self._log(mod, "move", gain)
        if nxt == mod.goal:
            self._arrive(mod)
        elif mod.since_replan >= self.replan_interval:
            self._replan(mod, blocked)
        self.t += 1

    def trace_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.trace)


def run_acting(world: SimWorld) -> ActingReport:
    """Step until every assigned module has reached its spot."""
    t0 = time.perf_counter()
    cap = max(1, len(world.modules)) * world.grid.size
    steps = 0
    while not world.done:
        if steps >= cap:
            raise RuntimeError(f"acting phase exceeded {cap} steps")
        world.step()
        steps += 1
    mods = [world.modules[m] for m in world.assignment.spot_to_module.values()]
    return ActingReport(
        paths={m.id: list(m.visited) for m in mods},
        collected=world.collected,
        replans=sum(m.replans for m in mods),
        replans_accepted=sum(m.replans_accepted for m in mods),
        detours=sum(m.detours for m in mods),
        messages=world.messages,
        steps=steps,
        wall_time=time.perf_counter() - t0,
    )


def check_no_hole(world: SimWorld, config: TargetConfig | None = None) -> bool:
    """Every spot holds exactly its assigned module, and the trace shows it arriving."""
    config = config or world.config
    f = world.assignment.spot_to_module
    arrivals = {(r["module"], tuple(r["cell"])) for r in world.trace if r["event"] == "reached"}
    for s in config.spots:
        mid = f.get(s.id)
        if mid is None:
            return False
        if world.modules[mid].cell != s.cell:
            return False
        if sum(1 for m in world.modules.values() if m.cell == s.cell) != 1:
            return False
        if (mid, tuple(s.cell)) not in arrivals:
            return False
    return True


def path_cost(cells: list[Cell]) -> int:
    return len(cells) - 1


def collected_increments(trace: list[dict]) -> list[float]:
    return [r["entropy_collected"] for r in trace if r["event"] == "move"]

