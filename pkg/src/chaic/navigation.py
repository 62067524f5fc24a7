"""Grid navigation: A* over remembered occupancy, frontier exploration, plan execution."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .perception import AgentMemory
from .world import (
    BASKET_ID,
    FLOOR_ID,
    FREE,
    OCCUPIED,
    UNKNOWN,
    WALL,
    KIND_CONTAINER,
    KIND_FURNITURE,
    KIND_OBSTACLE,
    MOVE_FORWARD,
    PICK_UP,
    PLAN_EXPLORE,
    PLAN_FOLLOW_CHILD,
    PLAN_FOLLOW_PARTNER,
    PLAN_GOTO_PICK,
    PLAN_PUT_IN_HELD,
    PLAN_REMOVE_OBSTACLE,
    PLAN_TRANSPORT,
    PLAN_WAIT,
    PUT_IN,
    PUT_ON,
    TURN_LEFT,
    TURN_RIGHT,
    WAIT,
    Action,
    AgentState,
    Plan,
    Position2D,
    heading_index,
)

# Traversal cost per occupancy class; walls are impassable.
COST_FREE = 1.0
COST_UNKNOWN = 3.0
COST_OCCUPIED = 20.0

_COST_LUT = np.array([COST_FREE, np.inf, COST_OCCUPIED, COST_UNKNOWN], dtype=np.float64)

_NEIGHBORS = ((1, 0), (0, 1), (-1, 0), (0, -1))


def build_costmap(occupancy: np.ndarray) -> np.ndarray:
    """Per-cell entry cost derived from an occupancy grid."""
    return _COST_LUT[occupancy]


def astar(cost: np.ndarray, start: tuple[int, int], goal: tuple[int, int]) -> Optional[list[tuple[int, int]]]:
    """Minimal-cost 4-connected path under the cost map, or None when unreachable.

    Cost is charged on entering a cell; the Manhattan heuristic is admissible
    because the cheapest cell class costs 1. Ties prefer larger g so open
    terrain expands near-linearly along the corridor.
    """
    w, h = cost.shape
    if not (0 <= start[0] < w and 0 <= start[1] < h and 0 <= goal[0] < w and 0 <= goal[1] < h):
        return None
    if not np.isfinite(cost[goal]) or not np.isfinite(cost[start]):
        return None
    if start == goal:
        return [start]

    def heur(c):
        return abs(c[0] - goal[0]) + abs(c[1] - goal[1])

    g = {start: 0.0}
    parent: dict[tuple[int, int], tuple[int, int]] = {}
    counter = 0
    heap = [(heur(start), 0.0, counter, start)]
    closed = set()
    while heap:
        f, neg_g, _, cur = heapq.heappop(heap)
        if cur in closed:
            continue
        if cur == goal:
            path = [cur]
            while cur in parent:
                cur = parent[cur]
                path.append(cur)
            path.reverse()
            return path
        closed.add(cur)
        cx, cy = cur
        for dx, dy in _NEIGHBORS:
            nxt = (cx + dx, cy + dy)
            if not (0 <= nxt[0] < w and 0 <= nxt[1] < h) or nxt in closed:
                continue
            step = cost[nxt]
            if not np.isfinite(step):
                continue
            cand = g[cur] + step
            if cand < g.get(nxt, math.inf):
                g[nxt] = cand
                parent[nxt] = cur
                counter += 1
                heapq.heappush(heap, (cand + heur(nxt), -cand, counter, nxt))
    return None


def path_cost(cost: np.ndarray, path: list[tuple[int, int]]) -> float:
    return float(sum(cost[c] for c in path[1:]))


def dijkstra_to_any(
    cost: np.ndarray, start: tuple[int, int], targets: set[tuple[int, int]]
) -> Optional[list[tuple[int, int]]]:
    """Cheapest path from start to the nearest member of targets."""
    w, h = cost.shape
    if start in targets:
        return [start]
    if not np.isfinite(cost[start]):
        return None
    dist = {start: 0.0}
    parent: dict[tuple[int, int], tuple[int, int]] = {}
    counter = 0
    heap = [(0.0, counter, start)]
    closed = set()
    while heap:
        d, _, cur = heapq.heappop(heap)
        if cur in closed:
            continue
        if cur in targets:
            path = [cur]
            while cur in parent:
                cur = parent[cur]
                path.append(cur)
            path.reverse()
            return path
        closed.add(cur)
        cx, cy = cur
        for dx, dy in _NEIGHBORS:
            nxt = (cx + dx, cy + dy)
            if not (0 <= nxt[0] < w and 0 <= nxt[1] < h) or nxt in closed:
                continue
            step = cost[nxt]
            if not np.isfinite(step):
                continue
            cand = d + step
            if cand < dist.get(nxt, math.inf):
                dist[nxt] = cand
                parent[nxt] = cur
                counter += 1
                heapq.heappush(heap, (cand, counter, nxt))
    return None


def frontier_cells(occupancy: np.ndarray) -> set[tuple[int, int]]:
    """Unknown cells 4-adjacent to a known-free cell."""
    unknown = occupancy == UNKNOWN
    free = occupancy == FREE
    adj = np.zeros_like(free)
    adj[1:, :] |= free[:-1, :]
    adj[:-1, :] |= free[1:, :]
    adj[:, 1:] |= free[:, :-1]
    adj[:, :-1] |= free[:, 1:]
    xs, ys = np.nonzero(unknown & adj)
    return {(int(x), int(y)) for x, y in zip(xs, ys)}


def select_frontier(occupancy: np.ndarray, agent_cell: tuple[int, int]) -> Optional[tuple[int, int]]:
    """Reachable frontier cell minimizing path cost from the agent, or None when done."""
    frontiers = frontier_cells(occupancy)
    if not frontiers:
        return None
    path = dijkstra_to_any(build_costmap(occupancy), agent_cell, frontiers)
    if path is None:
        return None
    return path[-1]


_REMOVE_RELOCATION_CELLS = 3  # how far an obstacle is carried before dropping it


@dataclass
class ExecutionContext:
    """What the executor may see: the agent's own state and its memory."""

    agent: AgentState
    memory: AgentMemory
    cell_size: float
    reach_distance: float = 0.75
    goal_id: Optional[int] = None


class PlanExecutor:
    """Turns one Plan at a time into primitive actions, replanning each call.

    next_action() is invoked once per decision point (i.e., whenever the
    occupancy map may have changed); it recomputes the path from scratch so
    the followed route is always minimal-cost under current knowledge.
    """

    def __init__(self, agent_id: int):
        self.agent_id = agent_id
        self.plan: Optional[Plan] = None
        self.stage = 0
        self.frontier_target: Optional[tuple[int, int]] = None
        self.nopath_streak = 0
        self.status = "idle"  # idle | active | done | stuck | invalid

    def set_plan(self, plan: Plan) -> None:
        if plan == self.plan and self.status == "active":
            return
        self.plan = plan
        self.stage = 0
        self.frontier_target = None
        self.nopath_streak = 0
        self.status = "active"

    def on_outcome(self, action: Action, success: bool) -> None:
        """Advance multi-stage plans on interaction results."""
        if self.plan is None:
            return
        kind = self.plan.kind
        if kind == PLAN_GOTO_PICK and action.kind == PICK_UP:
            self.status = "done"
        elif kind == PLAN_PUT_IN_HELD and action.kind == PUT_IN:
            self.status = "done"
        elif kind == PLAN_REMOVE_OBSTACLE:
            if action.kind == PICK_UP and success:
                self.stage = 1
            elif action.kind == PUT_ON and success:
                self.status = "done"

    # ------------------------------------------------------------------ steps

    def next_action(self, ctx: ExecutionContext) -> Optional[Action]:
        """Next primitive toward the current plan, or None when the plan yields nothing."""
        if self.plan is None or self.status in ("done", "stuck", "invalid"):
            return None
        kind = self.plan.kind
        if kind == PLAN_WAIT:
            self.status = "done"
            return Action(WAIT)
        if kind == PLAN_EXPLORE:
            return self._explore(ctx)
        if kind == PLAN_GOTO_PICK:
            return self._goto_pick(ctx)
        if kind == PLAN_PUT_IN_HELD:
            return self._put_in_held(ctx)
        if kind == PLAN_TRANSPORT:
            return self._transport(ctx)
        if kind in (PLAN_FOLLOW_PARTNER, PLAN_FOLLOW_CHILD):
            return self._follow(ctx)
        if kind == PLAN_REMOVE_OBSTACLE:
            return self._remove_obstacle(ctx)
        self.status = "invalid"
        return None

    def _agent_cell(self, ctx: ExecutionContext) -> tuple[int, int]:
        return ctx.memory.cell_of(ctx.agent.position)

    def _interaction_cells(self, ctx: ExecutionContext, pos: Position2D) -> set[tuple[int, int]]:
        occ = ctx.memory.occupancy
        cx, cy = ctx.memory.cell_of(pos)
        r = int(math.ceil(ctx.reach_distance / ctx.cell_size))
        out = set()
        for dx in range(-r, r + 1):
            for dy in range(-r, r + 1):
                cell = (cx + dx, cy + dy)
                if not (0 <= cell[0] < occ.shape[0] and 0 <= cell[1] < occ.shape[1]):
                    continue
                if occ[cell] == WALL or occ[cell] == OCCUPIED:
                    continue
                center = Position2D((cell[0] + 0.5) * ctx.cell_size, (cell[1] + 0.5) * ctx.cell_size)
                if center.dist(pos) <= ctx.reach_distance:
                    out.add(cell)
        return out

    def _step_along(self, ctx: ExecutionContext, targets: set[tuple[int, int]]) -> Optional[Action]:
        """Emit the next turn/move toward the nearest target cell; None on arrival."""
        cur = self._agent_cell(ctx)
        if cur in targets:
            self.nopath_streak = 0
            return None
        cost = build_costmap(ctx.memory.occupancy)
        path = dijkstra_to_any(cost, cur, targets) if targets else None
        if path is None or len(path) < 2:
            self.nopath_streak += 1
            if self.nopath_streak >= 3:
                self.status = "stuck"
            return Action(WAIT) if self.status != "stuck" else None
        self.nopath_streak = 0
        nxt = path[1]
        want = _NEIGHBORS.index((nxt[0] - cur[0], nxt[1] - cur[1]))
        have = heading_index(ctx.agent.heading)
        if want != have:
            return Action(TURN_LEFT) if (want - have) % 4 in (1, 2) else Action(TURN_RIGHT)
        return Action(MOVE_FORWARD)

    def _face(self, ctx: ExecutionContext, pos: Position2D) -> Optional[Action]:
        """Turn toward pos if needed; None once facing (or colocated)."""
        dx = pos.x - ctx.agent.position.x
        dy = pos.y - ctx.agent.position.y
        if abs(dx) < 1e-9 and abs(dy) < 1e-9:
            return None
        want = 0 if abs(dx) >= abs(dy) and dx > 0 else 2 if abs(dx) >= abs(dy) else 1 if dy > 0 else 3
        have = heading_index(ctx.agent.heading)
        if want == have:
            return None
        return Action(TURN_LEFT) if (want - have) % 4 in (1, 2) else Action(TURN_RIGHT)

    def _explore(self, ctx: ExecutionContext) -> Optional[Action]:
        occ = ctx.memory.occupancy
        cur = self._agent_cell(ctx)
        for _ in range(2):
            target = self.frontier_target
            if target is None or occ[target] != UNKNOWN:
                target = select_frontier(occ, cur)
                self.frontier_target = target
            if target is None:
                self.status = "done"
                return None
            step = self._step_along(ctx, {target})
            if step is not None:
                return step
            self.frontier_target = None  # standing on it; pick the next one
        return Action(WAIT)

    def _goto_pick(self, ctx: ExecutionContext) -> Optional[Action]:
        entry = ctx.memory.semantic.get(self.plan.object_id)
        if entry is None:
            self.status = "invalid"
            return None
        cells = self._interaction_cells(ctx, entry.position)
        if entry.kind == KIND_FURNITURE:
            # Joint lifts need both lifters tight against the furniture.
            near = {c for c in cells if Position2D((c[0] + 0.5) * ctx.cell_size, (c[1] + 0.5) * ctx.cell_size).dist(entry.position) <= 0.5}
            cells = near or cells
        if not cells:
            self.status = "stuck"
            return None
        step = self._step_along(ctx, cells)
        if step is not None:
            return step
        turn = self._face(ctx, entry.position)
        if turn is not None:
            return turn
        return Action(PICK_UP, object_id=self.plan.object_id)

    def _put_in_held(self, ctx: ExecutionContext) -> Optional[Action]:
        agent = ctx.agent
        item = None
        for oid in agent.held_ids():
            e = ctx.memory.semantic.get(oid)
            kind = e.kind if e is not None else None
            if kind != KIND_CONTAINER:
                item = oid
                break
        if item is None:
            self.status = "invalid"
            return None
        if agent.profile.bike:
            if len(agent.basket) < agent.profile.basket_capacity:
                return Action(PUT_IN, object_id=item, container_id=BASKET_ID)
            self.status = "invalid"
            return None
        for oid in agent.held_ids():
            e = ctx.memory.semantic.get(oid)
            if e is not None and e.kind == KIND_CONTAINER and oid != item:
                return Action(PUT_IN, object_id=item, container_id=oid)
        self.status = "invalid"
        return None

    def _deliverable(self, ctx: ExecutionContext) -> Optional[int]:
        agent = ctx.agent
        held = agent.held_ids()
        containers = [
            oid for oid in held if (e := ctx.memory.semantic.get(oid)) is not None and e.kind == KIND_CONTAINER
        ]
        if containers:
            return containers[0]
        for oid in held:
            e = ctx.memory.semantic.get(oid)
            if e is not None and e.kind == KIND_OBSTACLE:
                continue  # obstacles are set aside, never delivered
            return oid
        if agent.basket:
            return agent.basket[0]
        return None

    def _transport(self, ctx: ExecutionContext) -> Optional[Action]:
        goal = ctx.memory.goal_entry()
        if goal is None:
            self.status = "invalid"
            return None
        cells = self._interaction_cells(ctx, goal.position)
        if not cells:
            self.status = "stuck"
            return None
        step = self._step_along(ctx, cells)
        if step is not None:
            return step
        oid = self._deliverable(ctx)
        if oid is None:
            self.status = "done"
            return None
        turn = self._face(ctx, goal.position)
        if turn is not None:
            return turn
        return Action(PUT_ON, object_id=oid, target_id=ctx.goal_id)

    def _follow(self, ctx: ExecutionContext) -> Optional[Action]:
        if self.plan.kind == PLAN_FOLLOW_CHILD:
            seen = ctx.memory.child_last_seen
            stop = 0.75
        else:
            seen = ctx.memory.partner_last_seen
            stop = 2.0
        if seen is None:
            self.status = "invalid"
            return None
        _, pos = seen
        if ctx.agent.position.dist(pos) <= stop:
            turn = self._face(ctx, pos)
            return turn if turn is not None else Action(WAIT)
        cells = {
            c
            for c in self._interaction_cells(ctx, pos) | self._ring_cells(ctx, pos, stop)
        }
        step = self._step_along(ctx, cells)
        if step is None:
            return Action(WAIT)
        return step

    def _ring_cells(self, ctx: ExecutionContext, pos: Position2D, radius: float) -> set[tuple[int, int]]:
        occ = ctx.memory.occupancy
        cx, cy = ctx.memory.cell_of(pos)
        r = int(math.ceil(radius / ctx.cell_size))
        out = set()
        for dx in range(-r, r + 1):
            for dy in range(-r, r + 1):
                cell = (cx + dx, cy + dy)
                if not (0 <= cell[0] < occ.shape[0] and 0 <= cell[1] < occ.shape[1]):
                    continue
                if occ[cell] in (WALL, OCCUPIED):
                    continue
                center = Position2D((cell[0] + 0.5) * ctx.cell_size, (cell[1] + 0.5) * ctx.cell_size)
                if center.dist(pos) <= radius:
                    out.add(cell)
        return out

    def _remove_obstacle(self, ctx: ExecutionContext) -> Optional[Action]:
        oid = self.plan.object_id
        if self.stage == 0:
            holding = oid in ctx.agent.held_ids()
            if holding:
                self.stage = 1
            else:
                entry = ctx.memory.semantic.get(oid)
                if entry is None:
                    self.status = "invalid"
                    return None
                cells = self._interaction_cells(ctx, entry.position)
                if not cells:
                    self.status = "stuck"
                    return None
                step = self._step_along(ctx, cells)
                if step is not None:
                    return step
                turn = self._face(ctx, entry.position)
                if turn is not None:
                    return turn
                return Action(PICK_UP, object_id=oid)
        if self.stage == 1:
            # Carry it a few cells aside, then drop it on the floor.
            self.stage = 2
            self._carry_steps = _REMOVE_RELOCATION_CELLS
        if self.stage == 2 and getattr(self, "_carry_steps", 0) > 0:
            self._carry_steps -= 1
            occ = ctx.memory.occupancy
            cur = self._agent_cell(ctx)
            from .world import HEADING_VECS

            hi = heading_index(ctx.agent.heading)
            fwd = (cur[0] + HEADING_VECS[hi][0], cur[1] + HEADING_VECS[hi][1])
            if 0 <= fwd[0] < occ.shape[0] and 0 <= fwd[1] < occ.shape[1] and occ[fwd] == FREE:
                return Action(MOVE_FORWARD)
            return Action(TURN_LEFT)
        return Action(PUT_ON, object_id=oid, target_id=FLOOR_ID)
