"""Symbolic partial observations and per-agent occupancy/semantic memory."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .world import (
    FREE,
    OCCUPIED,
    UNKNOWN,
    WALL,
    KIND_GOAL,
    AgentState,
    Position2D,
    SceneState,
)


@dataclass(frozen=True)
class PerceptionConfig:
    fov: float = math.pi / 2
    range_indoor: float = 5.0
    range_outdoor: float = 15.0
    detection_drop_p: float = 0.0  # optional per-object miss probability

    def range_for(self, setting: str) -> float:
        return self.range_outdoor if setting == "outdoor" else self.range_indoor


@dataclass(frozen=True)
class VisibleObject:
    id: int
    name: str
    kind: str
    category: str
    position: Position2D
    height: float
    weight: float
    fragile: bool
    broken: bool
    blocks: bool


@dataclass(frozen=True)
class PartnerSnapshot:
    agent_id: int
    name: str
    position: Position2D
    holding: tuple[int, ...]
    basket: tuple[int, ...]
    action_kind: Optional[str]  # in-flight action class, if any


@dataclass
class Observation:
    frame: int
    agent_id: int
    visible_objects: list[VisibleObject]
    self_position: Position2D
    self_heading: float
    self_holding: list[Optional[int]]
    self_basket: list[int]
    partner_snapshot: Optional[PartnerSnapshot]
    child_snapshot: Optional[PartnerSnapshot]
    swept: list[tuple[tuple[int, int], int]]  # (cell, occupancy class) along cast rays


@dataclass
class SemanticEntry:
    id: int
    name: str
    kind: str
    category: str
    position: Position2D
    height: float
    weight: float
    fragile: bool
    broken: bool
    blocks: bool
    last_seen: int


@dataclass
class AgentMemory:
    """Everything one agent remembers: map, object sightings, partner history."""

    width: int
    height: int
    cell_size: float
    occupancy: np.ndarray = field(default=None)
    semantic: dict[int, SemanticEntry] = field(default_factory=dict)
    partner_log: list = field(default_factory=list)  # BehaviorEvent list
    progress: dict[int, str] = field(default_factory=dict)  # id -> category, seen at the goal
    partner_last_seen: Optional[tuple[int, Position2D]] = None  # (frame, position)
    child_last_seen: Optional[tuple[int, Position2D]] = None
    partner_name: Optional[str] = None
    goal_seen: bool = False

    def __post_init__(self):
        if self.occupancy is None:
            self.occupancy = np.full((self.width, self.height), UNKNOWN, dtype=np.int8)

    def unknown_count(self) -> int:
        return int(np.count_nonzero(self.occupancy == UNKNOWN))

    def cell_of(self, pos: Position2D) -> tuple[int, int]:
        return (int(pos.x // self.cell_size), int(pos.y // self.cell_size))

    def goal_entry(self) -> Optional[SemanticEntry]:
        for oid in sorted(self.semantic):
            if self.semantic[oid].kind == KIND_GOAL:
                return self.semantic[oid]
        return None

    def to_debug_dict(self) -> dict:
        return {
            "occupancy": ["".join(str(int(v)) for v in self.occupancy[:, y]) for y in range(self.height)],
            "semantic": {
                str(oid): {
                    "name": e.name,
                    "position": e.position.to_list(),
                    "height": e.height,
                    "last_seen": e.last_seen,
                }
                for oid, e in sorted(self.semantic.items())
            },
            "progress": sorted(self.progress),
        }


def memory_for_scene(scene: SceneState) -> AgentMemory:
    return AgentMemory(scene.layout.width, scene.layout.height, scene.layout.cell_size)


@lru_cache(maxsize=32)
def _ray_table(range_cells: int, fov_mdeg: int) -> tuple[tuple[tuple[tuple[int, int], ...], ...], ...]:
    """Per-heading tuples of rays; each ray is a tuple of relative cell offsets.

    Rays fan across the field of view densely enough that no cell at maximum
    range falls between two rays.
    """
    fov = fov_mdeg / 1000.0
    n_rays = max(5, int(2 * range_cells * fov) + 1)
    headings = []
    for hi in range(4):
        base = hi * math.pi / 2
        rays = []
        for k in range(n_rays):
            ang = base - fov / 2 + fov * (k / (n_rays - 1))
            cells = []
            seen = set()
            for step in range(1, range_cells + 1):
                cx = int(round(step * math.cos(ang)))
                cy = int(round(step * math.sin(ang)))
                if (cx, cy) != (0, 0) and (cx, cy) not in seen:
                    if math.hypot(cx, cy) <= range_cells + 1e-9:
                        seen.add((cx, cy))
                        cells.append((cx, cy))
            rays.append(tuple(cells))
        headings.append(tuple(rays))
    return tuple(headings)


def _bresenham(a: tuple[int, int], b: tuple[int, int]) -> list[tuple[int, int]]:
    x0, y0 = a
    x1, y1 = b
    cells = []
    dx, dy = abs(x1 - x0), abs(y1 - y0)
    sx = 1 if x1 > x0 else -1
    sy = 1 if y1 > y0 else -1
    err = dx - dy
    x, y = x0, y0
    while (x, y) != (x1, y1):
        e2 = 2 * err
        if e2 > -dy:
            err -= dy
            x += sx
        if e2 < dx:
            err += dx
            y += sy
        cells.append((x, y))
    return cells


def _angle_within(heading: float, to: float, fov: float) -> bool:
    diff = (to - heading + math.pi) % (2 * math.pi) - math.pi
    return abs(diff) <= fov / 2 + 1e-9


def line_of_sight(scene: SceneState, a: Position2D, b: Position2D) -> bool:
    """True when the grid ray between the two positions crosses no wall cell.

    The endpoint cell itself may be a wall (seeing INTO a shop front is fine);
    only cells strictly between the endpoints occlude.
    """
    start = scene.layout.cell_of(a)
    end = scene.layout.cell_of(b)
    if start == end:
        return True
    for cell in _bresenham(start, end)[:-1]:
        if scene.layout.is_wall(cell):
            return False
    return True


def entity_visible(
    scene: SceneState,
    observer: AgentState,
    pos: Position2D,
    config: PerceptionConfig,
) -> bool:
    rng_m = config.range_for(scene.setting)
    d = observer.position.dist(pos)
    if d > rng_m:
        return False
    if d > 1e-9:
        ang = math.atan2(pos.y - observer.position.y, pos.x - observer.position.x)
        if not _angle_within(observer.heading, ang, config.fov):
            return False
    return line_of_sight(scene, observer.position, pos)


def is_visible(scene: SceneState, observer_id: int, actor_id: int, config: PerceptionConfig) -> bool:
    observer = scene.agents[observer_id]
    actor = scene.agents[actor_id]
    return entity_visible(scene, observer, actor.position, config)


def visible_fraction(flags: list[bool]) -> float:
    """Fraction of frames in a visibility window where the actor was seen."""
    if not flags:
        raise ValueError("window must be non-empty")
    return sum(1 for f in flags if f) / len(flags)


def _snapshot(agent: AgentState) -> PartnerSnapshot:
    sa = agent.current_action
    return PartnerSnapshot(
        agent_id=agent.id,
        name=agent.name,
        position=agent.position,
        holding=tuple(i for i in agent.holding if i is not None),
        basket=tuple(agent.basket),
        action_kind=sa.action.kind if sa is not None and not sa.synthetic else None,
    )


def observe(scene: SceneState, agent_id: int, config: Optional[PerceptionConfig] = None, rng=None) -> Observation:
    """Partial observation for one agent: visible entities plus a map sweep."""
    config = config or PerceptionConfig()
    agent = scene.agents[agent_id]
    layout = scene.layout
    rng_m = config.range_for(scene.setting)
    range_cells = int(rng_m / layout.cell_size)
    origin = layout.cell_of(agent.position)

    from .world import heading_index  # local import to avoid cycle at module load

    rays = _ray_table(range_cells, int(config.fov * 1000))[heading_index(agent.heading)]
    blocking = scene.blocking_cells()
    swept: list[tuple[tuple[int, int], int]] = [(origin, FREE)]
    swept_cells = {origin}
    for ray in rays:
        for off in ray:
            cell = (origin[0] + off[0], origin[1] + off[1])
            if not layout.in_bounds(cell):
                break
            if layout.grid[cell] == WALL:
                if cell not in swept_cells:
                    swept_cells.add(cell)
                    swept.append((cell, WALL))
                break
            state = OCCUPIED if (layout.grid[cell] == OCCUPIED or cell in blocking) else FREE
            if cell not in swept_cells:
                swept_cells.add(cell)
                swept.append((cell, state))

    visible: list[VisibleObject] = []
    for obj in scene.iter_objects():
        if obj.containment.state in ("held-by", "in-basket"):
            continue  # carried items surface through partner snapshots instead
        if obj.containment.state == "in-container":
            holder = scene.objects[obj.containment.container_id]
            if not holder.is_placed() and not holder.at_goal():
                continue
        if not entity_visible(scene, agent, obj.position, config):
            continue
        if config.detection_drop_p > 0 and rng is not None and rng.random() < config.detection_drop_p:
            continue
        visible.append(
            VisibleObject(
                id=obj.id,
                name=obj.name,
                kind=obj.kind,
                category=obj.category,
                position=obj.position,
                height=obj.height,
                weight=obj.weight,
                fragile=obj.fragile,
                broken=obj.broken,
                blocks=obj.blocks,
            )
        )

    partner = None
    child = None
    for other in scene.agents.values():
        if other.id == agent_id:
            continue
        if not entity_visible(scene, agent, other.position, config):
            continue
        snap = _snapshot(other)
        if other.role == "child":
            child = snap
        else:
            partner = snap

    return Observation(
        frame=scene.frame,
        agent_id=agent_id,
        visible_objects=visible,
        self_position=agent.position,
        self_heading=agent.heading,
        self_holding=list(agent.holding),
        self_basket=list(agent.basket),
        partner_snapshot=partner,
        child_snapshot=child,
        swept=swept,
    )


def update_memory(memory: AgentMemory, obs: Observation, goal_position: Optional[Position2D] = None) -> AgentMemory:
    """Fold one observation into memory: sweep the map, upsert and evict sightings."""
    for cell, state in obs.swept:
        memory.occupancy[cell] = state

    visible_ids = {v.id for v in obs.visible_objects}
    swept_cells = {cell for cell, _ in obs.swept}

    for v in obs.visible_objects:
        memory.semantic[v.id] = SemanticEntry(
            id=v.id,
            name=v.name,
            kind=v.kind,
            category=v.category,
            position=v.position,
            height=v.height,
            weight=v.weight,
            fragile=v.fragile,
            broken=v.broken,
            blocks=v.blocks,
            last_seen=obs.frame,
        )
        if v.kind == KIND_GOAL:
            memory.goal_seen = True
        elif goal_position is not None and v.position.dist(goal_position) <= 1.0 and not v.broken:
            memory.progress[v.id] = v.category

    # Evict entries whose remembered cell was re-observed without the object.
    # The agent's own cargo is self-knowledge and is never evicted.
    own = set(i for i in obs.self_holding if i is not None) | set(obs.self_basket)
    stale = [
        oid
        for oid, e in memory.semantic.items()
        if oid not in visible_ids and oid not in own and memory.cell_of(e.position) in swept_cells
    ]
    for oid in stale:
        del memory.semantic[oid]

    if obs.partner_snapshot is not None:
        memory.partner_last_seen = (obs.frame, obs.partner_snapshot.position)
        memory.partner_name = obs.partner_snapshot.name
    if obs.child_snapshot is not None:
        memory.child_last_seen = (obs.frame, obs.child_snapshot.position)
    return memory
