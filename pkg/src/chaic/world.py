"""Shared domain model: layouts, objects, agents, scenes, tasks, actions, plans."""

from __future__ import annotations

import contextvars
import math
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from typing import Any, Iterator, Optional

import numpy as np

SCENE_FORMAT = "chaic-scene/1"

# Layout cell classes. UNKNOWN only appears in per-agent memory grids.
FREE, WALL, OCCUPIED, UNKNOWN = 0, 1, 2, 3

_CELL_CHARS = {FREE: ".", WALL: "#", OCCUPIED: "o"}
_CHAR_CELLS = {v: k for k, v in _CELL_CHARS.items()}

ROLE_CONSTRAINED = "constrained"
ROLE_HELPER = "helper"
ROLE_CHILD = "child"

KIND_TARGET = "target-candidate"
KIND_CONTAINER = "container"
KIND_OBSTACLE = "obstacle"
KIND_GOAL = "goal-location"
KIND_FURNITURE = "furniture"
KIND_CHILD = "child"
OBJECT_KINDS = (KIND_TARGET, KIND_CONTAINER, KIND_OBSTACLE, KIND_GOAL, KIND_FURNITURE, KIND_CHILD)

GRASPABLE_KINDS = (KIND_TARGET, KIND_CONTAINER, KIND_OBSTACLE, KIND_FURNITURE)

CONTAINER_CAPACITY = 3

FAMILY_NO_CONSTRAINT = "no-constraint"
FAMILY_LOW_TARGET = "low-target"
FAMILY_OBSTACLE = "obstacle"
FAMILY_HIGH_TARGET = "high-target"
FAMILY_HIGH_GOAL = "high-goal"
FAMILY_HIGH_CONTAINER = "high-container"
FAMILY_SHOPPING = "shopping"
FAMILY_MOVING_HOUSE = "moving-house"

INDOOR_FAMILIES = (
    FAMILY_NO_CONSTRAINT,
    FAMILY_LOW_TARGET,
    FAMILY_OBSTACLE,
    FAMILY_HIGH_TARGET,
    FAMILY_HIGH_GOAL,
    FAMILY_HIGH_CONTAINER,
)
OUTDOOR_FAMILIES = (FAMILY_SHOPPING, FAMILY_MOVING_HOUSE)
ALL_FAMILIES = INDOOR_FAMILIES + OUTDOOR_FAMILIES

# Pseudo target ids for put actions: the floor under the agent, or a bike basket.
FLOOR_ID = 0
BASKET_ID = -1


class HiddenGoalAccess(RuntimeError):
    """Raised when goal predicates are read from inside a non-oracle helper planner."""


_helper_guard = contextvars.ContextVar("chaic_helper_guard", default=False)


@contextmanager
def helper_goal_guard():
    """Activate the tripwire that forbids reading hidden goals.

    The episode runner wraps every non-oracle helper planner invocation in this
    context, so any code path that sneaks a look at the task goal trips loudly.
    """
    token = _helper_guard.set(True)
    try:
        yield
    finally:
        _helper_guard.reset(token)


def helper_guard_active() -> bool:
    return _helper_guard.get()


@dataclass(frozen=True)
class Position2D:
    x: float
    y: float

    def dist(self, other: "Position2D") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def is_finite(self) -> bool:
        return math.isfinite(self.x) and math.isfinite(self.y)

    def to_list(self) -> list[float]:
        return [self.x, self.y]


@dataclass(frozen=True)
class ConstraintProfile:
    """Physical capabilities of one agent.

    reach_min/reach_max bound the heights the agent can interact with,
    strength bounds object weight, speed is meters advanced per frame.
    """

    reach_min: float = 0.0
    reach_max: float = 2.3
    strength: float = 600.0
    speed: float = 0.05
    hands: int = 2
    wheelchair: bool = False
    bike: bool = False
    basket_capacity: int = 3
    dock_frames: int = 20

    def violations(self) -> list[str]:
        out = []
        if not (0 <= self.reach_min < self.reach_max):
            out.append(f"reach interval invalid: [{self.reach_min}, {self.reach_max}]")
        if self.strength <= 0:
            out.append("strength must be positive")
        if self.speed <= 0:
            out.append("speed must be positive")
        if self.hands not in (1, 2):
            out.append(f"hands must be 1 or 2, got {self.hands}")
        if self.wheelchair and self.bike:
            out.append("wheelchair and bike are mutually exclusive")
        return out

    def to_dict(self) -> dict:
        return {
            "reach_min": self.reach_min,
            "reach_max": self.reach_max,
            "strength": self.strength,
            "speed": self.speed,
            "hands": self.hands,
            "wheelchair": self.wheelchair,
            "bike": self.bike,
            "basket_capacity": self.basket_capacity,
            "dock_frames": self.dock_frames,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConstraintProfile":
        return cls(**d)


# Reference profiles. Speeds are tuned so a helper crosses a generated scene
# many times within the episode horizon while constrained agents stay slower.
NORMAL_PROFILE = ConstraintProfile(0.0, 2.3, 600.0, 0.125, 2)
CHILD_PROFILE = ConstraintProfile(0.0, 1.5, 250.0, 0.1, 2)
WHEELCHAIR_PROFILE = ConstraintProfile(0.25, 1.5, 400.0, 0.1, 2, wheelchair=True)
BIKE_PROFILE = ConstraintProfile(0.0, 1.8, 400.0, 0.0625, 2, bike=True)
FRAIL_PROFILE = ConstraintProfile(0.0, 2.3, 100.0, 0.1, 2)
KID_PROFILE = ConstraintProfile(0.0, 1.2, 50.0, 0.08, 1)

FAMILY_PROFILES = {
    FAMILY_NO_CONSTRAINT: NORMAL_PROFILE,
    FAMILY_LOW_TARGET: WHEELCHAIR_PROFILE,
    FAMILY_OBSTACLE: WHEELCHAIR_PROFILE,
    FAMILY_HIGH_TARGET: CHILD_PROFILE,
    FAMILY_HIGH_GOAL: CHILD_PROFILE,
    FAMILY_HIGH_CONTAINER: CHILD_PROFILE,
    FAMILY_SHOPPING: BIKE_PROFILE,
    FAMILY_MOVING_HOUSE: FRAIL_PROFILE,
}


@dataclass(frozen=True)
class Containment:
    """Where an object currently is. Exactly one of the optional refs is set
    for held-by / in-container states."""

    state: str  # on-surface | held-by | in-container | in-basket | at-goal
    agent_id: Optional[int] = None
    hand: Optional[int] = None
    container_id: Optional[int] = None

    @classmethod
    def on_surface(cls) -> "Containment":
        return cls("on-surface")

    @classmethod
    def held_by(cls, agent_id: int, hand: int) -> "Containment":
        return cls("held-by", agent_id=agent_id, hand=hand)

    @classmethod
    def in_container(cls, container_id: int) -> "Containment":
        return cls("in-container", container_id=container_id)

    @classmethod
    def in_basket(cls, agent_id: int) -> "Containment":
        return cls("in-basket", agent_id=agent_id)

    @classmethod
    def at_goal(cls) -> "Containment":
        return cls("at-goal")

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"state": self.state}
        if self.agent_id is not None:
            d["agent_id"] = self.agent_id
        if self.hand is not None:
            d["hand"] = self.hand
        if self.container_id is not None:
            d["container_id"] = self.container_id
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Containment":
        return cls(
            state=d["state"],
            agent_id=d.get("agent_id"),
            hand=d.get("hand"),
            container_id=d.get("container_id"),
        )


@dataclass
class ObjectRecord:
    id: int
    name: str
    kind: str
    category: str
    position: Position2D
    height: float
    weight: float
    fragile: bool = False
    broken: bool = False
    containment: Containment = field(default_factory=Containment.on_surface)
    blocks: bool = False  # True while the object makes its cell impassable

    def is_placed(self) -> bool:
        return self.containment.state == "on-surface"

    def at_goal(self) -> bool:
        return self.containment.state == "at-goal"

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "kind": self.kind,
            "category": self.category,
            "position": self.position.to_list(),
            "height": self.height,
            "weight": self.weight,
            "fragile": self.fragile,
            "broken": self.broken,
            "containment": self.containment.to_dict(),
            "blocks": self.blocks,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ObjectRecord":
        return cls(
            id=d["id"],
            name=d["name"],
            kind=d["kind"],
            category=d["category"],
            position=Position2D(*d["position"]),
            height=d["height"],
            weight=d["weight"],
            fragile=d["fragile"],
            broken=d["broken"],
            containment=Containment.from_dict(d["containment"]),
            blocks=d["blocks"],
        )


@dataclass
class AgentState:
    id: int
    name: str
    role: str
    profile: ConstraintProfile
    position: Position2D
    heading: float  # radians; multiples of pi/2 in practice
    holding: list[Optional[int]] = field(default_factory=list)  # one slot per hand
    basket: list[int] = field(default_factory=list)  # bike agents only
    bike_docked: bool = False
    current_action: Any = None  # engine.ScheduledAction while busy

    def __post_init__(self):
        if not self.holding:
            self.holding = [None] * self.profile.hands

    def held_ids(self) -> list[int]:
        return [i for i in self.holding if i is not None]

    def free_hand(self) -> Optional[int]:
        for slot, occupant in enumerate(self.holding):
            if occupant is None:
                return slot
        return None

    def hands_full(self) -> bool:
        return self.free_hand() is None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "role": self.role,
            "profile": self.profile.to_dict(),
            "position": self.position.to_list(),
            "heading": self.heading,
            "holding": list(self.holding),
            "basket": list(self.basket),
            "bike_docked": self.bike_docked,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AgentState":
        return cls(
            id=d["id"],
            name=d["name"],
            role=d["role"],
            profile=ConstraintProfile.from_dict(d["profile"]),
            position=Position2D(*d["position"]),
            heading=d["heading"],
            holding=list(d["holding"]),
            basket=list(d["basket"]),
            bike_docked=d["bike_docked"],
        )


@dataclass(frozen=True)
class Surface:
    """Axis-aligned raised region (meters) objects can rest on."""

    name: str
    x0: float
    y0: float
    x1: float
    y1: float
    height: float

    def contains(self, pos: Position2D) -> bool:
        return self.x0 <= pos.x <= self.x1 and self.y0 <= pos.y <= self.y1

    def to_dict(self) -> dict:
        return {"name": self.name, "rect": [self.x0, self.y0, self.x1, self.y1], "height": self.height}

    @classmethod
    def from_dict(cls, d: dict) -> "Surface":
        return cls(d["name"], *d["rect"], d["height"])


class Layout:
    """Static occupancy grid with a fixed cell size in meters."""

    def __init__(self, grid: np.ndarray, cell_size: float = 0.25):
        self.grid = np.asarray(grid, dtype=np.int8)
        self.cell_size = cell_size

    @property
    def width(self) -> int:
        return self.grid.shape[0]

    @property
    def height(self) -> int:
        return self.grid.shape[1]

    def in_bounds(self, cell: tuple[int, int]) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def cell_of(self, pos: Position2D) -> tuple[int, int]:
        return (int(pos.x // self.cell_size), int(pos.y // self.cell_size))

    def center_of(self, cell: tuple[int, int]) -> Position2D:
        return Position2D((cell[0] + 0.5) * self.cell_size, (cell[1] + 0.5) * self.cell_size)

    def is_wall(self, cell: tuple[int, int]) -> bool:
        return not self.in_bounds(cell) or self.grid[cell] == WALL

    def contains_pos(self, pos: Position2D) -> bool:
        return 0 <= pos.x < self.width * self.cell_size and 0 <= pos.y < self.height * self.cell_size

    def copy(self) -> "Layout":
        return Layout(self.grid.copy(), self.cell_size)

    def to_rows(self) -> list[str]:
        # Row-major by y so the file reads like a map.
        return [
            "".join(_CELL_CHARS[int(self.grid[x, y])] for x in range(self.width))
            for y in range(self.height)
        ]

    @classmethod
    def from_rows(cls, rows: list[str], cell_size: float) -> "Layout":
        h = len(rows)
        w = len(rows[0]) if rows else 0
        grid = np.zeros((w, h), dtype=np.int8)
        for y, row in enumerate(rows):
            for x, ch in enumerate(row):
                grid[x, y] = _CHAR_CELLS[ch]
        return cls(grid, cell_size)


class TaskSpec:
    """Episode goal and constrained-agent setup.

    Goal predicates are hidden behind a property so that the runtime tripwire
    (helper_goal_guard) can detect helper planners peeking at them.
    """

    def __init__(
        self,
        family: str,
        goal_predicates: dict[str, int],
        constrained_profile: ConstraintProfile,
        horizon: int,
        seed: int,
    ):
        if not goal_predicates:
            raise ValueError("goal_predicates must be non-empty")
        self.family = family
        self._goal_predicates = dict(goal_predicates)
        self.constrained_profile = constrained_profile
        self.horizon = horizon
        self.seed = seed

    @property
    def goal_predicates(self) -> dict[str, int]:
        if helper_guard_active():
            raise HiddenGoalAccess("helper planners must not read the task goal")
        return dict(self._goal_predicates)

    def total_targets(self) -> int:
        return sum(self._goal_predicates.values()) if not helper_guard_active() else sum(self.goal_predicates.values())

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "goal_predicates": dict(self._goal_predicates),
            "constrained_profile": self.constrained_profile.to_dict(),
            "horizon": self.horizon,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TaskSpec":
        return cls(
            family=d["family"],
            goal_predicates=dict(d["goal_predicates"]),
            constrained_profile=ConstraintProfile.from_dict(d["constrained_profile"]),
            horizon=d["horizon"],
            seed=d["seed"],
        )


# The seven action primitives.
MOVE_FORWARD = "move-forward"
TURN_LEFT = "turn-left"
TURN_RIGHT = "turn-right"
PICK_UP = "pick-up"
PUT_IN = "put-in"
PUT_ON = "put-on"
WAIT = "wait"
ACTION_KINDS = (MOVE_FORWARD, TURN_LEFT, TURN_RIGHT, PICK_UP, PUT_IN, PUT_ON, WAIT)


@dataclass(frozen=True)
class Action:
    kind: str
    object_id: Optional[int] = None
    container_id: Optional[int] = None  # PutIn destination; BASKET_ID for bike baskets
    target_id: Optional[int] = None  # PutOn destination; goal id or FLOOR_ID

    def __post_init__(self):
        if self.kind not in ACTION_KINDS:
            raise ValueError(f"unknown action kind {self.kind!r}")


PLAN_EXPLORE = "explore"
PLAN_FOLLOW_PARTNER = "follow-partner"
PLAN_FOLLOW_CHILD = "follow-child"
PLAN_GOTO_PICK = "goto-pick"
PLAN_PUT_IN_HELD = "put-in-held"
PLAN_TRANSPORT = "transport"
PLAN_REMOVE_OBSTACLE = "remove-obstacle"
PLAN_WAIT = "wait"
PLAN_KINDS = (
    PLAN_EXPLORE,
    PLAN_FOLLOW_PARTNER,
    PLAN_FOLLOW_CHILD,
    PLAN_GOTO_PICK,
    PLAN_PUT_IN_HELD,
    PLAN_TRANSPORT,
    PLAN_REMOVE_OBSTACLE,
    PLAN_WAIT,
)


@dataclass(frozen=True)
class Plan:
    kind: str
    object_id: Optional[int] = None

    def __post_init__(self):
        if self.kind not in PLAN_KINDS:
            raise ValueError(f"unknown plan kind {self.kind!r}")


HEADINGS = (0.0, math.pi / 2, math.pi, 3 * math.pi / 2)  # +x, +y, -x, -y
HEADING_VECS = ((1, 0), (0, 1), (-1, 0), (0, -1))


def heading_index(heading: float) -> int:
    return int(round(heading / (math.pi / 2))) % 4


def heading_vector(heading: float) -> tuple[int, int]:
    return HEADING_VECS[heading_index(heading)]


class SceneState:
    """Complete ground-truth world state for one episode."""

    def __init__(
        self,
        layout: Layout,
        surfaces: list[Surface],
        objects: dict[int, ObjectRecord],
        agents: dict[int, AgentState],
        goal_id: int,
        horizon: int,
        setting: str = "indoor",
        frame: int = 0,
        rng: Optional[np.random.Generator] = None,
        seed: int = 0,
    ):
        self.layout = layout
        self.surfaces = surfaces
        self.objects = objects
        self.agents = agents
        self.goal_id = goal_id
        self.horizon = horizon
        self.setting = setting
        self.frame = frame
        self.seed = seed
        self.rng = rng if rng is not None else np.random.default_rng(seed)

    @property
    def rng_state(self) -> dict:
        return self.rng.bit_generator.state

    def obj(self, object_id: int) -> ObjectRecord:
        return self.objects[object_id]

    def agent(self, agent_id: int) -> AgentState:
        return self.agents[agent_id]

    def goal(self) -> ObjectRecord:
        return self.objects[self.goal_id]

    def agent_by_role(self, role: str) -> Optional[AgentState]:
        for a in self.agents.values():
            if a.role == role:
                return a
        return None

    def iter_objects(self) -> Iterator[ObjectRecord]:
        for oid in sorted(self.objects):
            yield self.objects[oid]

    def blocking_cells(self) -> dict[tuple[int, int], int]:
        """Cells made impassable by objects (obstacles, unmoved furniture)."""
        out: dict[tuple[int, int], int] = {}
        for o in self.iter_objects():
            if o.blocks and o.is_placed():
                out[self.layout.cell_of(o.position)] = o.id
        return out

    def agent_cells(self) -> dict[tuple[int, int], int]:
        return {self.layout.cell_of(a.position): a.id for a in self.agents.values()}

    def passable(self, cell: tuple[int, int], ignore_agents: Optional[set[int]] = None) -> bool:
        if self.layout.is_wall(cell) or self.layout.grid[cell] == OCCUPIED:
            return False
        if cell in self.blocking_cells():
            return False
        ignore = ignore_agents or set()
        for a in self.agents.values():
            if a.id not in ignore and self.layout.cell_of(a.position) == cell:
                return False
        return True

    def container_contents(self, container_id: int) -> list[int]:
        return [
            o.id
            for o in self.iter_objects()
            if o.containment.state == "in-container" and o.containment.container_id == container_id
        ]

    def surface_height_at(self, pos: Position2D) -> float:
        for s in self.surfaces:
            if s.contains(pos):
                return s.height
        return 0.0

    def clone(self) -> "SceneState":
        return SceneState.from_dict(self.to_dict())

    def to_dict(self) -> dict:
        return {
            "format": SCENE_FORMAT,
            "cell_size": self.layout.cell_size,
            "layout": self.layout.to_rows(),
            "surfaces": [s.to_dict() for s in self.surfaces],
            "objects": [o.to_dict() for o in self.iter_objects()],
            "agents": [self.agents[aid].to_dict() for aid in sorted(self.agents)],
            "goal_id": self.goal_id,
            "horizon": self.horizon,
            "setting": self.setting,
            "frame": self.frame,
            "seed": self.seed,
            "rng_state": _jsonable_rng_state(self.rng.bit_generator.state),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneState":
        if d.get("format") != SCENE_FORMAT:
            raise ValueError(f"unsupported scene format: {d.get('format')!r}")
        rng = np.random.default_rng(d["seed"])
        rng.bit_generator.state = _rng_state_from_jsonable(d["rng_state"])
        return cls(
            layout=Layout.from_rows(d["layout"], d["cell_size"]),
            surfaces=[Surface.from_dict(s) for s in d["surfaces"]],
            objects={o["id"]: ObjectRecord.from_dict(o) for o in d["objects"]},
            agents={a["id"]: AgentState.from_dict(a) for a in d["agents"]},
            goal_id=d["goal_id"],
            horizon=d["horizon"],
            setting=d["setting"],
            frame=d["frame"],
            rng=rng,
            seed=d["seed"],
        )


def _jsonable_rng_state(state: dict) -> dict:
    # PCG64 state holds 128-bit ints; store them as strings for JSON safety.
    inner = dict(state["state"])
    return {
        "bit_generator": state["bit_generator"],
        "state": {"state": str(inner["state"]), "inc": str(inner["inc"])},
        "has_uint32": state["has_uint32"],
        "uinteger": state["uinteger"],
    }


def _rng_state_from_jsonable(d: dict) -> dict:
    return {
        "bit_generator": d["bit_generator"],
        "state": {"state": int(d["state"]["state"]), "inc": int(d["state"]["inc"])},
        "has_uint32": d["has_uint32"],
        "uinteger": d["uinteger"],
    }


def reachable_cells(layout: Layout, start: tuple[int, int]) -> np.ndarray:
    """Boolean mask of cells reachable from start through non-wall, non-occupied cells."""
    passable = layout.grid == FREE
    seen = np.zeros_like(passable, dtype=bool)
    if not layout.in_bounds(start) or not passable[start]:
        return seen
    stack = [start]
    seen[start] = True
    while stack:
        x, y = stack.pop()
        for dx, dy in HEADING_VECS:
            nx, ny = x + dx, y + dy
            if 0 <= nx < layout.width and 0 <= ny < layout.height and passable[nx, ny] and not seen[nx, ny]:
                seen[nx, ny] = True
                stack.append((nx, ny))
    return seen


def _interaction_cells(layout: Layout, pos: Position2D, reach_distance: float = 0.75) -> list[tuple[int, int]]:
    """Free cells from which an entity at pos can be interacted with."""
    cx, cy = layout.cell_of(pos)
    r = int(math.ceil(reach_distance / layout.cell_size))
    out = []
    for dx in range(-r, r + 1):
        for dy in range(-r, r + 1):
            cell = (cx + dx, cy + dy)
            if not layout.in_bounds(cell) or layout.grid[cell] != FREE:
                continue
            if layout.center_of(cell).dist(pos) <= reach_distance:
                out.append(cell)
    return out


def validate_scene(scene: SceneState) -> list[str]:
    """Check every structural invariant; return one message per violation."""
    report: list[str] = []

    if scene.frame > scene.horizon:
        report.append(f"frame {scene.frame} exceeds horizon {scene.horizon}")
    if scene.horizon not in (3000, 1500):
        report.append(f"horizon {scene.horizon} not in (3000, 1500)")
    if scene.goal_id not in scene.objects or scene.objects[scene.goal_id].kind != KIND_GOAL:
        report.append(f"goal id {scene.goal_id} missing or not a goal-location")

    for o in scene.iter_objects():
        if not o.position.is_finite() or not scene.layout.contains_pos(o.position):
            report.append(f"object {o.id} position out of bounds")
        if o.kind not in OBJECT_KINDS:
            report.append(f"object {o.id} has unknown kind {o.kind!r}")
        c = o.containment
        if c.state == "in-container":
            holder = scene.objects.get(c.container_id)
            if holder is None:
                report.append(f"object {o.id} inside missing container {c.container_id}")
            elif holder.kind != KIND_CONTAINER:
                report.append(f"object {o.id} inside non-container {c.container_id}")
            elif holder.id == o.id:
                report.append(f"object {o.id} contains itself")
            if o.kind == KIND_CONTAINER:
                report.append(f"container {o.id} nested inside another container")
        if c.state == "held-by":
            a = scene.agents.get(c.agent_id)
            if a is None or c.hand is None or c.hand >= len(a.holding) or a.holding[c.hand] != o.id:
                report.append(f"object {o.id} held-by record inconsistent")

    for cid in sorted(scene.objects):
        if scene.objects[cid].kind == KIND_CONTAINER:
            n = len(scene.container_contents(cid))
            if n > CONTAINER_CAPACITY:
                report.append(f"capacity exceeded: container {cid} holds {n} objects")

    for a in (scene.agents[i] for i in sorted(scene.agents)):
        for msg in a.profile.violations():
            report.append(f"agent {a.id}: {msg}")
        if not a.position.is_finite() or not scene.layout.contains_pos(a.position):
            report.append(f"agent {a.id} position out of bounds")
        if len(a.held_ids()) > a.profile.hands:
            report.append(f"hand limit: agent {a.id} holds {len(a.held_ids())} with {a.profile.hands} hands")
        if a.profile.bike and not a.bike_docked and a.held_ids():
            report.append(f"agent {a.id} holds objects with bike undocked")
        if len(a.basket) > a.profile.basket_capacity:
            report.append(f"agent {a.id} basket over capacity")
        for oid in a.held_ids():
            o = scene.objects.get(oid)
            if o is None or o.containment.state != "held-by" or o.containment.agent_id != a.id:
                report.append(f"agent {a.id} holding record for {oid} inconsistent")

    # Connectivity: every object and agent must be reachable from the helper
    # spawn on the static layout (obstacle overlays are clearable, so they are
    # ignored here; the obstacle family relaxes nothing on the static grid).
    root = scene.agent_by_role(ROLE_HELPER) or scene.agent_by_role(ROLE_CONSTRAINED)
    if root is not None:
        mask = reachable_cells(scene.layout, scene.layout.cell_of(root.position))
        for a in scene.agents.values():
            cell = scene.layout.cell_of(a.position)
            if not mask[cell]:
                report.append(f"agent {a.id} spawn cell unreachable")
        for o in scene.iter_objects():
            if not o.is_placed() and not o.at_goal():
                continue
            cells = _interaction_cells(scene.layout, o.position)
            if not any(mask[c] for c in cells):
                report.append(f"object {o.id} has no reachable interaction cell")

    return report
