"""Frame-based action engine: durations, capability checks, stochastic outcomes."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from typing import Optional

from .world import (
    BASKET_ID,
    CONTAINER_CAPACITY,
    FLOOR_ID,
    KIND_CONTAINER,
    KIND_FURNITURE,
    KIND_OBSTACLE,
    MOVE_FORWARD,
    PICK_UP,
    PUT_IN,
    PUT_ON,
    TURN_LEFT,
    TURN_RIGHT,
    WAIT,
    Action,
    AgentState,
    ConstraintProfile,
    Containment,
    Position2D,
    SceneState,
    heading_vector,
)

ENGINE_FORMAT = "chaic-engine/1"


class AgentBusy(RuntimeError):
    pass


class UnknownEntity(RuntimeError):
    pass


class InvalidAction(RuntimeError):
    pass


class NotAdjacent(InvalidAction):
    pass


class WindowExpired(InvalidAction):
    pass


@dataclass(frozen=True)
class SuccessModel:
    """Over-capability success rate exp(-excess/alpha)/beta, per dimension."""

    alpha_height: float = 0.3
    alpha_weight: float = 50.0
    beta: float = 2.0

    def __post_init__(self):
        if self.alpha_height <= 0 or self.alpha_weight <= 0:
            raise ValueError("alpha values must be positive")
        if self.beta < 1:
            raise ValueError("beta must be >= 1")


@dataclass(frozen=True)
class ActionDemand:
    required_height: Optional[float] = None
    required_weight: Optional[float] = None
    distance: float = 0.0


@dataclass
class ActionOutcome:
    status: str  # "success" | "fail"
    frames_consumed: int
    side_effects: list[str] = field(default_factory=list)


@dataclass
class EngineConfig:
    """All tunables of the simulation core, serializable for reproducibility."""

    success: SuccessModel = field(default_factory=SuccessModel)
    p_break: float = 0.5
    agent_radius: float = 0.25
    reach_distance: float = 0.75
    joint_adjacency: float = 0.5
    turn_frames: int = 5
    pick_frames: int = 30
    put_frames: int = 30
    wait_frames: int = 10
    joint_window: int = 60  # frames within which two pick-ups combine into a joint lift
    deterministic: bool = False  # force all success probabilities to 1 (solvability checks)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["format"] = ENGINE_FORMAT
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EngineConfig":
        d = dict(d)
        if d.pop("format", ENGINE_FORMAT) != ENGINE_FORMAT:
            raise ValueError("unsupported engine config format")
        d["success"] = SuccessModel(**d["success"])
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EngineConfig":
        return cls.from_dict(json.loads(text))


def attempt_probability(profile: ConstraintProfile, demand: ActionDemand, model: SuccessModel) -> float:
    """Success probability of an action against a capability profile.

    Within capability on every dimension -> 1.0. Each violated dimension
    contributes a factor exp(-excess/alpha)/beta, and the factors multiply.
    """
    p = 1.0
    if demand.required_height is not None:
        h = demand.required_height
        excess = 0.0
        if h > profile.reach_max:
            excess = h - profile.reach_max
        elif h < profile.reach_min:
            excess = profile.reach_min - h
        if excess > 0:
            p *= math.exp(-excess / model.alpha_height) / model.beta
    if demand.required_weight is not None and demand.required_weight > profile.strength:
        excess = demand.required_weight - profile.strength
        p *= math.exp(-excess / model.alpha_weight) / model.beta
    return p


def blocked_by_obstacle(scene: SceneState, agent_id: int, cell: tuple[int, int]) -> bool:
    """True while an un-relocated obstacle object sits on the cell.

    Obstacles block every agent until a helper picks them up and sets them
    aside; the wheelchair profile has no way to clear them itself.
    """
    del agent_id  # blocking applies uniformly; kept for interface parity
    blocker = scene.blocking_cells().get(cell)
    if blocker is None:
        return False
    return scene.objects[blocker].kind == KIND_OBSTACLE


@dataclass
class ScheduledAction:
    agent_id: int
    action: Action
    start_frame: int
    completion_frame: int
    target_cell: Optional[tuple[int, int]] = None  # move destination
    blocked: bool = False  # move rejected at begin time; resolves as a 1-frame stall
    synthetic: bool = False  # joint-carry follower placeholder, never resolved normally

    @property
    def duration(self) -> int:
        return self.completion_frame - self.start_frame


@dataclass
class JointCarry:
    furniture_id: int
    leader_id: int
    follower_id: int
    speed: float
    follower_offset: tuple[float, float]


class ActionEngine:
    """Mutates one SceneState frame by frame. One episode, one engine."""

    def __init__(self, scene: SceneState, config: Optional[EngineConfig] = None, rng=None):
        self.scene = scene
        self.config = config or EngineConfig()
        self.rng = rng if rng is not None else scene.rng
        self.pick_issues: dict[int, dict[int, int]] = {}  # furniture -> agent -> issue frame
        self.joint_carries: dict[int, JointCarry] = {}  # leader id -> carry
        self._move_progress: dict[int, float] = {}  # agent id -> meters advanced

    # ------------------------------------------------------------------ begin

    def begin_action(self, agent_id: int, action: Action) -> ScheduledAction:
        scene = self.scene
        if agent_id not in scene.agents:
            raise UnknownEntity(f"agent {agent_id}")
        agent = scene.agents[agent_id]
        if agent.current_action is not None:
            raise AgentBusy(f"agent {agent_id} busy until frame {agent.current_action.completion_frame}")

        duration = self._duration_for(agent, action)
        sa = ScheduledAction(
            agent_id=agent_id,
            action=action,
            start_frame=scene.frame,
            completion_frame=scene.frame + duration,
        )

        if action.kind == MOVE_FORWARD:
            self._begin_move(agent, sa)
        elif action.kind == PICK_UP:
            self._check_pick(agent, action)
        elif action.kind == PUT_IN:
            self._check_put_in(agent, action)
        elif action.kind == PUT_ON:
            self._check_put_on(agent, action)

        agent.current_action = sa
        if action.kind == PICK_UP and scene.objects[action.object_id].kind == KIND_FURNITURE:
            self.pick_issues.setdefault(action.object_id, {})[agent_id] = scene.frame
        return sa

    def _carry_led_by(self, agent_id: int) -> Optional[JointCarry]:
        return self.joint_carries.get(agent_id)

    def _duration_for(self, agent: AgentState, action: Action) -> int:
        cfg = self.config
        speed = agent.profile.speed
        carry = self._carry_led_by(agent.id)
        if carry is not None:
            speed = carry.speed
        if action.kind == MOVE_FORWARD:
            return max(1, math.ceil(self.scene.layout.cell_size / speed))
        if action.kind in (TURN_LEFT, TURN_RIGHT):
            return cfg.turn_frames
        if action.kind == WAIT:
            return cfg.wait_frames
        dock = 0
        if agent.profile.bike and not agent.bike_docked and action.kind in (PICK_UP, PUT_IN, PUT_ON):
            dock = agent.profile.dock_frames
        if action.kind == PICK_UP:
            return cfg.pick_frames + dock
        return cfg.put_frames + dock

    def _ignore_set(self, agent: AgentState) -> set[int]:
        ignore = {agent.id}
        carry = self._carry_led_by(agent.id)
        if carry is not None:
            ignore.add(carry.follower_id)
        return ignore

    def _begin_move(self, agent: AgentState, sa: ScheduledAction) -> None:
        scene = self.scene
        if agent.profile.bike and agent.held_ids():
            raise InvalidAction("bike agents cannot walk with objects in hand")
        cur = scene.layout.cell_of(agent.position)
        dx, dy = heading_vector(agent.heading)
        target = (cur[0] + dx, cur[1] + dy)
        if not scene.passable(target, ignore_agents=self._ignore_set(agent)):
            # First-come occupancy: the blocked agent stalls one frame and replans.
            sa.blocked = True
            sa.completion_frame = sa.start_frame + 1
            return
        sa.target_cell = target
        self._move_progress[agent.id] = 0.0
        if agent.profile.bike and agent.bike_docked:
            agent.bike_docked = False  # mounts the bike again to move

    def _check_pick(self, agent: AgentState, action: Action) -> None:
        obj = self.scene.objects.get(action.object_id)
        if obj is None:
            raise UnknownEntity(f"object {action.object_id}")
        if agent.free_hand() is None:
            raise InvalidAction("no free hand")

    def _check_put_in(self, agent: AgentState, action: Action) -> None:
        scene = self.scene
        if action.object_id not in agent.held_ids():
            raise InvalidAction("object not in hand")
        if action.container_id == BASKET_ID:
            if not agent.profile.bike:
                raise InvalidAction("agent has no basket")
            if len(agent.basket) >= agent.profile.basket_capacity:
                raise InvalidAction("basket full")
            return
        container = scene.objects.get(action.container_id)
        if container is None or container.kind != KIND_CONTAINER:
            raise UnknownEntity(f"container {action.container_id}")
        if action.container_id not in agent.held_ids():
            raise InvalidAction("container not in hand")
        if scene.objects[action.object_id].kind == KIND_CONTAINER:
            raise InvalidAction("containers cannot nest")
        if len(scene.container_contents(action.container_id)) >= CONTAINER_CAPACITY:
            raise InvalidAction("container full")

    def _check_put_on(self, agent: AgentState, action: Action) -> None:
        if action.object_id not in agent.held_ids() and action.object_id not in agent.basket:
            raise InvalidAction("object not in hand or basket")
        if action.target_id not in (FLOOR_ID, self.scene.goal_id):
            raise UnknownEntity(f"put-on target {action.target_id}")

    # ------------------------------------------------------------------- step

    def step(self) -> None:
        """Advance one frame: clock plus incremental movement of in-flight moves."""
        scene = self.scene
        scene.frame += 1
        for aid in sorted(scene.agents):
            agent = scene.agents[aid]
            sa = agent.current_action
            if sa is None or sa.action.kind != MOVE_FORWARD or sa.blocked or sa.target_cell is None:
                continue
            per_frame = scene.layout.cell_size / sa.duration
            progress = min(self._move_progress.get(aid, 0.0) + per_frame, scene.layout.cell_size)
            self._move_progress[aid] = progress
            dx, dy = heading_vector(agent.heading)
            source = (sa.target_cell[0] - dx, sa.target_cell[1] - dy)
            start_center = scene.layout.center_of(source)
            agent.position = Position2D(start_center.x + dx * progress, start_center.y + dy * progress)
            self._drag_joint(agent)

    def _drag_joint(self, leader: AgentState) -> None:
        carry = self._carry_led_by(leader.id)
        if carry is None:
            return
        follower = self.scene.agents[carry.follower_id]
        ox, oy = carry.follower_offset
        follower.position = Position2D(leader.position.x + ox, leader.position.y + oy)
        self.scene.objects[carry.furniture_id].position = leader.position

    def due_agents(self) -> list[int]:
        out = []
        for aid in sorted(self.scene.agents):
            sa = self.scene.agents[aid].current_action
            if sa is not None and not sa.synthetic and sa.completion_frame <= self.scene.frame:
                out.append(aid)
        return out

    # ---------------------------------------------------------------- resolve

    def resolve_action(self, sa: ScheduledAction) -> ActionOutcome:
        scene = self.scene
        agent = scene.agents[sa.agent_id]
        agent.current_action = None
        kind = sa.action.kind

        if kind == MOVE_FORWARD:
            return self._resolve_move(agent, sa)
        if kind in (TURN_LEFT, TURN_RIGHT):
            delta = math.pi / 2 if kind == TURN_LEFT else -math.pi / 2
            agent.heading = (agent.heading + delta) % (2 * math.pi)
            return ActionOutcome("success", sa.duration)
        if kind == WAIT:
            return ActionOutcome("success", sa.duration)
        if kind == PICK_UP:
            return self._resolve_pick(agent, sa)
        if kind == PUT_IN:
            return self._resolve_put_in(agent, sa)
        if kind == PUT_ON:
            return self._resolve_put_on(agent, sa)
        raise InvalidAction(f"cannot resolve {kind}")

    def _draw(self, p: float) -> bool:
        if self.config.deterministic:
            return True
        if p >= 1.0:
            return True
        return bool(self.rng.random() < p)

    def _resolve_move(self, agent: AgentState, sa: ScheduledAction) -> ActionOutcome:
        if sa.blocked:
            return ActionOutcome("fail", 1, ["blocked"])
        target = sa.target_cell
        ignore = self._ignore_set(agent)
        for other in self.scene.agents.values():
            if other.id not in ignore and self.scene.layout.cell_of(other.position) == target:
                # Another agent slipped in mid-move; stall in place.
                self._move_progress.pop(agent.id, None)
                agent.position = self.scene.layout.center_of(
                    (target[0] - heading_vector(agent.heading)[0], target[1] - heading_vector(agent.heading)[1])
                )
                self._drag_joint(agent)
                return ActionOutcome("fail", sa.duration, ["blocked"])
        agent.position = self.scene.layout.center_of(target)
        self._move_progress.pop(agent.id, None)
        self._drag_joint(agent)
        return ActionOutcome("success", sa.duration)

    def _resolve_pick(self, agent: AgentState, sa: ScheduledAction) -> ActionOutcome:
        scene = self.scene
        obj = scene.objects.get(sa.action.object_id)
        if obj is None or not obj.is_placed():
            self._drop_pick_issue(sa.action.object_id, agent.id)
            return ActionOutcome("fail", sa.duration, ["gone"])
        if agent.position.dist(obj.position) > self.config.reach_distance + 1e-9:
            self._drop_pick_issue(obj.id, agent.id)
            return ActionOutcome("fail", sa.duration, ["out-of-range"])
        hand = agent.free_hand()
        if hand is None:
            self._drop_pick_issue(obj.id, agent.id)
            return ActionOutcome("fail", sa.duration, ["no-free-hand"])

        effects: list[str] = []
        if agent.profile.bike and not agent.bike_docked:
            agent.bike_docked = True
            effects.append("docked")

        if obj.kind == KIND_FURNITURE:
            return self._resolve_furniture_pick(agent, sa, obj, effects)

        demand = ActionDemand(required_height=obj.height, required_weight=obj.weight)
        p = attempt_probability(agent.profile, demand, self.config.success)
        if self._draw(p):
            self._grab(agent, hand, obj)
            effects.append("object-moved")
            return ActionOutcome("success", sa.duration, effects)
        if obj.fragile and obj.height > agent.profile.reach_max and not obj.broken:
            if self._draw(self.config.p_break):
                obj.broken = True
                effects.append(f"object-broken:{obj.id}")
        return ActionOutcome("fail", sa.duration, effects)

    def _grab(self, agent: AgentState, hand: int, obj) -> None:
        agent.holding[hand] = obj.id
        obj.containment = Containment.held_by(agent.id, hand)
        obj.position = agent.position
        if obj.blocks:
            obj.blocks = False  # relocated items never block again
        if obj.kind == KIND_CONTAINER:
            for cid in self.scene.container_contents(obj.id):
                self.scene.objects[cid].position = agent.position

    def _drop_pick_issue(self, oid: int, agent_id: int) -> None:
        issues = self.pick_issues.get(oid)
        if issues is not None:
            issues.pop(agent_id, None)
            if not issues:
                del self.pick_issues[oid]

    def _resolve_furniture_pick(self, agent, sa, obj, effects) -> ActionOutcome:
        scene = self.scene
        partner = None
        issues = self.pick_issues.get(obj.id, {})
        my_issue = issues.get(agent.id, sa.start_frame)
        for other_id, frame in sorted(issues.items()):
            if other_id == agent.id:
                continue
            if abs(my_issue - frame) > self.config.joint_window:
                continue
            cand = scene.agents[other_id]
            if cand.position.dist(obj.position) <= self.config.joint_adjacency + 1e-9:
                partner = cand
                break
        self._drop_pick_issue(obj.id, agent.id)

        strength = agent.profile.strength
        if partner is not None:
            strength += partner.profile.strength
        demand = ActionDemand(required_height=obj.height, required_weight=obj.weight)
        lifter = ConstraintProfile(
            reach_min=agent.profile.reach_min,
            reach_max=agent.profile.reach_max,
            strength=strength,
            speed=agent.profile.speed,
            hands=agent.profile.hands,
        )
        if not self._draw(attempt_probability(lifter, demand, self.config.success)):
            return ActionOutcome("fail", sa.duration, effects)

        obj.blocks = False
        obj.containment = Containment.held_by(agent.id, 0)
        obj.position = agent.position
        agent.holding = [obj.id] * agent.profile.hands
        if partner is not None:
            self.pick_issues.pop(obj.id, None)
            partner.holding = [obj.id] * partner.profile.hands
            partner.current_action = ScheduledAction(
                partner.id, Action(WAIT), scene.frame, scene.frame + 1, synthetic=True
            )
            offset = (partner.position.x - agent.position.x, partner.position.y - agent.position.y)
            speed = min(agent.profile.speed, partner.profile.speed)
            self.joint_carries[agent.id] = JointCarry(obj.id, agent.id, partner.id, speed, offset)
            effects.append("joint-lift")
        effects.append("object-moved")
        return ActionOutcome("success", sa.duration, effects)

    def joint_lift(self, agent_a: int, agent_b: int, furniture_id: int) -> ActionOutcome:
        """Direct joint-lift attempt used by tests; the runtime path pairs two pick-ups."""
        scene = self.scene
        obj = scene.objects.get(furniture_id)
        if obj is None:
            raise UnknownEntity(f"object {furniture_id}")
        a, b = scene.agents[agent_a], scene.agents[agent_b]
        thresh = self.config.joint_adjacency + 1e-9
        if a.position.dist(obj.position) > thresh or b.position.dist(obj.position) > thresh:
            raise NotAdjacent("both agents must be adjacent to the furniture")
        strength = a.profile.strength + b.profile.strength
        demand = ActionDemand(required_height=obj.height, required_weight=obj.weight)
        lifter = ConstraintProfile(strength=strength, speed=min(a.profile.speed, b.profile.speed))
        if self._draw(attempt_probability(lifter, demand, self.config.success)):
            obj.blocks = False
            obj.containment = Containment.held_by(agent_a, 0)
            obj.position = a.position
            a.holding = [obj.id] * a.profile.hands
            b.holding = [obj.id] * b.profile.hands
            offset = (b.position.x - a.position.x, b.position.y - a.position.y)
            self.joint_carries[agent_a] = JointCarry(furniture_id, agent_a, agent_b, lifter.speed, offset)
            b.current_action = ScheduledAction(agent_b, Action(WAIT), scene.frame, scene.frame + 1, synthetic=True)
            return ActionOutcome("success", 1, ["joint-lift", "object-moved"])
        return ActionOutcome("fail", 1)

    def _release_joint(self, leader: AgentState) -> None:
        carry = self.joint_carries.pop(leader.id, None)
        if carry is None:
            return
        follower = self.scene.agents[carry.follower_id]
        follower.holding = [None] * follower.profile.hands
        follower.current_action = None

    def _resolve_put_in(self, agent: AgentState, sa: ScheduledAction) -> ActionOutcome:
        scene = self.scene
        oid = sa.action.object_id
        if oid not in agent.held_ids():
            return ActionOutcome("fail", sa.duration, ["gone"])
        obj = scene.objects[oid]
        effects = []
        if agent.profile.bike and not agent.bike_docked:
            agent.bike_docked = True
            effects.append("docked")
        hand = agent.holding.index(oid)
        if sa.action.container_id == BASKET_ID:
            if len(agent.basket) >= agent.profile.basket_capacity:
                return ActionOutcome("fail", sa.duration, ["basket-full"])
            agent.holding[hand] = None
            agent.basket.append(oid)
            obj.containment = Containment.in_basket(agent.id)
        else:
            if len(scene.container_contents(sa.action.container_id)) >= CONTAINER_CAPACITY:
                return ActionOutcome("fail", sa.duration, ["container-full"])
            agent.holding[hand] = None
            obj.containment = Containment.in_container(sa.action.container_id)
        effects.append("object-moved")
        return ActionOutcome("success", sa.duration, effects)

    def _resolve_put_on(self, agent: AgentState, sa: ScheduledAction) -> ActionOutcome:
        scene = self.scene
        oid = sa.action.object_id
        from_basket = oid in agent.basket
        if oid not in agent.held_ids() and not from_basket:
            return ActionOutcome("fail", sa.duration, ["gone"])
        obj = scene.objects[oid]
        effects = []
        if agent.profile.bike and not agent.bike_docked:
            agent.bike_docked = True
            effects.append("docked")

        if sa.action.target_id == scene.goal_id:
            goal = scene.goal()
            if agent.position.dist(goal.position) > self.config.reach_distance + 1e-9:
                return ActionOutcome("fail", sa.duration, ["out-of-range"])
            demand = ActionDemand(required_height=goal.height)
            if not self._draw(attempt_probability(agent.profile, demand, self.config.success)):
                return ActionOutcome("fail", sa.duration, effects)
            self._remove_from_carry(agent, oid, from_basket)
            placed = [oid]
            obj.containment = Containment.at_goal()
            obj.position = goal.position
            obj.height = goal.height
            if obj.kind == KIND_CONTAINER:
                for cid in scene.container_contents(obj.id):
                    inner = scene.objects[cid]
                    inner.containment = Containment.at_goal()
                    inner.position = goal.position
                    inner.height = goal.height
                    placed.append(cid)
                effects.append("container-lost")
            if obj.kind == KIND_FURNITURE:
                self._release_joint(agent)
            effects.extend(f"at-goal:{i}" for i in placed)
            return ActionOutcome("success", sa.duration, effects)

        # Floor drop at the agent's own cell.
        drop = scene.layout.center_of(scene.layout.cell_of(agent.position))
        demand = ActionDemand(required_height=0.1)
        if not self._draw(attempt_probability(agent.profile, demand, self.config.success)):
            return ActionOutcome("fail", sa.duration, effects)
        self._remove_from_carry(agent, oid, from_basket)
        obj.containment = Containment.on_surface()
        obj.position = drop
        obj.height = 0.1
        effects.append("object-moved")
        return ActionOutcome("success", sa.duration, effects)

    def _remove_from_carry(self, agent: AgentState, oid: int, from_basket: bool) -> None:
        if from_basket:
            agent.basket.remove(oid)
            return
        for slot, occupant in enumerate(agent.holding):
            if occupant == oid:
                agent.holding[slot] = None
