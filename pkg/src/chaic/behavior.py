"""Partner behavior recognition and beliefs over their goal category and limits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .perception import AgentMemory
from .world import (
    KIND_CONTAINER,
    KIND_GOAL,
    KIND_OBSTACLE,
    MOVE_FORWARD,
    PICK_UP,
    PUT_IN,
    PUT_ON,
    TURN_LEFT,
    TURN_RIGHT,
    Position2D,
)

PICK_SUCCESS = "pick-success"
PICK_FAIL = "pick-fail"
PUT_IN_CLASS = "put-in"
PUT_ON_SUCCESS = "put-on-success"
PUT_ON_FAIL = "put-on-fail"
MOVING = "moving"
ACTION_CLASSES = (PICK_SUCCESS, PICK_FAIL, PUT_IN_CLASS, PUT_ON_SUCCESS, PUT_ON_FAIL, MOVING)

VISIBILITY_GATE = 0.2
GROUNDING_RADIUS = 2.0
DEFAULT_RECOGNITION_ACCURACY = 0.861
GOAL_BOOST = 3.0


@dataclass
class BehaviorEvent:
    frame: int
    action_class: str
    grounded_object: Optional[int] = None
    confidence: float = 1.0
    partner_position: Optional[Position2D] = None
    object_category: Optional[str] = None
    object_height: Optional[float] = None
    object_weight: Optional[float] = None


def true_action_class(action_kind: str, success: bool) -> Optional[str]:
    """Map a resolved primitive to one of the six recognizable classes."""
    if action_kind == PICK_UP:
        return PICK_SUCCESS if success else PICK_FAIL
    if action_kind == PUT_IN:
        return PUT_IN_CLASS
    if action_kind == PUT_ON:
        return PUT_ON_SUCCESS if success else PUT_ON_FAIL
    if action_kind in (MOVE_FORWARD, TURN_LEFT, TURN_RIGHT):
        return MOVING
    return None  # waiting produces no clip


def recognize(
    action_kind: str,
    success: bool,
    visibility_flags: list[bool],
    rng,
    p_acc: float = DEFAULT_RECOGNITION_ACCURACY,
    frame: int = 0,
    partner_position: Optional[Position2D] = None,
) -> Optional[BehaviorEvent]:
    """Emulated action recognition over a completed partner action.

    Clips where the partner was visible for less than 20% of the action's
    frames are discarded. Otherwise the true class comes out with probability
    p_acc, else a uniformly random wrong class.
    """
    truth = true_action_class(action_kind, success)
    if truth is None:
        return None
    if not visibility_flags or sum(visibility_flags) / len(visibility_flags) < VISIBILITY_GATE:
        return None
    label = truth
    if p_acc < 1.0 and rng.random() >= p_acc:
        wrong = [c for c in ACTION_CLASSES if c != truth]
        label = wrong[int(rng.integers(len(wrong)))]
    return BehaviorEvent(
        frame=frame,
        action_class=label,
        confidence=p_acc,
        partner_position=partner_position,
    )


_ELIGIBLE = {
    PICK_SUCCESS: ("graspable",),
    PICK_FAIL: ("graspable",),
    PUT_IN_CLASS: ("container",),
    PUT_ON_SUCCESS: ("surface",),
    PUT_ON_FAIL: ("surface",),
}


def ground(event: BehaviorEvent, memory: AgentMemory, partner_position: Position2D) -> BehaviorEvent:
    """Bind a recognized action to the nearest eligible remembered object."""
    slot = _ELIGIBLE.get(event.action_class)
    if slot is None:
        return event
    best = None
    best_d = GROUNDING_RADIUS
    for oid in sorted(memory.semantic):
        e = memory.semantic[oid]
        if slot[0] == "graspable" and e.kind in (KIND_GOAL,):
            continue
        if slot[0] == "container" and e.kind != KIND_CONTAINER:
            continue
        if slot[0] == "surface" and e.kind != KIND_GOAL:
            continue
        d = e.position.dist(partner_position)
        if d <= best_d:
            best_d = d
            best = e
    if best is not None:
        event.grounded_object = best.id
        event.object_category = best.category
        event.object_height = best.height
        event.object_weight = best.weight
    event.partner_position = partner_position
    return event


class GoalBelief:
    """Normalized weights over goal categories; pick events boost a category."""

    def __init__(self, categories: Optional[list[str]] = None, boost: float = GOAL_BOOST):
        self.boost = boost
        self.weights: dict[str, float] = {}
        for c in categories or []:
            self.weights[c] = 1.0
        self._normalize()

    def _normalize(self) -> None:
        total = sum(self.weights.values())
        if total > 0:
            self.weights = {c: w / total for c, w in self.weights.items()}

    def ensure_category(self, category: str) -> None:
        if category not in self.weights:
            n = len(self.weights)
            self.weights[category] = 1.0 / n if n else 1.0
            self._normalize()

    def update(self, event: BehaviorEvent) -> None:
        """Pick events multiply the picked category's weight; other classes are ignored."""
        if event.action_class not in (PICK_SUCCESS, PICK_FAIL):
            return
        if event.object_category is None:
            return
        self.ensure_category(event.object_category)
        self.weights[event.object_category] *= self.boost
        self._normalize()

    def is_uniform(self, tol: float = 1e-9) -> bool:
        if not self.weights:
            return True
        vals = list(self.weights.values())
        return max(vals) - min(vals) <= tol

    def argmax(self) -> Optional[str]:
        if not self.weights or self.is_uniform():
            return None
        return max(sorted(self.weights), key=lambda c: self.weights[c])


@dataclass
class ConstraintBelief:
    """Interval estimates of the partner's capabilities, tightened by failures.

    A success above a previously tightened bound relaxes it back so the
    estimates stay consistent with the stochastic capability model.
    """

    reach_max_upper: float = math.inf
    reach_min_lower: float = 0.0
    strength_upper: float = math.inf
    wheelchair_suspected: bool = False
    _recent_moves: list[Position2D] = field(default_factory=list)

    def believes_unreachable(self, height: float) -> bool:
        return height > self.reach_max_upper or height < self.reach_min_lower

    def update(self, event: BehaviorEvent) -> None:
        if event.action_class == PICK_FAIL:
            if event.object_height is not None:
                # Failures on low objects bound reach from below, high ones from above.
                if event.object_height >= 0.5:
                    self.reach_max_upper = min(self.reach_max_upper, event.object_height)
                else:
                    self.reach_min_lower = max(self.reach_min_lower, event.object_height)
            if event.object_weight is not None:
                self.strength_upper = min(self.strength_upper, event.object_weight)
        elif event.action_class == PICK_SUCCESS:
            if event.object_height is not None:
                if event.object_height > self.reach_max_upper:
                    self.reach_max_upper = event.object_height
                if event.object_height < self.reach_min_lower:
                    self.reach_min_lower = event.object_height
            if event.object_weight is not None and event.object_weight > self.strength_upper:
                self.strength_upper = event.object_weight

    def note_movement(self, event: BehaviorEvent, obstacle_positions: list[Position2D]) -> None:
        """Flag a wheelchair when the partner keeps treading water next to an obstacle."""
        if event.action_class != MOVING or event.partner_position is None:
            return
        self._recent_moves.append(event.partner_position)
        self._recent_moves = self._recent_moves[-4:]
        if len(self._recent_moves) < 3:
            return
        anchor = self._recent_moves[-1]
        if not all(p.dist(anchor) <= 0.5 for p in self._recent_moves[-3:]):
            return
        if any(anchor.dist(op) <= 1.0 for op in obstacle_positions):
            self.wheelchair_suspected = True
