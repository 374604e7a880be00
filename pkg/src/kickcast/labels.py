"""Kick actions and their encoding into label columns."""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Optional

from .ordering import Ordering
from .state_model import Vec2, WorldState, angle_of


class Category(IntEnum):
    HOLD = 0
    PASS = 1
    DRIBBLE = 2


class Description(IntEnum):
    DRIBBLE = 0
    DIRECT_PASS = 1
    CROSS_PASS = 2
    THROUGH_PASS = 3
    LEAD_PASS = 4
    HOLD = 5


PASS_DESCRIPTIONS = frozenset({Description.DIRECT_PASS, Description.CROSS_PASS,
                               Description.THROUGH_PASS, Description.LEAD_PASS})

LABEL_NAMES = ("category", "target_unum", "target_index", "description",
               "target_x", "target_y", "first_kick_angle", "first_kick_speed")


@dataclass(frozen=True)
class KickAction:
    kicker_unum: int
    category: Category
    description: Description
    target_unum: int
    target_position: Optional[Vec2]
    first_kick_angle: float
    first_kick_speed: float

    def __post_init__(self):
        check_action(self)


def check_action(a: KickAction) -> None:
    if not 1 <= a.target_unum <= 11:
        raise ValueError(f"target_unum {a.target_unum} outside 1..11")
    if a.first_kick_speed < 0:
        raise ValueError("first_kick_speed must be non-negative")
    if a.category is Category.PASS:
        if a.description not in PASS_DESCRIPTIONS:
            raise ValueError(f"PASS with description {a.description.name}")
        if a.target_unum == a.kicker_unum:
            raise ValueError("a pass cannot target the kicker")
    elif a.category is Category.HOLD:
        if a.description is not Description.HOLD or a.first_kick_speed != 0.0:
            raise ValueError("HOLD needs description HOLD and zero kick speed")
        if a.target_unum != a.kicker_unum:
            raise ValueError("HOLD must target the kicker")
    elif a.category is Category.DRIBBLE:
        if a.description is not Description.DRIBBLE or a.target_unum != a.kicker_unum:
            raise ValueError("DRIBBLE needs description DRIBBLE and the kicker as target")


@dataclass(frozen=True)
class LabelRow:
    category: Category
    target_unum: int
    target_index: int
    description: Description
    target_position: Vec2
    first_kick_angle: float
    first_kick_speed: float

    def values(self) -> tuple[float, ...]:
        return (float(self.category), float(self.target_unum), float(self.target_index),
                float(self.description), self.target_position.x, self.target_position.y,
                self.first_kick_angle, self.first_kick_speed)


def generate_labels(action: KickAction, ordering: Ordering, ws: WorldState) -> LabelRow:
    """Encode `action` against the teammate `ordering`.

    When the action carries a target position the kick angle is re-derived as
    the bearing from the ball to it; HOLD rows report the ball position.
    """
    check_action(action)
    index = ordering.index_of(action.target_unum)
    if action.target_position is not None:
        target = action.target_position
        angle = angle_of(target.x - ws.ball.pos.x, target.y - ws.ball.pos.y)
    else:
        target = ws.ball.pos
        angle = action.first_kick_angle
    return LabelRow(action.category, action.target_unum, index, action.description,
                    target, angle, action.first_kick_speed)
