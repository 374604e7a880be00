"""The ten player-ordering methods used to lay out per-player feature blocks."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .state_model import GOAL_CENTER, PlayerState, Vec2, angle_of


class OrderingMethod(Enum):
    X = "x"
    X_FK = "x_fk"
    UNUM = "unum"
    UNUM_FK = "unum_fk"
    AFC = "afc"
    AFC_FK = "afc_fk"
    AK = "ak"
    AK_FK = "ak_fk"
    AKG = "akg"
    AKG_FK = "akg_fk"

    @property
    def kicker_first(self) -> bool:
        return self.value.endswith("_fk")

    @property
    def base(self) -> "OrderingMethod":
        return OrderingMethod(self.value.removesuffix("_fk"))

    @classmethod
    def parse(cls, name: str) -> "OrderingMethod":
        try:
            return cls(name.strip().lower())
        except ValueError:
            valid = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown ordering method {name!r}; valid: {valid}") from None


ALL_METHODS = tuple(OrderingMethod)


@dataclass(frozen=True)
class OrderingReference:
    kicker_pos: Vec2
    ball_pos: Vec2
    goal_center: Vec2 = Vec2(*GOAL_CENTER)
    field_center: Vec2 = Vec2(0.0, 0.0)


@dataclass(frozen=True)
class Ordering:
    permutation: tuple[int, ...]

    def index_of(self, unum: int) -> int:
        try:
            return self.permutation.index(unum)
        except ValueError:
            raise KeyError(f"unum {unum} not in ordering {list(self.permutation)}") from None


def _sort_key(base: OrderingMethod, p: PlayerState, ref: OrderingReference) -> tuple[float, int]:
    if base is OrderingMethod.X:
        return (p.pos.x, p.unum)
    if base is OrderingMethod.UNUM:
        return (0.0, p.unum)
    target = {
        OrderingMethod.AFC: ref.field_center,
        OrderingMethod.AK: ref.kicker_pos,
        OrderingMethod.AKG: ref.goal_center,
    }[base]
    return (angle_of(target.x - p.pos.x, target.y - p.pos.y), p.unum)


def order_players(players: Sequence[PlayerState], method: OrderingMethod, kicker_unum: int | None,
                  reference: OrderingReference) -> Ordering:
    """Permutation of the players' unums under `method`.

    Every key sorts ascending with ties broken by ascending unum. For the _FK
    variants the kicker leads; if `kicker_unum` is not among `players` (the
    opponent team) the base method is used unchanged.
    """
    if not players:
        raise ValueError("cannot order an empty team")
    unums = [p.unum for p in players]
    if len(set(unums)) != len(unums):
        raise ValueError(f"duplicate unums in {unums}")
    base = method.base
    ranked = sorted(players, key=lambda p: _sort_key(base, p, reference))
    perm = [p.unum for p in ranked]
    if method.kicker_first and kicker_unum in perm:
        perm.remove(kicker_unum)
        perm.insert(0, kicker_unum)
    return Ordering(tuple(perm))
