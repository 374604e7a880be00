"""Ball, dribble, pass/shoot and per-player features; assembly of one fixed-width row."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Hashable

import numpy as np

from .ordering import Ordering, OrderingMethod, OrderingReference, order_players
from .state_model import (GOAL_CENTER, PITCH_HALF_LENGTH, TEAM_SIZE, TYPE_PARAM_NAMES,
                          PlayerState, Vec2, WorldState, angle_of, is_offside, normalize_angle)

SCHEMA_VERSION = 1

N_SECTORS = 12
SECTOR_WIDTH = 360.0 / N_SECTORS
DRIBBLE_CAP = 30.0
PASS_ANGLE_CAP = 60.0
PASS_CORRIDOR_SLACK = 3.0
GOAL_POST_Y = 7.01
SHADOW_RADIUS = 1.2
# nearest-opponent distance when the opponent list is empty
NO_OPPONENT_DIST = 150.0

BALL_NAMES = ("ball_x", "ball_y", "ball_rx", "ball_ry", "ball_r", "ball_teta",
              "ball_vx", "ball_vy", "ball_vr", "ball_vteta")
COMMON_PLAYER_NAMES = (
    ("side", "unum", "body", "face", "tackling", "kicking", "card")
    + tuple(f"type_{n}" for n in TYPE_PARAM_NAMES)
    + ("x", "y", "rx", "ry", "r", "teta", "vx", "vy", "vr", "vteta",
       "pos_count", "vel_count", "gca", "gcd", "stamina", "stamina_count")
)
TEAMMATE_EXTRA_NAMES = ("offside", "is_kicker", "free_pass_angle", "direct_pass_dist",
                        "nearest_opponent_dist", "free_shoot_angle")
TEAMMATE_NAMES = COMMON_PLAYER_NAMES + TEAMMATE_EXTRA_NAMES
OPPONENT_NAMES = COMMON_PLAYER_NAMES


class Role(Enum):
    TEAMMATE = "tm"
    OPPONENT = "opp"


@dataclass(frozen=True)
class FeatureSchema:
    version: int
    column_names: tuple[str, ...]

    @property
    def width(self) -> int:
        return len(self.column_names)


@lru_cache(maxsize=None)
def feature_schema(version: int = SCHEMA_VERSION) -> FeatureSchema:
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported feature schema version {version}")
    names = list(BALL_NAMES)
    names += [f"dribble_free_{k}" for k in range(N_SECTORS)]
    names += ["cycle", "offside_count"]
    for i in range(TEAM_SIZE):
        names += [f"tm{i}_{n}" for n in TEAMMATE_NAMES]
    for i in range(TEAM_SIZE):
        names += [f"opp{i}_{n}" for n in OPPONENT_NAMES]
    return FeatureSchema(version, tuple(names))


@dataclass(frozen=True)
class FeatureRow:
    values: np.ndarray
    schema: FeatureSchema
    ordering_method: OrderingMethod
    event_id: Hashable = None

    def __post_init__(self):
        if self.values.shape != (self.schema.width,):
            raise ValueError(f"row width {self.values.shape} != schema width {self.schema.width}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature row contains non-finite values")


def _polar(dx: float, dy: float) -> tuple[float, float]:
    r = math.hypot(dx, dy)
    return r, (0.0 if r == 0.0 else math.degrees(math.atan2(dy, dx)))


def ball_features(ws: WorldState) -> tuple[float, ...]:
    b, k = ws.ball, ws.kicker
    rx, ry = b.pos.x - k.pos.x, b.pos.y - k.pos.y
    r, teta = _polar(rx, ry)
    vr, vteta = _polar(b.vel.x, b.vel.y)
    return (b.pos.x, b.pos.y, rx, ry, r, teta, b.vel.x, b.vel.y, vr, vteta)


def sector_of(bearing: float) -> int:
    return int(math.floor((bearing + 180.0) / SECTOR_WIDTH)) % N_SECTORS


def sector_center(k: int) -> float:
    return -180.0 + SECTOR_WIDTH * (k + 0.5)


def dribble_free_distances(ws: WorldState) -> tuple[float, ...]:
    out = [DRIBBLE_CAP] * N_SECTORS
    bx, by = ws.ball.pos.x, ws.ball.pos.y
    for o in ws.opponents:
        dx, dy = o.pos.x - bx, o.pos.y - by
        d = math.hypot(dx, dy)
        k = sector_of(angle_of(dx, dy))
        if d < out[k]:
            out[k] = d
    return tuple(out)


def free_pass_angle(ws: WorldState, teammate_unum: int) -> float:
    if teammate_unum == ws.kicker_unum:
        raise ValueError("free_pass_angle is undefined for the kicker itself")
    tm = ws.teammate(teammate_unum)
    ball = ws.ball.pos
    reach = ball.dist(tm.pos) + PASS_CORRIDOR_SLACK
    pass_dir = angle_of(tm.pos.x - ball.x, tm.pos.y - ball.y)
    best = PASS_ANGLE_CAP
    for o in ws.opponents:
        if ball.dist(o.pos) < reach:
            diff = abs(normalize_angle(pass_dir - angle_of(o.pos.x - ball.x, o.pos.y - ball.y)))
            best = min(best, diff)
    return best


def goal_cone(origin: Vec2) -> tuple[float, float] | None:
    """Bearings (low, high) of the two posts seen from `origin`, or None behind the line."""
    if origin.x >= PITCH_HALF_LENGTH:
        return None
    lo = angle_of(PITCH_HALF_LENGTH - origin.x, -GOAL_POST_Y - origin.y)
    hi = angle_of(PITCH_HALF_LENGTH - origin.x, GOAL_POST_Y - origin.y)
    return lo, hi


def shadow(origin: Vec2, target: Vec2) -> tuple[float, float]:
    """Angular shadow of an opponent at `target` as (bearing, half-width)."""
    d = origin.dist(target)
    half = 90.0 if d == 0.0 else math.degrees(math.asin(min(1.0, SHADOW_RADIUS / d)))
    return angle_of(target.x - origin.x, target.y - origin.y), half


def free_shoot_angle(ws: WorldState, teammate_unum: int) -> float:
    origin = ws.teammate(teammate_unum).pos
    cone = goal_cone(origin)
    if cone is None:
        return 0.0
    lo, hi = cone
    center = 0.5 * (lo + hi)
    lo, hi = lo - center, hi - center
    blocked = []
    for o in ws.opponents:
        bearing, half = shadow(origin, o.pos)
        # cone lies inside (-90, 90) so no wrap-around copy can intersect it
        rel = normalize_angle(bearing - center)
        a, b = max(lo, rel - half), min(hi, rel + half)
        if a < b:
            blocked.append((a, b))
    blocked.sort()
    widest, cursor = 0.0, lo
    for a, b in blocked:
        if a > cursor:
            widest = max(widest, a - cursor)
        cursor = max(cursor, b)
    widest = max(widest, hi - cursor)
    return widest


def nearest_opponent_dist(ws: WorldState, p: PlayerState) -> float:
    if not ws.opponents:
        return NO_OPPONENT_DIST
    return min(p.pos.dist(o.pos) for o in ws.opponents)


def player_features(ws: WorldState, p: PlayerState, role: Role) -> tuple[float, ...]:
    k = ws.kicker.pos
    rx, ry = p.pos.x - k.x, p.pos.y - k.y
    r, teta = _polar(rx, ry)
    vr, vteta = _polar(p.vel.x, p.vel.y)
    gcd, gca = _polar(GOAL_CENTER[0] - p.pos.x, GOAL_CENTER[1] - p.pos.y)
    row = (
        float(int(p.side)), float(p.unum), p.body, p.face,
        float(p.tackling), float(p.kicking), float(p.card),
        *p.type_params.as_tuple(),
        p.pos.x, p.pos.y, rx, ry, r, teta, p.vel.x, p.vel.y, vr, vteta,
        float(p.pos_count), float(p.vel_count), gca, gcd, p.stamina, float(p.stamina_count),
    )
    if role is Role.OPPONENT:
        return row
    is_kicker = p.unum == ws.kicker_unum
    return row + (
        float(is_offside(ws, p.unum)),
        float(is_kicker),
        0.0 if is_kicker else free_pass_angle(ws, p.unum),
        ws.ball.pos.dist(p.pos),
        nearest_opponent_dist(ws, p),
        free_shoot_angle(ws, p.unum),
    )


def reference_of(ws: WorldState) -> OrderingReference:
    return OrderingReference(kicker_pos=ws.kicker.pos, ball_pos=ws.ball.pos)


def team_orderings(ws: WorldState, method: OrderingMethod) -> tuple[Ordering, Ordering]:
    ref = reference_of(ws)
    return (order_players(ws.teammates, method, ws.kicker_unum, ref),
            order_players(ws.opponents, method, None, ref))


class StateFeatures:
    """Order-independent feature blocks of one state, laid out on demand per method."""

    def __init__(self, ws: WorldState):
        if len(ws.teammates) != TEAM_SIZE or len(ws.opponents) != TEAM_SIZE:
            raise ValueError(f"row extraction needs {TEAM_SIZE} players per team, got "
                             f"{len(ws.teammates)} and {len(ws.opponents)}")
        self.ws = ws
        self.head = ball_features(ws) + dribble_free_distances(ws) + (
            float(ws.cycle), float(ws.offside_count))
        self.tm = {p.unum: player_features(ws, p, Role.TEAMMATE) for p in ws.teammates}
        self.opp = {p.unum: player_features(ws, p, Role.OPPONENT) for p in ws.opponents}

    def layout(self, method: OrderingMethod) -> np.ndarray:
        tm_order, opp_order = team_orderings(self.ws, method)
        parts = [self.head]
        parts += [self.tm[u] for u in tm_order.permutation]
        parts += [self.opp[u] for u in opp_order.permutation]
        return np.fromiter((v for part in parts for v in part), dtype=np.float64,
                           count=feature_schema().width)

    def row(self, method: OrderingMethod, event_id: Hashable = None) -> FeatureRow:
        return FeatureRow(self.layout(method), feature_schema(), method, event_id)


def extract_row(ws: WorldState, method: OrderingMethod, event_id: Hashable = None) -> FeatureRow:
    return StateFeatures(ws).row(method, event_id)
