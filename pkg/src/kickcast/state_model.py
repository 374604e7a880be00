"""World-state types, the full-state -> noisy observation transform and rule helpers.

All coordinates are normalized so the kicker's team attacks toward +x.
Angles are degrees in (-180, 180].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum
from typing import Optional, Sequence

import numpy as np

PITCH_HALF_LENGTH = 52.5
PITCH_HALF_WIDTH = 34.0
PITCH_MARGIN = 5.0
BALL_SPEED_MAX = 3.0
GOAL_CENTER = (PITCH_HALF_LENGTH, 0.0)
TEAM_SIZE = 11


class Side(IntEnum):
    LEFT = 1
    RIGHT = -1


class Flavor(Enum):
    FULL = "full"
    NOISY = "noisy"


def normalize_angle(deg: float) -> float:
    r = math.fmod(deg, 360.0)
    if r <= -180.0:
        r += 360.0
    elif r > 180.0:
        r -= 360.0
    return r


def angle_of(dx: float, dy: float) -> float:
    """Direction of (dx, dy) in degrees; the zero vector maps to 0."""
    if dx == 0.0 and dy == 0.0:
        return 0.0
    return math.degrees(math.atan2(dy, dx))


@dataclass(frozen=True)
class Vec2:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite Vec2 ({self.x}, {self.y})")

    def __sub__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x - other.x, self.y - other.y)

    def __add__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x + other.x, self.y + other.y)

    def r(self) -> float:
        return math.hypot(self.x, self.y)

    def th(self) -> float:
        return angle_of(self.x, self.y)

    def dist(self, other: "Vec2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class PlayerTypeParams:
    # agent2d default (type 0) values
    dash_rate: float = 0.006
    effort_max: float = 1.0
    effort_min: float = 0.6
    kickable_dist: float = 1.085
    margin_dist: float = 0.7
    kick_power_rate: float = 0.027
    decay: float = 0.4
    size: float = 0.3
    speed_max: float = 1.05

    def __post_init__(self):
        if self.effort_min > self.effort_max:
            raise ValueError("effort_min > effort_max")
        if self.kickable_dist <= 0 or self.speed_max <= 0:
            raise ValueError("kickable_dist and speed_max must be positive")
        if not 0 < self.decay < 1:
            raise ValueError("decay must lie in (0, 1)")

    def as_tuple(self) -> tuple[float, ...]:
        return (self.dash_rate, self.effort_max, self.effort_min, self.kickable_dist,
                self.margin_dist, self.kick_power_rate, self.decay, self.size, self.speed_max)


TYPE_PARAM_NAMES = ("dash_rate", "effort_max", "effort_min", "kickable_dist", "margin_dist",
                    "kick_power_rate", "decay", "size", "speed_max")


@dataclass(frozen=True)
class PlayerState:
    side: Side
    unum: int
    pos: Vec2
    vel: Vec2 = Vec2(0.0, 0.0)
    body: float = 0.0
    face: float = 0.0
    stamina: float = 8000.0
    type_params: PlayerTypeParams = field(default_factory=PlayerTypeParams)
    tackling: bool = False
    kicking: bool = False
    card: bool = False
    pos_count: int = 0
    vel_count: int = 0
    stamina_count: int = 0

    def __post_init__(self):
        if not 1 <= self.unum <= TEAM_SIZE:
            raise ValueError(f"unum {self.unum} outside 1..{TEAM_SIZE}")
        if (abs(self.pos.x) > PITCH_HALF_LENGTH + PITCH_MARGIN
                or abs(self.pos.y) > PITCH_HALF_WIDTH + PITCH_MARGIN):
            raise ValueError(f"player {self.unum} outside field bounds: {self.pos}")
        if min(self.pos_count, self.vel_count, self.stamina_count) < 0:
            raise ValueError("observation counts must be non-negative")
        if self.stamina < 0:
            raise ValueError("stamina must be non-negative")


@dataclass(frozen=True)
class BallState:
    pos: Vec2
    vel: Vec2 = Vec2(0.0, 0.0)

    def __post_init__(self):
        if self.vel.r() > BALL_SPEED_MAX + 1e-9:
            raise ValueError(f"ball speed {self.vel.r()} exceeds {BALL_SPEED_MAX}")


@dataclass(frozen=True)
class WorldState:
    cycle: int
    ball: BallState
    teammates: tuple[PlayerState, ...]
    opponents: tuple[PlayerState, ...]
    kicker_unum: int
    offside_count: int = 0
    flavor: Flavor = Flavor.FULL

    def __post_init__(self):
        object.__setattr__(self, "teammates", tuple(self.teammates))
        object.__setattr__(self, "opponents", tuple(self.opponents))
        if self.cycle < 0 or self.offside_count < 0:
            raise ValueError("cycle and offside_count must be non-negative")
        for team in (self.teammates, self.opponents):
            unums = [p.unum for p in team]
            if len(set(unums)) != len(unums):
                raise ValueError(f"duplicate unums {sorted(unums)}")
            if len(team) > TEAM_SIZE:
                raise ValueError("more than 11 players in a team")
        if sum(p.unum == self.kicker_unum for p in self.teammates) != 1:
            raise ValueError(f"kicker {self.kicker_unum} not among teammates")

    @property
    def kicker(self) -> PlayerState:
        return self.teammate(self.kicker_unum)

    def teammate(self, unum: int) -> PlayerState:
        for p in self.teammates:
            if p.unum == unum:
                return p
        raise KeyError(f"no teammate with unum {unum}")

    def opponent(self, unum: int) -> PlayerState:
        for p in self.opponents:
            if p.unum == unum:
                return p
        raise KeyError(f"no opponent with unum {unum}")


@dataclass(frozen=True)
class NoiseConfig:
    pos_sigma_base: float = 0.2
    pos_sigma_per_meter: float = 0.03
    vel_sigma: float = 0.1
    angle_sigma: float = 5.0
    p_unseen: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if min(self.pos_sigma_base, self.pos_sigma_per_meter, self.vel_sigma, self.angle_sigma) < 0:
            raise ValueError("noise sigmas must be non-negative")
        if not 0.0 <= self.p_unseen <= 1.0:
            raise ValueError("p_unseen must lie in [0, 1]")

    @classmethod
    def zero(cls, seed: int = 0) -> "NoiseConfig":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, seed)


def _clip_to_field(v: Vec2) -> Vec2:
    lx = PITCH_HALF_LENGTH + PITCH_MARGIN
    ly = PITCH_HALF_WIDTH + PITCH_MARGIN
    if abs(v.x) <= lx and abs(v.y) <= ly:
        return v
    return Vec2(min(lx, max(-lx, v.x)), min(ly, max(-ly, v.y)))


def _clip_speed(v: Vec2, vmax: float) -> Vec2:
    r = v.r()
    if r <= vmax:
        return v
    return Vec2(v.x * vmax / r, v.y * vmax / r)


def _jitter(value: float, noise: float, sigma: float) -> float:
    # zero sigma leaves the stored value untouched (avoids -0.0 artefacts)
    return value if sigma == 0.0 else value + noise


def _noise_rng(seed: int, cycle: int) -> np.random.Generator:
    return np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, cycle])


def apply_observation_noise(fws: WorldState, cfg: NoiseConfig,
                            prev: Optional[WorldState] = None) -> WorldState:
    """Turn a full state into the agent's noisy, possibly stale belief.

    Every random draw comes from a generator seeded by (cfg.seed, fws.cycle), in a
    fixed order, so the result is a pure function of the arguments.
    """
    if fws.flavor is not Flavor.FULL:
        raise ValueError("apply_observation_noise expects a FULL state")
    for p in fws.teammates + fws.opponents:
        if p.pos_count or p.vel_count or p.stamina_count:
            raise ValueError(f"malformed FULL state: player {p.unum} has nonzero observation counts")
    if prev is not None and prev.flavor is not Flavor.NOISY:
        raise ValueError("prev must be a NOISY state")

    rng = _noise_rng(cfg.seed, fws.cycle)
    kicker = fws.kicker

    def perturb(p: PlayerState, scale: float, prev_team: Sequence[PlayerState] | None,
                can_hide: bool) -> PlayerState:
        d = p.pos.dist(kicker.pos)
        ps = scale * (cfg.pos_sigma_base + cfg.pos_sigma_per_meter * d)
        vs = scale * cfg.vel_sigma
        as_ = scale * cfg.angle_sigma
        z = rng.standard_normal(6)
        hide = rng.random() < cfg.p_unseen
        pos = Vec2(_jitter(p.pos.x, ps * z[0], ps), _jitter(p.pos.y, ps * z[1], ps))
        vel = Vec2(_jitter(p.vel.x, vs * z[2], vs), _jitter(p.vel.y, vs * z[3], vs))
        body = normalize_angle(p.body + as_ * z[4]) if as_ else p.body
        face = normalize_angle(p.face + as_ * z[5]) if as_ else p.face
        seen = replace(p, pos=_clip_to_field(pos), vel=vel, body=body, face=face)
        if not (can_hide and hide):
            return seen
        old = None
        if prev_team is not None:
            old = next((q for q in prev_team if q.unum == p.unum), None)
        base = seen if old is None else replace(
            p, pos=old.pos, vel=old.vel, body=old.body, face=old.face, stamina=old.stamina,
            tackling=old.tackling, kicking=old.kicking, card=old.card,
            pos_count=old.pos_count, vel_count=old.vel_count, stamina_count=old.stamina_count)
        return replace(base, pos_count=base.pos_count + 1, vel_count=base.vel_count + 1,
                       stamina_count=base.stamina_count + 1)

    teammates = []
    for p in fws.teammates:
        if p.unum == fws.kicker_unum:
            teammates.append(perturb(p, 0.5, None, can_hide=False))
        else:
            teammates.append(perturb(p, 1.0, prev.teammates if prev else None, can_hide=True))
    opponents = [perturb(p, 1.0, prev.opponents if prev else None, can_hide=True)
                 for p in fws.opponents]

    bd = fws.ball.pos.dist(kicker.pos)
    bs = 0.5 * (cfg.pos_sigma_base + cfg.pos_sigma_per_meter * bd)
    bvs = 0.5 * cfg.vel_sigma
    z = rng.standard_normal(4)
    ball = BallState(
        _clip_to_field(Vec2(_jitter(fws.ball.pos.x, bs * z[0], bs), _jitter(fws.ball.pos.y, bs * z[1], bs))),
        _clip_speed(Vec2(_jitter(fws.ball.vel.x, bvs * z[2], bvs),
                         _jitter(fws.ball.vel.y, bvs * z[3], bvs)), BALL_SPEED_MAX),
    )

    # offside count resets once every opponent has been freshly seen
    if all(p.pos_count == 0 for p in opponents):
        offside_count = 0
    else:
        offside_count = (prev.offside_count if prev is not None else fws.offside_count) + 1

    return replace(fws, ball=ball, teammates=tuple(teammates), opponents=tuple(opponents),
                   offside_count=offside_count, flavor=Flavor.NOISY)


def offside_line_x(ws: WorldState) -> float:
    xs = sorted((p.pos.x for p in ws.opponents), reverse=True)
    if len(xs) < 2:
        raise ValueError("offside line needs at least two opponents")
    return max(xs[1], ws.ball.pos.x)


def is_offside(ws: WorldState, teammate_unum: int) -> bool:
    p = ws.teammate(teammate_unum)
    return p.pos.x > offside_line_x(ws) and p.pos.x > 0.0


def kickable(ws: WorldState, unum: int) -> bool:
    p = ws.teammate(unum)
    return ws.ball.pos.dist(p.pos) <= p.type_params.kickable_dist


def mirror_state(ws: WorldState) -> WorldState:
    """Rotate a state by 180 degrees about the field center.

    Used when ingesting data recorded from the RIGHT side so that the kicker's
    team attacks toward +x.
    """
    def flip_v(v: Vec2) -> Vec2:
        return Vec2(-v.x + 0.0, -v.y + 0.0)

    def flip_p(p: PlayerState) -> PlayerState:
        return replace(p, pos=flip_v(p.pos), vel=flip_v(p.vel),
                       body=normalize_angle(p.body + 180.0), face=normalize_angle(p.face + 180.0))

    return replace(ws, ball=BallState(flip_v(ws.ball.pos), flip_v(ws.ball.vel)),
                   teammates=tuple(flip_p(p) for p in ws.teammates),
                   opponents=tuple(flip_p(p) for p in ws.opponents))


def normalize_for_side(ws: WorldState, kicker_side: Side) -> WorldState:
    return ws if kicker_side is Side.LEFT else mirror_state(ws)
