"""Synthetic kick events with a deterministic rule-based kicker policy.

Stands in for full-state match logs: each event carries the exact state, the
agent's noisy view of it, and the action the policy picks from the exact state.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Optional

import numpy as np

from .features import (N_SECTORS, dribble_free_distances, free_pass_angle,
                       nearest_opponent_dist, sector_center, sector_of)
from .labels import Category, Description, KickAction
from .state_model import (GOAL_CENTER, PITCH_HALF_LENGTH, PITCH_HALF_WIDTH, BallState, Flavor,
                          NoiseConfig, PlayerState, PlayerTypeParams, Side, Vec2, WorldState,
                          angle_of, apply_observation_noise, kickable, normalize_angle)

EVENT_FILE = "events.jsonl"
EVENT_META_FILE = "events.meta.json"
EVENT_FORMAT_VERSION = 1

RECEIVER_MIN_FREEDOM = 3.0
THROUGH_LEAD = 3.0
LEAD_MIN = 1.0
MAX_LEAD = 5.0
CROSS_GOAL_RADIUS = 15.0
CROSS_WING_Y = 10.0
DRIBBLE_STEP = 5.0
DRIBBLE_SPEED = 0.8
# sectors whose center bearing points into the attacking half-plane; with eleven
# opponents one of the twelve sectors is always empty, so backward sectors are
# excluded or HOLD could never occur
FORWARD_SECTORS = tuple(k for k in range(N_SECTORS) if abs(sector_center(k)) < 90.0)

# 4-3-3 anchors for unums 1..11 in a neutral position, attacking +x
_HOME_ANCHORS = {
    1: (-48.0, 0.0), 2: (-30.0, -5.0), 3: (-30.0, 5.0), 4: (-28.0, -18.0), 5: (-28.0, 18.0),
    6: (-15.0, 0.0), 7: (-8.0, -12.0), 8: (-8.0, 12.0), 9: (5.0, -20.0), 10: (5.0, 20.0),
    11: (10.0, 0.0),
}


@dataclass(frozen=True)
class EpisodeConfig:
    n_events: int = 1000
    seed: int = 0
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    formation_spread: float = 6.0
    pass_threshold_deg: float = 10.0
    dribble_threshold_m: float = 7.0
    # opponents pressing the kicker are drawn from 0..max_press
    max_press: int = 6
    mark_probability: float = 0.7
    # event regimes: walled (lanes and forward sectors shut), closed (receivers
    # covered greedily), otherwise loose pressing and marking
    wall_probability: float = 0.3
    closed_probability: float = 0.35

    def __post_init__(self):
        if self.n_events <= 0:
            raise ValueError("n_events must be positive")
        if self.pass_threshold_deg <= 0 or self.dribble_threshold_m <= 0:
            raise ValueError("thresholds must be positive")


@dataclass(frozen=True)
class KickEvent:
    event_id: str
    fws: WorldState
    ws: WorldState
    action: KickAction


def _clip_pitch(x: float, y: float) -> Vec2:
    return Vec2(min(PITCH_HALF_LENGTH, max(-PITCH_HALF_LENGTH, x)),
                min(PITCH_HALF_WIDTH, max(-PITCH_HALF_WIDTH, y)))


def oracle_policy(fws: WorldState, pass_threshold_deg: float = 10.0,
                  dribble_threshold_m: float = 7.0) -> KickAction:
    """Pass to the most open receiver, else dribble forward into open space, else hold."""
    if fws.flavor is not Flavor.FULL:
        raise ValueError("oracle_policy reads FULL states only")
    if not kickable(fws, fws.kicker_unum):
        raise ValueError(f"kicker {fws.kicker_unum} cannot reach the ball")
    kicker = fws.kicker
    ball = fws.ball.pos

    best = None
    for p in sorted(fws.teammates, key=lambda p: p.unum):
        if p.unum == fws.kicker_unum:
            continue
        angle = free_pass_angle(fws, p.unum)
        if angle < pass_threshold_deg or nearest_opponent_dist(fws, p) < RECEIVER_MIN_FREEDOM:
            continue
        if best is None or angle > best[0]:
            best = (angle, p)
    if best is not None:
        receiver = best[1]
        freedom = nearest_opponent_dist(fws, receiver)
        lead = min(MAX_LEAD, max(0.0, 0.5 * (freedom - RECEIVER_MIN_FREEDOM)))
        target = _clip_pitch(receiver.pos.x + lead, receiver.pos.y)
        offset = target.x - receiver.pos.x
        if offset > THROUGH_LEAD and target.x > 0.0:
            desc = Description.THROUGH_PASS
        elif (receiver.pos.dist(Vec2(*GOAL_CENTER)) < CROSS_GOAL_RADIUS
              and abs(kicker.pos.y) > CROSS_WING_Y):
            desc = Description.CROSS_PASS
        elif LEAD_MIN < offset <= THROUGH_LEAD:
            desc = Description.LEAD_PASS
        else:
            desc = Description.DIRECT_PASS
        dist = ball.dist(target)
        return KickAction(fws.kicker_unum, Category.PASS, desc, receiver.unum, target,
                          angle_of(target.x - ball.x, target.y - ball.y),
                          min(3.0, max(1.0, 0.1 * dist + 1.0)))

    free = dribble_free_distances(fws)
    best_k = max(FORWARD_SECTORS, key=lambda k: (free[k], -k))
    if free[best_k] >= dribble_threshold_m:
        k = best_k
        th = math.radians(sector_center(k))
        target = _clip_pitch(ball.x + DRIBBLE_STEP * math.cos(th), ball.y + DRIBBLE_STEP * math.sin(th))
        return KickAction(fws.kicker_unum, Category.DRIBBLE, Description.DRIBBLE, fws.kicker_unum,
                          target, angle_of(target.x - ball.x, target.y - ball.y), DRIBBLE_SPEED)

    return KickAction(fws.kicker_unum, Category.HOLD, Description.HOLD, fws.kicker_unum,
                      None, 0.0, 0.0)


def _player(rng: np.random.Generator, side: Side, unum: int, x: float, y: float) -> PlayerState:
    speed = rng.uniform(0.0, 0.6)
    heading = rng.uniform(-math.pi, math.pi)
    body = normalize_angle(float(rng.uniform(-180.0, 180.0)))
    return PlayerState(
        side=side, unum=unum, pos=_clip_pitch(x, y),
        vel=Vec2(speed * math.cos(heading), speed * math.sin(heading)),
        body=body, face=normalize_angle(body + float(rng.uniform(-90.0, 90.0))),
        stamina=float(rng.uniform(2500.0, 8000.0)),
        type_params=PlayerTypeParams(),
        tackling=bool(rng.random() < 0.02), kicking=False, card=bool(rng.random() < 0.05),
    )


def _loose_spots(cfg: EpisodeConfig, rng: np.random.Generator, kicker: PlayerState,
                 teammates: list[PlayerState], shift: float) -> list[tuple[float, float]]:
    """Ten field-player spots: a few pressing the kicker, the rest marking or in shape."""
    n_press = int(rng.integers(0, cfg.max_press + 1))
    spots = []
    for i, unum in enumerate(range(2, 12)):
        ax, ay = _HOME_ANCHORS[unum]
        if i < n_press:
            r, a = rng.uniform(1.0, 6.0), rng.uniform(-math.pi, math.pi)
            spots.append((kicker.pos.x + r * math.cos(a), kicker.pos.y + r * math.sin(a)))
        elif rng.random() < cfg.mark_probability:
            mark = teammates[int(rng.integers(1, 11))]
            r, a = rng.uniform(0.5, 5.0), rng.uniform(-math.pi, math.pi)
            spots.append((mark.pos.x + r * math.cos(a), mark.pos.y + r * math.sin(a)))
        else:
            spots.append((-ax + shift + rng.normal(0, cfg.formation_spread),
                          -ay + rng.normal(0, cfg.formation_spread)))
    return spots


def _lane_spot(rng: np.random.Generator, ball: Vec2, bearing_deg: float, reach: float) -> tuple[float, float]:
    r = min(rng.uniform(1.0, 6.5), reach)
    th = math.radians(bearing_deg)
    return ball.x + r * math.cos(th), ball.y + r * math.sin(th)


def _covers(spot: tuple[float, float], ball: Vec2, p: PlayerState) -> bool:
    # stricter than the pass-lane and marking tests of oracle_policy, so covered
    # receivers sit well clear of the decision thresholds
    sx, sy = spot
    if math.hypot(sx - p.pos.x, sy - p.pos.y) < 2.5:
        return True
    if math.hypot(sx - ball.x, sy - ball.y) >= ball.dist(p.pos) + 3.0:
        return False
    lane = angle_of(p.pos.x - ball.x, p.pos.y - ball.y)
    return abs(normalize_angle(lane - angle_of(sx - ball.x, sy - ball.y))) < 5.0


def _covering_spots(rng: np.random.Generator, ball: Vec2,
                    receivers: list[PlayerState]) -> list[tuple[float, float]]:
    """Ten spots that cover as many receivers as possible, greedily by lane."""
    spots: list[tuple[float, float]] = []
    open_ = list(receivers)
    while open_ and len(spots) < 10:
        candidates = []
        for p in open_:
            bearing = angle_of(p.pos.x - ball.x, p.pos.y - ball.y) + rng.uniform(-3.0, 3.0)
            spot = _lane_spot(rng, ball, bearing, ball.dist(p.pos))
            candidates.append((sum(_covers(spot, ball, q) for q in open_), spot))
        gain, spot = max(candidates, key=lambda c: c[0])
        if gain == 0:
            p = open_[0]
            r, a = rng.uniform(0.5, 2.3), rng.uniform(-math.pi, math.pi)
            spot = (p.pos.x + r * math.cos(a), p.pos.y + r * math.sin(a))
        spots.append(spot)
        open_ = [p for p in open_ if not _covers(spot, ball, p)]
    while len(spots) < 10:
        spots.append(_lane_spot(rng, ball, rng.uniform(-180.0, 180.0), 6.5))
    return spots


def _walled_scene(rng: np.random.Generator, ball: Vec2, teammates: list[PlayerState],
                  kicker_unum: int) -> tuple[list[PlayerState], list[tuple[float, float]]]:
    """Receivers stand in a few lanes, each shut by one opponent close to the ball.

    One lane runs through every forward sector, so the kicker has neither a pass
    nor forward dribbling room unless the touchline clips a player out of its lane.
    """
    lanes = [sector_center(k) - 15.0 + rng.uniform(3.0, 27.0) for k in FORWARD_SECTORS]
    lanes += [normalize_angle(rng.uniform(90.0, 270.0)) for _ in range(10 - len(lanes))]
    moved = []
    for p in teammates:
        if p.unum == kicker_unum:
            moved.append(p)
            continue
        d = max(ball.dist(p.pos), 4.0)
        bearing = angle_of(p.pos.x - ball.x, p.pos.y - ball.y)
        lane = min(lanes, key=lambda a: abs(normalize_angle(a - bearing)))
        th = math.radians(lane + rng.uniform(-2.5, 2.5))
        moved.append(replace(p, pos=_clip_pitch(ball.x + d * math.cos(th), ball.y + d * math.sin(th))))
    return moved, [_lane_spot(rng, ball, lane, 6.5) for lane in lanes]


def _place(cfg: EpisodeConfig, rng: np.random.Generator, cycle: int) -> WorldState:
    side = Side.LEFT if rng.random() < 0.5 else Side.RIGHT
    kicker_unum = int(rng.integers(2, 12))
    kx, ky = rng.uniform(-30.0, 45.0), rng.uniform(-25.0, 25.0)
    shift = 0.6 * kx

    teammates = []
    for unum, (ax, ay) in _HOME_ANCHORS.items():
        if unum == kicker_unum:
            p = replace(_player(rng, side, unum, kx, ky), kicking=True)
        elif unum == 1:
            p = _player(rng, side, unum, ax + rng.normal(0, 2.0), ay + rng.normal(0, 3.0))
        else:
            p = _player(rng, side, unum, ax + shift + rng.normal(0, cfg.formation_spread),
                        ay + rng.normal(0, cfg.formation_spread))
        teammates.append(p)
    kicker = next(p for p in teammates if p.unum == kicker_unum)

    reach = 0.9 * kicker.type_params.kickable_dist * math.sqrt(rng.random())
    th = rng.uniform(-math.pi, math.pi)
    ball_pos = Vec2(kicker.pos.x + reach * math.cos(th), kicker.pos.y + reach * math.sin(th))
    bs, bth = rng.uniform(0.0, 0.5), rng.uniform(-math.pi, math.pi)
    ball = BallState(ball_pos, Vec2(bs * math.cos(bth), bs * math.sin(bth)))

    opp_side = Side(-int(side))
    regime = rng.random()
    if regime < cfg.wall_probability:
        teammates, spots = _walled_scene(rng, ball_pos, teammates, kicker_unum)
    elif regime < cfg.wall_probability + cfg.closed_probability:
        spots = _covering_spots(rng, ball_pos, [p for p in teammates if p.unum != kicker_unum])
    else:
        spots = _loose_spots(cfg, rng, kicker, teammates, shift)
    goalie = (PITCH_HALF_LENGTH - 4.0 + rng.normal(0, 1.0), rng.normal(0, 3.0))
    opponents = [_player(rng, opp_side, unum, x, y)
                 for unum, (x, y) in zip(range(1, 12), [goalie] + spots)]

    return WorldState(cycle=cycle, ball=ball, teammates=tuple(teammates),
                      opponents=tuple(opponents), kicker_unum=kicker_unum)


def _drifted(fws: WorldState, rng: np.random.Generator, lag: int) -> WorldState:
    """The same scene `lag` cycles earlier, with players displaced by a random walk."""
    s = 0.8 * math.sqrt(lag)

    def move(p: PlayerState) -> PlayerState:
        return replace(p, pos=Vec2(
            min(57.5, max(-57.5, p.pos.x + rng.normal(0, s))),
            min(39.0, max(-39.0, p.pos.y + rng.normal(0, s)))))
    return replace(fws, cycle=fws.cycle - lag,
                   teammates=tuple(p if p.unum == fws.kicker_unum else move(p)
                                   for p in fws.teammates),
                   opponents=tuple(move(p) for p in fws.opponents))


def make_event(cfg: EpisodeConfig, index: int, seed_seq: np.random.SeedSequence) -> KickEvent:
    rng = np.random.default_rng(seed_seq)
    cycle = int(rng.integers(10, 6000))
    fws = _place(cfg, rng, cycle)
    noise_seed = int(rng.integers(0, 2**63))
    lag = int(rng.integers(1, 6))
    prior = apply_observation_noise(_drifted(fws, rng, lag), replace(cfg.noise, seed=noise_seed))
    ws = apply_observation_noise(fws, replace(cfg.noise, seed=noise_seed), prev=prior)
    action = oracle_policy(fws, cfg.pass_threshold_deg, cfg.dribble_threshold_m)
    return KickEvent(f"e{index:06d}", fws, ws, action)


def generate_events(cfg: EpisodeConfig) -> list[KickEvent]:
    seqs = np.random.SeedSequence(cfg.seed & 0xFFFFFFFFFFFFFFFF).spawn(cfg.n_events)
    return [make_event(cfg, i, s) for i, s in enumerate(seqs)]


# --- event file -----------------------------------------------------------------
#
# One JSON object per line. Keys, in order:
#   event_id
#   fws.* then ws.*, each: cycle, offside_count, kicker_unum, flavor (0 full, 1 noisy),
#     ball.x, ball.y, ball.vx, ball.vy, n_tm, n_opp,
#     then tm{i}.<PLAYER_FIELDS> for each teammate and opp{i}.<PLAYER_FIELDS> for each opponent
#   action.kicker_unum, action.category, action.description, action.target_unum,
#   action.has_target, action.target_x, action.target_y,
#   action.first_kick_angle, action.first_kick_speed

PLAYER_FIELDS = ("side", "unum", "x", "y", "vx", "vy", "body", "face", "stamina",
                 "tackling", "kicking", "card", "pos_count", "vel_count", "stamina_count",
                 "dash_rate", "effort_max", "effort_min", "kickable_dist", "margin_dist",
                 "kick_power_rate", "decay", "size", "speed_max")


def _player_record(p: PlayerState) -> list:
    return [int(p.side), p.unum, p.pos.x, p.pos.y, p.vel.x, p.vel.y, p.body, p.face, p.stamina,
            int(p.tackling), int(p.kicking), int(p.card), p.pos_count, p.vel_count,
            p.stamina_count, *p.type_params.as_tuple()]


def _state_record(prefix: str, ws: WorldState, out: dict) -> None:
    out[f"{prefix}.cycle"] = ws.cycle
    out[f"{prefix}.offside_count"] = ws.offside_count
    out[f"{prefix}.kicker_unum"] = ws.kicker_unum
    out[f"{prefix}.flavor"] = 0 if ws.flavor is Flavor.FULL else 1
    out[f"{prefix}.ball.x"] = ws.ball.pos.x
    out[f"{prefix}.ball.y"] = ws.ball.pos.y
    out[f"{prefix}.ball.vx"] = ws.ball.vel.x
    out[f"{prefix}.ball.vy"] = ws.ball.vel.y
    out[f"{prefix}.n_tm"] = len(ws.teammates)
    out[f"{prefix}.n_opp"] = len(ws.opponents)
    for tag, team in (("tm", ws.teammates), ("opp", ws.opponents)):
        for i, p in enumerate(team):
            for name, v in zip(PLAYER_FIELDS, _player_record(p)):
                out[f"{prefix}.{tag}{i}.{name}"] = v


def event_to_record(ev: KickEvent) -> dict:
    out: dict = {"event_id": ev.event_id}
    _state_record("fws", ev.fws, out)
    _state_record("ws", ev.ws, out)
    a = ev.action
    tgt = a.target_position
    out.update({
        "action.kicker_unum": a.kicker_unum,
        "action.category": int(a.category),
        "action.description": int(a.description),
        "action.target_unum": a.target_unum,
        "action.has_target": 0 if tgt is None else 1,
        "action.target_x": 0.0 if tgt is None else tgt.x,
        "action.target_y": 0.0 if tgt is None else tgt.y,
        "action.first_kick_angle": a.first_kick_angle,
        "action.first_kick_speed": a.first_kick_speed,
    })
    return out


def _read_player(rec: dict, key: str) -> PlayerState:
    f = {name: rec[f"{key}.{name}"] for name in PLAYER_FIELDS}
    return PlayerState(
        side=Side(int(f["side"])), unum=int(f["unum"]),
        pos=Vec2(float(f["x"]), float(f["y"])), vel=Vec2(float(f["vx"]), float(f["vy"])),
        body=float(f["body"]), face=float(f["face"]), stamina=float(f["stamina"]),
        type_params=PlayerTypeParams(*(float(f[n]) for n in PLAYER_FIELDS[15:])),
        tackling=bool(f["tackling"]), kicking=bool(f["kicking"]), card=bool(f["card"]),
        pos_count=int(f["pos_count"]), vel_count=int(f["vel_count"]),
        stamina_count=int(f["stamina_count"]),
    )


def _read_state(rec: dict, prefix: str) -> WorldState:
    return WorldState(
        cycle=int(rec[f"{prefix}.cycle"]),
        ball=BallState(Vec2(float(rec[f"{prefix}.ball.x"]), float(rec[f"{prefix}.ball.y"])),
                       Vec2(float(rec[f"{prefix}.ball.vx"]), float(rec[f"{prefix}.ball.vy"]))),
        teammates=tuple(_read_player(rec, f"{prefix}.tm{i}") for i in range(int(rec[f"{prefix}.n_tm"]))),
        opponents=tuple(_read_player(rec, f"{prefix}.opp{i}") for i in range(int(rec[f"{prefix}.n_opp"]))),
        kicker_unum=int(rec[f"{prefix}.kicker_unum"]),
        offside_count=int(rec[f"{prefix}.offside_count"]),
        flavor=Flavor.FULL if int(rec[f"{prefix}.flavor"]) == 0 else Flavor.NOISY,
    )


def record_to_event(rec: dict) -> KickEvent:
    target = None
    if int(rec["action.has_target"]):
        target = Vec2(float(rec["action.target_x"]), float(rec["action.target_y"]))
    action = KickAction(
        kicker_unum=int(rec["action.kicker_unum"]),
        category=Category(int(rec["action.category"])),
        description=Description(int(rec["action.description"])),
        target_unum=int(rec["action.target_unum"]),
        target_position=target,
        first_kick_angle=float(rec["action.first_kick_angle"]),
        first_kick_speed=float(rec["action.first_kick_speed"]),
    )
    return KickEvent(str(rec["event_id"]), _read_state(rec, "fws"), _read_state(rec, "ws"), action)


class EventFormatError(ValueError):
    pass


def config_to_dict(cfg: EpisodeConfig) -> dict:
    return asdict(cfg)


def write_events(directory: str | Path, events: Iterable[KickEvent],
                 meta: Optional[dict] = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / EVENT_FILE
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ev in events:
            fh.write(json.dumps(event_to_record(ev), allow_nan=False))
            fh.write("\n")
    header = {"format": "kickcast-events", "version": EVENT_FORMAT_VERSION}
    header.update(meta or {})
    with open(directory / EVENT_META_FILE, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(header, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def iter_events(directory: str | Path) -> Iterator[KickEvent]:
    path = Path(directory)
    if path.is_dir():
        path = path / EVENT_FILE
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                ev = record_to_event(json.loads(line))
            except (ValueError, KeyError, TypeError) as exc:
                raise EventFormatError(f"{path}:{lineno}: bad event record ({exc!r})") from None
            yield ev


def read_events(directory: str | Path) -> list[KickEvent]:
    return list(iter_events(directory))


def read_event_meta(directory: str | Path) -> dict:
    with open(Path(directory) / EVENT_META_FILE, encoding="utf-8") as fh:
        return json.load(fh)
