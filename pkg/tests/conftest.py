import math

import numpy as np
import pytest

from kickcast.state_model import (BallState, Flavor, PlayerState, PlayerTypeParams, Side, Vec2,
                                  WorldState)


def make_player(unum, x, y, side=Side.LEFT, **kw):
    return PlayerState(side=side, unum=unum, pos=Vec2(float(x), float(y)), **kw)


def random_player(rng, side, unum, x=None, y=None):
    return PlayerState(
        side=side, unum=unum,
        pos=Vec2(float(rng.uniform(-52, 52)) if x is None else x,
                 float(rng.uniform(-33, 33)) if y is None else y),
        vel=Vec2(float(rng.normal(0, 0.3)), float(rng.normal(0, 0.3))),
        body=float(rng.uniform(-179, 180)), face=float(rng.uniform(-179, 180)),
        stamina=float(rng.uniform(2000, 8000)),
        type_params=PlayerTypeParams(kickable_dist=float(rng.uniform(0.9, 1.2))),
        tackling=bool(rng.random() < 0.1), card=bool(rng.random() < 0.05),
    )


def random_state(rng, n_tm=11, n_opp=11, cycle=None):
    """A random FULL state with the kicker able to reach the ball."""
    kicker_unum = int(rng.integers(1, n_tm + 1))
    tms = [random_player(rng, Side.LEFT, u) for u in range(1, n_tm + 1)]
    opps = [random_player(rng, Side.RIGHT, u) for u in range(1, n_opp + 1)]
    k = tms[kicker_unum - 1]
    r = rng.uniform(0, 0.8)
    a = rng.uniform(-math.pi, math.pi)
    ball = BallState(Vec2(k.pos.x + r * math.cos(a), k.pos.y + r * math.sin(a)),
                     Vec2(float(rng.normal(0, 0.5)), float(rng.normal(0, 0.5))))
    rng.shuffle(tms)
    rng.shuffle(opps)
    return WorldState(cycle=int(rng.integers(0, 6000)) if cycle is None else cycle, ball=ball,
                      teammates=tuple(tms), opponents=tuple(opps), kicker_unum=kicker_unum,
                      flavor=Flavor.FULL)


def simple_state(teammates, opponents=(), kicker_unum=1, ball=None):
    """State from (unum, x, y) triples; ball defaults to the kicker's spot."""
    tms = tuple(make_player(u, x, y) for u, x, y in teammates)
    opps = tuple(make_player(u, x, y, side=Side.RIGHT) for u, x, y in opponents)
    k = next((p.pos for p in tms if p.unum == kicker_unum), Vec2(0.0, 0.0))
    b = BallState(k if ball is None else Vec2(*ball), Vec2(0.0, 0.0))
    return WorldState(cycle=100, ball=b, teammates=tms, opponents=opps, kicker_unum=kicker_unum)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def small_events():
    from kickcast.synthgen import EpisodeConfig, generate_events
    return generate_events(EpisodeConfig(n_events=200, seed=42))


@pytest.fixture(scope="session")
def events_10k():
    """10,000 events at default noise; shared by the marginal and learnability checks."""
    from kickcast.synthgen import EpisodeConfig, generate_events
    return generate_events(EpisodeConfig(n_events=10_000, seed=2024))
