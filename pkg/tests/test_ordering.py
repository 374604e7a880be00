import pytest
from hypothesis import given, settings, strategies as st

from kickcast.ordering import ALL_METHODS, Ordering, OrderingMethod as M, OrderingReference, order_players
from kickcast.state_model import Vec2

from conftest import make_player, random_player
from oracles import order_oracle

# x positions realizing the golden X order; y is irrelevant to X/UNUM
GOLDEN_X = {9: (-15.0, 3.0), 8: (-8.0, -6.0), 5: (-2.0, 1.0), 3: (5.0, 12.0), 4: (9.0, -20.0)}
# constructed so both AFC and AK give 4 5 9 8 3 (45 degree margin between keys)
GOLDEN_AFC_AK = {3: (25.0, -5.0), 4: (25.0, 20.0), 5: (-5.0, 10.0), 8: (0.0, -15.0), 9: (-15.0, 0.0)}
# constructed so AKG gives 9 4 5 3 8
GOLDEN_AKG = {3: (30.0, -25.0), 4: (45.0, 5.0), 5: (15.0, -5.0), 8: (50.0, -25.0), 9: (50.0, 15.0)}

EXPECTED = {
    M.X: [9, 8, 5, 3, 4], M.X_FK: [5, 9, 8, 3, 4],
    M.UNUM: [3, 4, 5, 8, 9], M.UNUM_FK: [5, 3, 4, 8, 9],
    M.AFC: [4, 5, 9, 8, 3], M.AFC_FK: [5, 4, 9, 8, 3],
    M.AK: [4, 5, 9, 8, 3], M.AK_FK: [5, 4, 9, 8, 3],
    M.AKG: [9, 4, 5, 3, 8], M.AKG_FK: [5, 9, 4, 3, 8],
}
CONFIG_FOR = {M.X: GOLDEN_X, M.UNUM: GOLDEN_X, M.AFC: GOLDEN_AFC_AK, M.AK: GOLDEN_AFC_AK, M.AKG: GOLDEN_AKG}


def golden_order(method):
    cfg = CONFIG_FOR[method.base]
    players = [make_player(u, *xy) for u, xy in cfg.items()]
    ref = OrderingReference(kicker_pos=Vec2(*cfg[5]), ball_pos=Vec2(*cfg[5]))
    return list(order_players(players, method, 5, ref).permutation)


@pytest.mark.parametrize("method", ALL_METHODS, ids=lambda m: m.value)
def test_golden_permutations(method):
    assert golden_order(method) == EXPECTED[method]


def test_method_names_and_parse():
    assert [m.value for m in ALL_METHODS] == ["x", "x_fk", "unum", "unum_fk", "afc", "afc_fk",
                                             "ak", "ak_fk", "akg", "akg_fk"]
    assert M.parse("AKG_fk") is M.AKG_FK
    with pytest.raises(ValueError, match="unum_fk"):
        M.parse("bogus")
    assert M.AK_FK.base is M.AK and M.AK_FK.kicker_first and not M.AK.kicker_first


def test_single_player_and_errors():
    ref = OrderingReference(Vec2(0, 0), Vec2(0, 0))
    for m in ALL_METHODS:
        assert order_players([make_player(7, 3, 3)], m, 7, ref).permutation == (7,)
    with pytest.raises(ValueError):
        order_players([], M.X, None, ref)
    with pytest.raises(ValueError):
        order_players([make_player(2, 0, 0), make_player(2, 1, 1)], M.X, None, ref)


def test_opponent_fk_falls_back_to_base(rng):
    players = [random_player(rng, 1, u) for u in range(1, 12)]
    ref = OrderingReference(Vec2(0, 0), Vec2(0, 0))
    for m in ALL_METHODS:
        assert order_players(players, m, None, ref) == order_players(players, m.base, None, ref)


def test_index_of():
    o = Ordering((5, 3, 4, 8, 9))
    assert o.index_of(9) == 4
    with pytest.raises(KeyError):
        o.index_of(1)


def test_matches_comparator_oracle(rng):
    for _ in range(1000):
        n = int(rng.integers(1, 12))
        unums = [int(u) for u in rng.choice(range(1, 12), size=n, replace=False)]
        players = [random_player(rng, 1, u) for u in unums]
        if rng.random() < 0.2:  # force ties on x
            players = [make_player(p.unum, round(p.pos.x / 10) * 10, p.pos.y) for p in players]
        kicker = unums[int(rng.integers(n))]
        kpos = next(p.pos for p in players if p.unum == kicker)
        ref = OrderingReference(kicker_pos=kpos, ball_pos=kpos)
        for m in ALL_METHODS:
            got = list(order_players(players, m, kicker, ref).permutation)
            assert got == order_oracle(players, m, kicker, (kpos.x, kpos.y)), m


coords = st.integers(-40, 40)
shifts = st.integers(-8, 8)
teams = st.lists(st.tuples(coords, st.integers(-30, 30)), min_size=1, max_size=11)


@settings(max_examples=150, deadline=None)
@given(teams, st.sampled_from(ALL_METHODS), st.data())
def test_output_is_permutation_and_fk_head(positions, method, data):
    players = [make_player(i + 1, x, y) for i, (x, y) in enumerate(positions)]
    kicker = data.draw(st.integers(1, len(players)))
    kpos = players[kicker - 1].pos
    ref = OrderingReference(kpos, kpos)
    perm = order_players(players, method, kicker, ref).permutation
    assert sorted(perm) == list(range(1, len(players) + 1))
    if method.kicker_first:
        assert perm[0] == kicker
        rest = [p for p in players if p.unum != kicker]
        if rest:
            assert list(perm[1:]) == list(order_players(rest, method.base, kicker, ref).permutation)


@settings(max_examples=100, deadline=None)
@given(teams, st.sampled_from([M.AFC, M.AK, M.AKG]), shifts, shifts)
def test_angle_methods_translation_invariant(positions, method, tx, ty):
    players = [make_player(i + 1, x, y) for i, (x, y) in enumerate(positions)]
    moved = [make_player(i + 1, x + tx, y + ty) for i, (x, y) in enumerate(positions)]
    k = players[0].pos
    ref = OrderingReference(k, k, goal_center=Vec2(52.5, 0.0), field_center=Vec2(0.0, 0.0))
    ref2 = OrderingReference(k + Vec2(tx, ty), k + Vec2(tx, ty),
                             goal_center=Vec2(52.5 + tx, ty), field_center=Vec2(tx, ty))
    assert order_players(players, method, 1, ref) == order_players(moved, method, 1, ref2)


@settings(max_examples=50, deadline=None)
@given(teams, teams)
def test_unum_ignores_positions(a, b):
    n = min(len(a), len(b))
    pa = [make_player(i + 1, x, y) for i, (x, y) in enumerate(a[:n])]
    pb = [make_player(i + 1, x, y) for i, (x, y) in enumerate(b[:n])]
    ref = OrderingReference(Vec2(0, 0), Vec2(0, 0))
    for m in (M.UNUM, M.UNUM_FK):
        assert order_players(pa, m, 1, ref) == order_players(pb, m, 1, ref)
