import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agvtwin.floor import ZoneId, graph_from_occupied
from agvtwin.maneuver import (
    CENTER,
    HOLD,
    STOP,
    Border,
    Maneuver,
    ManeuverKind,
    NotAdjacent,
    UTurnRequested,
    compile_route,
    entry_border_of_next,
    generate_trajectory,
    route_maneuvers,
    select_maneuver,
    wrap_angle,
    zone_origin,
)
from agvtwin.router import Route, shortest_path

Z = ZoneId
K = ManeuverKind
N, E, S, W = Border.N, Border.E, Border.S, Border.W

# neighbour of Z22 across each side
ACROSS = {N: Z(2, 1), E: Z(3, 2), S: Z(2, 3), W: Z(1, 2)}


def midpoint(side, s, origin=(0.0, 0.0)):
    ux, uy = side.unit
    return (origin[0] + s / 2 * (1 + ux), origin[1] + s / 2 * (1 + uy))


def angle_gap(a, b):
    return abs(wrap_angle(a - b))


def test_border_opposites():
    assert [b.opposite for b in (N, E, S, W)] == [S, W, N, E]


@pytest.mark.parametrize(
    "cur, nxt, border",
    [((1, 1), (2, 1), W), ((2, 2), (2, 1), S), ((2, 1), (2, 2), N), ((2, 1), (1, 1), E)],
)
def test_entry_border_of_next(cur, nxt, border):
    assert entry_border_of_next(Z(*cur), Z(*nxt)) == border


@pytest.mark.parametrize("nxt", [(2, 2), (1, 1), (3, 1)])
def test_entry_border_rejects_non_neighbours(nxt):
    with pytest.raises(NotAdjacent):
        entry_border_of_next(Z(1, 1), Z(*nxt))


def test_heading_east_cases():
    assert select_maneuver(W, Z(2, 2), Z(3, 2)).kind is K.STRAIGHT
    assert select_maneuver(W, Z(2, 2), Z(2, 1)).kind is K.TURN_LEFT
    assert select_maneuver(W, Z(2, 2), Z(2, 3)).kind is K.TURN_RIGHT
    with pytest.raises(UTurnRequested):
        select_maneuver(W, Z(2, 2), Z(1, 2))


def test_all_sixteen_border_pairs():
    counts = {K.STRAIGHT: 0, K.TURN_LEFT: 0, K.TURN_RIGHT: 0, "uturn": 0}
    for entry in Border:
        for exit in Border:
            try:
                man = select_maneuver(entry, Z(2, 2), ACROSS[exit])
            except UTurnRequested:
                assert exit == entry
                counts["uturn"] += 1
                continue
            assert (man.entry, man.exit) == (entry, exit)
            counts[man.kind] += 1
            if man.kind is K.STRAIGHT:
                assert exit == entry.opposite
    assert counts == {K.STRAIGHT: 4, K.TURN_LEFT: 4, K.TURN_RIGHT: 4, "uturn": 4}


def test_left_turns_go_counter_clockwise():
    # heading north (entered through S), a left turn leaves to the west
    assert select_maneuver(S, Z(2, 2), ACROSS[W]).kind is K.TURN_LEFT
    assert select_maneuver(N, Z(2, 2), ACROSS[E]).kind is K.TURN_LEFT
    assert select_maneuver(E, Z(2, 2), ACROSS[S]).kind is K.TURN_LEFT


def test_stop_hold_and_depart():
    assert select_maneuver(W, Z(2, 2), STOP) == Maneuver(K.ARRIVE_CENTER, W, CENTER, Z(2, 2))
    assert select_maneuver(W, Z(2, 2), HOLD).kind is K.WAIT
    assert select_maneuver(CENTER, Z(2, 2), Z(2, 1)) == Maneuver(K.DEPART_CENTER, CENTER, N, Z(2, 2))
    with pytest.raises(ValueError):
        select_maneuver(CENTER, Z(2, 2), STOP)
    with pytest.raises(NotAdjacent):
        select_maneuver(W, Z(2, 2), Z(3, 3))


def test_straight_geometry():
    t = generate_trajectory(Maneuver(K.STRAIGHT, W, E, Z(1, 1)), 1.0, (0.0, 0.0))
    (seg,) = t.segments
    assert (seg.start.x, seg.start.y, seg.start.theta) == (0.0, 0.5, 0.0)
    assert (seg.end.x, seg.end.y) == (1.0, 0.5)
    assert t.total_length == 1.0


def test_left_turn_geometry():
    t = generate_trajectory(Maneuver(K.TURN_LEFT, W, N, Z(1, 1)), 1.0, (0.0, 0.0))
    (arc,) = t.segments
    assert arc.center == (0.0, 1.0) and arc.radius == 0.5
    assert math.isclose(arc.start.x, 0.0, abs_tol=1e-15) and math.isclose(arc.start.y, 0.5)
    assert math.isclose(arc.end.x, 0.5) and math.isclose(arc.end.y, 1.0)
    assert math.isclose(arc.end.theta, math.pi / 2)
    assert math.isclose(t.total_length, math.pi / 4, rel_tol=1e-12)


def test_wait_is_zero_length_dwell():
    t = generate_trajectory(Maneuver(K.WAIT, W, W, Z(1, 1), slots=2), 1.0, (0.0, 0.0))
    (seg,) = t.segments
    assert seg.slots == 2 and t.total_length == 0.0
    assert (seg.at.x, seg.at.y) == (0.0, 0.5)


def legal_maneuvers():
    for entry in Border:
        for exit in Border:
            if exit != entry:
                yield select_maneuver(entry, Z(2, 2), ACROSS[exit])


@pytest.mark.parametrize("s", [0.5, 1.0, 2.0])
def test_endpoints_lengths_and_containment(s):
    origin = (3.0 * s, -1.0 * s)
    for man in legal_maneuvers():
        t = generate_trajectory(man, s, origin)
        sx, sy = midpoint(man.entry, s, origin)
        ex, ey = midpoint(man.exit, s, origin)
        assert math.hypot(t.start.x - sx, t.start.y - sy) <= 1e-9
        assert math.hypot(t.end.x - ex, t.end.y - ey) <= 1e-9
        assert angle_gap(t.start.theta, man.entry.inward) <= 1e-9
        assert angle_gap(t.end.theta, man.exit.outward) <= 1e-9
        want = s if man.kind is K.STRAIGHT else math.pi * s / 4
        assert abs(t.total_length - want) <= 1e-12 * want
        for p in t.sample(1000):
            assert origin[0] - 1e-12 <= p.x <= origin[0] + s + 1e-12
            assert origin[1] - 1e-12 <= p.y <= origin[1] + s + 1e-12


@pytest.mark.parametrize("s", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("side", list(Border))
def test_centre_maneuvers(s, side):
    origin = (0.0, 0.0)
    dep = generate_trajectory(Maneuver(K.DEPART_CENTER, CENTER, side, Z(1, 1)), s, origin, heading=0.3)
    assert (dep.start.x, dep.start.y) == (s / 2, s / 2) and dep.start.theta == 0.3
    assert math.hypot(dep.end.x - midpoint(side, s)[0], dep.end.y - midpoint(side, s)[1]) <= 1e-9
    assert angle_gap(dep.end.theta, side.outward) <= 1e-9
    assert abs(dep.total_length - s / 2) <= 1e-12 * s

    arr = generate_trajectory(Maneuver(K.ARRIVE_CENTER, side, CENTER, Z(1, 1)), s, origin)
    assert math.hypot(arr.end.x - s / 2, arr.end.y - s / 2) <= 1e-9
    assert angle_gap(arr.start.theta, side.inward) <= 1e-9
    assert abs(arr.total_length - s / 2) <= 1e-12 * s


def test_every_one_slot_maneuver_fits_in_a_slot():
    # progress is the distance the plant consumes at nominal speed; one slot is s
    for s in (0.5, 1.0, 2.0):
        for man in legal_maneuvers():
            assert generate_trajectory(man, s, (0, 0)).progress <= s + 1e-12
        for side in Border:
            for h in (0.0, math.pi, -math.pi / 2, side.outward + math.pi):
                dep = generate_trajectory(Maneuver(K.DEPART_CENTER, CENTER, side, Z(1, 1)), s, (0, 0), h)
                assert dep.progress <= s + 1e-12


def test_collinear_route():
    kinds = [(m.kind, m.zone) for m in route_maneuvers(Route(1, [(1, 1), (2, 1), (3, 1)]))]
    assert kinds == [(K.DEPART_CENTER, Z(1, 1)), (K.STRAIGHT, Z(2, 1)), (K.ARRIVE_CENTER, Z(3, 1))]


def test_route_turning_south():
    mans = route_maneuvers(Route(1, [(1, 1), (2, 1), (2, 2)]))
    assert [m.kind for m in mans] == [K.DEPART_CENTER, K.TURN_RIGHT, K.ARRIVE_CENTER]
    assert (mans[1].entry, mans[1].exit) == (W, S)


def test_single_zone_route_compiles_to_nothing():
    assert compile_route(Route(1, [(2, 2)]), rows=3) == []


def test_waits_become_wait_maneuvers_before_the_zone():
    mans = route_maneuvers(Route(1, [(1, 1), (2, 1), (3, 1)], waits={1: 2}))
    assert [m.kind for m in mans] == [K.DEPART_CENTER, K.WAIT, K.STRAIGHT, K.ARRIVE_CENTER]
    assert (mans[1].zone, mans[1].entry, mans[1].slots) == (Z(2, 1), W, 2)


def test_start_on_a_border():
    mans = route_maneuvers(Route(1, [(2, 1), (3, 1)]), start=W)
    assert [m.kind for m in mans] == [K.STRAIGHT, K.ARRIVE_CENTER]


def test_u_turn_needs_a_wait():
    with pytest.raises(UTurnRequested) as err:
        route_maneuvers(Route(1, [(2, 1), (1, 1)]), start=W)
    assert err.value.index == 0
    mans = route_maneuvers(Route(1, [(2, 1), (1, 1)], waits={0: 1}), start=W)
    assert [m.kind for m in mans] == [K.ARRIVE_CENTER, K.DEPART_CENTER, K.ARRIVE_CENTER]


def test_non_adjacent_route_reports_index():
    with pytest.raises(NotAdjacent, match="route index 1"):
        route_maneuvers(Route(1, [(1, 1), (2, 1), (3, 2)]))


def test_trace_form_has_fifteen_digits():
    t = generate_trajectory(Maneuver(K.TURN_LEFT, W, N, Z(1, 1)), 1.0, (0.0, 0.0))
    d = t.to_dict()
    assert d["segments"][0]["kind"] == "arc"
    assert d["total_length"] == float(f"{math.pi / 4:.15g}")
    assert d["maneuver"] == {"kind": "TurnLeft", "zone": [1, 1], "entry": "W", "exit": "N"}


@st.composite
def routes(draw):
    n, m = draw(st.integers(2, 7)), draw(st.integers(2, 7))
    o = Z(draw(st.integers(1, n)), draw(st.integers(1, m)))
    d = Z(draw(st.integers(1, n)), draw(st.integers(1, m)))
    occ = draw(st.sets(st.tuples(st.integers(1, n), st.integers(1, m)), max_size=n * m // 4)) - {o, d}
    return m, shortest_path(graph_from_occupied(n, m, occ), o, d)


@settings(max_examples=150, deadline=None)
@given(routes(), st.sampled_from([0.5, 1.0, 2.0]))
def test_compiled_routes_are_continuous(case, s):
    rows, route = case
    if route is None:
        return
    trajs = compile_route(route, zone_side=s, rows=rows)
    for a, b in zip(trajs, trajs[1:]):
        assert math.hypot(a.end.x - b.start.x, a.end.y - b.start.y) <= 1e-9
        assert angle_gap(a.end.theta, b.start.theta) <= 1e-9
        for x, y in zip(a.segments, a.segments[1:]):
            assert math.hypot(x.end.x - y.start.x, x.end.y - y.start.y) <= 1e-9
            assert angle_gap(x.end.theta, y.start.theta) <= 1e-9
    for t in trajs:
        ox, oy = zone_origin(t.maneuver.zone, s, rows)
        for p in t.sample(50):
            assert ox - 1e-9 <= p.x <= ox + s + 1e-9 and oy - 1e-9 <= p.y <= oy + s + 1e-9
    if trajs:
        cx, cy = zone_origin(route.zones[-1], s, rows)
        assert math.hypot(trajs[-1].end.x - cx - s / 2, trajs[-1].end.y - cy - s / 2) <= 1e-9
