"""Second control layer: per-AGV shortest paths plus waiting-based conflict resolution.

Time is discrete.  One zone transition takes one slot; an AGV occupies
``zones[i]`` for ``waits.get(i, 0) + 1`` consecutive slots and, once its route
ends, stays parked on the final zone for good.
"""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Hashable, Iterable, Mapping, NamedTuple, Sequence

from .floor import FloorGraph, OutOfBounds, ZoneId, mark_free
from .maneuver import CENTER, Border, side_towards

AgvId = int


class OccupiedEndpoint(ValueError):
    pass


class MissionKind(str, Enum):
    TRANSPORT = "transport"
    CHARGING = "charging"


@dataclass(frozen=True)
class Mission:
    mission_id: Hashable
    agv_id: AgvId
    origin: ZoneId
    destination: ZoneId
    release_slot: int = 0
    kind: MissionKind = MissionKind.TRANSPORT

    def __post_init__(self):
        object.__setattr__(self, "origin", ZoneId(*self.origin))
        object.__setattr__(self, "destination", ZoneId(*self.destination))
        object.__setattr__(self, "kind", MissionKind(self.kind))
        if self.release_slot < 0:
            raise ValueError("release_slot must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "mission_id": self.mission_id,
            "agv_id": self.agv_id,
            "origin": list(self.origin),
            "destination": list(self.destination),
            "release_slot": self.release_slot,
            "kind": self.kind.value,
        }


@dataclass(frozen=True)
class Route:
    agv_id: AgvId
    zones: tuple[ZoneId, ...]
    start_slot: int = 0
    waits: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        zones = tuple(ZoneId(*z) for z in self.zones)
        if not zones:
            raise ValueError("a route needs at least one zone")
        object.__setattr__(self, "zones", zones)
        waits = {int(k): int(v) for k, v in self.waits.items() if v}
        for k, v in waits.items():
            if not 0 <= k < len(zones) or v < 0:
                raise ValueError(f"bad wait entry {k}: {v}")
        object.__setattr__(self, "waits", dict(sorted(waits.items())))

    @property
    def transitions(self) -> int:
        return len(self.zones) - 1

    def arrivals(self) -> list[int]:
        """Slot at which each zone of the route is first occupied."""
        out = []
        t = self.start_slot
        for i in range(len(self.zones)):
            out.append(t)
            t += self.waits.get(i, 0) + 1
        return out

    @property
    def end_slot(self) -> int:
        """Slot at which the AGV reaches (and parks on) the final zone."""
        return self.arrivals()[-1]

    def zone_at(self, slot: int) -> ZoneId | None:
        if slot < self.start_slot:
            return None
        t = self.start_slot
        for i, z in enumerate(self.zones):
            t += self.waits.get(i, 0) + 1
            if slot < t:
                return z
        return self.zones[-1]

    def timeline(self, until: int) -> list[ZoneId]:
        """Zone for every slot in ``start_slot..until`` inclusive."""
        out = []
        for i, z in enumerate(self.zones):
            out.extend([z] * (self.waits.get(i, 0) + 1))
        out = out[: max(0, until - self.start_slot + 1)]
        while len(out) < until - self.start_slot + 1:
            out.append(self.zones[-1])
        return out

    def to_dict(self) -> dict:
        return {
            "agv_id": self.agv_id,
            "zones": [list(z) for z in self.zones],
            "start_slot": self.start_slot,
            "waits": {str(k): v for k, v in self.waits.items()},
        }


def hold_route(agv_id: AgvId, zone: ZoneId, start_slot: int = 0) -> Route:
    return Route(agv_id, (zone,), start_slot)


# --------------------------------------------------------------------------
# shortest paths


def shortest_path(
    graph: FloorGraph,
    origin: ZoneId,
    dest: ZoneId,
    *,
    agv_id: AgvId = 0,
    start_slot: int = 0,
    blocked: Iterable[ZoneId] = (),
) -> Route | None:
    """Minimum-transition route from ``origin`` to ``dest``, or ``None`` (no path).

    The search runs from the destination outward so every node's next hop
    toward ``dest`` does not depend on where the query started; a route
    recomputed from any of its own zones is therefore exactly its suffix.
    Neighbours are expanded N, E, S, W and equal keys leave the heap FIFO.
    ``blocked`` zones are treated as impassable on top of the graph.
    """
    origin, dest = ZoneId(*origin), ZoneId(*dest)
    graph.check(origin)
    graph.check(dest)
    for z in (origin, dest):
        if z in graph.occupied:
            raise OccupiedEndpoint(f"{z} is occupied")
    if origin == dest:
        return Route(agv_id, (origin,), start_slot)
    blocked = frozenset(ZoneId(*z) for z in blocked) - {origin}
    if dest in blocked:
        return None

    adjacency = graph.adjacency
    counter = itertools.count()
    dist = {dest: 0.0}
    next_hop: dict[ZoneId, ZoneId] = {}
    heap = [(0.0, next(counter), dest)]
    done = set()
    while heap:
        d, _, z = heapq.heappop(heap)
        if z in done:
            continue
        done.add(z)
        if z == origin:
            break
        for nb, w in adjacency[z]:
            if nb in blocked or nb in done:
                continue
            nd = d + w
            if nb not in dist or nd < dist[nb]:
                dist[nb] = nd
                next_hop[nb] = z
                heapq.heappush(heap, (nd, next(counter), nb))
    if origin not in done:
        return None
    zones = [origin]
    while zones[-1] != dest:
        zones.append(next_hop[zones[-1]])
    return Route(agv_id, tuple(zones), start_slot)


# --------------------------------------------------------------------------
# schedules and conflicts


@dataclass(frozen=True)
class ScheduleTable:
    """``entries[slot][zone]`` is the tuple of AGVs (sorted) in that zone.

    Covers ``first_slot..horizon``; after ``horizon`` every AGV is parked on
    its final zone, so the horizon row repeats forever.
    """

    entries: dict[int, dict[ZoneId, tuple[AgvId, ...]]]
    first_slot: int
    horizon: int

    def occupants(self, slot: int, zone: ZoneId) -> tuple[AgvId, ...]:
        if slot < self.first_slot:
            return ()
        row = self.entries.get(min(slot, self.horizon), {})
        return row.get(ZoneId(*zone), ())

    def positions(self, slot: int) -> dict[AgvId, ZoneId]:
        if slot < self.first_slot:
            return {}
        row = self.entries.get(min(slot, self.horizon), {})
        return {agv: z for z, agvs in row.items() for agv in agvs}

    def is_conflict_free(self) -> bool:
        return all(len(v) <= 1 for row in self.entries.values() for v in row.values())


def build_schedule(routes: Sequence[Route]) -> ScheduleTable:
    ids = [r.agv_id for r in routes]
    if len(set(ids)) != len(ids):
        raise ValueError("routes must have distinct agv ids")
    if not routes:
        return ScheduleTable({}, 0, -1)
    first = min(r.start_slot for r in routes)
    horizon = max(r.end_slot for r in routes)
    entries: dict[int, dict[ZoneId, list]] = {t: {} for t in range(first, horizon + 1)}
    for r in sorted(routes, key=lambda r: r.agv_id):
        if r.start_slot > horizon:
            continue
        for t, z in enumerate(r.timeline(horizon), start=r.start_slot):
            entries[t].setdefault(z, []).append(r.agv_id)
    frozen = {t: {z: tuple(v) for z, v in row.items()} for t, row in entries.items()}
    return ScheduleTable(frozen, first, horizon)


@dataclass(frozen=True)
class CollisionArea:
    pair: tuple[AgvId, AgvId]  # (agv_hi, agv_lo)
    zones: frozenset[ZoneId]
    hi_exit_slot: int | None  # None: agv_hi parks inside the area
    lo_entry_index: int
    first_slot: int
    kinds: frozenset[str] = frozenset()

    @property
    def agv_hi(self) -> AgvId:
        return self.pair[0]

    @property
    def agv_lo(self) -> AgvId:
        return self.pair[1]

    def to_dict(self) -> dict:
        return {
            "agv_hi": self.agv_hi,
            "agv_lo": self.agv_lo,
            "zones": [list(z) for z in sorted(self.zones)],
            "hi_exit_slot": self.hi_exit_slot,
            "lo_entry_index": self.lo_entry_index,
            "first_slot": self.first_slot,
            "kinds": sorted(self.kinds),
        }


def _first_index(route: Route) -> dict[ZoneId, int]:
    out = {}
    for i, z in enumerate(route.zones):
        out.setdefault(z, i)
    return out


def _area_for(r_hi: Route, r_lo: Route, zones: frozenset, first_slot: int, kinds) -> CollisionArea:
    arr = r_hi.arrivals()
    last = len(r_hi.zones) - 1
    exit_slot: int | None = -1
    for i, z in enumerate(r_hi.zones):
        if z in zones:
            if i == last:
                exit_slot = None
                break
            exit_slot = max(exit_slot, arr[i] + r_hi.waits.get(i, 0))
    lo_entry = min(i for i, z in enumerate(r_lo.zones) if z in zones)
    return CollisionArea((r_hi.agv_id, r_lo.agv_id), zones, exit_slot, lo_entry, first_slot, frozenset(kinds))


def _first_arrival(route: Route, zones: frozenset) -> int:
    arr = route.arrivals()
    return min(arr[i] for i, z in enumerate(route.zones) if z in zones)


def detect_conflicts(table: ScheduleTable, routes: Sequence[Route]) -> list[CollisionArea]:
    """Vertex and swap conflicts, merged per AGV pair into collision areas."""
    by_id = {r.agv_id: r for r in routes}
    found: dict[tuple[AgvId, AgvId], list[tuple[int, tuple[ZoneId, ...], str]]] = {}

    for t in range(table.first_slot, table.horizon + 1):
        for z, agvs in table.entries[t].items():
            for i, j in itertools.combinations(agvs, 2):
                found.setdefault((min(i, j), max(i, j)), []).append((t, (z,), "vertex"))

    # swaps: two AGVs trading zones between consecutive slots
    for r in routes:
        arr = r.arrivals()
        for k in range(1, len(r.zones)):
            t = arr[k] - 1
            if t < table.first_slot:
                continue
            a, b = r.zones[k - 1], r.zones[k]
            for j in table.occupants(t, b):
                if j > r.agv_id and j in table.occupants(t + 1, a):
                    found.setdefault((r.agv_id, j), []).append((t, (a, b), "swap"))

    areas = []
    for (i, j), records in found.items():
        ri, rj = by_id[i], by_id[j]
        idx_i, idx_j = _first_index(ri), _first_index(rj)
        conflict_zones = sorted({z for _, zs, _ in records for z in zs})
        parent = {z: z for z in conflict_zones}

        def find(z):
            while parent[z] != z:
                parent[z] = parent[parent[z]]
                z = parent[z]
            return z

        for z1, z2 in itertools.combinations(conflict_zones, 2):
            if abs(idx_i[z1] - idx_i[z2]) == 1 and abs(idx_j[z1] - idx_j[z2]) == 1:
                parent[find(z1)] = find(z2)
        groups: dict[ZoneId, set] = {}
        for z in conflict_zones:
            groups.setdefault(find(z), set()).add(z)
        for members in groups.values():
            zones = frozenset(members)
            recs = [(t, kind) for t, zs, kind in records if zones.intersection(zs)]
            first_slot = min(t for t, _ in recs)
            ai, aj = _first_arrival(ri, zones), _first_arrival(rj, zones)
            hi, lo = (ri, rj) if (ai, i) <= (aj, j) else (rj, ri)
            areas.append(_area_for(hi, lo, zones, first_slot, {k for _, k in recs}))
    areas.sort(key=lambda a: (a.first_slot, min(a.pair), max(a.pair), sorted(a.zones)))
    return areas


# --------------------------------------------------------------------------
# waiting strategy


class WaitAssignment(NamedTuple):
    agv_id: AgvId
    route_index: int
    zone: ZoneId
    slots: int
    area: CollisionArea


class Resolution(NamedTuple):
    routes: list[Route]
    resolved: bool
    assignments: list[WaitAssignment]
    unresolved: list[CollisionArea]


def _check_route(route: Route, graph: FloorGraph) -> None:
    for z in route.zones:
        if not graph.contains(z):
            raise OutOfBounds(f"route of AGV {route.agv_id}: {z} off the floor")
    for z1, z2 in zip(route.zones, route.zones[1:]):
        if abs(z1.a - z2.a) + abs(z1.b - z2.b) != 1:
            raise ValueError(f"route of AGV {route.agv_id}: {z1} and {z2} are not neighbours")


def resolve_waiting(routes: Sequence[Route], graph: FloorGraph, max_rounds: int) -> Resolution:
    """Make the later AGV of each conflict wait in front of the collision area.

    Each round handles only the earliest collision area: the AGV that reaches
    it first keeps its route untouched, the other gets enough wait slots in
    the zone just before the area to enter right after the first one has
    left.  If the first AGV would park inside the area for good, priority
    goes to the other AGV instead.  Stops when conflict-free or after
    ``max_rounds`` assignments, or once some AGV would have to wait longer
    than all routes take back to back.
    """
    for r in routes:
        _check_route(r, graph)
    current = {r.agv_id: r for r in routes}
    order = [r.agv_id for r in routes]
    assignments: list[WaitAssignment] = []

    def result(resolved, remaining):
        return Resolution([current[i] for i in order], resolved, assignments, remaining)

    # Waiting longer than every route laid end to end cannot help: it means
    # the assignments are chasing each other round after round.
    budget = sum(r.end_slot - r.start_slot + 1 for r in routes)

    for round_no in range(max_rounds + 1):
        rs = [current[i] for i in order]
        areas = detect_conflicts(build_schedule(rs), rs)
        if not areas:
            return result(True, [])
        if round_no == max_rounds:
            return result(False, areas)
        area = areas[0]
        if area.hi_exit_slot is None:
            flipped = _area_for(
                current[area.agv_lo], current[area.agv_hi], area.zones, area.first_slot, area.kinds
            )
            if flipped.hi_exit_slot is None:
                return result(False, areas)
            area = flipped
        lo = current[area.agv_lo]
        entry_slot = lo.arrivals()[area.lo_entry_index]
        extra = max(1, area.hi_exit_slot + 1 - entry_slot)
        idx = max(area.lo_entry_index - 1, 0)
        waits = dict(lo.waits)
        waits[idx] = waits.get(idx, 0) + extra
        if sum(waits.values()) > budget:
            return result(False, areas)
        current[lo.agv_id] = replace(lo, waits=waits)
        assignments.append(WaitAssignment(lo.agv_id, idx, lo.zones[idx], extra, area))
    raise AssertionError("unreachable")


# --------------------------------------------------------------------------
# periodic recalculation


class Replan(NamedTuple):
    routes: list[Route]
    resolved: bool
    no_path: frozenset
    assignments: list[WaitAssignment]
    unresolved: list[CollisionArea]


def replan(
    graph: FloorGraph,
    agv_positions: Mapping[AgvId, ZoneId],
    active_missions: Sequence[Mission],
    max_rounds: int,
    *,
    entries: Mapping[AgvId, Border | str] | None = None,
    start_slot: int = 0,
) -> Replan:
    """Recompute every AGV's route from where it stands now.

    AGVs without a mission (and AGVs left without a path) hold their zone and
    are routed around.  ``entries`` gives the border each AGV came in through;
    a fresh route that would leave back through that border starts with one
    wait slot so the AGV can turn on the zone centre.
    """
    entries = entries or {}
    by_agv: dict[AgvId, Mission] = {}
    for m in active_missions:
        if m.agv_id in by_agv:
            raise ValueError(f"AGV {m.agv_id} has more than one active mission")
        if m.agv_id not in agv_positions:
            raise ValueError(f"mission {m.mission_id!r} names unknown AGV {m.agv_id}")
        by_agv[m.agv_id] = m
    ids = sorted(agv_positions)
    pos = {i: ZoneId(*agv_positions[i]) for i in ids}
    holders = {i for i in ids if i not in by_agv}
    routes: dict[AgvId, Route] = {}
    while True:
        blocked = {pos[i] for i in holders}
        new_holders = set()
        for i in ids:
            if i in holders:
                continue
            m = by_agv[i]
            g = graph if pos[i] not in graph.occupied else mark_free(graph, pos[i])
            try:
                route = shortest_path(
                    g, pos[i], m.destination, agv_id=i, start_slot=start_slot, blocked=blocked
                )
            except OccupiedEndpoint:
                route = None
            if route is None:
                new_holders.add(i)
            else:
                routes[i] = route
        if not new_holders:
            break
        holders |= new_holders
    no_path = frozenset(i for i in holders if i in by_agv)

    final = []
    for i in ids:
        if i in holders:
            final.append(hold_route(i, pos[i], start_slot))
            continue
        route = routes[i]
        entry = entries.get(i, CENTER)
        if entry != CENTER and route.transitions and side_towards(route.zones[0], route.zones[1]) == entry:
            route = replace(route, waits={0: 1})
        final.append(route)
    res = resolve_waiting(final, graph, max_rounds)
    return Replan(res.routes, res.resolved, no_path, res.assignments, res.unresolved)
