"""Digital twin: live graph model, periodic replanning, charging service, metrics.

The twin owns one simulated world and advances it slot by slot.  Inside a slot
the work is done in a fixed order:

1. due map updates are synchronised into the graph,
2. missions are released and routes recomputed when due,
3. the charging service runs (and may trigger another recomputation),
4. changed routes are compiled into maneuvers,
5. occupancy at the slot boundary is recorded and checked for collisions,
6. the plant is stepped ``tau / tick_dt`` times and metrics updated,
7. deadlock is checked.

Every AGV sits on a border or a zone centre at slot boundaries, so a whole
maneuver always runs inside one slot.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence, TextIO

from .floor import FloorGraph, OutOfBounds, ZoneId, mark_free, mark_occupied
from .maneuver import (
    CENTER,
    Border,
    Dwell,
    Maneuver,
    ManeuverKind,
    Pose,
    Trajectory,
    generate_trajectory,
    route_maneuvers,
    zone_center,
    zone_origin,
)
from .plant import AgvState, BorderCrossed, Status, TrajectoryDone, step
from .router import Mission, MissionKind, Route, replan, shortest_path

INF = math.inf


class TwinError(RuntimeError):
    """An internal invariant of the simulation broke; the run is aborted."""


class AgvInZone(ValueError):
    def __init__(self, zones: Mapping[ZoneId, int]):
        self.zones = dict(zones)
        desc = ", ".join(f"{z} (AGV {agv})" for z, agv in sorted(self.zones.items()))
        super().__init__(f"cannot occupy zones holding AGVs: {desc}")


def _exact(value) -> Fraction:
    return Fraction(str(value)) if isinstance(value, float) else Fraction(value)


@dataclass(frozen=True)
class TwinConfig:
    replan_interval_slots: int = 5
    sync_interval_slots: int = 1
    max_resolution_rounds: int = 50
    stall_slots_for_deadlock: int = 20
    charge_distance_threshold: float = 50.0  # metres, inf disables
    charge_time_threshold: float = 600.0  # seconds, inf disables
    charge_duration_slots: int = 10
    wait_weight: float = 1.0
    zone_side: float = 1.0
    nominal_speed: float = 1.0
    tick_dt: float = 0.05
    pose_log_every_n_ticks: int = 0

    def __post_init__(self):
        for name in (
            "replan_interval_slots",
            "sync_interval_slots",
            "max_resolution_rounds",
            "stall_slots_for_deadlock",
            "charge_duration_slots",
        ):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.pose_log_every_n_ticks < 0:
            raise ValueError("pose_log_every_n_ticks must be nonnegative")
        for name in ("zone_side", "nominal_speed", "tick_dt"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.wait_weight < 0:
            raise ValueError("wait_weight must be nonnegative")
        for name in ("charge_distance_threshold", "charge_time_threshold"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be nonnegative")
        ratio = self.slot_duration / self.dt
        if ratio.denominator != 1 or ratio < 1:
            raise ValueError(
                f"tick_dt={self.tick_dt} must divide the slot duration "
                f"{float(self.slot_duration)} s a whole number of times"
            )

    @property
    def slot_duration(self) -> Fraction:
        return _exact(self.zone_side) / _exact(self.nominal_speed)

    @property
    def dt(self) -> Fraction:
        return _exact(self.tick_dt)

    @property
    def ticks_per_slot(self) -> int:
        return int(self.slot_duration / self.dt)


@dataclass(frozen=True)
class MapUpdate:
    slot: int
    set_occupied: tuple[ZoneId, ...] = ()
    set_free: tuple[ZoneId, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "set_occupied", tuple(ZoneId(*z) for z in self.set_occupied))
        object.__setattr__(self, "set_free", tuple(ZoneId(*z) for z in self.set_free))
        if self.slot < 0:
            raise ValueError("map update slot must be nonnegative")
        if set(self.set_occupied) & set(self.set_free):
            raise ValueError("a zone cannot be set occupied and free in one update")

    def to_dict(self) -> dict:
        return {
            "slot": self.slot,
            "set_occupied": [list(z) for z in self.set_occupied],
            "set_free": [list(z) for z in self.set_free],
        }


def sync_map(graph: FloorGraph, update: MapUpdate, agv_zones: Mapping[int, ZoneId] = {}) -> FloorGraph:
    """Apply a map snapshot diff; refuses to put an obstacle on top of an AGV."""
    for z in update.set_occupied + update.set_free:
        graph.check(z)
    holders = {ZoneId(*z): agv for agv, z in agv_zones.items()}
    clash = {z: holders[z] for z in update.set_occupied if z in holders}
    if clash:
        raise AgvInZone(clash)
    for z in update.set_occupied:
        graph = mark_occupied(graph, z)
    for z in update.set_free:
        graph = mark_free(graph, z)
    return graph


# --------------------------------------------------------------------------
# charging service


class ChargingCheck(NamedTuple):
    missions: list[Mission]
    unreachable: list[int]  # AGVs over threshold with no reachable station


def needs_charge(state: AgvState, config: TwinConfig) -> bool:
    return state.odometer >= config.charge_distance_threshold or state.duty_time >= config.charge_time_threshold


def charging_check(
    states: Sequence[AgvState],
    config: TwinConfig,
    stations: Iterable[ZoneId],
    graph: FloorGraph,
    *,
    assigned: Iterable[int] = (),
    blocked: Iterable[ZoneId] = (),
    slot: int = 0,
) -> ChargingCheck:
    """Charging missions for every AGV over its distance or duty-time budget.

    The station is the nearest one by current path length (ties go to the
    lower flattened zone index).  ``assigned`` lists AGVs that already have
    a charging mission; ``blocked`` zones are impassable (parked AGVs).
    """
    stations = sorted({ZoneId(*z) for z in stations}, key=graph.index)
    assigned = set(assigned)
    blocked = {ZoneId(*z) for z in blocked}
    missions, unreachable = [], []
    for st in sorted(states, key=lambda s: s.agv_id):
        if st.status is Status.CHARGING or st.agv_id in assigned or not needs_charge(st, config):
            continue
        best = None
        for station in stations:
            if station in graph.occupied or (station in blocked and station != st.zone):
                continue
            try:
                route = shortest_path(graph, st.zone, station, blocked=blocked - {st.zone})
            except (ValueError, OutOfBounds):
                route = None
            if route is not None and (best is None or route.transitions < best[0]):
                best = (route.transitions, station)
        if best is None:
            unreachable.append(st.agv_id)
            continue
        missions.append(
            Mission(
                mission_id=f"charge-{st.agv_id}-{slot}",
                agv_id=st.agv_id,
                origin=st.zone,
                destination=best[1],
                release_slot=slot,
                kind=MissionKind.CHARGING,
            )
        )
    return ChargingCheck(missions, unreachable)


def begin_charging(state: AgvState, config: TwinConfig) -> AgvState:
    return replace(state, status=Status.CHARGING, charge_slots_left=config.charge_duration_slots)


def charging_execute(state: AgvState, config: TwinConfig) -> AgvState:
    """Account for one slot spent on the charger.

    Starts the charge if the AGV is not charging yet.  After
    ``charge_duration_slots`` calls the counters are cleared and the AGV is
    back to Idle.
    """
    if state.status is not Status.CHARGING:
        state = begin_charging(state, config)
    left = state.charge_slots_left - 1
    if left > 0:
        return replace(state, charge_slots_left=left)
    zero = state.duty_time * 0 if isinstance(state.duty_time, Fraction) else 0.0
    return replace(state, status=Status.IDLE, charge_slots_left=0, odometer=0.0, duty_time=zero)


def detect_deadlock(history: Sequence[int], pending: bool, config: TwinConfig) -> bool:
    """True when work is outstanding but nobody crossed a border for the whole stall window."""
    window = config.stall_slots_for_deadlock
    if not pending or len(history) < window:
        return False
    return all(count == 0 for count in history[-window:])


# --------------------------------------------------------------------------
# trace


def _zone(z: ZoneId) -> list[int]:
    return [z[0], z[1]]


class Trace:
    """Append-only event log, optionally streamed to a JSON Lines file."""

    def __init__(self, stream: TextIO | None = None, keep: bool = True):
        self.stream = stream
        self.keep = keep
        self.events: list[dict] = []

    def emit(self, slot: int, tick: int, type_: str, payload: dict) -> None:
        event = {"slot": slot, "tick": tick, "type": type_, "payload": payload}
        if self.keep:
            self.events.append(event)
        if self.stream is not None:
            self.stream.write(json.dumps(event, separators=(",", ":"), allow_nan=False) + "\n")

    def of_type(self, type_: str) -> list[dict]:
        return [e for e in self.events if e["type"] == type_]


# --------------------------------------------------------------------------
# world


class Step(NamedTuple):
    """One slot of an AGV's plan."""

    zone: ZoneId
    maneuver: Maneuver
    trajectory: Trajectory


@dataclass
class AgvRuntime:
    state: AgvState
    queue: deque = field(default_factory=deque)  # missions not yet active
    mission: Mission | None = None
    mission_started: int = 0
    suspended: tuple[Mission, int] | None = None
    steps: deque = field(default_factory=deque)
    current: Step | None = None
    route: Route | None = None
    awaiting_charge: bool = False
    charge_blocked: bool = False
    no_path: bool = False
    wait_slots: int = 0
    distance: float = 0.0

    @property
    def agv_id(self) -> int:
        return self.state.agv_id

    @property
    def charging_phase(self) -> bool:
        return self.awaiting_charge or self.state.status is Status.CHARGING

    @property
    def has_work(self) -> bool:
        return bool(self.mission or self.queue or self.suspended or self.charging_phase)


@dataclass
class MetricsReport:
    mission_travel_slots: dict = field(default_factory=dict)
    agv_wait_slots: dict = field(default_factory=dict)
    agv_distance: dict = field(default_factory=dict)
    makespan_slots: int = 0
    collision_count: int = 0
    deadlock: bool = False
    charging_events: int = 0
    outcome: str = "running"
    slots_run: int = 0

    def to_dict(self) -> dict:
        return {
            "mission_travel_slots": {str(k): v for k, v in self.mission_travel_slots.items()},
            "agv_wait_slots": {str(k): v for k, v in sorted(self.agv_wait_slots.items())},
            "agv_distance": {str(k): float(f"{v:.15g}") for k, v in sorted(self.agv_distance.items())},
            "makespan_slots": self.makespan_slots,
            "collision_count": self.collision_count,
            "deadlock": self.deadlock,
            "charging_events": self.charging_events,
            "outcome": self.outcome,
            "slots_run": self.slots_run,
        }


class Twin:
    """One simulated factory floor driven slot by slot."""

    def __init__(
        self,
        graph: FloorGraph,
        config: TwinConfig,
        agvs: Mapping[int, ZoneId],
        missions: Sequence[Mission] = (),
        map_updates: Sequence[MapUpdate] = (),
        stations: Iterable[ZoneId] = (),
        trace: Trace | None = None,
        frame_hook: Callable[["Twin", int, dict], None] | None = None,
    ):
        self.graph = graph
        self.config = config
        self.stations = frozenset(ZoneId(*z) for z in stations)
        self.trace = trace if trace is not None else Trace()
        self.frame_hook = frame_hook
        self.slot = 0
        self.ticks = config.ticks_per_slot
        self.dt = config.dt
        self.s = float(config.zone_side)
        self.metrics = MetricsReport()
        self.history: list[int] = []
        self.occupancy_log: list[dict[int, ZoneId]] = []
        self.pending_updates = sorted(map_updates, key=lambda u: u.slot)
        self.replan_requested = True
        self.fresh_routes: dict[int, Route] = {}
        self.deadlock = False

        self.agvs: dict[int, AgvRuntime] = {}
        seen = set()
        for agv_id in sorted(agvs):
            z = ZoneId(*agvs[agv_id])
            graph.check(z)
            if z in graph.occupied:
                raise ValueError(f"AGV {agv_id} starts on occupied zone {z}")
            if z in seen:
                raise ValueError(f"two AGVs start on {z}")
            seen.add(z)
            cx, cy = zone_center(zone_origin(z, self.s, graph.m), self.s)
            state = AgvState(
                agv_id=agv_id,
                pose=Pose(cx, cy, 0.0),
                speed=float(config.nominal_speed),
                zone=z,
                duty_time=Fraction(0),
            )
            self.agvs[agv_id] = AgvRuntime(state)
        for m in sorted(missions, key=lambda m: m.release_slot):
            if m.agv_id not in self.agvs:
                raise ValueError(f"mission {m.mission_id!r} names unknown AGV {m.agv_id}")
            self.agvs[m.agv_id].queue.append(m)
        for rt in self.agvs.values():
            self.metrics.agv_wait_slots[rt.agv_id] = 0
            self.metrics.agv_distance[rt.agv_id] = 0.0

    # -- helpers ------------------------------------------------------------

    def _emit(self, type_: str, payload: dict, tick: int | None = None) -> None:
        self.trace.emit(self.slot, self.slot * self.ticks if tick is None else tick, type_, payload)

    def positions(self) -> dict[int, ZoneId]:
        return {i: rt.state.zone for i, rt in self.agvs.items()}

    def _pending_work(self) -> bool:
        return any(rt.mission is not None and not rt.charging_phase for rt in self.agvs.values())

    def finished(self) -> bool:
        return not any(rt.has_work for rt in self.agvs.values())

    # -- 1. map synchronisation --------------------------------------------

    def _sync_maps(self) -> None:
        t = self.slot
        keep = []
        for upd in self.pending_updates:
            if upd.slot > t:
                keep.append(upd)
                continue
            try:
                self.graph = sync_map(self.graph, upd, self.positions())
            except AgvInZone as exc:
                self._emit(
                    "map_update_deferred",
                    {
                        "update_slot": upd.slot,
                        "set_occupied": [_zone(z) for z in upd.set_occupied],
                        "set_free": [_zone(z) for z in upd.set_free],
                        "blocking_agvs": sorted(exc.zones.values()),
                    },
                )
                keep.append(upd)
                continue
            self._emit(
                "map_update_applied",
                {
                    "update_slot": upd.slot,
                    "set_occupied": [_zone(z) for z in upd.set_occupied],
                    "set_free": [_zone(z) for z in upd.set_free],
                },
            )
            self.replan_requested = True
        self.pending_updates = keep

    # -- 2. missions and routing -------------------------------------------

    def _activate_missions(self) -> None:
        t = self.slot
        for rt in self.agvs.values():
            if rt.mission is None and not rt.charging_phase and rt.queue and rt.queue[0].release_slot <= t:
                rt.mission = rt.queue.popleft()
                rt.mission_started = t
                self.replan_requested = True

    def _replan(self) -> None:
        t = self.slot
        active = [
            rt.mission for rt in self.agvs.values() if rt.mission is not None and not rt.charging_phase
        ]
        result = replan(
            self.graph,
            self.positions(),
            active,
            self.config.max_resolution_rounds,
            entries={i: rt.state.entry for i, rt in self.agvs.items()},
            start_slot=t,
        )
        changed = set()
        for route in result.routes:
            rt = self.agvs[route.agv_id]
            plan = _expand(route_maneuvers(route, rt.state.entry))
            if plan != [s.maneuver for s in rt.steps]:
                changed.add(route.agv_id)
                self.fresh_routes[route.agv_id] = route
            else:
                self.fresh_routes.pop(route.agv_id, None)
                rt.route = route
        for i, rt in self.agvs.items():
            if i in result.no_path and not rt.no_path:
                self._emit(
                    "nopath",
                    {
                        "agv_id": i,
                        "mission_id": rt.mission.mission_id,
                        "zone": _zone(rt.state.zone),
                        "destination": _zone(rt.mission.destination),
                        "reason": "destination_unreachable",
                    },
                )
            rt.no_path = i in result.no_path
        for a in result.assignments:
            if a.agv_id not in changed:
                continue
            self._emit("conflict_detected", {"resolved": True, **a.area.to_dict()})
            self._emit(
                "wait_assigned",
                {
                    "agv_id": a.agv_id,
                    "zone": _zone(a.zone),
                    "route_index": a.route_index,
                    "slots": a.slots,
                    "agv_hi": a.area.agv_hi,
                    "area": [_zone(z) for z in sorted(a.area.zones)],
                },
            )
        if changed:
            for area in result.unresolved:
                self._emit("conflict_detected", {"resolved": False, **area.to_dict()})
        self.replan_requested = False

    # -- 3. charging --------------------------------------------------------

    def _charging(self) -> None:
        t = self.slot
        for rt in self.agvs.values():
            if rt.awaiting_charge:
                rt.awaiting_charge = False
                rt.state = begin_charging(rt.state, self.config)
                self._emit("charging_started", {"agv_id": rt.agv_id, "station": _zone(rt.state.zone)})
        candidates = []
        for rt in self.agvs.values():
            if rt.charging_phase or (rt.mission is not None and rt.mission.kind is MissionKind.CHARGING):
                continue
            if rt.charge_blocked and t % self.config.replan_interval_slots:
                continue
            candidates.append(rt.state)
        if not candidates or not self.stations:
            return
        parked = [rt.state.zone for rt in self.agvs.values() if rt.mission is None or rt.charging_phase]
        check = charging_check(candidates, self.config, self.stations, self.graph, blocked=parked, slot=t)
        for agv_id in check.unreachable:
            rt = self.agvs[agv_id]
            if not rt.charge_blocked:
                self._emit(
                    "nopath",
                    {"agv_id": agv_id, "zone": _zone(rt.state.zone), "reason": "no_station_reachable"},
                )
            rt.charge_blocked = True
        for m in check.missions:
            rt = self.agvs[m.agv_id]
            rt.charge_blocked = False
            if rt.mission is not None:
                rt.suspended = (rt.mission, rt.mission_started)
            rt.mission = m
            rt.mission_started = t
            self._emit(
                "charging_mission",
                {
                    "agv_id": m.agv_id,
                    "mission_id": m.mission_id,
                    "station": _zone(m.destination),
                    "odometer": float(f"{rt.state.odometer:.15g}"),
                    "duty_time": float(rt.state.duty_time),
                    "suspended_mission": rt.suspended[0].mission_id if rt.suspended else None,
                },
            )
        if check.missions:
            self._replan()

    # -- 4. compile ---------------------------------------------------------

    def _compile(self) -> None:
        for agv_id in sorted(self.fresh_routes):
            route = self.fresh_routes[agv_id]
            rt = self.agvs[agv_id]
            mans = route_maneuvers(route, rt.state.entry)
            heading = rt.state.pose.theta
            steps = deque()
            for man in mans:
                traj = generate_trajectory(man, self.s, zone_origin(man.zone, self.s, self.graph.m), heading)
                heading = traj.end.theta
                if man.kind is ManeuverKind.WAIT:
                    one = replace(man, slots=1)
                    for _ in range(man.slots):
                        steps.append(Step(man.zone, one, Trajectory((Dwell(traj.start, 1, self.s),), 0.0, one)))
                else:
                    steps.append(Step(man.zone, man, traj))
            # the discrete plan and the maneuvers must agree slot for slot
            expected = route.timeline(route.end_slot)
            got = [s.zone for s in steps] or [route.zones[0]]
            if route.transitions and got != expected:
                raise TwinError(f"AGV {agv_id}: maneuvers {got} disagree with schedule {expected}")
            rt.steps = steps
            rt.route = route
            payload = {
                "agv_id": agv_id,
                "mission_id": rt.mission.mission_id if rt.mission else None,
                "route": route.to_dict(),
                "maneuvers": [s.trajectory.to_dict() for s in steps],
            }
            self._emit("route_computed", payload)
        self.fresh_routes.clear()

    # -- 5. plant -----------------------------------------------------------

    def _interlock(self) -> None:
        """Hold any AGV whose next border crossing would clash on the floor."""
        movers: dict[int, ZoneId] = {}
        for i, rt in self.agvs.items():
            if rt.steps:
                nxt = rt.steps[0].maneuver.next_zone
                if nxt is not None:
                    movers[i] = nxt
        held = set()
        while True:
            staying = {rt.state.zone for i, rt in self.agvs.items() if i not in movers}
            claimed: dict[ZoneId, int] = {}
            blocked = set()
            for i in sorted(movers):
                target = movers[i]
                here = self.agvs[i].state.zone
                swap = any(
                    movers[j] == here and self.agvs[j].state.zone == target for j in movers if j != i
                )
                if target in self.graph.occupied or target in staying or target in claimed or swap:
                    blocked.add(i)
                else:
                    claimed[target] = i
            if not blocked:
                break
            for i in blocked:
                del movers[i]
            held |= blocked
        for i in sorted(held):
            rt = self.agvs[i]
            place = rt.state.entry
            man = Maneuver(ManeuverKind.WAIT, place, place, rt.state.zone, 1)
            traj = Trajectory((Dwell(rt.state.pose, 1, self.s),), 0.0, man)
            rt.steps.appendleft(Step(rt.state.zone, man, traj))
            self._emit("interlock_hold", {"agv_id": i, "zone": _zone(rt.state.zone)})
        if held:
            self.replan_requested = True

    def _advance(self) -> int:
        crossings = 0
        base = self.slot * self.ticks
        for rt in self.agvs.values():
            if rt.steps:
                rt.current = rt.steps.popleft()
                rt.state = replace(rt.state, arc_position=0.0)
                kind = rt.current.maneuver.kind
                if kind is ManeuverKind.WAIT:
                    rt.wait_slots += 1
                if rt.state.status is not Status.CHARGING:
                    status = Status.WAITING if kind is ManeuverKind.WAIT else Status.MOVING
                    rt.state = replace(rt.state, status=status)
            else:
                rt.current = None
                if rt.state.status in (Status.MOVING, Status.WAITING):
                    rt.state = replace(rt.state, status=Status.IDLE)
            if rt.no_path and rt.state.status is not Status.CHARGING and rt.current is None:
                rt.state = replace(rt.state, status=Status.NO_PATH)
        log_every = self.config.pose_log_every_n_ticks
        for k in range(self.ticks):
            tick = base + k
            for i, rt in self.agvs.items():
                traj = rt.current.trajectory if rt.current else None
                before = rt.state.odometer
                rt.state, events = step(rt.state, traj, self.dt)
                rt.distance += rt.state.odometer - before
                for ev in events:
                    if isinstance(ev, BorderCrossed):
                        crossings += 1
                        self._emit(
                            "border_crossed",
                            {"agv_id": i, "zone": _zone(ev.zone), "border": ev.border.value},
                            tick,
                        )
                    elif isinstance(ev, TrajectoryDone):
                        rt.current = None
                if log_every and tick % log_every == 0:
                    p = rt.state.pose
                    self._emit(
                        "pose",
                        {"agv_id": i, "x": float(f"{p.x:.15g}"), "y": float(f"{p.y:.15g}"), "theta": float(f"{p.theta:.15g}")},
                        tick,
                    )
        for i, rt in self.agvs.items():
            if rt.current is not None:
                raise TwinError(f"AGV {i}: maneuver {rt.current.maneuver.kind.value} overran its slot")
        return crossings

    # -- 6. bookkeeping -----------------------------------------------------

    def _arrivals(self, tick: int) -> None:
        t = self.slot
        for i, rt in self.agvs.items():
            m = rt.mission
            if m is None or rt.steps or rt.state.entry != CENTER or rt.state.zone != m.destination:
                continue
            if rt.charging_phase:
                continue
            travel = t - rt.mission_started + 1
            if m.kind is MissionKind.CHARGING:
                rt.awaiting_charge = True
            else:
                self.metrics.mission_travel_slots[m.mission_id] = travel
                self.metrics.makespan_slots = max(self.metrics.makespan_slots, t + 1)
            self._emit(
                "mission_done",
                {"agv_id": i, "mission_id": m.mission_id, "kind": m.kind.value, "travel_slots": travel},
                tick,
            )
            rt.mission = None
            rt.no_path = False
            rt.route = None
            rt.state = replace(rt.state, status=Status.IDLE)

    def _charge_tick(self) -> None:
        for i, rt in self.agvs.items():
            if rt.state.status is not Status.CHARGING:
                continue
            rt.state = charging_execute(rt.state, self.config)
            if rt.state.status is Status.CHARGING:
                continue
            self.metrics.charging_events += 1
            resumed = None
            if rt.suspended is not None:
                rt.mission, rt.mission_started = rt.suspended
                rt.suspended = None
                resumed = rt.mission.mission_id
                self.replan_requested = True
            self._emit(
                "charging_done",
                {"agv_id": i, "station": _zone(rt.state.zone), "resumed_mission": resumed},
                (self.slot + 1) * self.ticks - 1,
            )

    def _record(self, occupancy: dict[int, ZoneId]) -> None:
        self._emit("occupancy", {"agvs": {str(i): _zone(z) for i, z in sorted(occupancy.items())}})
        for i, z in occupancy.items():
            if z in self.graph.occupied:
                raise TwinError(f"AGV {i} is inside occupied zone {z}")
        by_zone: dict[ZoneId, list[int]] = {}
        for i, z in sorted(occupancy.items()):
            by_zone.setdefault(z, []).append(i)
        for z, ids in sorted(by_zone.items()):
            if len(ids) > 1:
                self.metrics.collision_count += len(ids) * (len(ids) - 1) // 2
                self._emit("collision_violation", {"kind": "vertex", "zone": _zone(z), "agvs": ids})
        if self.occupancy_log:
            prev = self.occupancy_log[-1]
            ids = sorted(i for i in occupancy if i in prev and prev[i] != occupancy[i])
            for x, i in enumerate(ids):
                for j in ids[x + 1 :]:
                    if prev[i] == occupancy[j] and prev[j] == occupancy[i]:
                        self.metrics.collision_count += 1
                        self._emit(
                            "collision_violation",
                            {"kind": "swap", "zone": _zone(occupancy[i]), "agvs": [i, j]},
                        )
        self.occupancy_log.append(dict(occupancy))
        if self.frame_hook is not None:
            self.frame_hook(self, self.slot, occupancy)

    # -- the slot cycle -----------------------------------------------------

    def run_slot_cycle(self) -> None:
        t = self.slot
        cfg = self.config
        if t % cfg.sync_interval_slots == 0:
            self._sync_maps()
        self._activate_missions()
        if self.replan_requested or t % cfg.replan_interval_slots == 0:
            self._replan()
        self._charging()
        self._compile()
        self._arrivals(t * self.ticks)

        self._record(self.positions())
        self._interlock()
        crossings = self._advance()
        end_tick = (t + 1) * self.ticks - 1
        self._arrivals(end_tick)
        self._charge_tick()
        for rt in self.agvs.values():
            self.metrics.agv_wait_slots[rt.agv_id] = rt.wait_slots
            self.metrics.agv_distance[rt.agv_id] = rt.distance

        self.history.append(crossings)
        if detect_deadlock(self.history, self._pending_work(), cfg):
            self.deadlock = True
            self.metrics.deadlock = True
            stalled = sorted(i for i, rt in self.agvs.items() if rt.mission is not None and not rt.charging_phase)
            for i in stalled:
                self.agvs[i].state = replace(self.agvs[i].state, status=Status.STALLED)
            self._emit("deadlock", {"stalled_agvs": stalled, "window": cfg.stall_slots_for_deadlock}, end_tick)
        self.slot += 1
        self.metrics.slots_run = self.slot

    def run(self, max_slots: int) -> MetricsReport:
        while True:
            if self.finished():
                self.metrics.outcome = "completed"
                break
            if self.slot >= max_slots:
                self.metrics.outcome = "max_slots"
                break
            self.run_slot_cycle()
            if self.deadlock:
                self.metrics.outcome = "deadlock"
                break
        return self.metrics


def _expand(mans: list[Maneuver]) -> list[Maneuver]:
    out = []
    for man in mans:
        if man.kind is ManeuverKind.WAIT:
            out.extend([replace(man, slots=1)] * man.slots)
        else:
            out.append(man)
    return out
