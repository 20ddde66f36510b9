"""First control layer: border-to-border maneuvers and their geometry.

A zone's four borders act as states.  Moving from the current zone to the next
one picks an exit border; together with the entry border that fixes the
maneuver (straight, left or right quarter turn).  Starting and finishing a
route go through the zone centre.

World frame: x grows with the column ``a``, y grows northward, so row ``b``
(counted from the top of the map) spans ``y in [(m - b) s, (m - b + 1) s]``.
Headings are radians in (-pi, pi], 0 pointing east.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, NamedTuple, Union

from .floor import ZoneId

if TYPE_CHECKING:
    from .router import Route

TWO_PI = 2.0 * math.pi


class NotAdjacent(ValueError):
    pass


class UTurnRequested(ValueError):
    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


def wrap_angle(theta: float) -> float:
    """Normalise to (-pi, pi]."""
    t = math.remainder(theta, TWO_PI)
    return t + TWO_PI if t <= -math.pi else t


class Border(str, Enum):
    N = "N"
    E = "E"
    S = "S"
    W = "W"

    @property
    def opposite(self) -> "Border":
        return _OPPOSITE[self]

    @property
    def outward(self) -> float:
        """Heading of the outward normal."""
        return _OUTWARD[self]

    @property
    def inward(self) -> float:
        return _OUTWARD[self.opposite]

    @property
    def unit(self) -> tuple[int, int]:
        return _UNIT[self]


_OPPOSITE = {Border.N: Border.S, Border.S: Border.N, Border.E: Border.W, Border.W: Border.E}
_OUTWARD = {Border.E: 0.0, Border.N: math.pi / 2, Border.W: math.pi, Border.S: -math.pi / 2}
_UNIT = {Border.E: (1, 0), Border.N: (0, 1), Border.W: (-1, 0), Border.S: (0, -1)}
# counter-clockwise successor of a travel direction
_CCW = {Border.E: Border.N, Border.N: Border.W, Border.W: Border.S, Border.S: Border.E}
_CW = {v: k for k, v in _CCW.items()}

CENTER = "C"
Place = Union[Border, str]  # a Border or CENTER


class Directive(str, Enum):
    STOP = "stop"
    HOLD = "hold"


STOP = Directive.STOP
HOLD = Directive.HOLD


def side_towards(current: ZoneId, nxt: ZoneId) -> Border:
    """Border of ``current`` shared with its 4-neighbour ``nxt``."""
    da, db = nxt[0] - current[0], nxt[1] - current[1]
    side = {(1, 0): Border.E, (-1, 0): Border.W, (0, -1): Border.N, (0, 1): Border.S}.get((da, db))
    if side is None:
        raise NotAdjacent(f"{ZoneId(*current)} and {ZoneId(*nxt)} are not 4-neighbours")
    return side


def entry_border_of_next(current: ZoneId, nxt: ZoneId) -> Border:
    return side_towards(current, nxt).opposite


def neighbour_across(zone: ZoneId, side: Border) -> ZoneId:
    da, dy = side.unit
    return ZoneId(zone[0] + da, zone[1] - dy)


class ManeuverKind(str, Enum):
    STRAIGHT = "Straight"
    TURN_LEFT = "TurnLeft"
    TURN_RIGHT = "TurnRight"
    WAIT = "Wait"
    DEPART_CENTER = "DepartCenter"
    ARRIVE_CENTER = "ArriveCenter"


@dataclass(frozen=True)
class Maneuver:
    kind: ManeuverKind
    entry: Place
    exit: Place
    zone: ZoneId
    slots: int = 1  # only Wait spans more than one slot

    @property
    def next_zone(self) -> ZoneId | None:
        """Zone entered when the maneuver ends on a border."""
        if isinstance(self.exit, Border) and self.kind is not ManeuverKind.WAIT:
            return neighbour_across(self.zone, self.exit)
        return None

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind.value,
            "zone": list(self.zone),
            "entry": _place_str(self.entry),
            "exit": _place_str(self.exit),
        }
        if self.kind is ManeuverKind.WAIT:
            out["slots"] = self.slots
        return out


def _place_str(p: Place) -> str:
    return p.value if isinstance(p, Border) else str(p)


def classify(entry: Border, exit: Border) -> ManeuverKind:
    """Straight / left / right for a border pair, judged in the travel frame."""
    heading = entry.opposite  # direction of travel after entering
    if exit == entry:
        raise UTurnRequested(f"exit through the entry border {entry.value} is a U-turn")
    if exit == heading:
        return ManeuverKind.STRAIGHT
    if exit == _CCW[heading]:
        return ManeuverKind.TURN_LEFT
    return ManeuverKind.TURN_RIGHT


def select_maneuver(entry: Place, current: ZoneId, nxt) -> Maneuver:
    """Pick the maneuver inside ``current`` given how the AGV entered it.

    ``nxt`` is the neighbouring zone to head for, ``STOP`` to end at the
    centre, or ``HOLD`` to stay put for a slot.
    """
    current = ZoneId(*current)
    if nxt == STOP:
        if entry == CENTER:
            raise ValueError("already at the zone centre")
        return Maneuver(ManeuverKind.ARRIVE_CENTER, Border(entry), CENTER, current)
    if nxt == HOLD:
        place = entry if entry == CENTER else Border(entry)
        return Maneuver(ManeuverKind.WAIT, place, place, current)
    exit = side_towards(current, nxt)
    if entry == CENTER:
        return Maneuver(ManeuverKind.DEPART_CENTER, CENTER, exit, current)
    entry = Border(entry)
    return Maneuver(classify(entry, exit), entry, exit, current)


# --------------------------------------------------------------------------
# geometry


class Pose(NamedTuple):
    x: float
    y: float
    theta: float


def zone_origin(zone: ZoneId, s: float, rows: int) -> tuple[float, float]:
    """Lower-left (south-west) corner of a zone in world coordinates."""
    return ((zone[0] - 1) * s, (rows - zone[1]) * s)


def border_midpoint(origin: tuple[float, float], s: float, side: Border) -> tuple[float, float]:
    ux, uy = side.unit
    return (origin[0] + s / 2 + ux * s / 2, origin[1] + s / 2 + uy * s / 2)


def zone_center(origin: tuple[float, float], s: float) -> tuple[float, float]:
    return (origin[0] + s / 2, origin[1] + s / 2)


# Each segment exposes: ``length`` (translation, metres), ``progress`` (the
# path-equivalent length the plant consumes at nominal speed), ``start``,
# ``end`` and ``pose_at(u)`` / ``travelled(u)`` for ``0 <= u <= progress``.


@dataclass(frozen=True)
class LineSegment:
    start: Pose
    end: Pose
    length: float

    @property
    def progress(self) -> float:
        return self.length

    def pose_at(self, u: float) -> Pose:
        if self.length == 0:
            return self.end
        f = min(max(u / self.length, 0.0), 1.0)
        if f == 1.0:
            return self.end
        return Pose(
            self.start.x + (self.end.x - self.start.x) * f,
            self.start.y + (self.end.y - self.start.y) * f,
            self.start.theta,
        )

    def travelled(self, u: float) -> float:
        return min(max(u, 0.0), self.length)

    def to_dict(self) -> dict:
        return {"kind": "line", "start": _pose_list(self.start), "end": _pose_list(self.end), "length": _g(self.length)}


@dataclass(frozen=True)
class Arc:
    center: tuple[float, float]
    radius: float
    start_angle: float
    sweep: float  # +pi/2 counter-clockwise, -pi/2 clockwise

    @property
    def length(self) -> float:
        return self.radius * abs(self.sweep)

    @property
    def progress(self) -> float:
        return self.length

    def _at_angle(self, phi: float) -> Pose:
        turn = math.copysign(math.pi / 2, self.sweep)
        return Pose(
            self.center[0] + self.radius * math.cos(phi),
            self.center[1] + self.radius * math.sin(phi),
            wrap_angle(phi + turn),
        )

    @property
    def start(self) -> Pose:
        return self._at_angle(self.start_angle)

    @property
    def end(self) -> Pose:
        return self._at_angle(self.start_angle + self.sweep)

    def pose_at(self, u: float) -> Pose:
        f = min(max(u / self.length, 0.0), 1.0)
        if f == 1.0:
            return self.end
        return self._at_angle(self.start_angle + self.sweep * f)

    def travelled(self, u: float) -> float:
        return min(max(u, 0.0), self.length)

    def to_dict(self) -> dict:
        return {
            "kind": "arc",
            "center": [_g(self.center[0]), _g(self.center[1])],
            "radius": _g(self.radius),
            "start_angle": _g(self.start_angle),
            "sweep": _g(self.sweep),
            "start": _pose_list(self.start),
            "end": _pose_list(self.end),
            "length": _g(self.length),
        }


@dataclass(frozen=True)
class RotateInPlace:
    at: tuple[float, float]
    from_heading: float
    to_heading: float
    zone_side: float

    length = 0.0

    @property
    def sweep(self) -> float:
        d = wrap_angle(self.to_heading - self.from_heading)
        return d

    @property
    def progress(self) -> float:
        # angular rate 2*pi*v/s: a half turn costs half a slot
        return abs(self.sweep) * self.zone_side / TWO_PI

    @property
    def start(self) -> Pose:
        return Pose(self.at[0], self.at[1], wrap_angle(self.from_heading))

    @property
    def end(self) -> Pose:
        return Pose(self.at[0], self.at[1], wrap_angle(self.to_heading))

    def pose_at(self, u: float) -> Pose:
        p = self.progress
        if p == 0 or u >= p:
            return self.end
        f = max(u / p, 0.0)
        return Pose(self.at[0], self.at[1], wrap_angle(self.from_heading + self.sweep * f))

    def travelled(self, u: float) -> float:
        return 0.0

    def to_dict(self) -> dict:
        return {
            "kind": "rotate",
            "at": [_g(self.at[0]), _g(self.at[1])],
            "from_heading": _g(wrap_angle(self.from_heading)),
            "to_heading": _g(wrap_angle(self.to_heading)),
            "length": 0.0,
        }


@dataclass(frozen=True)
class Dwell:
    at: Pose
    slots: int
    zone_side: float

    length = 0.0

    @property
    def progress(self) -> float:
        return self.slots * self.zone_side

    @property
    def start(self) -> Pose:
        return self.at

    @property
    def end(self) -> Pose:
        return self.at

    def pose_at(self, u: float) -> Pose:
        return self.at

    def travelled(self, u: float) -> float:
        return 0.0

    def to_dict(self) -> dict:
        return {"kind": "dwell", "at": _pose_list(self.at), "slots": self.slots, "length": 0.0}


Segment = Union[LineSegment, Arc, RotateInPlace, Dwell]


def _g(v: float) -> float:
    return float(f"{v:.15g}")


def _pose_list(p: Pose) -> list[float]:
    return [_g(p.x), _g(p.y), _g(p.theta)]


@dataclass(frozen=True)
class Trajectory:
    segments: tuple[Segment, ...]
    total_length: float
    maneuver: Maneuver | None = None

    @property
    def progress(self) -> float:
        return sum(seg.progress for seg in self.segments)

    @property
    def slots(self) -> int:
        return self.maneuver.slots if self.maneuver and self.maneuver.kind is ManeuverKind.WAIT else 1

    @property
    def start(self) -> Pose:
        return self.segments[0].start

    @property
    def end(self) -> Pose:
        return self.segments[-1].end

    def locate(self, u: float) -> tuple[Pose, float]:
        """Pose and translated distance after ``u`` metres of progress."""
        done = 0.0
        for seg in self.segments:
            p = seg.progress
            if u <= p or seg is self.segments[-1]:
                return seg.pose_at(u), done + seg.travelled(u)
            u -= p
            done += seg.length
        raise AssertionError("empty trajectory")

    def sample(self, count: int) -> list[Pose]:
        """``count`` poses spread uniformly over the progress range."""
        total = self.progress
        if count <= 1:
            return [self.start]
        return [self.locate(total * i / (count - 1))[0] for i in range(count)]

    def to_dict(self) -> dict:
        out = {"segments": [s.to_dict() for s in self.segments], "total_length": _g(self.total_length)}
        if self.maneuver is not None:
            out["maneuver"] = self.maneuver.to_dict()
        return out


def _line(p0: tuple[float, float], p1: tuple[float, float], heading: float) -> LineSegment:
    length = math.hypot(p1[0] - p0[0], p1[1] - p0[1])
    heading = wrap_angle(heading)
    return LineSegment(Pose(p0[0], p0[1], heading), Pose(p1[0], p1[1], heading), length)


def generate_trajectory(
    maneuver: Maneuver,
    zone_side: float,
    origin_of_zone: tuple[float, float],
    heading: float = 0.0,
) -> Trajectory:
    """Continuous path for one maneuver inside a zone of side ``zone_side``.

    ``heading`` is only consulted where the maneuver itself does not fix it:
    the starting heading of DepartCenter and the heading held by a Wait at
    the centre.
    """
    s = float(zone_side)
    if s <= 0:
        raise ValueError("zone side must be positive")
    kind = maneuver.kind
    centre = zone_center(origin_of_zone, s)

    if kind is ManeuverKind.WAIT:
        if maneuver.entry == CENTER:
            at = Pose(centre[0], centre[1], wrap_angle(heading))
        else:
            b = Border(maneuver.entry)
            mid = border_midpoint(origin_of_zone, s, b)
            at = Pose(mid[0], mid[1], wrap_angle(b.inward))
        return Trajectory((Dwell(at, maneuver.slots, s),), 0.0, maneuver)

    if kind is ManeuverKind.DEPART_CENTER:
        exit = Border(maneuver.exit)
        rot = RotateInPlace(centre, heading, exit.outward, s)
        line = _line(centre, border_midpoint(origin_of_zone, s, exit), exit.outward)
        return Trajectory((rot, line), line.length, maneuver)

    entry = Border(maneuver.entry)
    start = border_midpoint(origin_of_zone, s, entry)
    if kind is ManeuverKind.ARRIVE_CENTER:
        line = _line(start, centre, entry.inward)
        return Trajectory((line,), line.length, maneuver)

    exit = Border(maneuver.exit)
    if kind is ManeuverKind.STRAIGHT:
        line = _line(start, border_midpoint(origin_of_zone, s, exit), entry.inward)
        return Trajectory((line,), line.length, maneuver)

    # quarter turn about the corner shared by the entry and exit borders
    (ex, ey), (xx, xy) = entry.unit, exit.unit
    corner = (centre[0] + (ex + xx) * s / 2, centre[1] + (ey + xy) * s / 2)
    start_angle = math.atan2(start[1] - corner[1], start[0] - corner[0])
    sweep = math.pi / 2 if kind is ManeuverKind.TURN_LEFT else -math.pi / 2
    arc = Arc(corner, s / 2, start_angle, sweep)
    return Trajectory((arc,), arc.length, maneuver)


# --------------------------------------------------------------------------
# route compilation


def route_maneuvers(route: "Route", start: Place = CENTER) -> list[Maneuver]:
    """Maneuver sequence for a route, waits included.

    ``start`` is where the AGV stands in ``route.zones[0]``: the centre, or
    the border it just came in through.
    """
    zones = route.zones
    waits = route.waits
    last = len(zones) - 1
    out: list[Maneuver] = []

    def wait(place, zone, slots):
        if slots > 0:
            out.append(Maneuver(ManeuverKind.WAIT, place, place, zone, slots))

    if last == 0:
        if start == CENTER:
            wait(CENTER, zones[0], waits.get(0, 0))
        else:
            wait(Border(start), zones[0], waits.get(0, 0))
            out.append(select_maneuver(start, zones[0], STOP))
        return out

    entry: Place = start if start == CENTER else Border(start)
    for i, zone in enumerate(zones):
        w = waits.get(i, 0)
        if i == last:
            wait(entry, zone, w)
            out.append(select_maneuver(entry, zone, STOP))
            break
        nxt = zones[i + 1]
        try:
            exit = side_towards(zone, nxt)
        except NotAdjacent as exc:
            raise NotAdjacent(f"route index {i}: {exc}") from None
        if entry != CENTER and exit == entry:
            if i != 0 or w < 1:
                raise UTurnRequested(f"route index {i}: U-turn in {zone}", index=i)
            # turn on the spot: settle at the centre, then leave again
            out.append(select_maneuver(entry, zone, STOP))
            wait(CENTER, zone, w - 1)
            out.append(select_maneuver(CENTER, zone, nxt))
        else:
            wait(entry, zone, w)
            out.append(select_maneuver(entry, zone, nxt))
        entry = exit.opposite
    return out


def compile_route(
    route: "Route",
    start: Place = CENTER,
    zone_side: float = 1.0,
    *,
    rows: int,
    heading: float = 0.0,
) -> list[Trajectory]:
    """Trajectories for every maneuver of ``route`` on a floor with ``rows`` rows."""
    out = []
    h = heading if start == CENTER else Border(start).inward
    for man in route_maneuvers(route, start):
        traj = generate_trajectory(man, zone_side, zone_origin(man.zone, zone_side, rows), h)
        out.append(traj)
        h = traj.end.theta
    return out
