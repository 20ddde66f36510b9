"""Physical layer: each AGV is a particle following its trajectory at nominal speed."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import NamedTuple, Union

from .floor import ZoneId
from .maneuver import CENTER, Border, ManeuverKind, Place, Pose, Trajectory, wrap_angle

__all__ = [
    "AgvState",
    "BorderCrossed",
    "OutOfFloor",
    "Pose",
    "Status",
    "TrajectoryDone",
    "step",
    "zone_of_pose",
]

# relative slack for deciding that a trajectory has been run to its end
_DONE_EPS = 1e-9


class OutOfFloor(ValueError):
    pass


class Status(str, Enum):
    IDLE = "Idle"
    MOVING = "Moving"
    WAITING = "Waiting"
    CHARGING = "Charging"
    STALLED = "Stalled"
    NO_PATH = "NoPath"


@dataclass(frozen=True)
class AgvState:
    agv_id: int
    pose: Pose
    speed: float
    zone: ZoneId
    entry: Place = CENTER
    status: Status = Status.IDLE
    odometer: float = 0.0  # metres since last charge
    duty_time: float = 0.0  # seconds since last charge; exact when fed Fractions
    arc_position: float = 0.0  # progress along the current trajectory
    charge_slots_left: int = 0


class BorderCrossed(NamedTuple):
    agv_id: int
    zone: ZoneId  # zone being entered
    border: Border  # its entry border


class TrajectoryDone(NamedTuple):
    agv_id: int


Event = Union[BorderCrossed, TrajectoryDone]


def step(state: AgvState, trajectory: Trajectory | None, dt) -> tuple[AgvState, list[Event]]:
    """Advance one AGV by ``dt`` seconds along ``trajectory``.

    Progress grows by ``speed * dt`` whatever the segment: lines and arcs
    translate, rotations and dwells only pass time.  Passing ``None`` (or a
    finished trajectory) just lets the clock run.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    charging = state.status is Status.CHARGING
    duty = state.duty_time if charging else state.duty_time + dt
    if trajectory is None or charging:
        return replace(state, duty_time=duty), []
    total = trajectory.progress
    u0 = state.arc_position
    if u0 >= total:
        return replace(state, duty_time=duty), []
    u1 = u0 + state.speed * float(dt)
    finished = u1 >= total - _DONE_EPS * max(total, 1.0)
    if finished:
        u1 = total
    _, before = trajectory.locate(u0)
    pose, after = trajectory.locate(u1)
    pose = Pose(pose.x, pose.y, wrap_angle(pose.theta))
    new = replace(
        state,
        pose=pose,
        arc_position=u1,
        odometer=state.odometer + max(after - before, 0.0),
        duty_time=duty,
    )
    if not finished:
        return new, []
    events: list[Event] = [TrajectoryDone(state.agv_id)]
    man = trajectory.maneuver
    if man is not None:
        nxt = man.next_zone
        if nxt is not None:
            border = Border(man.exit).opposite
            new = replace(new, zone=nxt, entry=border)
            events.insert(0, BorderCrossed(state.agv_id, nxt, border))
        elif man.kind is ManeuverKind.ARRIVE_CENTER:
            new = replace(new, entry=CENTER)
    return new, events


def zone_of_pose(pose: Pose, zone_side: float, n: int, m: int, declared: ZoneId | None = None) -> ZoneId:
    """Zone containing ``pose``; a point on a border goes to ``declared`` if it touches it."""
    s = zone_side
    if s <= 0:
        raise ValueError("zone side must be positive")
    x, y = pose[0], pose[1]
    if not (0.0 <= x <= n * s and 0.0 <= y <= m * s):
        raise OutOfFloor(f"({x}, {y}) lies outside the {n}x{m} floor")
    if declared is not None:
        a, b = declared
        x0, y0 = (a - 1) * s, (m - b) * s
        if x0 <= x <= x0 + s and y0 <= y <= y0 + s:
            return ZoneId(a, b)
    a = min(int(math.floor(x / s)) + 1, n)
    row_from_bottom = min(int(math.floor(y / s)), m - 1)
    return ZoneId(a, m - row_from_bottom)
