"""Scenario documents: loading, validation, serialisation and running."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Callable

from .floor import MapError, OccupancyGrid, ZoneId, build_graph, parse_occupancy_grid
from .router import Mission, MissionKind
from .twin import MapUpdate, Trace, Twin, TwinConfig


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line, self.column = line, column
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(where + message)


class ValidationError(ValueError):
    def __init__(self, field: str, reason: str):
        self.field, self.reason = field, reason
        super().__init__(f"{field}: {reason}")


@dataclass(frozen=True)
class AgvSpec:
    agv_id: int
    start_zone: ZoneId
    start: str = "center"


@dataclass(frozen=True)
class Scenario:
    map_rows: tuple[str, ...]
    config: TwinConfig
    agvs: tuple[AgvSpec, ...]
    missions: tuple[Mission, ...] = ()
    map_updates: tuple[MapUpdate, ...] = ()
    max_slots: int = 1000
    seed: int = 0

    @property
    def grid(self) -> OccupancyGrid:
        return parse_occupancy_grid("\n".join(self.map_rows))


_CONFIG_FIELDS = {f.name: f for f in fields(TwinConfig)}
_INT_FIELDS = {
    "replan_interval_slots",
    "sync_interval_slots",
    "max_resolution_rounds",
    "stall_slots_for_deadlock",
    "charge_duration_slots",
    "pose_log_every_n_ticks",
}
_NULLABLE = {"charge_distance_threshold", "charge_time_threshold"}
_TOP_LEVEL = {"map", "agvs", "missions", "map_updates", "max_slots", "seed"} | set(_CONFIG_FIELDS)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return (isinstance(v, (int, float)) and not isinstance(v, bool)) and math.isfinite(v)


def _keys(obj, allowed: set, required: set, where: str) -> None:
    if not isinstance(obj, dict):
        raise ValidationError(where, "must be an object")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ValidationError(f"{where}.{unknown[0]}" if where else unknown[0], "unknown key")
    missing = sorted(required - set(obj))
    if missing:
        raise ValidationError(f"{where}.{missing[0]}" if where else missing[0], "required key missing")


def _zone(value, where: str, grid: OccupancyGrid, *, free: bool = True) -> ZoneId:
    if not (isinstance(value, list) and len(value) == 2 and all(_is_int(v) for v in value)):
        raise ValidationError(where, "must be a [column, row] pair of integers")
    z = ZoneId(*value)
    if not (1 <= z.a <= grid.n and 1 <= z.b <= grid.m):
        raise ValidationError(where, f"{z} is outside the {grid.n}x{grid.m} map")
    if free and grid.is_occupied(z):
        raise ValidationError(where, f"{z} is occupied on the map")
    return z


def _load_map(value, base_dir: Path | None) -> tuple[str, ...]:
    if isinstance(value, list):
        if not all(isinstance(r, str) for r in value):
            raise ValidationError("map", "rows must be strings")
        text = "\n".join(value)
    elif isinstance(value, str):
        if "\n" in value:
            text = value
        else:
            path = Path(value)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            try:
                text = path.read_text(encoding="utf-8")
            except OSError as exc:
                raise ValidationError("map", f"cannot read map file {path}: {exc.strerror}") from None
    else:
        raise ValidationError("map", "must be a list of rows, inline text or a file path")
    try:
        grid = parse_occupancy_grid(text)
    except MapError as exc:
        raise ValidationError("map", str(exc)) from None
    return tuple(grid.rows())


def load_scenario(document: str | dict, base_dir: str | Path | None = None) -> Scenario:
    """Validate a scenario given as JSON text or an already-decoded object."""
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    base_dir = Path(base_dir) if base_dir is not None else None
    _keys(document, _TOP_LEVEL, {"map", "agvs"}, "")

    rows = _load_map(document["map"], base_dir)
    grid = parse_occupancy_grid("\n".join(rows))

    cfg = {}
    for name in _CONFIG_FIELDS:
        if name not in document:
            continue
        v = document[name]
        if name in _NULLABLE and v is None:
            v = math.inf
        elif name in _INT_FIELDS:
            if not _is_int(v):
                raise ValidationError(name, "must be an integer")
        elif not _is_num(v):
            raise ValidationError(name, "must be a finite number")
        cfg[name] = v
    try:
        config = TwinConfig(**cfg)
    except ValueError as exc:
        msg = str(exc)
        name = next((n for n in _CONFIG_FIELDS if msg.startswith(n)), "tick_dt")
        raise ValidationError(name, msg) from None

    raw_agvs = document["agvs"]
    if not isinstance(raw_agvs, list):
        raise ValidationError("agvs", "must be a list")
    agvs = []
    for k, item in enumerate(raw_agvs):
        where = f"agvs[{k}]"
        _keys(item, {"agv_id", "start_zone", "start"}, {"agv_id", "start_zone"}, where)
        if not _is_int(item["agv_id"]) or item["agv_id"] < 0:
            raise ValidationError(f"{where}.agv_id", "must be a nonnegative integer")
        start = item.get("start", "center")
        if not isinstance(start, str) or start.lower() != "center":
            raise ValidationError(f"{where}.start", "only 'center' starts are supported")
        agvs.append(AgvSpec(item["agv_id"], _zone(item["start_zone"], f"{where}.start_zone", grid), "center"))
    ids = [a.agv_id for a in agvs]
    if len(set(ids)) != len(ids):
        raise ValidationError("agvs", "agv ids must be distinct")
    starts = [a.start_zone for a in agvs]
    if len(set(starts)) != len(starts):
        raise ValidationError("agvs", "start zones must be distinct")

    raw_missions = document.get("missions", [])
    if not isinstance(raw_missions, list):
        raise ValidationError("missions", "must be a list")
    missions = []
    for k, item in enumerate(raw_missions):
        where = f"missions[{k}]"
        _keys(
            item,
            {"mission_id", "agv_id", "origin", "destination", "release_slot", "kind"},
            {"mission_id", "agv_id", "origin", "destination"},
            where,
        )
        mid = item["mission_id"]
        if not (isinstance(mid, str) or _is_int(mid)):
            raise ValidationError(f"{where}.mission_id", "must be a string or integer")
        if item["agv_id"] not in ids:
            raise ValidationError(f"{where}.agv_id", f"unknown AGV {item['agv_id']!r}")
        release = item.get("release_slot", 0)
        if not _is_int(release) or release < 0:
            raise ValidationError(f"{where}.release_slot", "must be a nonnegative integer")
        kind = item.get("kind", "transport")
        if kind not in {k.value for k in MissionKind}:
            raise ValidationError(f"{where}.kind", "must be 'transport' or 'charging'")
        missions.append(
            Mission(
                mission_id=mid,
                agv_id=item["agv_id"],
                origin=_zone(item["origin"], f"{where}.origin", grid),
                destination=_zone(item["destination"], f"{where}.destination", grid),
                release_slot=release,
                kind=MissionKind(kind),
            )
        )
    mids = [m.mission_id for m in missions]
    if len(set(mids)) != len(mids):
        raise ValidationError("missions", "mission ids must be distinct")

    raw_updates = document.get("map_updates", [])
    if not isinstance(raw_updates, list):
        raise ValidationError("map_updates", "must be a list")
    updates = []
    for k, item in enumerate(raw_updates):
        where = f"map_updates[{k}]"
        _keys(item, {"slot", "set_occupied", "set_free"}, {"slot"}, where)
        if not _is_int(item["slot"]) or item["slot"] < 0:
            raise ValidationError(f"{where}.slot", "must be a nonnegative integer")
        occ, free = item.get("set_occupied", []), item.get("set_free", [])
        for name, zs in (("set_occupied", occ), ("set_free", free)):
            if not isinstance(zs, list):
                raise ValidationError(f"{where}.{name}", "must be a list of zones")
        occ = tuple(_zone(z, f"{where}.set_occupied[{i}]", grid, free=False) for i, z in enumerate(occ))
        free = tuple(_zone(z, f"{where}.set_free[{i}]", grid, free=False) for i, z in enumerate(free))
        if set(occ) & set(free):
            raise ValidationError(where, "set_occupied and set_free overlap")
        updates.append(MapUpdate(item["slot"], occ, free))

    max_slots = document.get("max_slots", 1000)
    if not _is_int(max_slots) or max_slots < 1:
        raise ValidationError("max_slots", "must be a positive integer")
    seed = document.get("seed", 0)
    if not _is_int(seed):
        raise ValidationError("seed", "must be an integer")
    return Scenario(rows, config, tuple(agvs), tuple(missions), tuple(updates), max_slots, seed)


def load_scenario_file(path: str | Path) -> Scenario:
    path = Path(path)
    return load_scenario(path.read_text(encoding="utf-8"), base_dir=path.parent)


def serialize(scenario: Scenario) -> dict[str, Any]:
    doc: dict[str, Any] = {"map": list(scenario.map_rows)}
    for name in _CONFIG_FIELDS:
        v = getattr(scenario.config, name)
        doc[name] = None if (name in _NULLABLE and v == math.inf) else v
    doc["agvs"] = [
        {"agv_id": a.agv_id, "start_zone": list(a.start_zone), "start": a.start} for a in scenario.agvs
    ]
    doc["missions"] = [m.to_dict() for m in scenario.missions]
    doc["map_updates"] = [u.to_dict() for u in scenario.map_updates]
    doc["max_slots"] = scenario.max_slots
    doc["seed"] = scenario.seed
    return doc


def build_twin(
    scenario: Scenario,
    trace: Trace | None = None,
    frame_hook: Callable | None = None,
) -> Twin:
    grid = scenario.grid
    return Twin(
        build_graph(grid, scenario.config.wait_weight),
        scenario.config,
        {a.agv_id: a.start_zone for a in scenario.agvs},
        scenario.missions,
        scenario.map_updates,
        grid.stations,
        trace=trace,
        frame_hook=frame_hook,
    )


def simulate(scenario: Scenario, trace: Trace | None = None, max_slots: int | None = None, frame_hook=None) -> Twin:
    twin = build_twin(scenario, trace, frame_hook)
    twin.run(scenario.max_slots if max_slots is None else max_slots)
    return twin
