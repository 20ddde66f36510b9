import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agvtwin.floor import ZoneId
from agvtwin.scenario import ParseError, ValidationError, load_scenario, load_scenario_file, serialize
from scenarios import crossing, random_scenario

MINIMAL = {
    "map": ["...", "...", "..."],
    "agvs": [{"agv_id": 1, "start_zone": [1, 1]}],
    "missions": [{"mission_id": "m1", "agv_id": 1, "origin": [1, 1], "destination": [3, 3]}],
}


def test_minimal_scenario():
    sc = load_scenario(json.dumps(MINIMAL))
    assert sc.grid.n == 3 and sc.grid.m == 3
    assert sc.agvs[0].start_zone == ZoneId(1, 1)
    assert sc.missions[0].destination == ZoneId(3, 3)
    assert sc.config.replan_interval_slots == 5 and sc.max_slots == 1000


def test_map_as_inline_text_or_file(tmp_path):
    inline = load_scenario({**MINIMAL, "map": "...\n...\n...\n"})
    (tmp_path / "floor.txt").write_text("...\n...\n...\n")
    doc = tmp_path / "s.json"
    doc.write_text(json.dumps({**MINIMAL, "map": "floor.txt"}))
    from_file = load_scenario_file(doc)
    assert inline.map_rows == from_file.map_rows == ("...", "...", "...")


def test_null_thresholds_mean_never():
    sc = load_scenario({**MINIMAL, "charge_distance_threshold": None, "charge_time_threshold": None})
    assert sc.config.charge_distance_threshold == math.inf == sc.config.charge_time_threshold


def test_parse_error_has_location():
    with pytest.raises(ParseError) as err:
        load_scenario('{"map": ["..."],\n  "agvs": [}')
    assert err.value.line == 2 and err.value.column is not None


@pytest.mark.parametrize(
    "change, field, reason",
    [
        ({"agvs": [{"agv_id": 1, "start_zone": [1, 1]}, {"agv_id": 2, "start_zone": [1, 1]}]}, "agvs", "start zones must be distinct"),
        ({"agvs": [{"agv_id": 1, "start_zone": [1, 1]}, {"agv_id": 1, "start_zone": [2, 1]}]}, "agvs", "agv ids must be distinct"),
        ({"missions": [{"mission_id": "x", "agv_id": 9, "origin": [1, 1], "destination": [2, 2]}]}, "missions[0].agv_id", "unknown AGV 9"),
        ({"colour": "red"}, "colour", "unknown key"),
        ({"map": ["..#", "...", "..."], "agvs": [{"agv_id": 1, "start_zone": [3, 1]}]}, "agvs[0].start_zone", "occupied"),
        ({"agvs": [{"agv_id": 1, "start_zone": [4, 1]}]}, "agvs[0].start_zone", "outside"),
        ({"tick_dt": 0.3}, "tick_dt", "divide"),
        ({"replan_interval_slots": 0}, "replan_interval_slots", "positive"),
        ({"replan_interval_slots": 2.5}, "replan_interval_slots", "integer"),
        ({"max_slots": 0}, "max_slots", "positive"),
        ({"map": ["..x"]}, "map", "not one of"),
        ({"map_updates": [{"slot": 1, "set_occupied": [[1, 1]], "set_free": [[1, 1]]}]}, "map_updates[0]", "overlap"),
        ({"missions": [{"mission_id": "x", "agv_id": 1, "origin": [1, 1], "destination": [2, 2], "kind": "fly"}]}, "missions[0].kind", "transport"),
    ],
)
def test_validation_errors(change, field, reason):
    with pytest.raises(ValidationError) as err:
        load_scenario({**MINIMAL, **change})
    assert err.value.field == field
    assert reason in err.value.reason


def test_missing_required_key():
    with pytest.raises(ValidationError, match="agvs: required key missing"):
        load_scenario({"map": ["..."]})


def test_missing_map_file(tmp_path):
    with pytest.raises(ValidationError, match="cannot read map file"):
        load_scenario({**MINIMAL, "map": "nowhere.txt"}, base_dir=tmp_path)


def test_round_trip_of_hand_built_scenarios():
    for doc in (MINIMAL, crossing()):
        sc = load_scenario(doc)
        assert load_scenario(json.loads(json.dumps(serialize(sc)))) == sc


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_round_trip_of_random_scenarios(seed):
    sc = load_scenario(random_scenario(seed))
    again = load_scenario(json.loads(json.dumps(serialize(sc))))
    assert again == sc
    assert serialize(again) == serialize(sc)
