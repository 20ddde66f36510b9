"""Hand-built and randomised scenario documents shared by the test modules."""
from __future__ import annotations

import random

FAST = {"tick_dt": 0.25}


def crossing(**overrides) -> dict:
    """Two AGVs on perpendicular straight lines that meet in Z33 at slot 2."""
    doc = {
        **FAST,
        "map": ["....."] * 5,
        "replan_interval_slots": 3,
        "agvs": [{"agv_id": 1, "start_zone": [1, 3]}, {"agv_id": 2, "start_zone": [3, 1]}],
        "missions": [
            {"mission_id": "east", "agv_id": 1, "origin": [1, 3], "destination": [5, 3]},
            {"mission_id": "south", "agv_id": 2, "origin": [3, 1], "destination": [3, 5]},
        ],
    }
    doc.update(overrides)
    return doc


def corridor(**overrides) -> dict:
    """Head-on swap on a 1x3 corridor; waiting cannot resolve it."""
    doc = {
        **FAST,
        "map": ["..."],
        "stall_slots_for_deadlock": 8,
        "agvs": [{"agv_id": 1, "start_zone": [1, 1]}, {"agv_id": 2, "start_zone": [3, 1]}],
        "missions": [
            {"mission_id": "a", "agv_id": 1, "origin": [1, 1], "destination": [3, 1]},
            {"mission_id": "b", "agv_id": 2, "origin": [3, 1], "destination": [1, 1]},
        ],
    }
    doc.update(overrides)
    return doc


def _connected(free: set) -> bool:
    if not free:
        return True
    todo = [next(iter(free))]
    seen = set(todo)
    while todo:
        a, b = todo.pop()
        for nb in ((a + 1, b), (a - 1, b), (a, b + 1), (a, b - 1)):
            if nb in free and nb not in seen:
                seen.add(nb)
                todo.append(nb)
    return len(seen) == len(free)


def random_scenario(seed: int) -> dict:
    """Grid up to 10x10, 2-6 AGVs, up to 20% obstacles that never cut the floor apart, one or two missions each."""
    rng = random.Random(seed)
    n, m = rng.randint(3, 10), rng.randint(3, 10)
    cells = [(a, b) for b in range(1, m + 1) for a in range(1, n + 1)]
    n_agvs = rng.randint(2, 6)
    n_obst = rng.randint(0, int(0.2 * n * m))
    rng.shuffle(cells)
    obstacles: set = set()
    for cell in cells:
        if len(obstacles) == n_obst:
            break
        if _connected(set(cells) - obstacles - {cell}):
            obstacles.add(cell)
    free = [c for c in cells if c not in obstacles]
    starts = free[:n_agvs]
    rows = ["".join("#" if (a, b) in obstacles else "." for a in range(1, n + 1)) for b in range(1, m + 1)]
    # final destinations distinct from each other and from every start zone
    pool = [z for z in free if z not in starts]
    rng.shuffle(pool)
    missions = []
    for k, start in enumerate(starts):
        agv = k + 1
        legs = rng.randint(1, 2)
        here, release = start, 0
        for leg in range(legs):
            release += rng.randint(0, 4)
            dest = pool.pop() if pool else here
            missions.append(
                {
                    "mission_id": f"m{agv}-{leg}",
                    "agv_id": agv,
                    "origin": list(here),
                    "destination": list(dest),
                    "release_slot": release,
                }
            )
            here = dest
    return {
        **FAST,
        "map": rows,
        "stall_slots_for_deadlock": 15,
        "max_slots": 300,
        "seed": seed,
        "agvs": [{"agv_id": k + 1, "start_zone": list(z)} for k, z in enumerate(starts)],
        "missions": missions,
    }
