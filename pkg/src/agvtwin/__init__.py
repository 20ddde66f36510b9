"""Zone-graph AGV fleet control with a digital-twin orchestrator."""
from .floor import (
    FloorGraph,
    OccupancyGrid,
    ZoneId,
    build_graph,
    mark_free,
    mark_occupied,
    neighbors,
    parse_occupancy_grid,
)
from .maneuver import Border, Maneuver, ManeuverKind, Trajectory, compile_route, generate_trajectory, select_maneuver
from .plant import AgvState, Pose, Status, step, zone_of_pose
from .router import Mission, MissionKind, Route, build_schedule, detect_conflicts, replan, resolve_waiting, shortest_path
from .scenario import Scenario, load_scenario, serialize, simulate
from .twin import MapUpdate, MetricsReport, Trace, Twin, TwinConfig

__version__ = "0.1.0"
