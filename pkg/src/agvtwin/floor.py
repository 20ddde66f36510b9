"""Zone-grid graph model of the factory floor.

The floor is cut into an ``n x m`` grid of square zones ``Z_ab`` (``a`` is the
column, ``b`` the row, both 1-based, row 1 on top).  The graph is stored as a
dense ``(n*m) x (n*m)`` weight matrix ``H``:

* ``H[z, z'] = 1`` for 4-neighbours that are both free,
* ``H[z, z] = W`` (the wait weight) for free zones,
* every entry in the row and column of an occupied zone is 0.

Zones are flattened as ``(b - 1) * n + (a - 1)`` so the matrix rows read
Z11, Z21, ..., Zn1, Z12, ...
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple

import numpy as np

FREE = "."
OCCUPIED = "#"
STATION = "C"
_ALPHABET = {FREE, OCCUPIED, STATION}


class MapError(ValueError):
    """Base class for map parsing failures."""


class EmptyMap(MapError):
    pass


class RaggedRows(MapError):
    pass


class IllegalCharacter(MapError):
    pass


class OutOfBounds(IndexError):
    pass


class ZoneId(NamedTuple):
    a: int  # column, 1..n
    b: int  # row, 1..m (1 = top / north)

    def __str__(self) -> str:
        return f"Z{self.a},{self.b}"


@dataclass(frozen=True)
class OccupancyGrid:
    n: int
    m: int
    cells: tuple[tuple[bool, ...], ...]  # cells[b-1][a-1], True = occupied
    stations: frozenset[ZoneId] = frozenset()

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise EmptyMap("grid needs at least one row and one column")
        if len(self.cells) != self.m or any(len(row) != self.n for row in self.cells):
            raise RaggedRows(f"cells must be {self.m} rows of {self.n}")
        for z in self.stations:
            if not (1 <= z.a <= self.n and 1 <= z.b <= self.m):
                raise OutOfBounds(f"station {z} outside {self.n}x{self.m} grid")
            if self.cells[z.b - 1][z.a - 1]:
                raise MapError(f"station {z} is on an occupied cell")

    @property
    def occupied(self) -> frozenset[ZoneId]:
        return frozenset(
            ZoneId(a + 1, b + 1)
            for b, row in enumerate(self.cells)
            for a, flag in enumerate(row)
            if flag
        )

    def is_occupied(self, zone: ZoneId) -> bool:
        return self.cells[zone.b - 1][zone.a - 1]

    def rows(self) -> list[str]:
        """Render back to map-file rows."""
        out = []
        for b, row in enumerate(self.cells, start=1):
            chars = []
            for a, flag in enumerate(row, start=1):
                if flag:
                    chars.append(OCCUPIED)
                elif ZoneId(a, b) in self.stations:
                    chars.append(STATION)
                else:
                    chars.append(FREE)
            out.append("".join(chars))
        return out


def parse_occupancy_grid(text: str) -> OccupancyGrid:
    """Parse a map document made of '.', '#' and 'C' characters.

    Line ``b`` of the text is row ``b`` of the grid and character ``a`` of a
    line is column ``a``.  Trailing blank lines are ignored.
    """
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise EmptyMap("map text is empty")
    width = len(lines[0])
    if width == 0:
        raise EmptyMap("first map row is empty")
    cells = []
    stations = set()
    for b, line in enumerate(lines, start=1):
        if len(line) != width:
            raise RaggedRows(f"row {b} has length {len(line)}, expected {width}")
        row = []
        for a, ch in enumerate(line, start=1):
            if ch not in _ALPHABET:
                raise IllegalCharacter(f"row {b} column {a}: {ch!r} is not one of '.', '#', 'C'")
            row.append(ch == OCCUPIED)
            if ch == STATION:
                stations.add(ZoneId(a, b))
        cells.append(tuple(row))
    return OccupancyGrid(n=width, m=len(lines), cells=tuple(cells), stations=frozenset(stations))


@dataclass(frozen=True, eq=False)
class FloorGraph:
    """Immutable graph model; the mutators below return new instances."""

    n: int
    m: int
    wait_weight: float
    occupied: frozenset[ZoneId]
    H: np.ndarray = field(repr=False)

    def __eq__(self, other):
        if not isinstance(other, FloorGraph):
            return NotImplemented
        return (
            self.n == other.n
            and self.m == other.m
            and self.wait_weight == other.wait_weight
            and self.occupied == other.occupied
            and np.array_equal(self.H, other.H)
        )

    __hash__ = None

    @property
    def size(self) -> int:
        return self.n * self.m

    @cached_property
    def adjacency(self) -> dict[ZoneId, tuple[tuple[ZoneId, float], ...]]:
        """Connected neighbours of every zone in N, E, S, W order, with edge weights read from H."""
        H = self.H.tolist()
        out = {}
        for b in range(1, self.m + 1):
            for a in range(1, self.n + 1):
                i = (b - 1) * self.n + a - 1
                nbs = []
                for _, da, db in STEPS:
                    na, nb = a + da, b + db
                    if 1 <= na <= self.n and 1 <= nb <= self.m:
                        w = H[i][(nb - 1) * self.n + na - 1]
                        if w == 1.0:
                            nbs.append((ZoneId(na, nb), w))
                out[ZoneId(a, b)] = tuple(nbs)
        return out

    def index(self, zone: ZoneId) -> int:
        self.check(zone)
        return (zone.b - 1) * self.n + (zone.a - 1)

    def zone(self, index: int) -> ZoneId:
        if not 0 <= index < self.size:
            raise OutOfBounds(f"index {index} outside 0..{self.size - 1}")
        b, a = divmod(index, self.n)
        return ZoneId(a + 1, b + 1)

    def contains(self, zone: ZoneId) -> bool:
        return 1 <= zone[0] <= self.n and 1 <= zone[1] <= self.m

    def check(self, zone: ZoneId) -> None:
        if not self.contains(zone):
            raise OutOfBounds(f"{zone} outside {self.n}x{self.m} floor")

    def is_free(self, zone: ZoneId) -> bool:
        self.check(zone)
        return zone not in self.occupied

    def zones(self) -> Iterable[ZoneId]:
        for b in range(1, self.m + 1):
            for a in range(1, self.n + 1):
                yield ZoneId(a, b)

    def to_csv(self) -> str:
        """Dump H as comma-separated rows in flattened-index order."""
        return "\n".join(",".join(_fmt_weight(v) for v in row) for row in self.H) + "\n"


def _fmt_weight(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def _free_matrix(n: int, m: int, wait_weight: float) -> np.ndarray:
    size = n * m
    H = np.zeros((size, size), dtype=float)
    np.fill_diagonal(H, wait_weight)
    for b in range(m):
        for a in range(n):
            i = b * n + a
            if a + 1 < n:
                H[i, i + 1] = H[i + 1, i] = 1.0
            if b + 1 < m:
                H[i, i + n] = H[i + n, i] = 1.0
    return H


def _frozen(H: np.ndarray) -> np.ndarray:
    H.flags.writeable = False
    return H


def graph_from_occupied(n: int, m: int, occupied: Iterable[ZoneId], wait_weight: float = 1.0) -> FloorGraph:
    if wait_weight < 0:
        raise ValueError("wait weight must be nonnegative")
    occupied = frozenset(ZoneId(*z) for z in occupied)
    H = _free_matrix(n, m, float(wait_weight))
    for z in occupied:
        if not (1 <= z.a <= n and 1 <= z.b <= m):
            raise OutOfBounds(f"{z} outside {n}x{m} floor")
        i = (z.b - 1) * n + (z.a - 1)
        H[i, :] = 0.0
        H[:, i] = 0.0
    return FloorGraph(n, m, float(wait_weight), occupied, _frozen(H))


def build_graph(grid: OccupancyGrid, wait_weight: float = 1.0) -> FloorGraph:
    return graph_from_occupied(grid.n, grid.m, grid.occupied, wait_weight)


def mark_occupied(graph: FloorGraph, zone: ZoneId) -> FloorGraph:
    zone = ZoneId(*zone)
    i = graph.index(zone)
    if zone in graph.occupied:
        return graph
    H = graph.H.copy()
    H[i, :] = 0.0
    H[:, i] = 0.0
    return FloorGraph(graph.n, graph.m, graph.wait_weight, graph.occupied | {zone}, _frozen(H))


def mark_free(graph: FloorGraph, zone: ZoneId) -> FloorGraph:
    zone = ZoneId(*zone)
    graph.check(zone)
    if zone not in graph.occupied:
        return graph
    return graph_from_occupied(graph.n, graph.m, graph.occupied - {zone}, graph.wait_weight)


# (da, db) per compass side; b grows southward.
STEPS = (("N", 0, -1), ("E", 1, 0), ("S", 0, 1), ("W", -1, 0))


def neighbors(graph: FloorGraph, zone: ZoneId) -> list[ZoneId]:
    """Connected neighbours of ``zone`` in N, E, S, W order."""
    graph.check(zone)
    return [nb for nb, _ in graph.adjacency[ZoneId(*zone)]]
