"""Seeded rooms-and-corridors occupancy scenes and grid shortest paths.

Cells are square with a configurable size in meters; ``occupancy`` is True
on obstacles. After generation only the largest connected navigable
component is kept, so any two navigable cells are connected. Landmarks
live on obstacle faces adjacent to navigable cells, each with a unit-norm
random descriptor; they are what the renderer splats into panoramas.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError, GenerationError, NoPathError
from ..rng import generator

SQRT2 = float(np.sqrt(2.0))

_AXIAL = ((-1, 0), (1, 0), (0, -1), (0, 1))
_DIAGONAL = ((-1, -1), (-1, 1), (1, -1), (1, 1))

WALL_HEIGHT_M = 2.4


@dataclass(frozen=True)
class Scene:
    seed: int
    cell_size: float
    occupancy: np.ndarray                      # (H, W) bool, True = obstacle
    landmark_pos: np.ndarray                   # (K, 3) meters
    landmark_desc: np.ndarray                  # (K, F) unit rows
    scene_id: str = field(default="scene")

    @property
    def shape(self) -> tuple[int, int]:
        return self.occupancy.shape

    def navigable(self, cell: tuple[int, int]) -> bool:
        r, c = cell
        h, w = self.occupancy.shape
        return 0 <= r < h and 0 <= c < w and not self.occupancy[r, c]

    def cell_center(self, cell: tuple[int, int]) -> np.ndarray:
        """World (x, y) of the cell center: x along columns, y along rows."""
        r, c = cell
        return np.array([(c + 0.5) * self.cell_size, (r + 0.5) * self.cell_size])


def _carve_rooms_and_corridors(rng: np.random.Generator,
                               shape: tuple[int, int]) -> np.ndarray:
    h, w = shape
    grid = np.ones((h, w), dtype=bool)
    area = h * w
    n_rooms = max(6, area // 200)
    centers = []
    for _ in range(n_rooms):
        rh = int(rng.integers(6, max(7, h // 3 + 2)))
        rw = int(rng.integers(6, max(7, w // 3 + 2)))
        r0 = int(rng.integers(1, max(2, h - rh - 1)))
        c0 = int(rng.integers(1, max(2, w - rw - 1)))
        grid[r0:r0 + rh, c0:c0 + rw] = False
        centers.append((r0 + rh // 2, c0 + rw // 2))
    # L-shaped corridors, two cells wide, chaining room centers plus a few
    # extra shortcuts for loopiness.
    pairs = list(zip(centers[:-1], centers[1:]))
    for _ in range(max(1, n_rooms // 3)):
        i, j = rng.integers(0, len(centers), size=2)
        if i != j:
            pairs.append((centers[i], centers[j]))
    for (r1, c1), (r2, c2) in pairs:
        lo, hi = sorted((c1, c2))
        grid[max(1, r1 - 1):min(h - 1, r1 + 1), lo:hi + 1] = False
        lo, hi = sorted((r1, r2))
        grid[lo:hi + 1, max(1, c2 - 1):min(w - 1, c2 + 1)] = False
    grid[0, :] = grid[-1, :] = True
    grid[:, 0] = grid[:, -1] = True
    return grid


def _largest_component(navigable: np.ndarray) -> np.ndarray:
    """Boolean mask of the largest 8-connected navigable component."""
    h, w = navigable.shape
    labels = np.full((h, w), -1, dtype=np.int32)
    best_label, best_size = -1, 0
    label = 0
    for r in range(h):
        for c in range(w):
            if not navigable[r, c] or labels[r, c] >= 0:
                continue
            stack = [(r, c)]
            labels[r, c] = label
            size = 0
            while stack:
                cr, cc = stack.pop()
                size += 1
                for dr, dc in _AXIAL + _DIAGONAL:
                    nr, nc = cr + dr, cc + dc
                    if (0 <= nr < h and 0 <= nc < w and navigable[nr, nc]
                            and labels[nr, nc] < 0):
                        labels[nr, nc] = label
                        stack.append((nr, nc))
            if size > best_size:
                best_size, best_label = size, label
            label += 1
    return labels == best_label


def generate_scene(seed: int, size: tuple[int, int] = (48, 48),
                   landmark_count: int = 64, cell_size: float = 0.5,
                   feature_dim: int = 16, scene_id: str = "scene") -> Scene:
    """Generate a connected indoor-like scene; identical seed, identical scene.

    Retries generation (up to 100 attempts) until the largest navigable
    component holds at least 60% of all carved cells and at least 4 cells.
    """
    if size[0] < 8 or size[1] < 8:
        raise ContractError("scene grid must be at least 8x8 cells")
    if landmark_count < 1:
        raise ContractError("landmark_count must be >= 1")
    for attempt in range(100):
        rng = generator(seed, "scene", attempt)
        grid = _carve_rooms_and_corridors(rng, size)
        navigable = ~grid
        total_nav = int(navigable.sum())
        if total_nav < 4:
            continue
        main = _largest_component(navigable)
        if main.sum() < max(4, 0.6 * total_nav):
            continue
        occupancy = ~main                      # drop disconnected pockets
        pos, desc = _place_landmarks(rng, occupancy, landmark_count,
                                     cell_size, feature_dim)
        return Scene(seed=seed, cell_size=cell_size, occupancy=occupancy,
                     landmark_pos=pos, landmark_desc=desc, scene_id=scene_id)
    raise GenerationError(
        f"no navigable component of >= 4 cells after 100 attempts (seed {seed})")


def _place_landmarks(rng: np.random.Generator, occupancy: np.ndarray,
                     count: int, cell_size: float, feature_dim: int):
    h, w = occupancy.shape
    navigable = ~occupancy
    wall_cells = []
    for r in range(h):
        for c in range(w):
            if not navigable[r, c]:
                continue
            for dr, dc in _AXIAL:
                nr, nc = r + dr, c + dc
                if 0 <= nr < h and 0 <= nc < w and occupancy[nr, nc]:
                    wall_cells.append((r, c, dr, dc))
    if not wall_cells:
        raise GenerationError("scene has no wall-adjacent navigable cells")
    idx = rng.integers(0, len(wall_cells), size=count)
    pos = np.empty((count, 3))
    for k, i in enumerate(idx):
        r, c, dr, dc = wall_cells[i]
        # Cell center pushed half a cell toward the obstacle: on the wall face.
        x = (c + 0.5 + 0.5 * dc) * cell_size
        y = (r + 0.5 + 0.5 * dr) * cell_size
        pos[k] = (x, y, rng.uniform(0.0, WALL_HEIGHT_M))
    desc = rng.normal(size=(count, feature_dim))
    desc /= np.linalg.norm(desc, axis=1, keepdims=True)
    return pos, desc


def _neighbors(occupancy: np.ndarray, cell: tuple[int, int]):
    """8-connected moves: axial cost 1, diagonal sqrt(2); diagonals cannot
    cut corners (both flanking axial cells must be navigable)."""
    h, w = occupancy.shape
    r, c = cell
    for dr, dc in _AXIAL:
        nr, nc = r + dr, c + dc
        if 0 <= nr < h and 0 <= nc < w and not occupancy[nr, nc]:
            yield (nr, nc), 1.0
    for dr, dc in _DIAGONAL:
        nr, nc = r + dr, c + dc
        if not (0 <= nr < h and 0 <= nc < w) or occupancy[nr, nc]:
            continue
        if occupancy[r + dr, c] or occupancy[r, c + dc]:
            continue
        yield (nr, nc), SQRT2


def _dijkstra(scene: Scene, start: tuple[int, int]):
    """Dijkstra over the 8-connected grid; ties broken by lexicographic
    cell order through the (dist, cell) heap keys."""
    if not scene.navigable(start):
        raise ContractError(f"start cell {start} is not navigable")
    dist: dict[tuple[int, int], float] = {start: 0.0}
    parent: dict[tuple[int, int], tuple[int, int]] = {}
    heap = [(0.0, start)]
    done = set()
    occ = scene.occupancy
    while heap:
        d, cell = heapq.heappop(heap)
        if cell in done:
            continue
        done.add(cell)
        for ncell, step in _neighbors(occ, cell):
            nd = d + step
            if nd < dist.get(ncell, np.inf) - 1e-12:
                dist[ncell] = nd
                parent[ncell] = cell
                heapq.heappush(heap, (nd, ncell))
    return dist, parent


def dijkstra_distances(scene: Scene, start: tuple[int, int]) -> dict:
    """Cell -> minimal path cost in cell units from start."""
    dist, _ = _dijkstra(scene, start)
    return dist


def shortest_path(scene: Scene, start: tuple[int, int],
                  goal: tuple[int, int]) -> list[tuple[int, int]]:
    """Minimal-cost 8-connected path from start to goal, inclusive."""
    if not scene.navigable(goal):
        raise ContractError(f"goal cell {goal} is not navigable")
    dist, parent = _dijkstra(scene, start)
    if goal not in dist:
        raise NoPathError(f"no path from {start} to {goal}")
    path = [goal]
    while path[-1] != start:
        path.append(parent[path[-1]])
    return path[::-1]


def path_cost(path: list[tuple[int, int]]) -> float:
    """Cost of a cell path in cell units (1 per axial, sqrt(2) per diagonal)."""
    total = 0.0
    for a, b in zip(path, path[1:]):
        total += 1.0 if abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1 else SQRT2
    return total
