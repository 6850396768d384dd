"""Trajectory sampling: Dijkstra shortest paths resampled at equal
arclength, with tangent-facing headings and per-panorama heading offsets.

A trajectory picks two navigable cells whose geodesic separation matches
the requested length (within one cell), resamples the path at
``num_points`` stations, and faces each pose along the incoming path
tangent before adding an independent uniform offset in [-60, +60] degrees.
Sensor height is constant along a trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError, GenerationError
from ..pose import Pose, UnitQuaternion
from ..rng import generator
from .scene import Scene, _dijkstra, shortest_path

LENGTH_RANGE_M = (3.0, 20.0)
POINTS_RANGE = (5, 20)
SENSOR_HEIGHTS_M = (0.1, 0.5, 1.7)
HEADING_OFFSET_MAX_DEG = 60.0


@dataclass(frozen=True)
class TrajectorySpec:
    length_m: float
    num_points: int
    height_m: float
    seed: int

    def __post_init__(self):
        if not (LENGTH_RANGE_M[0] <= self.length_m <= LENGTH_RANGE_M[1]):
            raise ContractError(
                f"length {self.length_m} outside {LENGTH_RANGE_M}")
        if self.num_points < 2:
            raise ContractError("num_points must be >= 2")
        if not (POINTS_RANGE[0] <= self.num_points <= POINTS_RANGE[1]):
            raise ContractError(
                f"num_points {self.num_points} outside {POINTS_RANGE}")
        if not any(abs(self.height_m - h) < 1e-9 for h in SENSOR_HEIGHTS_M):
            raise ContractError(
                f"height {self.height_m} not one of {SENSOR_HEIGHTS_M}")


@dataclass(frozen=True)
class Trajectory:
    poses: tuple[Pose, ...]
    spec: TrajectorySpec
    scene_id: str


def _resample_polyline(points: np.ndarray, n: int) -> np.ndarray:
    """n stations at equal arclength spacing along a (M, 2) polyline."""
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    targets = np.linspace(0.0, total, n)
    x = np.interp(targets, s, points[:, 0])
    y = np.interp(targets, s, points[:, 1])
    return np.stack([x, y], axis=1)


def _headings(stations: np.ndarray) -> np.ndarray:
    """Pose i faces from station i-1 toward station i; the first faces its
    successor. Falls back to the previous heading on zero-length steps."""
    n = len(stations)
    out = np.empty(n)
    diffs = np.diff(stations, axis=0)
    first = diffs[0]
    out[0] = np.arctan2(first[1], first[0])
    for i in range(1, n):
        d = diffs[i - 1]
        out[i] = np.arctan2(d[1], d[0]) if np.linalg.norm(d) > 1e-12 else out[i - 1]
    return out


def sample_trajectory(scene: Scene, spec: TrajectorySpec) -> Trajectory:
    """Sample one trajectory; deterministic in (scene, spec)."""
    rng = generator(spec.seed, "traj")
    nav_cells = [tuple(c) for c in np.argwhere(~scene.occupancy)]
    target_cells = spec.length_m / scene.cell_size
    for _ in range(200):
        start = nav_cells[int(rng.integers(0, len(nav_cells)))]
        dist, _ = _dijkstra(scene, start)
        goals = sorted(c for c, d in dist.items()
                       if abs(d - target_cells) <= 1.0 and c != start)
        if not goals:
            continue
        goal = goals[int(rng.integers(0, len(goals)))]
        path = shortest_path(scene, start, goal)
        points = np.array([scene.cell_center(c) for c in path])
        stations = _resample_polyline(points, spec.num_points)
        yaws = _headings(stations)
        offsets = rng.uniform(-np.radians(HEADING_OFFSET_MAX_DEG),
                              np.radians(HEADING_OFFSET_MAX_DEG),
                              size=spec.num_points)
        poses = tuple(
            Pose((stations[i, 0], stations[i, 1], spec.height_m),
                 UnitQuaternion.from_yaw(yaws[i] + offsets[i]))
            for i in range(spec.num_points))
        return Trajectory(poses=poses, spec=spec, scene_id=scene.scene_id)
    raise GenerationError(
        f"no start/goal pair at separation {spec.length_m} m after 200 attempts")
