"""On-disk dataset: deterministic generation, manifest, and loaders.

Layout under a root directory:

    manifest.json                    scenes, trajectories, splits, dims, seeds
    <scene>/<traj>/poses.csv         header idx,tx,ty,tz,qu,qx,qy,qz
    <scene>/<traj>/obs.bin           magic SPROBS01, u32 num_points/Hp/Wp/F,
                                     then little-endian f32, index-major

Everything is derived from the master seed: scene layouts, trajectory
specs, heading offsets, landmark descriptors, and the split assignment.
Regenerating with the same seed reproduces every byte.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigError, DataFormatError, GenerationError
from ..pose import Pose, pose_from_csv_row, pose_to_csv_row
from ..rng import derive_seed, generator
from .render import Observation, render_observation
from .scene import Scene, generate_scene
from .trajectory import (LENGTH_RANGE_M, POINTS_RANGE, SENSOR_HEIGHTS_M,
                         Trajectory, TrajectorySpec, sample_trajectory)

OBS_MAGIC = b"SPROBS01"

SPLIT_TRAIN = "train"
SPLIT_SEEN_TEST = "seen_test"
SPLIT_UNSEEN = "unseen"


@dataclass(frozen=True)
class DatasetConfig:
    scenes: int = 15
    traj_per_scene: int = 8
    unseen_scenes: int = 3
    seen_test_fraction: float = 0.2
    grid: tuple[int, int] = (48, 48)
    cell_size: float = 0.5
    landmark_count: int = 64
    feature_dim: int = 16
    pano_h: int = 16
    pano_w: int = 32
    height_weights: tuple[float, float, float] = (1.0, 1.0, 2.0)

    def validate(self) -> None:
        if self.scenes < 1:
            raise ConfigError("scenes must be >= 1")
        if self.traj_per_scene < 1:
            raise ConfigError("traj_per_scene must be >= 1")
        if not (0 <= self.unseen_scenes < self.scenes):
            raise ConfigError("unseen_scenes must be in [0, scenes)")
        if self.pano_w != 2 * self.pano_h:
            raise ConfigError("pano_w must equal 2 * pano_h")
        if not (0.0 <= self.seen_test_fraction < 1.0):
            raise ConfigError("seen_test_fraction must be in [0, 1)")


def config_hash(obj) -> str:
    """Canonical 12-hex-digit hash of any JSON-serializable config."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def _sample_spec(rng: np.random.Generator, seed: int) -> TrajectorySpec:
    length = round(float(rng.uniform(*LENGTH_RANGE_M)), 3)
    points = int(rng.integers(POINTS_RANGE[0], POINTS_RANGE[1] + 1))
    weights = np.array([1.0, 1.0, 2.0])
    height = float(rng.choice(SENSOR_HEIGHTS_M, p=weights / weights.sum()))
    return TrajectorySpec(length_m=length, num_points=points,
                          height_m=height, seed=seed)


def build_dataset(root: str | Path, config: DatasetConfig,
                  master_seed: int) -> dict:
    """Generate scenes/trajectories/observations and write the layout.

    Returns the manifest dict (also written as manifest.json).
    """
    config.validate()
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    cfg_hash = config_hash(asdict(config) | {"master_seed": master_seed})

    split_rng = generator(master_seed, "splits")
    order = split_rng.permutation(config.scenes)
    unseen_ids = set(int(i) for i in order[:config.unseen_scenes])

    scenes_meta = []
    traj_meta = []
    for si in range(config.scenes):
        scene_id = f"scene_{si:03d}"
        scene_seed = derive_seed(master_seed, "scene", si)
        scene = generate_scene(scene_seed, size=config.grid,
                               landmark_count=config.landmark_count,
                               cell_size=config.cell_size,
                               feature_dim=config.feature_dim,
                               scene_id=scene_id)
        split = SPLIT_UNSEEN if si in unseen_ids else SPLIT_TRAIN
        scenes_meta.append({"id": scene_id, "seed": scene_seed, "split": split})

        n = config.traj_per_scene
        if split == SPLIT_TRAIN and config.seen_test_fraction > 0:
            n_test = max(1, int(round(config.seen_test_fraction * n))) if n > 1 else 0
            test_idx = set(int(i) for i in
                           generator(master_seed, "seen-test", si).permutation(n)[:n_test])
        else:
            test_idx = set()

        for ti in range(n):
            traj_id = f"traj_{ti:03d}"
            spec_rng = generator(master_seed, "spec", si, ti)
            traj = None
            for attempt in range(50):
                spec = _sample_spec(
                    spec_rng, derive_seed(master_seed, "traj", si, ti, attempt))
                try:
                    traj = sample_trajectory(scene, spec)
                    break
                except GenerationError:
                    continue
            if traj is None:
                raise GenerationError(
                    f"could not fit any trajectory in {scene_id}")
            if split == SPLIT_UNSEEN:
                t_split = SPLIT_UNSEEN
            else:
                t_split = SPLIT_SEEN_TEST if ti in test_idx else SPLIT_TRAIN
            _write_trajectory(root / scene_id / traj_id, scene, traj, config)
            traj_meta.append({
                "scene": scene_id, "id": traj_id, "split": t_split,
                "seed": traj.spec.seed, "length_m": traj.spec.length_m,
                "num_points": traj.spec.num_points,
                "height_m": traj.spec.height_m,
            })

    manifest = {
        "format": "sprkit-dataset-v1",
        "master_seed": master_seed,
        "config_hash": cfg_hash,
        "config": asdict(config),
        "dims": {"pano_h": config.pano_h, "pano_w": config.pano_w,
                 "feature_dim": config.feature_dim},
        "scenes": scenes_meta,
        "trajectories": traj_meta,
    }
    path = root / "manifest.json"
    path.write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n",
                    encoding="utf-8")
    return manifest


def _write_trajectory(folder: Path, scene: Scene, traj: Trajectory,
                      config: DatasetConfig) -> None:
    folder.mkdir(parents=True, exist_ok=True)
    lines = ["idx,tx,ty,tz,qu,qx,qy,qz"]
    for i, pose in enumerate(traj.poses):
        lines.append(f"{i}," + pose_to_csv_row(pose))
    (folder / "poses.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    obs = [render_observation(scene, p, (config.pano_h, config.pano_w))
           for p in traj.poses]
    write_observations(folder / "obs.bin", np.stack([o.pano for o in obs]))


def write_observations(path: Path, panos: np.ndarray) -> None:
    """panos is (num_points, Hp, Wp, F) float; stored as little-endian f32."""
    n, hp, wp, f = panos.shape
    with open(path, "wb") as fh:
        fh.write(OBS_MAGIC)
        fh.write(struct.pack("<4I", n, hp, wp, f))
        fh.write(panos.astype("<f4").tobytes(order="C"))


def read_observations(path: str | Path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if blob[:8] != OBS_MAGIC:
        raise DataFormatError(
            f"bad observation magic at offset 0: {blob[:8]!r}", offset=0)
    if len(blob) < 24:
        raise DataFormatError("truncated observation header at offset 8", offset=8)
    n, hp, wp, f = struct.unpack_from("<4I", blob, 8)
    expected = 24 + n * hp * wp * f * 4
    if len(blob) < expected:
        raise DataFormatError(
            f"truncated observation data at offset {len(blob)} "
            f"(expected {expected} bytes)", offset=len(blob))
    arr = np.frombuffer(blob, dtype="<f4", count=n * hp * wp * f, offset=24)
    return arr.reshape(n, hp, wp, f).astype(np.float64)


def load_manifest(root: str | Path) -> dict:
    path = Path(root) / "manifest.json"
    if not path.exists():
        raise DataFormatError(f"no manifest.json under {root}")
    return json.loads(path.read_text(encoding="utf-8"))


def load_poses(path: str | Path) -> list[Pose]:
    lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
    if not lines or lines[0] != "idx,tx,ty,tz,qu,qx,qy,qz":
        raise DataFormatError(f"bad poses header in {path}")
    poses = []
    for line in lines[1:]:
        _, _, rest = line.partition(",")
        poses.append(pose_from_csv_row(rest))
    return poses


def load_trajectory(root: str | Path, scene_id: str,
                    traj_id: str) -> tuple[list[Pose], np.ndarray]:
    folder = Path(root) / scene_id / traj_id
    poses = load_poses(folder / "poses.csv")
    obs = read_observations(folder / "obs.bin")
    if len(poses) != obs.shape[0]:
        raise DataFormatError(
            f"{folder}: {len(poses)} poses but {obs.shape[0]} observations")
    return poses, obs


def observations_of(poses: list[Pose], obs: np.ndarray) -> list[Observation]:
    return [Observation(pano=obs[i], pose=poses[i]) for i in range(len(poses))]
