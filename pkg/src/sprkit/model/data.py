"""Feature-space view of an on-disk dataset.

Loads trajectories, optionally applies FoV cropping, and runs the frozen
extractor once per frame, so training and evaluation work on (n, d_model)
arrays plus pose lists.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..pose import Pose
from ..rng import derive_seed
from ..worldsim.dataset import load_manifest, load_trajectory
from ..worldsim.render import Observation, crop_fov
from .extractor import FeatureExtractor


@dataclass
class FeatTraj:
    scene_id: str
    traj_id: str
    split: str
    height_m: float
    poses: list[Pose]
    feats: np.ndarray           # (n, d_model)

    @property
    def n(self) -> int:
        return len(self.poses)


def extractor_for_dataset(manifest: dict, d_model: int) -> FeatureExtractor:
    """The extractor is pinned to the dataset's master seed and dims, so
    every consumer of a dataset sees identical features."""
    dims = manifest["dims"]
    shape = (dims["pano_h"], dims["pano_w"], dims["feature_dim"])
    seed = derive_seed(manifest["master_seed"], "extractor", d_model)
    return FeatureExtractor(shape, d_model, seed)


def load_feat_trajs(root, extractor: FeatureExtractor,
                    manifest: dict | None = None,
                    fov_deg: float | None = None) -> list[FeatTraj]:
    if manifest is None:
        manifest = load_manifest(root)
    out = []
    for tm in manifest["trajectories"]:
        poses, obs = load_trajectory(root, tm["scene"], tm["id"])
        if fov_deg is not None and fov_deg < 360.0:
            obs = np.stack([
                crop_fov(Observation(pano=obs[i], pose=poses[i]), fov_deg).pano
                for i in range(len(poses))])
        feats = extractor.extract_sequence(obs)
        out.append(FeatTraj(scene_id=tm["scene"], traj_id=tm["id"],
                            split=tm["split"], height_m=tm["height_m"],
                            poses=poses, feats=feats))
    return out


def split_trajs(trajs: list[FeatTraj], split: str) -> list[FeatTraj]:
    return [t for t in trajs if t.split == split]
