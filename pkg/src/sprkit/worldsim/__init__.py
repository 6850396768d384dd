from .scene import (Scene, dijkstra_distances, generate_scene, path_cost,
                    shortest_path)
from .trajectory import (HEADING_OFFSET_MAX_DEG, LENGTH_RANGE_M, POINTS_RANGE,
                         SENSOR_HEIGHTS_M, Trajectory, TrajectorySpec,
                         sample_trajectory)
from .render import (CaptureRig, Observation, capture_panorama, crop_fov,
                     equirect_directions, pano_sigma_deg, pinhole_directions,
                     render_observation, render_pinhole, stitch_panorama)
from .dataset import (OBS_MAGIC, DatasetConfig, build_dataset, config_hash,
                      load_manifest, load_poses, load_trajectory,
                      observations_of, read_observations, write_observations,
                      SPLIT_SEEN_TEST, SPLIT_TRAIN, SPLIT_UNSEEN)

__all__ = [
    "Scene", "dijkstra_distances", "generate_scene", "path_cost",
    "shortest_path", "HEADING_OFFSET_MAX_DEG", "LENGTH_RANGE_M",
    "POINTS_RANGE", "SENSOR_HEIGHTS_M", "Trajectory", "TrajectorySpec",
    "sample_trajectory", "CaptureRig", "Observation", "capture_panorama",
    "crop_fov", "equirect_directions", "pano_sigma_deg",
    "pinhole_directions", "render_observation", "render_pinhole",
    "stitch_panorama", "OBS_MAGIC", "DatasetConfig", "build_dataset",
    "config_hash", "load_manifest", "load_poses", "load_trajectory",
    "observations_of", "read_observations", "write_observations",
    "SPLIT_SEEN_TEST", "SPLIT_TRAIN", "SPLIT_UNSEEN",
]
