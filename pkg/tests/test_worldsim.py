import json

import numpy as np
import pytest

from sprkit.errors import (ContractError, DataFormatError, GenerationError,
                           NoPathError)
from sprkit.pose import Pose, UnitQuaternion, relative
from sprkit.worldsim import (CaptureRig, DatasetConfig, Observation,
                             TrajectorySpec, build_dataset, capture_panorama,
                             crop_fov, generate_scene, load_manifest,
                             load_trajectory, path_cost, read_observations,
                             render_observation, render_pinhole,
                             sample_trajectory, shortest_path,
                             stitch_panorama)
from sprkit.worldsim.scene import SQRT2, Scene, _neighbors


def brute_force_cost(scene, start, goal):
    """Independent uniform-cost oracle: Bellman-Ford relaxation to fixpoint."""
    cells = [tuple(c) for c in np.argwhere(~scene.occupancy)]
    dist = {c: np.inf for c in cells}
    dist[start] = 0.0
    for _ in range(len(cells)):
        changed = False
        for c in cells:
            if dist[c] == np.inf:
                continue
            for n, w in _neighbors(scene.occupancy, c):
                if dist[c] + w < dist[n] - 1e-12:
                    dist[n] = dist[c] + w
                    changed = True
        if not changed:
            break
    return dist[goal]


def empty_scene(n=8, cell=0.5):
    occ = np.zeros((n, n), dtype=bool)
    occ[0, :] = occ[-1, :] = occ[:, 0] = occ[:, -1] = True
    pos = np.array([[1.0, 1.0, 1.0]])
    desc = np.ones((1, 4)) / 2.0
    return Scene(seed=0, cell_size=cell, occupancy=occ, landmark_pos=pos,
                 landmark_desc=desc, scene_id="empty")


class TestSceneGeneration:
    def test_same_seed_identical(self):
        a = generate_scene(99, size=(32, 32), landmark_count=16)
        b = generate_scene(99, size=(32, 32), landmark_count=16)
        assert np.array_equal(a.occupancy, b.occupancy)
        assert np.array_equal(a.landmark_pos, b.landmark_pos)
        assert np.array_equal(a.landmark_desc, b.landmark_desc)

    def test_landmark_descriptors_unit_norm(self):
        sc = generate_scene(5, size=(32, 32), landmark_count=40)
        np.testing.assert_allclose(np.linalg.norm(sc.landmark_desc, axis=1),
                                   np.ones(40), rtol=1e-12)

    def test_navigability_fraction_over_seeds(self):
        fracs = [(~generate_scene(s).occupancy).mean() for s in range(50)]
        assert min(fracs) >= 0.3

    def test_too_small_grid_rejected(self):
        with pytest.raises(ContractError):
            generate_scene(0, size=(4, 4))


class TestShortestPath:
    def test_single_cell_path(self):
        sc = empty_scene()
        assert shortest_path(sc, (2, 2), (2, 2)) == [(2, 2)]

    def test_corner_to_corner_two_diagonals(self):
        # 3x3 open interior: two diagonal steps, cost 2*sqrt(2).
        sc = empty_scene(5)
        path = shortest_path(sc, (1, 1), (3, 3))
        assert path_cost(path) == pytest.approx(2 * SQRT2)

    def test_against_brute_force_on_random_grids(self, rng):
        checked = 0
        for seed in range(200):
            occ = rng.random((12, 12)) < 0.35
            occ[0, :] = occ[-1, :] = occ[:, 0] = occ[:, -1] = True
            sc = Scene(seed=seed, cell_size=0.5, occupancy=occ,
                       landmark_pos=np.zeros((1, 3)),
                       landmark_desc=np.ones((1, 2)) / np.sqrt(2),
                       scene_id="rand")
            nav = [tuple(c) for c in np.argwhere(~occ)]
            if len(nav) < 2:
                continue
            start = nav[int(rng.integers(len(nav)))]
            goal = nav[int(rng.integers(len(nav)))]
            oracle = brute_force_cost(sc, start, goal)
            try:
                cost = path_cost(shortest_path(sc, start, goal))
            except NoPathError:
                assert oracle == np.inf
                checked += 1
                continue
            assert cost == pytest.approx(oracle, abs=1e-9)
            checked += 1
            if checked >= 50:
                break
        assert checked >= 50

    def test_disconnected_raises(self):
        occ = np.ones((8, 8), dtype=bool)
        occ[1, 1] = occ[5, 5] = False
        sc = Scene(seed=0, cell_size=0.5, occupancy=occ,
                   landmark_pos=np.zeros((1, 3)),
                   landmark_desc=np.ones((1, 2)) / np.sqrt(2), scene_id="x")
        with pytest.raises(NoPathError):
            shortest_path(sc, (1, 1), (5, 5))


class TestSampleTrajectory:
    def test_pose_count_and_height(self):
        sc = generate_scene(3)
        spec = TrajectorySpec(length_m=8.0, num_points=11, height_m=0.1, seed=4)
        traj = sample_trajectory(sc, spec)
        assert len(traj.poses) == 11
        assert all(p.t[2] == pytest.approx(0.1) for p in traj.poses)

    def test_station_spacing_uniform(self):
        sc = generate_scene(3)
        spec = TrajectorySpec(length_m=12.0, num_points=9, height_m=0.5, seed=8)
        traj = sample_trajectory(sc, spec)
        pts = np.array([p.t[:2] for p in traj.poses])
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        assert seg.std() / seg.mean() < 0.1

    def test_headings_follow_straight_corridor(self):
        # Open box, forced straight-line path: pre-offset headings equal the
        # path tangent; recover them by removing the logged offset via gt.
        sc = empty_scene(20, cell=1.0)
        occ = sc.occupancy.copy()
        occ[1:19, :] = True
        occ[10, 1:19] = False                  # one horizontal corridor
        sc2 = Scene(seed=1, cell_size=1.0, occupancy=occ,
                    landmark_pos=sc.landmark_pos, landmark_desc=sc.landmark_desc,
                    scene_id="corridor")
        spec = TrajectorySpec(length_m=10.0, num_points=6, height_m=1.7, seed=2)
        traj = sample_trajectory(sc2, spec)
        pts = np.array([p.t[:2] for p in traj.poses])
        tangents = np.diff(pts, axis=0)
        assert np.all(np.abs(tangents[:, 1]) < 1e-9)     # straight in x
        # Offsets are within +/-60 degrees of the tangent direction.
        sign = np.sign(tangents[0, 0])
        for p in traj.poses:
            yaw = 2.0 * np.arctan2(p.q.v[2], p.q.u)
            tangent_yaw = 0.0 if sign > 0 else np.pi
            d = np.arctan2(np.sin(yaw - tangent_yaw), np.cos(yaw - tangent_yaw))
            assert abs(d) <= np.radians(60.0) + 1e-9

    def test_determinism(self):
        sc = generate_scene(3)
        spec = TrajectorySpec(length_m=8.0, num_points=7, height_m=0.5, seed=123)
        a = sample_trajectory(sc, spec)
        b = sample_trajectory(sc, spec)
        assert all(pa == pb for pa, pb in zip(a.poses, b.poses))

    def test_invalid_spec_rejected(self):
        with pytest.raises(ContractError):
            TrajectorySpec(length_m=25.0, num_points=5, height_m=0.5, seed=0)
        with pytest.raises(ContractError):
            TrajectorySpec(length_m=5.0, num_points=3, height_m=0.5, seed=0)
        with pytest.raises(ContractError):
            TrajectorySpec(length_m=5.0, num_points=5, height_m=0.3, seed=0)


class TestRenderPinhole:
    def test_no_landmarks_zero_image(self):
        sc = empty_scene()
        sc2 = Scene(seed=0, cell_size=0.5, occupancy=sc.occupancy,
                    landmark_pos=np.zeros((0, 3)), landmark_desc=np.zeros((0, 4)),
                    scene_id="none")
        img = render_pinhole(sc2, Pose.identity(), res=8)
        assert img.shape == (8, 8, 4)
        assert np.all(img == 0.0)

    def test_on_axis_landmark_peaks_at_center(self):
        sc = empty_scene()
        pose = Pose((1.0, 1.0, 1.0), UnitQuaternion.identity())
        sc2 = Scene(seed=0, cell_size=0.5, occupancy=sc.occupancy,
                    landmark_pos=np.array([[3.0, 1.0, 1.0]]),   # straight ahead (+x)
                    landmark_desc=np.ones((1, 4)) / 2.0, scene_id="one")
        img = render_pinhole(sc2, pose, res=15)   # odd res: unique center pixel
        mag = np.linalg.norm(img, axis=2)
        assert np.unravel_index(np.argmax(mag), mag.shape) == (7, 7)

    def test_one_pixel_yaw_shifts_pattern(self, rng):
        sc = generate_scene(11, size=(32, 32), landmark_count=48)
        base = Pose((8.0, 8.0, 1.0), UnitQuaternion.from_yaw(0.3))
        res, fov = 16, 60.0
        pitch = np.radians(fov) / res
        img0 = render_pinhole(sc, base, fov_deg=fov, res=res)
        img1 = render_pinhole(
            sc, Pose(base.t, UnitQuaternion.from_yaw(0.3 + pitch)),
            fov_deg=fov, res=res)
        # Yaw moves scene content horizontally; compare interiors one column apart.
        shifted = img0[:, :-1]
        ref = img1[:, 1:]
        err = np.linalg.norm(ref - shifted) / np.linalg.norm(img0)
        assert err < 0.12

    def test_bad_fov_rejected(self):
        with pytest.raises(ContractError):
            render_pinhole(empty_scene(), Pose.identity(), fov_deg=180.0)


class TestRenderObservation:
    def test_no_landmarks_zero(self):
        sc = empty_scene()
        sc2 = Scene(seed=0, cell_size=0.5, occupancy=sc.occupancy,
                    landmark_pos=np.zeros((0, 3)), landmark_desc=np.zeros((0, 4)),
                    scene_id="none")
        obs = render_observation(sc2, Pose.identity())
        assert np.all(obs.pano == 0.0)

    def test_yaw_equivariance_column_shift(self):
        sc = generate_scene(21, size=(32, 32), landmark_count=48)
        pose = Pose((8.0, 8.0, 0.5), UnitQuaternion.from_yaw(0.0))
        hp, wp = 16, 32
        obs0 = render_observation(sc, pose, (hp, wp))
        k = 5
        dyaw = k * 2.0 * np.pi / wp
        obs1 = render_observation(
            sc, Pose(pose.t, UnitQuaternion.from_yaw(dyaw)), (hp, wp))
        # Positive yaw turns the camera left; content shifts to lower columns.
        np.testing.assert_allclose(obs1.pano, np.roll(obs0.pano, -k, axis=1),
                                   atol=1e-9)

    def test_height_sensitivity(self):
        sc = generate_scene(31, size=(32, 32), landmark_count=48)
        q = UnitQuaternion.from_yaw(1.0)
        lo = render_observation(sc, Pose((8.0, 8.0, 0.1), q))
        hi = render_observation(sc, Pose((8.0, 8.0, 1.7), q))
        assert np.max(np.abs(lo.pano - hi.pano)) > 1e-6

    def test_aspect_invariant(self):
        with pytest.raises(Exception):
            Observation(pano=np.zeros((16, 30, 4)), pose=Pose.identity())


class TestStitching:
    def test_rig_geometry(self):
        rig = CaptureRig()
        assert len(rig.headings_deg) * len(rig.elevations_deg) == 18
        h, e = rig.view_angles(rig.pano_pose_view)
        assert h == 0.0 and e == 0.0

    def test_constant_pinholes_constant_panorama(self):
        rig = CaptureRig()
        pinholes = [np.full((8, 8, 3), 2.5) for _ in range(18)]
        obs = stitch_panorama(rig, pinholes, Pose.identity(), (8, 16))
        np.testing.assert_allclose(obs.pano, 2.5, rtol=1e-12)

    def test_center_pixel_maps_to_forward_view(self):
        from sprkit.worldsim.render import equirect_directions
        rig = CaptureRig()
        hp, wp = 16, 32
        dirs = equirect_directions(hp, wp)
        rots = np.stack([rig.view_rotation(k) for k in range(18)])
        axes = rots[:, :, 0]
        # Pixel nearest latitude 0, longitude 0.
        center = (hp // 2) * wp + wp // 2
        sel = int(np.argmax(dirs[center] @ axes.T))
        assert rig.view_angles(sel) == (0.0, 0.0)
        assert sel == rig.pano_pose_view == 10

    def test_all_directions_inside_selected_view(self):
        # Sphere coverage: every ray lands inside its selected view frustum.
        from sprkit.worldsim.render import equirect_directions
        rig = CaptureRig()
        dirs = equirect_directions(64, 128)
        rots = np.stack([rig.view_rotation(k) for k in range(18)])
        axes = rots[:, :, 0]
        sel = np.argmax(dirs @ axes.T, axis=1)
        t = np.tan(np.radians(rig.fov_deg) / 2.0)
        for k in range(18):
            local = dirs[sel == k] @ rots[k]
            assert np.all(local[:, 0] > 0.0)
            assert np.max(np.abs(local[:, 1] / local[:, 0])) <= t * (1 + 1e-9)
            assert np.max(np.abs(local[:, 2] / local[:, 0])) <= t * (1 + 1e-9)

    def test_wrong_image_count_rejected(self):
        rig = CaptureRig()
        with pytest.raises(ContractError):
            stitch_panorama(rig, [np.zeros((8, 8, 3))] * 17, Pose.identity(), (8, 16))

    def test_stitch_matches_direct_render(self):
        worst = 0.0
        for seed in range(20):
            sc = generate_scene(seed + 300, size=(32, 32), landmark_count=48)
            rng = np.random.default_rng(seed)
            pose = Pose((rng.uniform(4, 12), rng.uniform(4, 12), 1.0),
                        UnitQuaternion.from_yaw(rng.uniform(-np.pi, np.pi)))
            stitched = capture_panorama(sc, pose, pano_hw=(16, 32), pinhole_res=16)
            direct = render_observation(sc, pose, (16, 32))
            resid = np.linalg.norm(stitched.pano - direct.pano) ** 2
            energy = np.linalg.norm(direct.pano) ** 2
            worst = max(worst, resid / energy)
        assert worst < 0.05


class TestCropFov:
    def test_identity_at_360(self, rng):
        pano = rng.normal(size=(8, 16, 3))
        obs = Observation(pano=pano, pose=Pose.identity())
        out = crop_fov(obs, 360.0)
        np.testing.assert_array_equal(out.pano, pano)

    def test_half_at_180(self, rng):
        pano = rng.uniform(1.0, 2.0, size=(8, 16, 3))
        out = crop_fov(Observation(pano=pano, pose=Pose.identity()), 180.0)
        nonzero_cols = np.where(np.any(out.pano != 0.0, axis=(0, 2)))[0]
        assert len(nonzero_cols) == 8

    def test_energy_monotone_in_fov(self, rng):
        pano = rng.normal(size=(16, 32, 4))
        obs = Observation(pano=pano, pose=Pose.identity())
        energies = [np.sum(crop_fov(obs, f).pano ** 2)
                    for f in (45.0, 90.0, 180.0, 270.0, 360.0)]
        assert all(a <= b + 1e-12 for a, b in zip(energies, energies[1:]))

    def test_bad_fov(self):
        with pytest.raises(ContractError):
            crop_fov(Observation(pano=np.zeros((4, 8, 1)), pose=Pose.identity()), 0.0)


@pytest.fixture(scope="module")
def tiny_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("ds")
    cfg = DatasetConfig(scenes=4, traj_per_scene=4, unseen_scenes=1,
                        grid=(32, 32), landmark_count=24)
    manifest = build_dataset(root, cfg, master_seed=2024)
    return root, cfg, manifest


class TestDataset:

    def test_split_disjointness(self, tiny_root):
        _, _, manifest = tiny_root
        unseen_scenes = {s["id"] for s in manifest["scenes"] if s["split"] == "unseen"}
        train_scenes = {t["scene"] for t in manifest["trajectories"]
                        if t["split"] == "train"}
        seen_test = {(t["scene"], t["id"]) for t in manifest["trajectories"]
                     if t["split"] == "seen_test"}
        train = {(t["scene"], t["id"]) for t in manifest["trajectories"]
                 if t["split"] == "train"}
        assert not (unseen_scenes & train_scenes)
        assert not (seen_test & train)
        assert {s for s, _ in seen_test} <= train_scenes

    def test_regeneration_byte_identical(self, tiny_root, tmp_path):
        root, cfg, _ = tiny_root
        other = tmp_path / "again"
        build_dataset(other, cfg, master_seed=2024)
        a = (root / "manifest.json").read_bytes()
        b = (other / "manifest.json").read_bytes()
        assert a == b
        sample = sorted(root.glob("scene_*/traj_*/obs.bin"))[0]
        twin = other / sample.relative_to(root)
        assert sample.read_bytes() == twin.read_bytes()
        sample_csv = sorted(root.glob("scene_*/traj_*/poses.csv"))[0]
        twin_csv = other / sample_csv.relative_to(root)
        assert sample_csv.read_bytes() == twin_csv.read_bytes()

    def test_height_ratio_one_one_two(self, tmp_path):
        # n = 400 trajectories: expect 1:1:2 within multinomial tolerance.
        cfg = DatasetConfig(scenes=2, traj_per_scene=200, unseen_scenes=0,
                            grid=(32, 32), landmark_count=8)
        root = tmp_path / "hist"
        # Only specs matter here; skip rendering cost by sampling specs directly.
        from sprkit.worldsim.dataset import _sample_spec
        from sprkit.rng import derive_seed, generator
        heights = []
        for si in range(cfg.scenes):
            for ti in range(cfg.traj_per_scene):
                rng = generator(2024, "spec", si, ti)
                spec = _sample_spec(rng, derive_seed(2024, "traj", si, ti, 0))
                heights.append(spec.height_m)
        heights = np.array(heights)
        n = len(heights)
        counts = [np.sum(heights == h) for h in (0.1, 0.5, 1.7)]
        # 3-sigma multinomial bands around (0.25, 0.25, 0.5) * n.
        for count, p in zip(counts, (0.25, 0.25, 0.5)):
            sigma = np.sqrt(n * p * (1 - p))
            assert abs(count - n * p) < 3.5 * sigma

    def test_loaders_roundtrip(self, tiny_root):
        root, cfg, manifest = tiny_root
        tm = manifest["trajectories"][0]
        poses, obs = load_trajectory(root, tm["scene"], tm["id"])
        assert len(poses) == tm["num_points"]
        assert obs.shape == (tm["num_points"], cfg.pano_h, cfg.pano_w,
                             cfg.feature_dim)
        assert np.all(np.isfinite(obs))
        assert load_manifest(root)["config_hash"] == manifest["config_hash"]

    def test_truncated_obs_bin(self, tiny_root, tmp_path):
        root, _, manifest = tiny_root
        tm = manifest["trajectories"][0]
        src = root / tm["scene"] / tm["id"] / "obs.bin"
        bad = tmp_path / "obs.bin"
        bad.write_bytes(src.read_bytes()[:-10])
        with pytest.raises(DataFormatError) as info:
            read_observations(bad)
        assert info.value.offset is not None

    def test_bad_magic(self, tmp_path):
        bad = tmp_path / "obs.bin"
        bad.write_bytes(b"WRONGMAG" + b"\x00" * 40)
        with pytest.raises(DataFormatError) as info:
            read_observations(bad)
        assert info.value.offset == 0
