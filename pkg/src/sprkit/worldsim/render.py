"""Panoramic feature rendering: landmark splats, pinhole views, the
18-view capture rig, equirectangular stitching, and FoV cropping.

Observations are landmark-descriptor panoramas rather than RGB: every
pixel ray accumulates the descriptors of all landmarks, weighted by a
Gaussian in angular distance (no occlusion, no falloff). That keeps the
signal geometric, the renderer exact, and the stitched-vs-direct dual
route checkable.

Conventions: camera local frame is forward +x, left +y, up +z. An
equirectangular grid of width W spans longitude [-pi, pi) left to right
with the center columns at longitude 0 (forward) and latitude decreasing
top to bottom. The rig enumerates views heading-major / elevation-minor
with headings starting at -180 deg, which places the forward-level view
at capture index 10; the panorama inherits exactly that view's pose.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError, DimensionError
from ..pose import Pose, UnitQuaternion
from .scene import Scene


@dataclass(frozen=True)
class Observation:
    """Equirectangular feature panorama (Hp, Wp, F) with its capture pose."""

    pano: np.ndarray
    pose: Pose

    def __post_init__(self):
        if self.pano.ndim != 3:
            raise DimensionError(f"panorama must be (H, W, F), got {self.pano.shape}")
        h, w, _ = self.pano.shape
        if w != 2 * h:
            raise DimensionError(
                f"equirectangular panorama needs W = 2H, got {h}x{w}")


@dataclass(frozen=True)
class CaptureRig:
    """Six headings and three elevations at 60 degree spacing, 60 degree FoV."""

    headings_deg: tuple = (-180.0, -120.0, -60.0, 0.0, 60.0, 120.0)
    elevations_deg: tuple = (-60.0, 0.0, 60.0)
    fov_deg: float = 60.0
    pano_pose_view: int = 10    # heading-major, elevation-minor: (0 deg, 0 deg)

    def __post_init__(self):
        if len(self.headings_deg) * len(self.elevations_deg) != 18:
            raise ContractError("capture rig must define 18 views")

    def view_angles(self, index: int) -> tuple[float, float]:
        """(heading, elevation) in degrees of a capture-order view index."""
        n_e = len(self.elevations_deg)
        return (self.headings_deg[index // n_e],
                self.elevations_deg[index % n_e])

    def view_rotation(self, index: int) -> np.ndarray:
        """Local rotation of the view: pitch up by elevation, then yaw."""
        h, e = self.view_angles(index)
        return _rot_z(np.radians(h)) @ _rot_y(-np.radians(e))


def _rot_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _rot_y(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def equirect_directions(hp: int, wp: int) -> np.ndarray:
    """Unit ray directions (hp*wp, 3) in the camera frame, row-major."""
    lat = np.pi / 2 - (np.arange(hp) + 0.5) / hp * np.pi
    lon = -np.pi + (np.arange(wp) + 0.5) / wp * 2.0 * np.pi
    lon_g, lat_g = np.meshgrid(lon, lat)
    cos_lat = np.cos(lat_g)
    dirs = np.stack([cos_lat * np.cos(lon_g),
                     cos_lat * np.sin(lon_g),
                     np.sin(lat_g)], axis=-1)
    return dirs.reshape(-1, 3)


def pinhole_directions(res: int, fov_deg: float) -> np.ndarray:
    """Unit ray directions (res*res, 3) in the camera frame; square image,
    x right and y down in image coordinates."""
    t = np.tan(np.radians(fov_deg) / 2.0)
    xs = (np.arange(res) + 0.5) / res * 2.0 - 1.0
    x_img, y_img = np.meshgrid(xs, xs)
    dirs = np.stack([np.ones_like(x_img),
                     -x_img * t,                # image-right is -left
                     -y_img * t], axis=-1)      # image-down is -up
    dirs = dirs.reshape(-1, 3)
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


def _splat(scene: Scene, position: np.ndarray, dirs_world: np.ndarray,
           sigma_rad: float) -> np.ndarray:
    """Accumulate landmark descriptors per ray with Gaussian angular weight."""
    rel = scene.landmark_pos - position[None, :]
    dist = np.linalg.norm(rel, axis=1)
    keep = dist > 1e-9
    if not np.any(keep):
        return np.zeros((dirs_world.shape[0], scene.landmark_desc.shape[1]))
    ldirs = rel[keep] / dist[keep, None]
    cos_ang = np.clip(dirs_world @ ldirs.T, -1.0, 1.0)
    ang = np.arccos(cos_ang)
    w = np.exp(-0.5 * (ang / sigma_rad) ** 2)
    return w @ scene.landmark_desc[keep]


def render_pinhole(scene: Scene, pose: Pose, fov_deg: float = 60.0,
                   res: int = 16, sigma_deg: float | None = None) -> np.ndarray:
    """Feature image (res, res, F) for a square pinhole view.

    The splat width defaults to half this image's angular pixel pitch; the
    stitching pipeline overrides it with the target panorama's pitch so
    both routes sample the same underlying spherical signal.
    """
    if not (0.0 < fov_deg < 180.0):
        raise ContractError(f"pinhole fov must be in (0, 180), got {fov_deg}")
    if sigma_deg is None:
        sigma_deg = 0.5 * fov_deg / res
    dirs_cam = pinhole_directions(res, fov_deg)
    rm = pose.q.rotation_matrix()
    dirs_world = dirs_cam @ rm.T
    img = _splat(scene, pose.t_array(), dirs_world, np.radians(sigma_deg))
    return img.reshape(res, res, -1)


def render_observation(scene: Scene, pose: Pose,
                       pano_hw: tuple[int, int] = (16, 32)) -> Observation:
    """Direct spherical render: every equirectangular ray splatted in one
    pass. This is both the default dataset path and the stitching oracle."""
    hp, wp = pano_hw
    if wp != 2 * hp:
        raise DimensionError(f"panorama needs W = 2H, got {hp}x{wp}")
    sigma_rad = 0.5 * 2.0 * np.pi / wp
    dirs_cam = equirect_directions(hp, wp)
    rm = pose.q.rotation_matrix()
    dirs_world = dirs_cam @ rm.T
    img = _splat(scene, pose.t_array(), dirs_world, sigma_rad)
    return Observation(pano=img.reshape(hp, wp, -1), pose=pose)


def pano_sigma_deg(wp: int) -> float:
    """Half the equirectangular pixel pitch in degrees."""
    return 0.5 * 360.0 / wp


def _bilinear(img: np.ndarray, xf: np.ndarray, yf: np.ndarray) -> np.ndarray:
    """Clamped bilinear sampling of (res, res, F) at fractional pixel coords."""
    res = img.shape[0]
    x0 = np.clip(np.floor(xf).astype(int), 0, res - 1)
    y0 = np.clip(np.floor(yf).astype(int), 0, res - 1)
    x1 = np.clip(x0 + 1, 0, res - 1)
    y1 = np.clip(y0 + 1, 0, res - 1)
    fx = np.clip(xf - x0, 0.0, 1.0)[:, None]
    fy = np.clip(yf - y0, 0.0, 1.0)[:, None]
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def stitch_panorama(rig: CaptureRig, pinholes: list[np.ndarray], pose: Pose,
                    pano_hw: tuple[int, int] = (16, 32)) -> Observation:
    """Stitch 18 pinhole feature images into an equirectangular panorama.

    Each panorama pixel selects the rig view whose optical axis is
    angularly nearest, inverse-projects onto its image plane, and
    bilinearly samples. The panorama pose is the pose of the rig's
    capture-order view ``pano_pose_view`` (the forward-level view, whose
    local rotation is the identity, so it equals the rig pose).
    """
    if len(pinholes) != 18:
        raise ContractError(f"stitching needs exactly 18 views, got {len(pinholes)}")
    res = pinholes[0].shape[0]
    for img in pinholes:
        if img.shape[:2] != (res, res):
            raise ContractError("all pinhole images must be square and same size")
    hp, wp = pano_hw
    if wp != 2 * hp:
        raise DimensionError(f"panorama needs W = 2H, got {hp}x{wp}")
    dirs = equirect_directions(hp, wp)                  # rig-local frame
    rots = np.stack([rig.view_rotation(k) for k in range(18)])
    axes = rots[:, :, 0]                                # each view's forward
    sel = np.argmax(dirs @ axes.T, axis=1)
    t = np.tan(np.radians(rig.fov_deg) / 2.0)
    f = pinholes[0].shape[2]
    out = np.zeros((dirs.shape[0], f))
    for k in range(18):
        mask = sel == k
        if not np.any(mask):
            continue
        local = dirs[mask] @ rots[k]                    # R^T d per row
        fwd = np.maximum(local[:, 0], 1e-9)
        x_img = np.clip(-local[:, 1] / fwd / t, -1.0, 1.0)
        y_img = np.clip(-local[:, 2] / fwd / t, -1.0, 1.0)
        xf = (x_img + 1.0) / 2.0 * res - 0.5
        yf = (y_img + 1.0) / 2.0 * res - 0.5
        out[mask] = _bilinear(pinholes[k], xf, yf)
    view_rot = rig.view_rotation(rig.pano_pose_view)
    if not np.allclose(view_rot, np.eye(3), atol=1e-12):
        raise ContractError("pano_pose_view must be the forward-level view")
    return Observation(pano=out.reshape(hp, wp, f), pose=pose)


def capture_panorama(scene: Scene, pose: Pose, rig: CaptureRig | None = None,
                     pano_hw: tuple[int, int] = (16, 32),
                     pinhole_res: int = 16) -> Observation:
    """Render the 18 rig views and stitch them; the splat width is pinned
    to the target panorama's pitch on both routes."""
    if rig is None:
        rig = CaptureRig()
    sigma = pano_sigma_deg(pano_hw[1])
    rm_pose = pose.q.rotation_matrix()
    images = []
    for k in range(18):
        rot = rm_pose @ rig.view_rotation(k)
        view_pose = Pose(pose.t, _matrix_to_quat(rot))
        images.append(render_pinhole(scene, view_pose, fov_deg=rig.fov_deg,
                                     res=pinhole_res, sigma_deg=sigma))
    return stitch_panorama(rig, images, pose, pano_hw)


def _matrix_to_quat(m: np.ndarray) -> UnitQuaternion:
    """Rotation matrix to canonical unit quaternion (Shepperd's method)."""
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0:
        s = np.sqrt(tr + 1.0) * 2
        u = 0.25 * s
        x = (m[2, 1] - m[1, 2]) / s
        y = (m[0, 2] - m[2, 0]) / s
        z = (m[1, 0] - m[0, 1]) / s
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
        u = (m[2, 1] - m[1, 2]) / s
        x = 0.25 * s
        y = (m[0, 1] + m[1, 0]) / s
        z = (m[0, 2] + m[2, 0]) / s
    elif m[1, 1] > m[2, 2]:
        s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
        u = (m[0, 2] - m[2, 0]) / s
        x = (m[0, 1] + m[1, 0]) / s
        y = 0.25 * s
        z = (m[1, 2] + m[2, 1]) / s
    else:
        s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
        u = (m[1, 0] - m[0, 1]) / s
        x = (m[0, 2] + m[2, 0]) / s
        y = (m[1, 2] + m[2, 1]) / s
        z = 0.25 * s
    return UnitQuaternion(u, (x, y, z))


def crop_fov(obs: Observation, fov_deg: float) -> Observation:
    """Zero all columns outside the central horizontal FoV window; a
    360 degree window is the identity."""
    if not (0.0 < fov_deg <= 360.0):
        raise ContractError(f"fov must be in (0, 360], got {fov_deg}")
    hp, wp, _ = obs.pano.shape
    if fov_deg >= 360.0:
        return Observation(pano=obs.pano.copy(), pose=obs.pose)
    lon = np.degrees(-np.pi + (np.arange(wp) + 0.5) / wp * 2.0 * np.pi)
    keep = np.abs(lon) < fov_deg / 2.0
    pano = obs.pano.copy()
    pano[:, ~keep, :] = 0.0
    return Observation(pano=pano, pose=obs.pose)
