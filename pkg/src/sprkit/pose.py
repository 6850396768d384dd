"""Rigid-body pose algebra on translation vectors and unit quaternions.

Quaternions are stored [u, v] with real part first and act on column
vectors by q p q*; poses are world-from-camera throughout. The sign
ambiguity q ~ -q is removed at construction by forcing u >= 0, which makes
log-quaternion regression targets unambiguous. All types are immutable
value objects and safe to share.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError

_UNIT_TOL = 1e-6
_TINY = 1e-12


@dataclass(frozen=True)
class UnitQuaternion:
    """Rotation as [u, v]: real part u >= 0 (canonical sign), unit norm."""

    u: float
    v: tuple[float, float, float]

    def __post_init__(self):
        u = float(self.u)
        v = np.asarray(self.v, dtype=np.float64)
        norm = float(np.sqrt(u * u + v @ v))
        if abs(norm - 1.0) > _UNIT_TOL:
            raise ContractError(f"quaternion norm {norm} deviates from 1")
        u /= norm
        v = v / norm
        if u < 0.0:
            u = -u
            v = -v
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", (float(v[0]), float(v[1]), float(v[2])))

    @staticmethod
    def identity() -> "UnitQuaternion":
        return UnitQuaternion(1.0, (0.0, 0.0, 0.0))

    @staticmethod
    def from_wxyz(arr) -> "UnitQuaternion":
        arr = np.asarray(arr, dtype=np.float64)
        return UnitQuaternion(float(arr[0]), (arr[1], arr[2], arr[3]))

    @staticmethod
    def from_yaw(yaw: float) -> "UnitQuaternion":
        """Rotation by *yaw* radians about the world z axis."""
        return UnitQuaternion(np.cos(yaw / 2.0), (0.0, 0.0, np.sin(yaw / 2.0)))

    def as_array(self) -> np.ndarray:
        return np.array([self.u, *self.v], dtype=np.float64)

    def conjugate(self) -> "UnitQuaternion":
        return UnitQuaternion(self.u, (-self.v[0], -self.v[1], -self.v[2]))

    def multiply(self, other: "UnitQuaternion") -> "UnitQuaternion":
        """Hamilton product self ⊗ other (renormalized, sign-canonical)."""
        u1, (x1, y1, z1) = self.u, self.v
        u2, (x2, y2, z2) = other.u, other.v
        return UnitQuaternion(
            u1 * u2 - x1 * x2 - y1 * y2 - z1 * z2,
            (u1 * x2 + x1 * u2 + y1 * z2 - z1 * y2,
             u1 * y2 - x1 * z2 + y1 * u2 + z1 * x2,
             u1 * z2 + x1 * y2 - y1 * x2 + z1 * u2))

    def rotate(self, p) -> np.ndarray:
        """Apply the rotation to a 3-vector via q p q*."""
        p = np.asarray(p, dtype=np.float64)
        u = self.u
        v = np.asarray(self.v)
        # Rodrigues form of quaternion rotation: p + 2u (v x p) + 2 v x (v x p)
        t = 2.0 * np.cross(v, p)
        return p + u * t + np.cross(v, t)

    def rotation_matrix(self) -> np.ndarray:
        """3x3 matrix (internal helper for vectorized rendering paths)."""
        u, (x, y, z) = self.u, self.v
        return np.array([
            [1 - 2 * (y * y + z * z), 2 * (x * y - u * z), 2 * (x * z + u * y)],
            [2 * (x * y + u * z), 1 - 2 * (x * x + z * z), 2 * (y * z - u * x)],
            [2 * (x * z - u * y), 2 * (y * z + u * x), 1 - 2 * (x * x + y * y)],
        ])


def quat_log(q: UnitQuaternion) -> np.ndarray:
    """Log map: w = (v/|v|) arccos(u), the zero vector when |v| vanishes.

    For canonical-sign quaternions |w| <= pi/2 (half the rotation angle).
    """
    v = np.asarray(q.v, dtype=np.float64)
    norm_v = float(np.linalg.norm(v))
    if norm_v <= _TINY:
        return np.zeros(3)
    angle = float(np.arccos(np.clip(q.u, -1.0, 1.0)))
    return (v / norm_v) * angle


def quat_exp(w) -> UnitQuaternion:
    """Exponential map [cos|w|, (w/|w|) sin|w|]; |w| -> 0 gives identity."""
    w = np.asarray(w, dtype=np.float64)
    norm_w = float(np.linalg.norm(w))
    if norm_w <= _TINY:
        return UnitQuaternion.identity()
    axis = w / norm_w
    s = np.sin(norm_w)
    return UnitQuaternion(np.cos(norm_w), (axis[0] * s, axis[1] * s, axis[2] * s))


@dataclass(frozen=True)
class Pose:
    """Rigid transform: translation in meters plus a unit quaternion."""

    t: tuple[float, float, float]
    q: UnitQuaternion

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.float64)
        object.__setattr__(self, "t", (float(t[0]), float(t[1]), float(t[2])))

    @staticmethod
    def identity() -> "Pose":
        return Pose((0.0, 0.0, 0.0), UnitQuaternion.identity())

    def t_array(self) -> np.ndarray:
        return np.asarray(self.t, dtype=np.float64)


def compose(a: Pose, b: Pose) -> Pose:
    """Apply b then a: t = a.t + R(a.q) b.t, q = a.q ⊗ b.q."""
    t = a.t_array() + a.q.rotate(b.t_array())
    return Pose(tuple(t), a.q.multiply(b.q))


def inverse(p: Pose) -> Pose:
    qinv = p.q.conjugate()
    t = -qinv.rotate(p.t_array())
    return Pose(tuple(t), qinv)


def relative(origin: Pose, query: Pose) -> Pose:
    """Query pose expressed in the origin frame: inverse(origin) ∘ query."""
    return compose(inverse(origin), query)


@dataclass(frozen=True)
class PoseError:
    """Translation error in meters and rotation error in degrees."""

    te: float
    re: float


def pose_error(pred: Pose, gt: Pose) -> PoseError:
    """TE = |Δt|₂; RE = (360/π) arccos(|⟨q₁,q₂⟩|), the geodesic angle.

    The absolute value on the quaternion dot product makes RE invariant to
    sign flips of either argument.
    """
    te = float(np.linalg.norm(pred.t_array() - gt.t_array()))
    dot = abs(float(pred.q.as_array() @ gt.q.as_array()))
    re = float(np.degrees(2.0 * np.arccos(np.clip(dot, -1.0, 1.0))))
    return PoseError(te=te, re=re)


def aggregate_errors(errors: list[PoseError], stat: str) -> PoseError:
    """Component-wise median or mean over a non-empty error list."""
    if not errors:
        raise ContractError("aggregate_errors of empty sequence")
    te = np.array([e.te for e in errors])
    re = np.array([e.re for e in errors])
    if stat == "median":
        return PoseError(float(np.median(te)), float(np.median(re)))
    if stat == "mean":
        return PoseError(float(np.mean(te)), float(np.mean(re)))
    raise ContractError(f"unknown aggregation stat {stat!r}")


def pose_to_csv_row(p: Pose) -> str:
    """`tx,ty,tz,qu,qx,qy,qz` with 17-significant-digit decimal floats."""
    vals = [*p.t, p.q.u, *p.q.v]
    return ",".join(f"{v:.17g}" for v in vals)


def pose_from_csv_row(row: str) -> Pose:
    vals = [float(tok) for tok in row.strip().split(",")]
    if len(vals) != 7:
        raise ContractError(f"pose row needs 7 fields, got {len(vals)}")
    return Pose(tuple(vals[:3]), UnitQuaternion.from_wxyz(vals[3:]))
