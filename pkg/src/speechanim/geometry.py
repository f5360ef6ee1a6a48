"""Landmark coordinate transforms.

Conventions used throughout the project:

* A face is 68 3D landmarks in the standard iBUG layout (0-16 jaw, 17-26
  brows, 27-35 nose, 36-47 eye outlines, 48-67 mouth) plus 52 separate 2D
  eye landmarks used for blink/gaze control.
* "Ear" landmarks are the jaw-contour endpoints, indices 0 and 16.  In the
  frontal normalized space their distance is exactly 2.
* Mouth corners are indices 48 (left) and 54 (right); the metric frame pins
  them at (-1, 0) and (1, 0).
* Axes: x right, y up, z toward the camera.  A frontalized face looks down
  the +z axis.
* Euler angles are degrees in files and at every public API boundary.  The
  rotation is composed intrinsically as R = Rz(roll) @ Rx(pitch) @ Ry(yaw).
* Head pose maps a frontal normalized face into camera space via
  ``posed = R @ (scale * face) + t``.  Frontalization inverts the full
  similarity (rotation, translation, and scale) and then recenters on the
  landmark centroid.

The 52-point eye layout is procedural (26 per eye): 8 upper-lid points,
8 lower-lid points, 2 corners, 7 iris points, 1 pupil center.  The 2D eye
set is defined in the frontal normalized frame only; pose operations carry
it through unchanged.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateFaceError, SpaceContractError

NUM_FACE_LANDMARKS = 68
NUM_EYE_LANDMARKS = 52

LEFT_EAR = 0
RIGHT_EAR = 16
MOUTH_LEFT_CORNER = 48
MOUTH_RIGHT_CORNER = 54
MOUTH = slice(48, 68)
JAW = slice(0, 17)
RIGHT_BROW = slice(17, 22)
LEFT_BROW = slice(22, 27)
NOSE_BRIDGE = slice(27, 31)
NOSE_BASE = slice(31, 36)
RIGHT_EYE = slice(36, 42)
LEFT_EYE = slice(42, 48)
OUTER_LIP = slice(48, 60)
INNER_LIP = slice(60, 68)

# Upper/lower eyelid pairs of the 68-point layout (upper index, facing lower
# index), used when closing the eyes.
FACE_LID_PAIRS = ((37, 41), (38, 40), (43, 47), (44, 46))

# Per-eye block layout of the 52-point eye set.
EYE_BLOCK = 26
EYE_UPPER_LID = slice(0, 8)
EYE_LOWER_LID = slice(8, 16)
EYE_CORNERS = slice(16, 18)
EYE_IRIS = slice(18, 25)
EYE_PUPIL = 25


class Space(str, enum.Enum):
    """Coordinate space tag for a landmark frame."""

    RAW = "raw"
    FRONTAL = "frontal"
    FRONTAL_NORMALIZED = "frontal_normalized"
    POSED = "posed"
    METRIC = "metric"


@dataclass
class HeadPose:
    """Rotation (degrees), translation, and isotropic scale of the head."""

    yaw: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0
    tx: float = 0.0
    ty: float = 0.0
    tz: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        vals = (self.yaw, self.pitch, self.roll, self.tx, self.ty, self.tz, self.scale)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("head pose has non-finite components")
        if self.scale <= 0:
            raise ValueError(f"head pose scale must be positive, got {self.scale}")
        for name in ("yaw", "pitch", "roll"):
            if abs(getattr(self, name)) > 180.0:
                raise ValueError(f"{name} out of range [-180, 180]")

    def to_array(self) -> np.ndarray:
        return np.array(
            [self.yaw, self.pitch, self.roll, self.tx, self.ty, self.tz, self.scale],
            dtype=np.float64,
        )

    @classmethod
    def from_array(cls, a) -> "HeadPose":
        a = np.asarray(a, dtype=np.float64)
        scale = float(a[6]) if a.shape[0] >= 7 else 1.0
        return cls(*(float(v) for v in a[:6]), scale=scale)


@dataclass
class LandmarkFrame:
    """One frame of face and eye landmarks in a tagged coordinate space."""

    face: np.ndarray  # (68, 3)
    eyes: np.ndarray  # (52, 2)
    space: Space = Space.RAW

    def __post_init__(self):
        self.face = np.asarray(self.face, dtype=np.float64)
        self.eyes = np.asarray(self.eyes, dtype=np.float64)
        self.space = Space(self.space)
        if self.face.shape != (NUM_FACE_LANDMARKS, 3):
            raise ValueError(f"face landmarks must be (68, 3), got {self.face.shape}")
        if self.eyes.shape != (NUM_EYE_LANDMARKS, 2):
            raise ValueError(f"eye landmarks must be (52, 2), got {self.eyes.shape}")
        if not np.isfinite(self.face).all() or not np.isfinite(self.eyes).all():
            raise ValueError("landmark coordinates must be finite")

    def copy(self) -> "LandmarkFrame":
        return LandmarkFrame(self.face.copy(), self.eyes.copy(), self.space)


def _require_space(frame: LandmarkFrame, allowed, op: str):
    if frame.space not in allowed:
        names = "/".join(s.value for s in allowed)
        raise SpaceContractError(
            f"{op} expects a frame in space {names}, got {frame.space.value}"
        )


def rotation_from_angles(yaw: float, pitch: float, roll: float) -> np.ndarray:
    """Rotation matrix R = Rz(roll) @ Rx(pitch) @ Ry(yaw), angles in degrees."""
    if not all(np.isfinite(v) for v in (yaw, pitch, roll)):
        raise ValueError("rotation angles must be finite")
    y, p, r = np.deg2rad([yaw, pitch, roll])
    cy, sy = np.cos(y), np.sin(y)
    cp, sp = np.cos(p), np.sin(p)
    cr, sr = np.cos(r), np.sin(r)
    ry = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]])
    rz = np.array([[cr, -sr, 0.0], [sr, cr, 0.0], [0.0, 0.0, 1.0]])
    return rz @ rx @ ry


def rotation_matrices(poses: np.ndarray) -> np.ndarray:
    """Stack of rotation matrices for a (T, >=3) array of degree angles."""
    poses = np.asarray(poses, dtype=np.float64)
    return np.stack([rotation_from_angles(*p[:3]) for p in poses])


def frontalize(frame: LandmarkFrame, pose: HeadPose) -> LandmarkFrame:
    """Undo a head pose: invert the similarity, then recenter on the centroid.

    Accepts raw detector output or synthesized posed frames.  The eye set is
    defined in the frontal frame and passes through unchanged.
    """
    _require_space(frame, (Space.RAW, Space.POSED), "frontalize")
    rot = rotation_from_angles(pose.yaw, pose.pitch, pose.roll)
    t = np.array([pose.tx, pose.ty, pose.tz])
    # R^-1 v for row-stored points is v @ R (R orthonormal).
    face = (frame.face - t) @ rot / pose.scale
    face = face - face.mean(axis=0)
    return LandmarkFrame(face, frame.eyes.copy(), Space.FRONTAL)


def normalize_scale(frame: LandmarkFrame) -> tuple[LandmarkFrame, float]:
    """Scale a frontal frame so the ear-landmark distance is exactly 2.

    Returns the scaled frame and the multiplicative factor applied; a frame
    that is already normalized comes back with factor 1.
    """
    _require_space(frame, (Space.FRONTAL, Space.FRONTAL_NORMALIZED), "normalize_scale")
    d = float(np.linalg.norm(frame.face[LEFT_EAR] - frame.face[RIGHT_EAR]))
    if d < 1e-12:
        raise DegenerateFaceError("ear landmarks coincide; cannot normalize scale")
    factor = 2.0 / d
    return (
        LandmarkFrame(frame.face * factor, frame.eyes * factor, Space.FRONTAL_NORMALIZED),
        factor,
    )


def apply_pose(frame: LandmarkFrame, pose: HeadPose) -> LandmarkFrame:
    """Map a frontal normalized face into camera space: R @ (scale*face) + t."""
    _require_space(frame, (Space.FRONTAL_NORMALIZED,), "apply_pose")
    if pose.scale <= 0:
        raise ValueError("pose scale must be positive")
    rot = rotation_from_angles(pose.yaw, pose.pitch, pose.roll)
    t = np.array([pose.tx, pose.ty, pose.tz])
    face = (pose.scale * frame.face) @ rot.T + t
    return LandmarkFrame(face, frame.eyes.copy(), Space.POSED)


def apply_pose_seq(faces: np.ndarray, poses: np.ndarray) -> np.ndarray:
    """Vectorized apply_pose over a (T, 68, 3) stack and (T, 7) pose array."""
    faces = np.asarray(faces, dtype=np.float64)
    poses = np.asarray(poses, dtype=np.float64)
    rots = rotation_matrices(poses)
    scaled = faces * poses[:, 6][:, None, None]
    out = np.einsum("tij,tkj->tki", rots, scaled) + poses[:, None, 3:6]
    return out


def frontalize_seq(faces: np.ndarray, poses: np.ndarray) -> np.ndarray:
    """Vectorized frontalize over a (T, 68, 3) stack and (T, 7) pose array."""
    faces = np.asarray(faces, dtype=np.float64)
    poses = np.asarray(poses, dtype=np.float64)
    rots = rotation_matrices(poses)
    shifted = faces - poses[:, None, 3:6]
    out = np.einsum("tkj,tji->tki", shifted, rots) / poses[:, 6][:, None, None]
    return out - out.mean(axis=1, keepdims=True)


def project_orthographic(frame: LandmarkFrame) -> np.ndarray:
    """Drop the camera-axis (z) coordinate; returns a (68, 2) array."""
    return frame.face[:, :2].copy()


def metric_normalize(frame: LandmarkFrame) -> LandmarkFrame:
    """Similarity transform placing the mouth corners at (-1, 0) and (1, 0).

    Works on the xy coordinates; z is scaled by the same factor.  The eye set
    receives the same 2D similarity.
    """
    left = frame.face[MOUTH_LEFT_CORNER, :2]
    right = frame.face[MOUTH_RIGHT_CORNER, :2]
    delta = right - left
    d = float(np.linalg.norm(delta))
    if d < 1e-12:
        raise DegenerateFaceError("mouth corners coincide; metric frame undefined")
    center = (left + right) / 2.0
    angle = np.arctan2(delta[1], delta[0])
    c, s = np.cos(-angle), np.sin(-angle)
    rot2 = np.array([[c, -s], [s, c]])
    factor = 2.0 / d

    face = frame.face.copy()
    face[:, :2] = (face[:, :2] - center) @ rot2.T * factor
    face[:, 2] *= factor
    eyes = (frame.eyes - center) @ rot2.T * factor
    return LandmarkFrame(face, eyes, Space.METRIC)


def metric_normalize_xy(points: np.ndarray) -> np.ndarray:
    """metric_normalize for a bare (..., 68, 2) xy array (vectorized over T)."""
    pts = np.asarray(points, dtype=np.float64)
    single = pts.ndim == 2
    if single:
        pts = pts[None]
    left = pts[:, MOUTH_LEFT_CORNER]
    right = pts[:, MOUTH_RIGHT_CORNER]
    delta = right - left
    d = np.linalg.norm(delta, axis=-1)
    if np.any(d < 1e-12):
        raise DegenerateFaceError("mouth corners coincide; metric frame undefined")
    center = (left + right) / 2.0
    angle = np.arctan2(delta[:, 1], delta[:, 0])
    c, s = np.cos(-angle), np.sin(-angle)
    rot = np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)
    out = np.einsum("tij,tkj->tki", rot, pts - center[:, None]) * (2.0 / d)[:, None, None]
    return out[0] if single else out


def retag(frame: LandmarkFrame, space: Space) -> LandmarkFrame:
    """Return a copy of the frame carrying a different space tag."""
    return replace(frame.copy(), space=Space(space))
