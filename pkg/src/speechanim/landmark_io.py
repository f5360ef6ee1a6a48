"""Line-delimited JSON files for landmark and pose sequences.

Landmark-sequence file: one JSON object per line with fields

    frame  - integer frame index
    space  - coordinate space tag ("raw", "frontal", "frontal_normalized",
             "posed", "metric")
    face   - 68 [x, y, z] landmark rows
    eyes   - 52 [x, y] eye landmark rows
    pose   - {"yaw","pitch","roll","tx","ty","tz","scale"} or null

Pose file: one JSON object per line with the pose fields plus "frame".
Coordinates are rounded to 8 decimals on write.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .geometry import HeadPose, LandmarkFrame, Space

POSE_KEYS = ("yaw", "pitch", "roll", "tx", "ty", "tz", "scale")


def _round(arr: np.ndarray) -> list:
    return np.round(np.asarray(arr, dtype=np.float64), 8).tolist()


def _pose_dict(pose_row) -> dict:
    return {k: round(float(v), 8) for k, v in zip(POSE_KEYS, pose_row)}


def _pose_row(d: dict | None) -> np.ndarray | None:
    if d is None:
        return None
    return np.array([float(d.get(k, 1.0 if k == "scale" else 0.0)) for k in POSE_KEYS])


def write_landmark_file(path, faces, eyes, space: Space, poses=None):
    """Write a landmark sequence; faces (T,68,3), eyes (T,52,2), poses (T,7)|None."""
    faces = np.asarray(faces, dtype=np.float64)
    eyes = np.asarray(eyes, dtype=np.float64)
    space = Space(space)
    with open(path, "w") as fh:
        for i in range(faces.shape[0]):
            record = {
                "frame": i,
                "space": space.value,
                "face": _round(faces[i]),
                "eyes": _round(eyes[i]),
                "pose": _pose_dict(poses[i]) if poses is not None else None,
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def read_landmark_file(path):
    """Read a landmark sequence.

    Returns (faces (T,68,3), eyes (T,52,2), space, poses (T,7) or None).
    Non-finite coordinates are preserved so filters can flag them.
    """
    faces, eyes, poses, spaces = [], [], [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            faces.append(np.array(rec["face"], dtype=np.float64))
            eyes.append(np.array(rec["eyes"], dtype=np.float64))
            poses.append(_pose_row(rec.get("pose")))
            spaces.append(rec["space"])
    if not faces:
        raise IOError(f"landmark file {path} is empty")
    if len(set(spaces)) != 1:
        raise IOError(f"landmark file {path} mixes coordinate spaces")
    pose_arr = None
    if all(p is not None for p in poses):
        pose_arr = np.stack(poses)
    return np.stack(faces), np.stack(eyes), Space(spaces[0]), pose_arr


def read_frame(path, index: int = 0) -> tuple[LandmarkFrame, HeadPose | None]:
    """Read a single frame from a landmark-sequence file."""
    faces, eyes, space, poses = read_landmark_file(path)
    if not 0 <= index < faces.shape[0]:
        raise ValueError(f"frame index {index} out of range for {path}")
    pose = HeadPose.from_array(poses[index]) if poses is not None else None
    return LandmarkFrame(faces[index], eyes[index], space), pose


def write_pose_file(path, poses):
    poses = np.asarray(poses, dtype=np.float64)
    with open(path, "w") as fh:
        for i in range(poses.shape[0]):
            rec = {"frame": i}
            rec.update(_pose_dict(poses[i]))
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_pose_file(path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rows.append(_pose_row(json.loads(line)))
    if not rows:
        raise IOError(f"pose file {path} is empty")
    return np.stack(rows)


def load_clip_arrays(corpus_dir, entry: dict) -> dict:
    """Load one manifest entry's arrays from disk."""
    base = Path(corpus_dir) / entry["dir"]
    faces, eyes, space, poses = read_landmark_file(base / entry["paths"]["landmarks"])
    out = {
        "faces": faces,
        "eyes": eyes,
        "space": space,
        "poses": read_pose_file(base / entry["paths"]["poses"]),
        "latents": np.load(base / entry["paths"]["latents"]),
        "emotion": np.array(entry["emotion"], dtype=np.float64),
        "clip_id": entry["clip_id"],
        "flags": entry.get("flags", {}),
    }
    with np.load(base / entry["paths"]["features"]) as data:
        out["features"] = data["mfcc"].astype(np.float64)
    return out
