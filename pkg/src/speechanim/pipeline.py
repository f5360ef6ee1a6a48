"""End-to-end inference: audio and a source frame to landmarks, poses,
latent keypoints, and rendered frames.

The frontal landmark prediction is independent of the pose mode: poses are
applied after the landmark stage, so the same audio/source/emotion/seed give
identical frontal sequences whether the pose is generated, transferred, or
fixed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import geometry as geo
from .audio import Waveform, compute_mfcc, load_wav
from .emotion import EmotionVector
from .errors import CheckpointError
from .geometry import HeadPose, LandmarkFrame, Space
from .landmark_io import read_frame, read_pose_file, write_landmark_file, write_pose_file
from .render import render
from .synthdata import LatentOracle, close_eyes
from .training import load_checkpoint

POSE_MODES = ("generated", "transfer", "fixed")


@dataclass
class InferenceRequest:
    source: str | LandmarkFrame          # landmark-sequence file (frame 0) or frame
    audio: str | Waveform                # WAV path or waveform
    pose_mode: str = "fixed"             # generated | transfer | fixed
    pose_file: str | None = None         # required for transfer mode
    emotion: EmotionVector = field(default_factory=EmotionVector.neutral)
    seed: int = 0
    blink_frames: tuple = ()             # frame indices for injected blinks
    blink_duration: int = 6
    gaze_offset: tuple = (0.0, 0.0)      # applied to iris/pupil eye landmarks

    def __post_init__(self):
        if self.pose_mode not in POSE_MODES:
            raise ValueError(f"pose_mode must be one of {POSE_MODES}")
        if self.pose_mode == "transfer" and not self.pose_file:
            raise ValueError("transfer pose mode requires a pose file")


def blink_inject(faces: np.ndarray, eyes: np.ndarray, at_frames, duration: int = 6):
    """Close and reopen the eyelids around each event frame.

    Only eyelid landmarks move; at each event center the lid aperture is
    exactly zero.  Overlapping events merge by taking the larger closure.
    Returns new (faces, eyes) arrays.
    """
    faces = np.array(faces, dtype=np.float64, copy=True)
    eyes = np.array(eyes, dtype=np.float64, copy=True)
    t = faces.shape[0]
    if duration < 1:
        raise ValueError("blink duration must be at least 1 frame")
    half = max(1, duration // 2)
    amount = np.zeros(t)
    for center in at_frames:
        center = int(center)
        if not 0 <= center < t:
            raise ValueError(f"blink frame {center} outside sequence of length {t}")
        for d in range(-half, half + 1):
            if 0 <= center + d < t:
                amount[center + d] = max(amount[center + d], 1.0 - abs(d) / half)
    for i in np.nonzero(amount > 0)[0]:
        close_eyes(eyes[i], faces[i], float(amount[i]))
    return faces, eyes


def apply_gaze_offset(eyes: np.ndarray, offset) -> np.ndarray:
    """Shift the iris/pupil landmarks of both eyes by (dx, dy)."""
    out = np.array(eyes, dtype=np.float64, copy=True)
    dx, dy = float(offset[0]), float(offset[1])
    for block in (0, geo.EYE_BLOCK):
        out[:, block + geo.EYE_IRIS.start : block + geo.EYE_IRIS.stop] += (dx, dy)
        out[:, block + geo.EYE_PUPIL] += (dx, dy)
    return out


def _load_source(source) -> tuple[LandmarkFrame, HeadPose]:
    if isinstance(source, LandmarkFrame):
        frame, pose = source, None
    else:
        frame, pose = read_frame(source, 0)
    pose = pose or HeadPose()
    if frame.space in (Space.RAW, Space.POSED):
        frame = geo.frontalize(frame, pose)
    if frame.space is Space.FRONTAL:
        frame, _ = geo.normalize_scale(frame)
    if frame.space is not Space.FRONTAL_NORMALIZED:
        raise ValueError(f"cannot normalize source frame in space {frame.space.value}")
    return frame, pose


def _build_poses(req: InferenceRequest, num_frames: int, mfcc, source_pose: HeadPose,
                 posegen_ckpt) -> np.ndarray:
    if req.pose_mode == "fixed":
        return np.tile(source_pose.to_array(), (num_frames, 1))
    if req.pose_mode == "transfer":
        poses = read_pose_file(req.pose_file)
        if poses.shape[0] < num_frames:
            raise ValueError(
                f"pose file has {poses.shape[0]} frames, need {num_frames}"
            )
        return poses[:num_frames]
    if posegen_ckpt is None:
        raise CheckpointError("generated pose mode requires a posegen checkpoint")
    posegen = load_checkpoint(posegen_ckpt)
    if posegen.which != "posegen":
        raise CheckpointError(f"expected a posegen checkpoint, got {posegen.which!r}")
    return posegen.model.sample_poses(mfcc, seed=req.seed, scale=source_pose.scale)


def infer(req: InferenceRequest, s2l_ckpt, l2l_ckpt, posegen_ckpt=None,
          out_dir=None, render_size: int = 512, oracle_seed: int | None = None) -> dict:
    """Run the landmark, pose, and latent stages; optionally render and persist.

    Returns a dict with the frontal landmark sequence, pose sequence, posed
    landmarks, latent keypoints, and (when out_dir is given) output paths.
    """
    s2l = load_checkpoint(s2l_ckpt)
    l2l = load_checkpoint(l2l_ckpt)
    if s2l.which != "s2l":
        raise CheckpointError(f"expected an s2l checkpoint, got {s2l.which!r}")
    if l2l.which != "l2l":
        raise CheckpointError(f"expected an l2l checkpoint, got {l2l.which!r}")

    waveform = req.audio if isinstance(req.audio, Waveform) else load_wav(req.audio)
    features = compute_mfcc(waveform).mfcc
    num_frames = features.shape[0]

    source, source_pose = _load_source(req.source)
    faces, eyes = s2l.model.rollout_from_frame(source, features, req.emotion)

    if req.blink_frames:
        faces, eyes = blink_inject(faces, eyes, req.blink_frames, req.blink_duration)
    if any(req.gaze_offset):
        eyes = apply_gaze_offset(eyes, req.gaze_offset)

    poses = _build_poses(req, num_frames, features, source_pose, posegen_ckpt)
    posed = geo.apply_pose_seq(faces, poses)

    seed = oracle_seed if oracle_seed is not None else l2l.extra.get("oracle_seed", 0)
    oracle = LatentOracle(int(seed))
    kp_src = oracle.keypoints(LandmarkFrame(posed[0], eyes[0], Space.POSED))
    latents = l2l.model.rollout_posed(posed, Space.POSED, features, kp_src, req.emotion)

    result = {
        "frames": num_frames,
        "faces_frontal": faces,
        "eyes": eyes,
        "poses": poses,
        "faces_posed": posed,
        "latents": latents,
    }
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_landmark_file(out_dir / "landmarks_frontal.jsonl", faces, eyes,
                            Space.FRONTAL_NORMALIZED, poses=poses)
        write_landmark_file(out_dir / "landmarks_posed.jsonl", posed, eyes,
                            Space.POSED, poses=poses)
        write_pose_file(out_dir / "poses.jsonl", poses)
        np.save(out_dir / "latents.npy", latents)
        frame_paths = render(faces=posed, eyes=None, latents=latents,
                             size=render_size, out_dir=out_dir / "frames")
        summary = {
            "frames": num_frames,
            "pose_mode": req.pose_mode,
            "seed": req.seed,
            "emotion": [round(float(v), 8) for v in req.emotion.weights],
            "render_size": render_size,
            "outputs": {
                "landmarks_frontal": "landmarks_frontal.jsonl",
                "landmarks_posed": "landmarks_posed.jsonl",
                "poses": "poses.jsonl",
                "latents": "latents.npy",
                "frame_dir": "frames",
                "frame_count": len(frame_paths),
            },
        }
        (out_dir / "result.json").write_text(
            json.dumps(summary, indent=2, sort_keys=True) + "\n"
        )
        result["out_dir"] = out_dir
    return result
