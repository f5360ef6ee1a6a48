"""Landmark metrics and evaluation reports.

All four metrics compare predicted and ground-truth landmark sequences in a
normalized 2D frame, so any common rigid pose cancels out:

* M-P / M-V: each frame is renormalized so the mouth corners sit at (-1, 0)
  and (1, 0); the metric is the mean absolute error over the 20 mouth
  landmarks' xy coordinates (positions, and first differences for M-V).
* F-P / F-V: each frame is recentered on its landmark centroid and scaled to
  ear distance 2; mean absolute error over all 68 landmarks' xy coordinates.

Absolute errors are averaged over coordinates (not Euclidean per landmark).
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import geometry as geo
from .errors import DegenerateFaceError
from .synthdata import load_manifest
from .landmark_io import load_clip_arrays
from .training import load_checkpoint

MOUTH = geo.MOUTH


def _maybe_frontalize(seq: np.ndarray, poses) -> np.ndarray:
    seq = np.asarray(seq, dtype=np.float64)
    if poses is None:
        return seq
    return geo.frontalize_seq(seq, np.asarray(poses, dtype=np.float64))


def _ear_normalize(seq: np.ndarray) -> np.ndarray:
    """Recenter each frame on its centroid and scale ear distance to 2."""
    seq = seq - seq.mean(axis=1, keepdims=True)
    d = np.linalg.norm(seq[:, geo.LEFT_EAR] - seq[:, geo.RIGHT_EAR], axis=-1)
    if np.any(d < 1e-12):
        raise DegenerateFaceError("ear landmarks coincide")
    return seq * (2.0 / d)[:, None, None]


def mouth_metrics(pred, gt, pred_poses=None, gt_poses=None):
    """(M-P, M-V): mouth landmark position/velocity MAE in the mouth frame."""
    pred = _maybe_frontalize(pred, pred_poses)
    gt = _maybe_frontalize(gt, gt_poses)
    if pred.shape != gt.shape or pred.shape[0] < 2:
        raise ValueError("sequences must share a length of at least 2")
    p = geo.metric_normalize_xy(pred[..., :2])[:, MOUTH]
    g = geo.metric_normalize_xy(gt[..., :2])[:, MOUTH]
    mp = float(np.abs(p - g).mean())
    mv = float(np.abs(np.diff(p, axis=0) - np.diff(g, axis=0)).mean())
    return mp, mv


def face_metrics(pred, gt, pred_poses=None, gt_poses=None):
    """(F-P, F-V): whole-face position/velocity MAE in the ear-normalized frame."""
    pred = _maybe_frontalize(pred, pred_poses)
    gt = _maybe_frontalize(gt, gt_poses)
    if pred.shape != gt.shape or pred.shape[0] < 2:
        raise ValueError("sequences must share a length of at least 2")
    p = _ear_normalize(pred)[..., :2]
    g = _ear_normalize(gt)[..., :2]
    fp = float(np.abs(p - g).mean())
    fv = float(np.abs(np.diff(p, axis=0) - np.diff(g, axis=0)).mean())
    return fp, fv


@dataclass
class EvalReport:
    per_clip: list = field(default_factory=list)
    aggregate: dict = field(default_factory=dict)
    clip_count: int = 0
    config_hash: str = ""

    def to_dict(self) -> dict:
        return {
            "clip_count": self.clip_count,
            "config_hash": self.config_hash,
            "aggregate": self.aggregate,
            "per_clip": self.per_clip,
        }

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


METRIC_KEYS = ("M-P", "M-V", "F-P", "F-V", "KP-L1")


def build_report(rows: list[dict], config: dict | None = None) -> EvalReport:
    """Aggregate per-clip metric rows; the aggregate is the per-clip mean."""
    agg = {}
    for key in METRIC_KEYS:
        vals = [r[key] for r in rows if key in r]
        if vals:
            agg[key] = float(np.mean(vals))
    digest = hashlib.sha256(
        json.dumps(config or {}, sort_keys=True).encode()
    ).hexdigest()[:16]
    return EvalReport(per_clip=rows, aggregate=agg, clip_count=len(rows),
                      config_hash=digest)


def evaluate_sequences(pairs: list[dict], config: dict | None = None) -> EvalReport:
    """Metric rows for (pred, gt) landmark sequence pairs.

    Each pair dict carries: clip_id, pred (T,68,3), gt (T,68,3), and
    optionally pred_kps / gt_kps (T,20,3).  Degenerate clips are skipped with
    a warning.
    """
    rows = []
    for pair in pairs:
        try:
            mp, mv = mouth_metrics(pair["pred"], pair["gt"])
            fp, fv = face_metrics(pair["pred"], pair["gt"])
        except DegenerateFaceError as exc:
            warnings.warn(f"skipping clip {pair.get('clip_id')}: {exc}")
            continue
        row = {"clip_id": pair.get("clip_id", ""), "M-P": mp, "M-V": mv,
               "F-P": fp, "F-V": fv}
        if "pred_kps" in pair and "gt_kps" in pair:
            row["KP-L1"] = float(np.abs(pair["pred_kps"] - pair["gt_kps"]).mean())
        rows.append(row)
    return build_report(rows, config)


def evaluate(s2l_ckpt, l2l_ckpt, manifest_path, split: str = "test",
             max_clips: int | None = None, report_path=None) -> EvalReport:
    """Run the landmark pipeline per clip and score it against ground truth.

    Poses are transferred from the ground-truth clip, so the landmark metrics
    isolate the learned stages.
    """
    from .emotion import EmotionVector  # local import to keep module load light

    s2l = load_checkpoint(s2l_ckpt)
    l2l = load_checkpoint(l2l_ckpt)
    if s2l.which != "s2l" or l2l.which != "l2l":
        raise CheckpointMismatch(s2l.which, l2l.which)

    manifest_path = Path(manifest_path)
    manifest = load_manifest(manifest_path)
    entries = [e for e in manifest["clips"] if e.get("split", "train") == split]
    if max_clips:
        entries = entries[:max_clips]

    pairs = []
    for entry in entries:
        arrays = load_clip_arrays(manifest_path.parent, entry)
        emotion = EmotionVector(arrays["emotion"])
        source = geo.LandmarkFrame(arrays["faces"][0], arrays["eyes"][0],
                                   geo.Space.FRONTAL_NORMALIZED)
        pred_faces, _ = s2l.model.rollout_from_frame(source, arrays["features"], emotion)
        posed_pred = geo.apply_pose_seq(pred_faces, arrays["poses"])
        pred_kps = l2l.model.rollout_posed(posed_pred, geo.Space.POSED,
                                           arrays["features"], arrays["latents"][0],
                                           emotion)
        pairs.append({
            "clip_id": entry["clip_id"],
            "pred": pred_faces,
            "gt": arrays["faces"],
            "pred_kps": pred_kps,
            "gt_kps": arrays["latents"],
        })
    config = {"s2l": str(s2l_ckpt), "l2l": str(l2l_ckpt), "split": split,
              "manifest": str(manifest_path)}
    report = evaluate_sequences(pairs, config)
    if report_path:
        report.save(report_path)
    return report


class CheckpointMismatch(ValueError):
    def __init__(self, *kinds):
        super().__init__(f"checkpoints have unexpected kinds: {kinds}")
