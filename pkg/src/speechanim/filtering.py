"""Corpus filters over landmark and pose sequences.

Each filter fails a clip only when its statistic exceeds the threshold
strictly; values exactly at the threshold pass.  The hand-presence filter
consumes a per-clip metadata flag (no detector runs here).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .landmark_io import read_landmark_file, read_pose_file
from .synthdata import load_manifest


@dataclass
class FilterConfig:
    temporal_jump: bool = True
    jump_threshold: float = 0.15
    rotation: bool = True
    max_rotation_deg: float = 45.0
    scale: bool = True
    max_scale_ratio: float = 1.3
    missing: bool = True
    hands: bool = True


@dataclass
class FilterEntry:
    """Verdict of one filter on one clip."""

    name: str
    passed: bool
    offending_frames: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)


@dataclass
class FilterReport:
    clip_id: str
    entries: list

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def to_dict(self) -> dict:
        return {
            "clip_id": self.clip_id,
            "passed": self.passed,
            "filters": [asdict(e) for e in self.entries],
        }


def filter_temporal_jump(seq: np.ndarray, threshold: float = 0.15) -> FilterEntry:
    """Fail when any adjacent-frame mean landmark displacement exceeds threshold."""
    seq = np.asarray(seq, dtype=np.float64)
    if seq.shape[0] < 2:
        raise ValueError("temporal-jump filter needs at least two frames")
    disp = np.linalg.norm(np.diff(seq, axis=0), axis=-1).mean(axis=-1)
    offending = [int(i) + 1 for i in np.nonzero(disp > threshold)[0]]
    return FilterEntry(
        "temporal_jump",
        passed=not offending,
        offending_frames=offending,
        stats={"max_mean_displacement": float(disp.max())},
    )


def filter_rotation(poses: np.ndarray, max_deg: float = 45.0) -> FilterEntry:
    """Fail when any |yaw|, |pitch|, or |roll| exceeds max_deg."""
    poses = np.asarray(poses, dtype=np.float64)
    if poses.shape[0] < 1:
        raise ValueError("rotation filter needs a nonempty pose sequence")
    angles = np.abs(poses[:, :3])
    offending = [int(i) for i in np.nonzero((angles > max_deg).any(axis=1))[0]]
    return FilterEntry(
        "rotation",
        passed=not offending,
        offending_frames=offending,
        stats={"max_abs_angle_deg": float(angles.max())},
    )


def filter_scale_variation(poses: np.ndarray, max_ratio: float = 1.3) -> FilterEntry:
    """Fail when max_scale / min_scale exceeds max_ratio."""
    poses = np.asarray(poses, dtype=np.float64)
    if poses.shape[0] < 1:
        raise ValueError("scale filter needs a nonempty pose sequence")
    scales = poses[:, 6] if poses.ndim == 2 and poses.shape[1] >= 7 else poses.reshape(-1)
    if (scales <= 0).any():
        raise ValueError("scales must be positive")
    ratio = float(scales.max() / scales.min())
    return FilterEntry(
        "scale_variation",
        passed=not ratio > max_ratio,
        offending_frames=[],
        stats={"scale_ratio": ratio},
    )


def filter_missing_frames(seq: np.ndarray | None) -> FilterEntry:
    """Fail on an empty sequence or any non-finite landmark."""
    if seq is None or np.asarray(seq).shape[0] == 0:
        return FilterEntry("missing_frames", passed=False, stats={"empty": True})
    seq = np.asarray(seq, dtype=np.float64)
    bad = ~np.isfinite(seq).reshape(seq.shape[0], -1).all(axis=1)
    offending = [int(i) for i in np.nonzero(bad)[0]]
    return FilterEntry(
        "missing_frames",
        passed=not offending,
        offending_frames=offending,
        stats={"bad_frames": len(offending)},
    )


def filter_clip(faces: np.ndarray, poses: np.ndarray, flags: dict,
                config: FilterConfig, clip_id: str = "clip") -> FilterReport:
    entries = []
    if config.missing:
        entries.append(filter_missing_frames(faces))
    finite = entries[-1].passed if config.missing else bool(np.isfinite(faces).all())
    if config.temporal_jump:
        if finite and faces.shape[0] >= 2:
            entries.append(filter_temporal_jump(faces, config.jump_threshold))
        else:
            entries.append(FilterEntry("temporal_jump", passed=False,
                                       stats={"skipped": "non-finite or short sequence"}))
    if config.rotation:
        entries.append(filter_rotation(poses, config.max_rotation_deg))
    if config.scale:
        entries.append(filter_scale_variation(poses, config.max_scale_ratio))
    if config.hands:
        present = bool(flags.get("hands_present", False))
        entries.append(FilterEntry("hands", passed=not present,
                                   stats={"hands_present": present}))
    return FilterReport(clip_id, entries)


def run_filters(manifest_path, config: FilterConfig | None = None,
                out_manifest=None, report_path=None):
    """Filter a corpus manifest; keep clips passing all enabled filters.

    Writes the filtered manifest (default: manifest.filtered.json next to the
    input) and a JSON report next to it.  Returns (filtered_manifest_path,
    reports).
    """
    config = config or FilterConfig()
    manifest_path = Path(manifest_path)
    manifest = load_manifest(manifest_path)
    corpus_dir = manifest_path.parent

    reports, kept = [], []
    for entry in manifest["clips"]:
        base = corpus_dir / entry["dir"]
        faces, _, _, _ = read_landmark_file(base / entry["paths"]["landmarks"])
        poses = read_pose_file(base / entry["paths"]["poses"])
        report = filter_clip(faces, poses, entry.get("flags", {}), config,
                             clip_id=entry["clip_id"])
        reports.append(report)
        if report.passed:
            kept.append(entry)

    filtered = dict(manifest)
    filtered["clips"] = kept
    filtered["clip_count"] = len(kept)
    filtered["filtered_from"] = manifest.get("clip_count", len(manifest["clips"]))

    out_manifest = Path(out_manifest) if out_manifest else manifest_path.with_suffix("") \
        .with_name(manifest_path.stem + ".filtered.json")
    out_manifest.write_text(json.dumps(filtered, indent=2, sort_keys=True) + "\n")

    report_path = Path(report_path) if report_path else out_manifest.with_name(
        out_manifest.stem.replace(".filtered", "") + ".filter_report.json")
    aggregate = {
        "config": asdict(config),
        "total": len(reports),
        "kept": len(kept),
        "removed": len(reports) - len(kept),
        "clips": [r.to_dict() for r in reports],
    }
    report_path.write_text(json.dumps(aggregate, indent=2, sort_keys=True) + "\n")
    return out_manifest, reports
