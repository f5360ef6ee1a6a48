"""Losses, learning-rate schedule, training loops, and checkpoints."""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from . import models as M
from .errors import CheckpointError, TrainingDivergedError
from .geometry import apply_pose_seq
from .landmark_io import load_clip_arrays
from .models import ModelConfig, build_model, normalize_pose6
from .synthdata import load_manifest

CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    batch_size: int = 32
    warmup_steps: int = 500
    total_steps: int = 20000
    peak_lr: float = 5e-4
    start_lr: float = 1e-5
    y_weight: float = 2.0
    velocity_weight: float = 1.0
    kl_weight: float = 1e-3
    seed: int = 0
    crop_frames: int = 90
    grad_clip: float = 1.0
    teacher_noise: float = 0.003
    log_every: int = 10
    checkpoint_every: int = 5000
    calibration_batches: int = 50

    def __post_init__(self):
        if self.warmup_steps < 0 or self.total_steps < 0:
            raise ValueError("step counts must be nonnegative")
        if self.total_steps > 0 and self.warmup_steps >= self.total_steps:
            raise ValueError("warmup_steps must be smaller than total_steps")
        for name in ("y_weight", "velocity_weight", "kl_weight"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @classmethod
    def desk(cls, **kw) -> "TrainConfig":
        return cls(**kw)

    @classmethod
    def paper(cls, **kw) -> "TrainConfig":
        kw.setdefault("batch_size", 256)
        kw.setdefault("warmup_steps", 10000)
        kw.setdefault("total_steps", 1_000_000)
        return cls(**kw)


# -- losses -------------------------------------------------------------------


def weighted_l1(pred: torch.Tensor, gt: torch.Tensor, y_weight: float = 1.0) -> torch.Tensor:
    """Mean |pred - gt| with the y coordinate (component 1) scaled by y_weight.

    Inputs are (..., K, D) landmark tensors with D coordinates per point.
    """
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: {tuple(pred.shape)} vs {tuple(gt.shape)}")
    w = torch.ones(pred.shape[-1], dtype=pred.dtype, device=pred.device)
    w[1] = y_weight
    return ((pred - gt).abs() * w).mean()


def velocity_loss(pred: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """L1 between first-order temporal differences; time is axis -3."""
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: {tuple(pred.shape)} vs {tuple(gt.shape)}")
    if pred.shape[-3] < 2:
        raise ValueError("velocity loss needs at least two frames")
    return (pred.diff(dim=-3) - gt.diff(dim=-3)).abs().mean()


def kl_loss(mu: torch.Tensor, sigma: torch.Tensor) -> torch.Tensor:
    """KL(N(mu, sigma) || N(0, 1)), summed over dims, averaged over the batch."""
    if (sigma <= 0).any():
        raise ValueError("sigma must be elementwise positive")
    per = 0.5 * (mu**2 + sigma**2 - 1.0 - torch.log(sigma**2))
    return per.sum(dim=-1).mean()


def lr_schedule(step: int, cfg: TrainConfig) -> float:
    """Linear warmup from start_lr to peak_lr, then cosine decay to 0."""
    if step < 0:
        raise ValueError("step must be nonnegative")
    if step >= cfg.total_steps:
        return 0.0
    if step < cfg.warmup_steps:
        return cfg.start_lr + (cfg.peak_lr - cfg.start_lr) * (step / cfg.warmup_steps)
    span = cfg.total_steps - cfg.warmup_steps
    frac = (step - cfg.warmup_steps) / span
    return cfg.peak_lr * 0.5 * (1.0 + math.cos(math.pi * frac))


# -- corpus loading -----------------------------------------------------------


@dataclass
class LoadedClip:
    clip_id: str
    faces: torch.Tensor       # (T, 204) float32, frontal normalized
    eyes: torch.Tensor        # (T, 104)
    posed_faces: torch.Tensor  # (T, 204), pose applied
    poses: torch.Tensor       # (T, 7) float32
    latents: torch.Tensor     # (T, 60)
    features: torch.Tensor    # (T, 40)
    emotion: torch.Tensor     # (8,)

    @property
    def num_frames(self) -> int:
        return self.faces.shape[0]


class CorpusData:
    """All clips of a corpus manifest loaded into memory, grouped by split."""

    def __init__(self, manifest_path):
        manifest_path = Path(manifest_path)
        manifest = load_manifest(manifest_path)
        self.manifest = manifest
        self.oracle_seed = int(manifest.get("oracle_seed", 0))
        self.by_split: dict[str, list[LoadedClip]] = {"train": [], "val": [], "test": []}
        for entry in manifest["clips"]:
            arrays = load_clip_arrays(manifest_path.parent, entry)
            t = arrays["faces"].shape[0]
            posed = apply_pose_seq(arrays["faces"], arrays["poses"])
            clip = LoadedClip(
                clip_id=entry["clip_id"],
                faces=torch.from_numpy(arrays["faces"].reshape(t, -1)).float(),
                eyes=torch.from_numpy(arrays["eyes"].reshape(t, -1)).float(),
                posed_faces=torch.from_numpy(posed.reshape(t, -1)).float(),
                poses=torch.from_numpy(arrays["poses"]).float(),
                latents=torch.from_numpy(arrays["latents"].reshape(t, -1)).float(),
                features=torch.from_numpy(arrays["features"]).float(),
                emotion=torch.from_numpy(arrays["emotion"]).float(),
            )
            self.by_split.setdefault(entry.get("split", "train"), []).append(clip)

    def clips(self, split: str) -> list[LoadedClip]:
        return self.by_split.get(split, [])


def _sample_batch(rng: np.random.Generator, clips: list[LoadedClip], batch: int, length: int):
    rows = {"faces": [], "eyes": [], "posed_faces": [], "poses": [], "latents": [],
            "features": [], "emotion": []}
    idx = rng.integers(0, len(clips), size=batch)
    for i in idx:
        clip = clips[int(i)]
        start = int(rng.integers(0, max(1, clip.num_frames - length + 1)))
        sl = slice(start, start + length)
        rows["faces"].append(clip.faces[sl])
        rows["eyes"].append(clip.eyes[sl])
        rows["posed_faces"].append(clip.posed_faces[sl])
        rows["poses"].append(clip.poses[sl])
        rows["latents"].append(clip.latents[sl])
        rows["features"].append(clip.features[sl])
        rows["emotion"].append(clip.emotion)
    return {k: torch.stack(v) for k, v in rows.items()}


def _noisy(x: torch.Tensor, std: float, generator: torch.Generator | None):
    """Perturbed copy of a teacher input; targets stay clean."""
    if std <= 0:
        return x
    return x + std * torch.randn(x.shape, generator=generator, dtype=x.dtype)


def model_losses(which: str, model, batch: dict, cfg: TrainConfig,
                 generator: torch.Generator | None = None):
    """Teacher-forced loss and its components for one batch.

    Teacher inputs (previous-frame landmarks/keypoints) receive small seeded
    Gaussian noise so rollouts stay on-manifold when the model consumes its
    own slightly-off predictions.
    """
    b, t = batch["features"].shape[:2]
    noise = cfg.teacher_noise if model.training else 0.0
    if which == "s2l":
        faces, eyes = batch["faces"], batch["eyes"]
        pf, pe = model(batch["features"], batch["emotion"], faces[:, 0], eyes[:, 0],
                       teacher_faces=_noisy(faces, noise, generator),
                       teacher_eyes=_noisy(eyes, noise, generator))
        pf = pf.reshape(b, t, 68, 3)
        pe = pe.reshape(b, t, 52, 2)
        gf = faces.reshape(b, t, 68, 3)
        ge = eyes.reshape(b, t, 52, 2)
        pos = weighted_l1(pf, gf, cfg.y_weight) + weighted_l1(pe, ge, cfg.y_weight)
        vel = velocity_loss(pf, gf) + velocity_loss(pe, ge)
        loss = pos + cfg.velocity_weight * vel
        return loss, {"position_l1": float(pos.detach()), "velocity_l1": float(vel.detach())}
    if which == "posegen":
        poses6 = batch["poses"][..., :6]
        recon, mu, sigma = model(batch["features"], poses6, generator=generator)
        rec = (normalize_pose6(recon) - normalize_pose6(poses6)).abs().mean()
        kl = kl_loss(mu, sigma)
        loss = rec + cfg.kl_weight * kl
        return loss, {"reconstruction_l1": float(rec.detach()), "kl": float(kl.detach())}
    if which == "l2l":
        kps = batch["latents"]
        pred = model(batch["features"], batch["emotion"], batch["posed_faces"],
                     kps[:, 0], teacher_kps=_noisy(kps, noise, generator))
        l1 = (pred - kps).abs().mean()
        return l1, {"keypoint_l1": float(l1.detach())}
    raise ValueError(f"unknown model {which!r}")


def calibrate_batchnorm(which: str, model, clips, cfg: TrainConfig,
                        rng: np.random.Generator, generator: torch.Generator,
                        length: int):
    """Recompute batch-norm running statistics with a cumulative average.

    Batch statistics drift over training while running statistics trail them;
    this pass pins the inference-mode statistics to the converged model so
    eval-mode outputs match training behavior.
    """
    bns = [m for m in model.modules()
           if isinstance(m, torch.nn.modules.batchnorm._BatchNorm)]
    if not bns or cfg.calibration_batches <= 0:
        return
    saved_momentum = [bn.momentum for bn in bns]
    for bn in bns:
        bn.reset_running_stats()
        bn.momentum = None  # cumulative moving average
    model.train()
    with torch.no_grad():
        for _ in range(cfg.calibration_batches):
            batch = _sample_batch(rng, clips, cfg.batch_size, length)
            model_losses(which, model, batch, cfg, generator)
    for bn, momentum in zip(bns, saved_momentum):
        bn.momentum = momentum


@dataclass
class TrainResult:
    checkpoint_path: Path
    metrics_path: Path
    steps: int
    first_loss: float
    final_loss: float


def train_model(which: str, corpus, cfg: TrainConfig, model_cfg: ModelConfig | None = None,
                out_dir="runs", quiet: bool = True) -> TrainResult:
    """Teacher-forced optimization of one model over the corpus train split."""
    model_cfg = model_cfg or ModelConfig.desk()
    if not isinstance(corpus, CorpusData):
        corpus = CorpusData(corpus)
    clips = corpus.clips("train")
    if not clips:
        raise ValueError("corpus has no training clips")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics_path = out_dir / "metrics.jsonl"

    model = build_model(which, model_cfg, seed=cfg.seed)
    model.train()
    opt = torch.optim.Adam(model.parameters(), lr=cfg.start_lr)
    rng = np.random.default_rng(np.random.SeedSequence([0x7A, cfg.seed]))
    generator = torch.Generator().manual_seed(cfg.seed)
    extra = {"oracle_seed": corpus.oracle_seed}

    length = min(cfg.crop_frames, min(c.num_frames for c in clips))
    first_loss = math.nan
    final_loss = math.nan
    ckpt_path = out_dir / f"{which}.pt"

    with open(metrics_path, "w") as log:
        for step in range(cfg.total_steps):
            lr = lr_schedule(step, cfg)
            for group in opt.param_groups:
                group["lr"] = lr
            batch = _sample_batch(rng, clips, cfg.batch_size, length)
            loss, parts = model_losses(which, model, batch, cfg, generator)
            if not torch.isfinite(loss):
                save_checkpoint(out_dir / f"{which}.diverged.pt", which, model,
                                model_cfg, cfg, step=step, optimizer=opt, extra=extra)
                raise TrainingDivergedError(
                    f"{which} loss became non-finite at step {step}; "
                    f"diagnostic checkpoint written"
                )
            opt.zero_grad()
            loss.backward()
            if cfg.grad_clip > 0:
                torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
            opt.step()

            final_loss = float(loss.detach())
            if step == 0:
                first_loss = final_loss
            if step % cfg.log_every == 0 or step == cfg.total_steps - 1:
                rec = {"step": step, "loss": final_loss, "lr": lr}
                rec.update(parts)
                log.write(json.dumps(rec) + "\n")
            if cfg.checkpoint_every and step > 0 and step % cfg.checkpoint_every == 0:
                save_checkpoint(out_dir / f"{which}.step{step}.pt", which, model,
                                model_cfg, cfg, step=step, optimizer=opt, extra=extra)
            if not quiet and step % max(1, cfg.total_steps // 20) == 0:
                print(f"[{which}] step {step}/{cfg.total_steps} loss {final_loss:.5f}")

    if cfg.total_steps > 0:
        calibrate_batchnorm(which, model, clips, cfg, rng, generator, length)
    save_checkpoint(ckpt_path, which, model, model_cfg, cfg,
                    step=cfg.total_steps, optimizer=opt, extra=extra)
    return TrainResult(ckpt_path, metrics_path, cfg.total_steps, first_loss, final_loss)


def teacher_loss(which: str, model, clips: list[LoadedClip], cfg: TrainConfig) -> float:
    """Mean teacher-forced loss over whole clips (evaluation mode)."""
    was_training = model.training
    model.eval()
    total = 0.0
    gen = torch.Generator().manual_seed(cfg.seed)
    with torch.no_grad():
        for clip in clips:
            batch = {
                "faces": clip.faces[None], "eyes": clip.eyes[None],
                "posed_faces": clip.posed_faces[None], "poses": clip.poses[None],
                "latents": clip.latents[None], "features": clip.features[None],
                "emotion": clip.emotion[None],
            }
            loss, _ = model_losses(which, model, batch, cfg, gen)
            total += float(loss)
    model.train(was_training)
    return total / max(1, len(clips))


# -- checkpoints --------------------------------------------------------------


def save_checkpoint(path, which: str, model, model_cfg: ModelConfig,
                    train_cfg: TrainConfig | None = None, step: int = 0,
                    optimizer=None, extra: dict | None = None):
    """Atomic checkpoint write (temp file then rename)."""
    path = Path(path)
    payload = {
        "version": CHECKPOINT_VERSION,
        "which": which,
        "model_cfg": asdict(model_cfg),
        "train_cfg": asdict(train_cfg) if train_cfg is not None else None,
        "step": step,
        "model_state": model.state_dict(),
        "optimizer_state": optimizer.state_dict() if optimizer is not None else None,
        "extra": extra or {},
    }
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(payload, tmp)
    os.replace(tmp, path)
    return path


@dataclass
class LoadedCheckpoint:
    which: str
    model: torch.nn.Module
    model_cfg: ModelConfig
    step: int
    train_cfg: dict | None
    optimizer_state: dict | None
    extra: dict


def load_checkpoint(path) -> LoadedCheckpoint:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint {path} does not exist")
    payload = torch.load(path, map_location="cpu", weights_only=False)
    version = payload.get("version")
    if version is None or version > CHECKPOINT_VERSION:
        raise CheckpointError(
            f"checkpoint {path} has unsupported version {version!r} "
            f"(supported <= {CHECKPOINT_VERSION})"
        )
    cfg_dict = dict(payload["model_cfg"])
    cfg_dict["audio"] = M.AudioEncoderConfig(**cfg_dict["audio"])
    model_cfg = ModelConfig(**cfg_dict)
    model = build_model(payload["which"], model_cfg)
    model.load_state_dict(payload["model_state"])
    model.eval()
    return LoadedCheckpoint(
        which=payload["which"],
        model=model,
        model_cfg=model_cfg,
        step=int(payload.get("step", 0)),
        train_cfg=payload.get("train_cfg"),
        optimizer_state=payload.get("optimizer_state"),
        extra=payload.get("extra", {}),
    )
