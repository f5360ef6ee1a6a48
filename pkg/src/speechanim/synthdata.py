"""Procedural audio/landmark/pose/latent corpus and the latent-keypoint oracle.

Clips are generated from a parametric face template: the jaw and lips open
with the (smoothed, one-frame-lagged) amplitude envelope of a synthesized
speech-like waveform, eye blinks fire as timed events, the emotion vector
adds a fixed per-emotion displacement field scaled by its intensity, and the
head follows a bounded smooth random walk.  Per-frame Gaussian landmark
jitter emulates detector noise; each frame is re-normalized afterwards
(centroid at the origin, ear distance exactly 2) just as a real pipeline
normalizes noisy detections.

A fixed random two-layer tanh network maps posed landmarks to 20 latent
keypoints in [-1, 1].  Its weights are drawn once from a seed and rescaled
to spectral norm 2, making the map deterministic and Lipschitz-bounded; it
stands in as ground truth for the landmark-to-latent stage.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import geometry as geo
from .audio import Waveform, amplitude_envelope, compute_mfcc, align_frames, save_features, save_wav
from .emotion import EMOTION_DIM, EMOTIONS, EmotionVector
from .errors import SpaceContractError
from .geometry import LandmarkFrame, Space
from .landmark_io import write_landmark_file, write_pose_file

NUM_LATENT_KEYPOINTS = 20
FPS = 30

MOUTH_REST_GAP = 0.07  # inner-lip gap of the closed template mouth
ENVELOPE_KNEE = 0.1    # soft-compression constant mapping RMS to [0, 1)


# -- face template -----------------------------------------------------------


def _identity_params(identity: int) -> dict:
    rng = np.random.default_rng(np.random.SeedSequence([0x1D, int(identity)]))
    u = lambda a, b: float(rng.uniform(a, b))
    return {
        "jaw_depth": u(0.82, 1.18),
        "eye_dx": u(-0.08, 0.08),
        "eye_dy": u(-0.07, 0.07),
        "mouth_width": u(0.78, 1.22),
        "mouth_dy": u(-0.08, 0.08),
        "nose_len": u(0.78, 1.22),
        "brow_dy": u(-0.07, 0.07),
    }


def base_face(identity: int = 0) -> np.ndarray:
    """Frontal normalized 68-point template for one synthetic identity.

    Centroid sits at the origin and the ear landmarks are exactly 2 apart.
    """
    p = _identity_params(identity)
    f = np.zeros((68, 3))

    t = np.linspace(0.0, 1.0, 17)
    ang = np.pi * (1.0 + t)
    f[0:17, 0] = np.cos(ang)
    f[0:17, 1] = 0.10 + 1.15 * p["jaw_depth"] * np.sin(ang)
    f[0:17, 2] = -0.20 + 0.20 * np.abs(np.sin(ang))

    bx = np.linspace(0.25, 0.75, 5)
    arc = 0.12 * np.sin(np.pi * np.linspace(0.1, 0.9, 5))
    by = 0.45 + p["brow_dy"] + arc
    f[17:22] = np.stack([-bx[::-1], by[::-1], np.full(5, 0.10)], axis=1)
    f[22:27] = np.stack([bx, by, np.full(5, 0.10)], axis=1)

    nose_tip_y = 0.32 - 0.34 * p["nose_len"]
    f[27:31, 0] = 0.0
    f[27:31, 1] = np.linspace(0.32, nose_tip_y, 4)
    f[27:31, 2] = np.linspace(0.12, 0.32, 4)
    nx = np.linspace(-0.16, 0.16, 5)
    f[31:36, 0] = nx
    f[31:36, 1] = nose_tip_y - 0.10 - 0.02 * np.sin(np.pi * np.linspace(0, 1, 5))
    f[31:36, 2] = 0.18 + 0.08 * np.sin(np.pi * np.linspace(0, 1, 5))

    for sl, cx in ((geo.RIGHT_EYE, -0.42 - p["eye_dx"]), (geo.LEFT_EYE, 0.42 + p["eye_dx"])):
        cy = 0.28 + p["eye_dy"]
        ex, ey = 0.16, 0.05
        pts = np.array(
            [
                [cx - ex, cy],
                [cx - 0.45 * ex, cy + ey],
                [cx + 0.45 * ex, cy + ey],
                [cx + ex, cy],
                [cx + 0.45 * ex, cy - ey],
                [cx - 0.45 * ex, cy - ey],
            ]
        )
        f[sl, :2] = pts
        f[sl, 2] = 0.05

    mw = 0.34 * p["mouth_width"]
    mh = 0.10
    imh = MOUTH_REST_GAP / 2.0
    yc = -0.42 + p["mouth_dy"]
    k = np.arange(1, 6) * np.pi / 6.0
    f[48] = [-mw, yc, 0.12]
    f[49:54, 0] = -mw * np.cos(k)
    f[49:54, 1] = yc + mh * np.sin(k)
    f[54] = [mw, yc, 0.12]
    f[55:60, 0] = mw * np.cos(k)
    f[55:60, 1] = yc - mh * np.sin(k)
    f[60] = [-0.82 * mw, yc, 0.12]
    f[61:64, 0] = [-0.45 * mw, 0.0, 0.45 * mw]
    f[61:64, 1] = yc + imh * np.array([0.8, 1.0, 0.8])
    f[64] = [0.82 * mw, yc, 0.12]
    f[65:68, 0] = [0.45 * mw, 0.0, -0.45 * mw]
    f[65:68, 1] = yc - imh * np.array([0.8, 1.0, 0.8])
    f[48:68, 2] = 0.12

    f -= f.mean(axis=0)
    f *= 2.0 / np.linalg.norm(f[geo.LEFT_EAR] - f[geo.RIGHT_EAR])
    return f


def base_eyes(face: np.ndarray) -> np.ndarray:
    """52-point eye set laid out around the template's eye outlines."""
    eyes = np.zeros((52, 2))
    for block, sl in ((0, geo.RIGHT_EYE), (geo.EYE_BLOCK, geo.LEFT_EYE)):
        region = face[sl, :2]
        cx, cy = region.mean(axis=0)
        ex = (region[:, 0].max() - region[:, 0].min()) / 2.0
        ey = 0.05
        xs = cx + ex * np.cos(np.linspace(np.pi, 0.0, 8))
        eyes[block + 0 : block + 8, 0] = xs
        eyes[block + 0 : block + 8, 1] = cy + ey * np.sin(np.linspace(0, np.pi, 8))
        eyes[block + 8 : block + 16, 0] = xs
        eyes[block + 8 : block + 16, 1] = cy - 0.8 * ey * np.sin(np.linspace(0, np.pi, 8))
        eyes[block + 16] = [cx - ex, cy]
        eyes[block + 17] = [cx + ex, cy]
        ia = np.linspace(0.0, 2.0 * np.pi, 7, endpoint=False)
        eyes[block + 18 : block + 25, 0] = cx + 0.055 * np.cos(ia)
        eyes[block + 18 : block + 25, 1] = cy + 0.055 * np.sin(ia)
        eyes[block + 25] = [cx, cy]
    return eyes


# -- emotion displacement fields ---------------------------------------------


def _build_emotion_fields() -> dict[str, np.ndarray]:
    fields = {name: np.zeros((68, 3)) for name in EMOTIONS}

    happy = fields["happy"]
    for i in (48, 54, 60, 64):
        happy[i, 1] = 0.10
    happy[48, 0] = -0.03
    happy[60, 0] = -0.02
    happy[54, 0] = 0.03
    happy[64, 0] = 0.02
    happy[(49, 53), 1] = 0.04

    sad = fields["sad"]
    for i in (48, 54, 60, 64):
        sad[i, 1] = -0.08
    sad[(21, 22), 1] = 0.05
    sad[(17, 26), 1] = -0.03

    angry = fields["angry"]
    angry[17:27, 1] = -0.06
    angry[(21, 22), 1] = -0.09
    angry[(20, 21), 0] = 0.02
    angry[(22, 23), 0] = -0.02

    fear = fields["fear"]
    fear[17:27, 1] = 0.08
    fear[(37, 38, 43, 44), 1] = 0.02
    fear[(55, 56, 57, 58, 59), 1] = -0.03
    fear[(65, 66, 67), 1] = -0.03

    surprise = fields["surprise"]
    surprise[17:27, 1] = 0.10
    surprise[(37, 38, 43, 44), 1] = 0.03
    surprise[(40, 41, 46, 47), 1] = -0.01
    surprise[55:60, 1] = -0.08
    surprise[65:68, 1] = -0.08
    surprise[(7, 8, 9), 1] = -0.04

    disgust = fields["disgust"]
    disgust[31:36, 1] = 0.04
    disgust[49:54, 1] = 0.05
    disgust[61:64, 1] = 0.04
    disgust[17:27, 1] = -0.03

    contempt = fields["contempt"]
    contempt[(48, 60), 1] = 0.08
    contempt[48, 0] = -0.02
    return fields


EMOTION_FIELDS = _build_emotion_fields()


def emotion_offset(vec: EmotionVector) -> np.ndarray:
    """Combined (68, 3) landmark displacement for an emotion vector."""
    out = np.zeros((68, 3))
    for name, w in zip(EMOTIONS, vec.weights):
        if w != 0.0:
            out += w * EMOTION_FIELDS[name]
    return out


# -- clip generation ----------------------------------------------------------


@dataclass
class ClipSpec:
    """Parameters of one synthetic clip."""

    duration_s: float = 3.0
    emotion: EmotionVector = field(default_factory=EmotionVector.neutral)
    identity: int = 0
    sample_rate: int = 16000
    landmark_jitter: float = 0.0
    mouth_gain: float = 0.30
    silent: bool = False

    def __post_init__(self):
        if not 1.0 <= self.duration_s <= 10.0:
            raise ValueError("clip duration must lie in [1, 10] seconds")
        if self.landmark_jitter < 0:
            raise ValueError("landmark jitter must be nonnegative")
        if self.mouth_gain < 0:
            raise ValueError("mouth gain must be nonnegative")


@dataclass
class ClipRecord:
    """One clip: waveform plus aligned landmark/pose/latent sequences."""

    clip_id: str
    waveform: Waveform
    landmarks: np.ndarray  # (T, 68, 3) frontal normalized
    eyes: np.ndarray       # (T, 52, 2)
    poses: np.ndarray      # (T, 7): yaw, pitch, roll, tx, ty, tz, scale
    latents: np.ndarray    # (T, 20, 3)
    emotion: EmotionVector
    identity: int = 0
    fps: int = FPS
    filter_flags: dict = field(default_factory=dict)

    def __post_init__(self):
        t = self.landmarks.shape[0]
        for name in ("eyes", "poses", "latents"):
            if getattr(self, name).shape[0] != t:
                raise ValueError(f"{name} length differs from landmark sequence")

    @property
    def num_frames(self) -> int:
        return self.landmarks.shape[0]


def _smooth_noise(rng: np.random.Generator, n: int, sigma_frames: float) -> np.ndarray:
    """Unit-variance Gaussian-filtered white noise of length n."""
    radius = int(4 * sigma_frames)
    kernel = np.exp(-0.5 * (np.arange(-radius, radius + 1) / sigma_frames) ** 2)
    kernel /= kernel.sum()
    x = rng.standard_normal(n + 2 * radius)
    y = np.convolve(x, kernel, mode="same")[radius : radius + n]
    return y / np.linalg.norm(kernel)


def synth_waveform(rng: np.random.Generator, duration_s: float, sample_rate: int) -> np.ndarray:
    """Amplitude-modulated formant-like tones separated by silences."""
    n = int(round(duration_s * sample_rate))
    out = np.zeros(n)
    t = 0.0
    while t < duration_s:
        t += float(rng.uniform(0.08, 0.35))  # pause
        syl = float(rng.uniform(0.12, 0.35))
        if t >= duration_s:
            break
        amp = float(rng.uniform(0.3, 0.85))
        f0 = float(rng.uniform(110.0, 220.0))
        f1 = f0 * float(rng.integers(2, 6))
        f2 = float(rng.uniform(800.0, 2400.0))
        i0 = int(t * sample_rate)
        i1 = min(n, int((t + syl) * sample_rate))
        if i1 <= i0:
            break
        ts = np.arange(i1 - i0) / sample_rate
        tone = np.sin(2 * np.pi * f0 * ts) + 0.5 * np.sin(2 * np.pi * f1 * ts)
        tone += 0.3 * np.sin(2 * np.pi * f2 * ts)
        tone += 0.02 * rng.standard_normal(ts.size)
        env = np.sin(np.pi * np.linspace(0.0, 1.0, ts.size)) ** 0.7
        out[i0:i1] += amp * env * tone / 1.8
        t += syl
    peak = np.abs(out).max()
    if peak > 0.95:
        out *= 0.95 / peak
    return out


def mouth_opening_curve(envelope: np.ndarray, gain: float) -> np.ndarray:
    """Opening amount per frame: soft-compressed envelope with a 1-frame lag."""
    compressed = envelope / (envelope + ENVELOPE_KNEE)
    lagged = np.concatenate([[compressed[0]], compressed[:-1]])
    return gain * lagged


def _apply_mouth_opening(face: np.ndarray, o: float) -> None:
    face[55:60, 1] -= o * np.array([0.6, 0.85, 1.0, 0.85, 0.6])
    face[65:68, 1] -= o * np.array([0.8, 1.0, 0.8])
    face[49:54, 1] += o * 0.15 * np.array([0.5, 0.8, 1.0, 0.8, 0.5])
    face[61:64, 1] += o * 0.10 * np.array([0.8, 1.0, 0.8])
    for i in (48, 54, 60, 64):
        face[i, 0] *= 1.0 - 0.10 * o
        face[i, 1] -= 0.25 * o
    face[6:11, 1] -= o * np.array([0.3, 0.5, 0.6, 0.5, 0.3])


def mouth_opening_signal(landmarks: np.ndarray) -> np.ndarray:
    """Inner-lip gap per frame, the quantity driven by the audio envelope."""
    return np.linalg.norm(landmarks[:, 62] - landmarks[:, 66], axis=-1)


def close_eyes(eyes: np.ndarray, face: np.ndarray, amount: float) -> None:
    """Blend upper lids toward lower lids in place; amount 1 closes fully."""
    for block in (0, geo.EYE_BLOCK):
        up = slice(block + 0, block + 8)
        lo = slice(block + 8, block + 16)
        eyes[up] = eyes[up] + amount * (eyes[lo] - eyes[up])
    for hi, lw in geo.FACE_LID_PAIRS:
        face[hi] = face[hi] + amount * (face[lw] - face[hi])


def _blink_events(rng: np.random.Generator, num_frames: int) -> list[int]:
    events, t = [], 0
    while True:
        t += int(rng.uniform(1.8, 4.2) * FPS)
        if t >= num_frames - 3:
            return events
        events.append(t)


BLINK_HALF_FRAMES = 3


def _pose_walk(rng: np.random.Generator, num_frames: int) -> np.ndarray:
    poses = np.zeros((num_frames, 7))
    for axis in range(3):
        amp = float(rng.uniform(8.0, 18.0))
        poses[:, axis] = 40.0 * np.tanh(amp * _smooth_noise(rng, num_frames, 12.0) / 40.0)
    for axis, amp in ((3, 0.30), (4, 0.30), (5, 0.15)):
        poses[:, axis] = amp * np.tanh(_smooth_noise(rng, num_frames, 15.0))
    s0 = 1.0 + 0.12 * float(rng.uniform(-1.0, 1.0))
    poses[:, 6] = s0 * (1.0 + 0.02 * np.tanh(_smooth_noise(rng, num_frames, 15.0)))
    return poses


def generate_clip(spec: ClipSpec, seed: int, oracle: "LatentOracle | None" = None,
                  clip_id: str = "clip") -> ClipRecord:
    """Deterministically synthesize one coupled audio/landmark/pose clip."""
    rng = np.random.default_rng(np.random.SeedSequence([0xC11, int(seed)]))
    num_frames = int(round(spec.duration_s * FPS))
    n_samples = num_frames * spec.sample_rate // FPS

    if spec.silent:
        samples = np.zeros(n_samples)
        rng.standard_normal(8)  # keep the draw stream aligned with voiced clips
    else:
        samples = synth_waveform(rng, spec.duration_s, spec.sample_rate)[:n_samples]
        if samples.size < n_samples:
            samples = np.concatenate([samples, np.zeros(n_samples - samples.size)])
    waveform = Waveform(samples, spec.sample_rate)

    envelope = amplitude_envelope(waveform)[:num_frames]
    opening = mouth_opening_curve(envelope, spec.mouth_gain)

    template = base_face(spec.identity)
    eye_template = base_eyes(template)
    offset = emotion_offset(spec.emotion)

    poses = _pose_walk(rng, num_frames)
    blinks = _blink_events(rng, num_frames)
    jitter_face = rng.standard_normal((num_frames, 68, 3)) * spec.landmark_jitter
    jitter_eyes = rng.standard_normal((num_frames, 52, 2)) * spec.landmark_jitter

    blink_amount = np.zeros(num_frames)
    for center in blinks:
        for d in range(-BLINK_HALF_FRAMES, BLINK_HALF_FRAMES + 1):
            if 0 <= center + d < num_frames:
                amt = 1.0 - abs(d) / BLINK_HALF_FRAMES
                blink_amount[center + d] = max(blink_amount[center + d], amt)

    # expression onset: clips start at the identity's rest face and ramp the
    # emotion offset in, like acted-emotion recordings
    ramp = np.clip(np.arange(num_frames) / max(1, EMOTION_ONSET_FRAMES), 0.0, 1.0)
    ramp = ramp * ramp * (3.0 - 2.0 * ramp)

    faces = np.empty((num_frames, 68, 3))
    eyes = np.empty((num_frames, 52, 2))
    for i in range(num_frames):
        face = template + ramp[i] * offset
        _apply_mouth_opening(face, float(opening[i]))
        eye = eye_template.copy()
        if blink_amount[i] > 0:
            close_eyes(eye, face, float(blink_amount[i]))
        face = face + jitter_face[i]
        eye = eye + jitter_eyes[i]
        face = face - face.mean(axis=0)
        factor = 2.0 / np.linalg.norm(face[geo.LEFT_EAR] - face[geo.RIGHT_EAR])
        faces[i] = face * factor
        eyes[i] = eye * factor

    oracle = oracle or LatentOracle(0)
    posed = geo.apply_pose_seq(faces, poses)
    latents = oracle.keypoints_seq(posed)

    return ClipRecord(
        clip_id=clip_id,
        waveform=waveform,
        landmarks=faces,
        eyes=eyes,
        poses=poses,
        latents=latents,
        emotion=spec.emotion,
        identity=spec.identity,
        filter_flags={"hands_present": False, "anomaly": "none"},
    )


# -- latent keypoint oracle ----------------------------------------------------


class LatentOracle:
    """Frozen random two-layer tanh map from posed landmarks to 20 keypoints.

    Weight matrices are rescaled to spectral norm 2 and the input is divided
    by 1.5, bounding the Lipschitz constant by 2*2/1.5 < 4.  Outputs lie in
    (-1, 1) via the final tanh.
    """

    HIDDEN = 64
    INPUT_SCALE = 1.5

    def __init__(self, seed: int):
        self.seed = int(seed)
        rng = np.random.default_rng(np.random.SeedSequence([0x0AC1E, self.seed]))
        w1 = rng.standard_normal((68 * 3, self.HIDDEN))
        w2 = rng.standard_normal((self.HIDDEN, NUM_LATENT_KEYPOINTS * 3))
        self.w1 = 2.0 * w1 / np.linalg.svd(w1, compute_uv=False)[0]
        self.w2 = 2.0 * w2 / np.linalg.svd(w2, compute_uv=False)[0]
        self.b1 = 0.1 * rng.standard_normal(self.HIDDEN)
        self.b2 = 0.1 * rng.standard_normal(NUM_LATENT_KEYPOINTS * 3)

    def keypoints(self, frame: LandmarkFrame) -> np.ndarray:
        if frame.space is not Space.POSED:
            raise SpaceContractError(
                f"latent oracle expects a posed frame, got {frame.space.value}"
            )
        return self.keypoints_seq(frame.face[None])[0]

    def keypoints_seq(self, posed_faces: np.ndarray) -> np.ndarray:
        x = np.asarray(posed_faces, dtype=np.float64).reshape(-1, 68 * 3)
        h = np.tanh(x / self.INPUT_SCALE @ self.w1 + self.b1)
        y = np.tanh(h @ self.w2 + self.b2)
        return y.reshape(-1, NUM_LATENT_KEYPOINTS, 3)


# -- corpus building -----------------------------------------------------------


@dataclass
class CorpusConfig:
    clips: int = 100
    duration_range: tuple[float, float] = (2.0, 4.0)
    split: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 0
    anomaly_rate: float = 0.0
    landmark_jitter: float = 0.003
    mouth_gain: float = 0.36
    oracle_seed: int = 7
    sample_rate: int = 16000
    neutral_fraction: float = 0.25

    def __post_init__(self):
        if self.clips < 1:
            raise ValueError("corpus needs at least one clip")
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise ValueError("split ratios must sum to 1")
        if not 0.0 <= self.anomaly_rate <= 1.0:
            raise ValueError("anomaly rate must lie in [0, 1]")


ANOMALY_TYPES = ("jump", "rotation", "scale")


def _inject_anomaly(rec: ClipRecord, kind: str, oracle: LatentOracle) -> None:
    t = rec.num_frames
    if kind == "jump":
        rec.landmarks[t // 2 :] += np.array([0.5, 0.0, 0.0])
    elif kind == "rotation":
        rec.poses[:, 0] = np.linspace(0.0, 95.0, t)
    elif kind == "scale":
        rec.poses[:, 6] = np.linspace(rec.poses[0, 6], 3.0 * rec.poses[0, 6], t)
    else:
        raise ValueError(f"unknown anomaly kind {kind!r}")
    rec.latents = oracle.keypoints_seq(geo.apply_pose_seq(rec.landmarks, rec.poses))
    rec.filter_flags["anomaly"] = kind


def _split_labels(cfg: CorpusConfig) -> list[str]:
    n_train = int(round(cfg.clips * cfg.split[0]))
    n_val = int(round(cfg.clips * cfg.split[1]))
    n_val = min(n_val, cfg.clips - n_train)
    n_test = cfg.clips - n_train - n_val
    return ["train"] * n_train + ["val"] * n_val + ["test"] * n_test


def write_clip(rec: ClipRecord, clip_dir: Path) -> dict:
    """Write one clip's files and return its manifest paths entry."""
    clip_dir.mkdir(parents=True, exist_ok=True)
    save_wav(clip_dir / "audio.wav", rec.waveform)
    write_landmark_file(
        clip_dir / "landmarks.jsonl",
        rec.landmarks,
        rec.eyes,
        space=Space.FRONTAL_NORMALIZED,
        poses=rec.poses,
    )
    write_pose_file(clip_dir / "poses.jsonl", rec.poses)
    np.save(clip_dir / "latents.npy", rec.latents)
    feats = align_frames(compute_mfcc(rec.waveform), rec.num_frames)
    save_features(clip_dir / "features.npz", feats)
    return {
        "audio": "audio.wav",
        "landmarks": "landmarks.jsonl",
        "poses": "poses.jsonl",
        "latents": "latents.npy",
        "features": "features.npz",
    }


def build_corpus(cfg: CorpusConfig, out_dir) -> Path:
    """Generate a corpus directory with a manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(np.random.SeedSequence([0xC0, cfg.seed]))
    oracle = LatentOracle(cfg.oracle_seed)

    clip_seeds = rng.integers(0, 2**62, size=cfg.clips)
    durations = rng.uniform(*cfg.duration_range, size=cfg.clips)
    splits = _split_labels(cfg)

    n_anom = int(round(cfg.clips * cfg.anomaly_rate))
    anomalous = set(rng.choice(cfg.clips, size=n_anom, replace=False).tolist())

    emotions = []
    for _ in range(cfg.clips):
        if rng.uniform() < cfg.neutral_fraction:
            emotions.append(EmotionVector.neutral())
        else:
            name = EMOTIONS[1 + int(rng.integers(0, EMOTION_DIM - 1))]
            emotions.append(EmotionVector.one_hot(name, float(rng.uniform(0.2, 1.0))))

    entries = []
    for i in range(cfg.clips):
        clip_id = f"clip_{i:04d}"
        spec = ClipSpec(
            duration_s=float(durations[i]),
            emotion=emotions[i],
            identity=cfg.seed * 1_000_000 + i,
            sample_rate=cfg.sample_rate,
            landmark_jitter=cfg.landmark_jitter,
            mouth_gain=cfg.mouth_gain,
        )
        rec = generate_clip(spec, int(clip_seeds[i]), oracle=oracle, clip_id=clip_id)
        if i in anomalous:
            kind = ANOMALY_TYPES[sorted(anomalous).index(i) % len(ANOMALY_TYPES)]
            _inject_anomaly(rec, kind, oracle)
        paths = write_clip(rec, out_dir / "clips" / clip_id)
        entries.append(
            {
                "clip_id": clip_id,
                "identity": rec.identity,
                "split": splits[i],
                "emotion": [round(float(v), 8) for v in emotions[i].weights],
                "frames": rec.num_frames,
                "duration_s": round(float(durations[i]), 6),
                "flags": rec.filter_flags,
                "dir": f"clips/{clip_id}",
                "paths": paths,
            }
        )

    manifest = {
        "version": 1,
        "fps": FPS,
        "seed": cfg.seed,
        "oracle_seed": cfg.oracle_seed,
        "sample_rate": cfg.sample_rate,
        "clip_count": cfg.clips,
        "clips": entries,
    }
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path


def load_manifest(manifest_path) -> dict:
    manifest_path = Path(manifest_path)
    try:
        return json.loads(manifest_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise IOError(f"cannot read corpus manifest {manifest_path}: {exc}") from exc
