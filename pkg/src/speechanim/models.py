"""The three learned stages: audio-to-landmarks, pose generation, and
landmarks-to-latents, plus feature-wise emotion modulation.

All three share the same audio front end: a 12-layer 1D conv stack over the
40-dim MFCC frames.  The four short-kernel layers at the bottom carry the
only future context (two frames total); the eight kernel-5 layers above them
are strictly causal.  Output at frame t therefore never depends on audio
beyond frame t+2, and the recurrent stages never look at future landmark or
keypoint inputs, so the whole pipeline is streamable.

Emotion conditioning is feature-wise linear modulation: per-module two-layer
MLPs map the 8-dim emotion vector to (gamma, beta) with a zero-initialized
final layer, so a freshly initialized model is exactly emotion-invariant.

Widths default to the fast "desk" profile; the "paper" profile selects the
full-size configuration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from .emotion import EMOTION_DIM, EmotionVector
from .errors import SpaceContractError
from .geometry import LandmarkFrame, Space

MFCC_DIM = 40
FACE_DIM = 68 * 3
EYE_DIM = 52 * 2
KP_DIM = 20 * 3
POSE_DIM = 6
Z_DIM = 64

MFCC_INPUT_SCALE = 0.05  # fixed per-frame scaling; keeps the conv input O(1)
ANGLE_SCALE = 45.0
TRANS_SCALE = 0.5


@dataclass
class AudioEncoderConfig:
    layers: int = 12
    channels: int = 128
    symmetric_layers: int = 4
    causal_layers: int = 8
    kernel_short: int = 3
    kernel_causal: int = 5
    lookahead: int = 2

    def __post_init__(self):
        if self.symmetric_layers + self.causal_layers != self.layers:
            raise ValueError("symmetric_layers + causal_layers must equal layers")
        if not 0 <= self.lookahead <= self.symmetric_layers * (self.kernel_short // 2):
            raise ValueError("lookahead not achievable with the short-kernel block")


@dataclass
class ModelConfig:
    profile: str = "desk"
    channels: int = 128        # audio encoder conv channels
    width: int = 128           # LSTM hidden units and MLP hidden width
    posegen_width: int = 128   # PoseGen LSTM width
    film_hidden: int = 64
    audio: AudioEncoderConfig = field(default_factory=AudioEncoderConfig)

    def __post_init__(self):
        if self.audio.channels != self.channels:
            self.audio = AudioEncoderConfig(
                layers=self.audio.layers,
                channels=self.channels,
                symmetric_layers=self.audio.symmetric_layers,
                causal_layers=self.audio.causal_layers,
                lookahead=self.audio.lookahead,
            )

    @classmethod
    def desk(cls) -> "ModelConfig":
        return cls()

    @classmethod
    def paper(cls) -> "ModelConfig":
        return cls(profile="paper", channels=1024, width=1024, posegen_width=256)

    @classmethod
    def named(cls, profile: str) -> "ModelConfig":
        if profile == "desk":
            return cls.desk()
        if profile == "paper":
            return cls.paper()
        raise ValueError(f"unknown model profile {profile!r}")


def _as_emotion_tensor(emotion, batch: int, like: torch.Tensor) -> torch.Tensor:
    if isinstance(emotion, EmotionVector):
        emotion = emotion.weights
    if emotion is None:
        emotion = torch.zeros(batch, EMOTION_DIM)
    elif isinstance(emotion, np.ndarray):
        emotion = torch.from_numpy(np.asarray(emotion, dtype=np.float64))
    if emotion.ndim == 1:
        emotion = emotion[None].expand(batch, -1)
    return emotion.to(dtype=like.dtype, device=like.device)


class FiLM(nn.Module):
    """gamma(e) * x + beta(e); identity at initialization."""

    def __init__(self, feature_dim: int, hidden: int = 64):
        super().__init__()
        self.feature_dim = feature_dim
        self.net = nn.Sequential(
            nn.Linear(EMOTION_DIM, hidden),
            nn.LeakyReLU(0.2),
            nn.Linear(hidden, 2 * feature_dim),
        )
        nn.init.zeros_(self.net[-1].weight)
        nn.init.zeros_(self.net[-1].bias)

    def forward(self, x: torch.Tensor, emotion) -> torch.Tensor:
        e = _as_emotion_tensor(emotion, x.shape[0], x)
        gb = self.net(e)
        gamma = 1.0 + gb[:, : self.feature_dim]
        beta = gb[:, self.feature_dim :]
        while gamma.ndim < x.ndim:
            gamma = gamma.unsqueeze(1)
            beta = beta.unsqueeze(1)
        return gamma * x + beta


def _mlp(in_dim: int, hidden: int, out_dim: int, layers: int, norm: bool = True) -> nn.Sequential:
    """Fully connected stack with leaky ReLU (and optionally batch norm) on
    hidden layers."""
    mods = []
    d = in_dim
    for _ in range(layers - 1):
        mods.append(nn.Linear(d, hidden))
        if norm:
            mods.append(nn.BatchNorm1d(hidden))
        mods.append(nn.LeakyReLU(0.2))
        d = hidden
    mods.append(nn.Linear(d, out_dim))
    return nn.Sequential(*mods)


def _run_mlp(mlp: nn.Sequential, x: torch.Tensor) -> torch.Tensor:
    """Apply an MLP over the trailing feature dim of (B, F) or (B, T, F)."""
    if x.ndim == 3:
        b, t, f = x.shape
        return mlp(x.reshape(b * t, f)).reshape(b, t, -1)
    return mlp(x)


class AudioEncoder(nn.Module):
    """12-layer 1D conv stack with at most ``lookahead`` frames of future context."""

    def __init__(self, cfg: AudioEncoderConfig, film: bool = False, film_hidden: int = 64):
        super().__init__()
        self.cfg = cfg
        pads, kernels = [], []
        for i in range(cfg.symmetric_layers):
            right = 1 if i < cfg.lookahead else 0
            pads.append((cfg.kernel_short - 1 - right, right))
            kernels.append(cfg.kernel_short)
        for _ in range(cfg.causal_layers):
            pads.append((cfg.kernel_causal - 1, 0))
            kernels.append(cfg.kernel_causal)
        self.pads = pads
        convs, norms = [], []
        d = MFCC_DIM
        for k in kernels:
            convs.append(nn.Conv1d(d, cfg.channels, k))
            norms.append(nn.BatchNorm1d(cfg.channels))
            d = cfg.channels
        self.convs = nn.ModuleList(convs)
        self.norms = nn.ModuleList(norms)
        self.act = nn.LeakyReLU(0.2)
        self.film = FiLM(cfg.channels, film_hidden) if film else None

    def forward(self, mfcc: torch.Tensor, emotion=None) -> torch.Tensor:
        """(B, T, 40) MFCC frames to (B, T, C) embeddings."""
        if mfcc.ndim != 3 or mfcc.shape[-1] != MFCC_DIM:
            raise ValueError(f"audio encoder expects (B, T, {MFCC_DIM}), got {tuple(mfcc.shape)}")
        x = (mfcc * MFCC_INPUT_SCALE).transpose(1, 2)
        for conv, norm, (left, right) in zip(self.convs, self.norms, self.pads):
            x = nn.functional.pad(x, (left, right))
            x = self.act(norm(conv(x)))
        out = x.transpose(1, 2)
        if self.film is not None:
            out = self.film(out, emotion)
        return out


@dataclass
class S2LState:
    """Streaming rollout state: LSTM hidden/cell plus the previous prediction."""

    hidden: torch.Tensor  # (2, B, W)
    cell: torch.Tensor    # (2, B, W)
    prev_face: torch.Tensor  # (B, 204)
    prev_eyes: torch.Tensor  # (B, 104)


class SpeechToLandmarks(nn.Module):
    """Autoregressive landmark regressor driven by audio embeddings.

    Predicts the full frontal normalized landmark set (68 face points and 52
    eye points as one output vector) one frame per audio frame, feeding back
    its own prediction outside teacher forcing.  The source face is a
    standing input: it is FiLM-modulated by the emotion vector, encoded once,
    and concatenated into every step, which carries identity through long
    rollouts and gives the emotion conditioning a direct path to the output.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        w = cfg.width
        self.audio_enc = AudioEncoder(cfg.audio, film=True, film_hidden=cfg.film_hidden)
        self.film_src = FiLM(FACE_DIM, cfg.film_hidden)
        # the source encoder sees one row per clip; batch norm is undefined there
        self.src_enc = _mlp(FACE_DIM, w, w, layers=4, norm=False)
        self.face_enc = _mlp(FACE_DIM, w, w, layers=8)
        self.eye_enc = _mlp(EYE_DIM, w, w, layers=4)
        self.lstm = nn.LSTM(3 * w + cfg.channels, w, num_layers=2, batch_first=True)
        self.head = nn.Linear(w, FACE_DIM + EYE_DIM)
        self.init_mlp = _mlp(FACE_DIM + cfg.channels, w, 4 * w, layers=4, norm=False)

    def init_state(self, face0: torch.Tensor, a0: torch.Tensor):
        """Learned LSTM initialization from the source face and first audio frame."""
        out = self.init_mlp(torch.cat([face0, a0], dim=-1))
        b = face0.shape[0]
        h, c = out.reshape(b, 2, 2, self.cfg.width).unbind(dim=1)
        return h.transpose(0, 1).contiguous(), c.transpose(0, 1).contiguous()

    def _source_embedding(self, face0, emotion):
        return _run_mlp(self.src_enc, self.film_src(face0, emotion))

    def forward(self, mfcc, emotion, face0, eyes0, teacher_faces=None, teacher_eyes=None):
        """Teacher-forced sequence prediction, or rollout when no teacher given.

        mfcc (B, T, 40); face0 (B, 204); eyes0 (B, 104); teacher sequences
        (B, T, dim).  Returns (faces (B, T, 204), eyes (B, T, 104)).
        """
        if mfcc.shape[1] < 1:
            raise ValueError("audio must contain at least one frame")
        if teacher_faces is None:
            return self.rollout(mfcc, emotion, face0, eyes0)
        a = self.audio_enc(mfcc, emotion)
        prev_f = torch.cat([face0[:, None], teacher_faces[:, :-1]], dim=1)
        prev_e = torch.cat([eyes0[:, None], teacher_eyes[:, :-1]], dim=1)
        femb = _run_mlp(self.face_enc, prev_f)
        eemb = _run_mlp(self.eye_enc, prev_e)
        semb = self._source_embedding(face0, emotion)[:, None].expand(-1, a.shape[1], -1)
        h0, c0 = self.init_state(face0, a[:, 0])
        out, _ = self.lstm(torch.cat([semb, femb, eemb, a], dim=-1), (h0, c0))
        y = self.head(out)
        # source-anchored output: the head predicts displacements of the source
        return face0[:, None] + y[..., :FACE_DIM], eyes0[:, None] + y[..., FACE_DIM:]

    def start_rollout(self, a0, face0, eyes0) -> S2LState:
        h, c = self.init_state(face0, a0)
        return S2LState(h, c, face0, eyes0)

    def step(self, state: S2LState, a_t: torch.Tensor, emotion, source_emb,
             face0, eyes0):
        """Consume one audio-frame embedding; returns (state, face_t, eyes_t)."""
        femb = _run_mlp(self.face_enc, state.prev_face)
        eemb = _run_mlp(self.eye_enc, state.prev_eyes)
        x = torch.cat([source_emb, femb, eemb, a_t], dim=-1)[:, None]
        out, (h, c) = self.lstm(x, (state.hidden, state.cell))
        y = self.head(out[:, 0])
        face = face0 + y[..., :FACE_DIM]
        eyes = eyes0 + y[..., FACE_DIM:]
        return S2LState(h, c, face, eyes), face, eyes

    def rollout(self, mfcc, emotion, face0, eyes0):
        a = self.audio_enc(mfcc, emotion)
        semb = self._source_embedding(face0, emotion)
        state = self.start_rollout(a[:, 0], face0, eyes0)
        faces, eyes = [], []
        for t in range(mfcc.shape[1]):
            state, f, e = self.step(state, a[:, t], emotion, semb, face0, eyes0)
            faces.append(f)
            eyes.append(e)
        return torch.stack(faces, dim=1), torch.stack(eyes, dim=1)

    @torch.no_grad()
    def rollout_from_frame(self, frame: LandmarkFrame, mfcc: np.ndarray, emotion):
        """Numpy-level rollout from a frontal normalized source frame."""
        if frame.space is not Space.FRONTAL_NORMALIZED:
            raise SpaceContractError(
                f"rollout source must be frontal_normalized, got {frame.space.value}"
            )
        was_training = self.training
        self.eval()
        try:
            p = next(self.parameters())
            m = torch.as_tensor(np.asarray(mfcc), dtype=p.dtype)[None]
            f0 = torch.as_tensor(frame.face.reshape(-1), dtype=p.dtype)[None]
            e0 = torch.as_tensor(frame.eyes.reshape(-1), dtype=p.dtype)[None]
            faces, eyes = self.rollout(m, emotion, f0, e0)
        finally:
            self.train(was_training)
        t = m.shape[1]
        return (
            faces[0].numpy().reshape(t, 68, 3).astype(np.float64),
            eyes[0].numpy().reshape(t, 52, 2).astype(np.float64),
        )


def normalize_pose6(poses: torch.Tensor) -> torch.Tensor:
    scale = poses.new_tensor([ANGLE_SCALE] * 3 + [TRANS_SCALE] * 3)
    return poses / scale


def denormalize_pose6(poses: torch.Tensor) -> torch.Tensor:
    scale = poses.new_tensor([ANGLE_SCALE] * 3 + [TRANS_SCALE] * 3)
    return poses * scale


class PoseGenerator(nn.Module):
    """Conditional VAE over head-pose trajectories given audio.

    The encoder is a bidirectional LSTM over joint audio/pose features; the
    decoder is an autoregressive LSTM fed the audio embedding and the 64-dim
    latent at every step.  Decoded angles are bounded to (-45, 45) degrees by
    a tanh head, translations are scaled linearly.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        w = cfg.posegen_width
        self.audio_enc = AudioEncoder(cfg.audio, film=False)
        self.encoder = nn.LSTM(cfg.channels + POSE_DIM, w, num_layers=2,
                               batch_first=True, bidirectional=True)
        self.enc_head = nn.Sequential(
            nn.Linear(2 * w, w), nn.LeakyReLU(0.2), nn.Linear(w, 2 * Z_DIM)
        )
        self.decoder = nn.LSTM(cfg.channels + Z_DIM, w, num_layers=2, batch_first=True)
        self.head = nn.Linear(w, POSE_DIM)

    def encode(self, mfcc: torch.Tensor, poses: torch.Tensor):
        """Per-clip posterior parameters (mu, sigma), each (B, 64)."""
        if mfcc.shape[1] != poses.shape[1]:
            raise ValueError("audio and pose sequences must have equal length")
        a = self.audio_enc(mfcc)
        x = torch.cat([a, normalize_pose6(poses)], dim=-1)
        _, (h, _) = self.encoder(x)
        joint = torch.cat([h[-2], h[-1]], dim=-1)
        stats = self.enc_head(joint)
        mu, logvar = stats.chunk(2, dim=-1)
        return mu, torch.exp(0.5 * logvar)

    def decode(self, mfcc: torch.Tensor, z: torch.Tensor) -> torch.Tensor:
        """Pose sequence (B, T, 6): yaw, pitch, roll in degrees, then tx, ty, tz."""
        if not torch.isfinite(z).all():
            raise ValueError("latent z must be finite")
        a = self.audio_enc(mfcc)
        zz = z[:, None, :].expand(-1, a.shape[1], -1)
        out, _ = self.decoder(torch.cat([a, zz], dim=-1))
        raw = self.head(out)
        angles = ANGLE_SCALE * torch.tanh(raw[..., :3])
        trans = TRANS_SCALE * raw[..., 3:]
        return torch.cat([angles, trans], dim=-1)

    def forward(self, mfcc, poses, generator: torch.Generator | None = None):
        """Training pass: encode, reparameterize, decode.  Returns (recon, mu, sigma)."""
        mu, sigma = self.encode(mfcc, poses)
        eps = torch.randn(mu.shape, generator=generator, dtype=mu.dtype)
        z = mu + sigma * eps
        return self.decode(mfcc, z), mu, sigma

    @torch.no_grad()
    def sample_poses(self, mfcc: np.ndarray, seed: int, scale: float = 1.0) -> np.ndarray:
        """Draw one pose trajectory (T, 7) for raw MFCC input; appends the scale."""
        was_training = self.training
        self.eval()
        try:
            p = next(self.parameters())
            m = torch.as_tensor(np.asarray(mfcc), dtype=p.dtype)[None]
            gen = torch.Generator().manual_seed(int(seed))
            z = torch.randn((1, Z_DIM), generator=gen, dtype=p.dtype)
            poses = self.decode(m, z)[0].numpy().astype(np.float64)
        finally:
            self.train(was_training)
        return np.concatenate([poses, np.full((poses.shape[0], 1), scale)], axis=1)


class LandmarksToLatents(nn.Module):
    """Autoregressive map from posed landmarks and audio to latent keypoints.

    Inputs per frame: posed face landmarks, the audio embedding, the source
    keypoints (encoded once), and the previous keypoint prediction.  Emotion
    modulates the audio, landmark, and source-keypoint inputs.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        w = cfg.width
        self.audio_enc = AudioEncoder(cfg.audio, film=True, film_hidden=cfg.film_hidden)
        self.film_face = FiLM(FACE_DIM, cfg.film_hidden)
        self.film_src = FiLM(KP_DIM, cfg.film_hidden)
        self.face_enc = _mlp(FACE_DIM, w, w, layers=8)
        # the source encoder sees one row per clip; batch norm is undefined there
        self.src_enc = _mlp(KP_DIM, w, w, layers=4, norm=False)
        self.prev_enc = _mlp(KP_DIM, w, w, layers=8)
        self.lstm = nn.LSTM(3 * w + cfg.channels, w, num_layers=2, batch_first=True)
        self.head = nn.Linear(w, KP_DIM)
        self.init_mlp = _mlp(FACE_DIM + cfg.channels + KP_DIM, w, 4 * w, layers=4, norm=False)

    def init_state(self, face0, a0, kp_src):
        out = self.init_mlp(torch.cat([face0, a0, kp_src], dim=-1))
        b = face0.shape[0]
        h, c = out.reshape(b, 2, 2, self.cfg.width).unbind(dim=1)
        return h.transpose(0, 1).contiguous(), c.transpose(0, 1).contiguous()

    def forward(self, mfcc, emotion, posed_faces, kp_src, teacher_kps=None):
        """posed_faces (B, T, 204); kp_src (B, 60); teacher_kps (B, T, 60) or None."""
        if posed_faces.shape[1] != mfcc.shape[1]:
            raise ValueError("landmark and audio sequences must have equal length")
        a = self.audio_enc(mfcc, emotion)
        src = _run_mlp(self.src_enc, self.film_src(kp_src, emotion))
        if teacher_kps is None:
            return self._rollout(a, emotion, posed_faces, kp_src, src)
        prev = torch.cat([kp_src[:, None], teacher_kps[:, :-1]], dim=1)
        femb = _run_mlp(self.face_enc, self.film_face(posed_faces, emotion))
        pemb = _run_mlp(self.prev_enc, prev)
        semb = src[:, None].expand(-1, a.shape[1], -1)
        h0, c0 = self.init_state(posed_faces[:, 0], a[:, 0], kp_src)
        out, _ = self.lstm(torch.cat([femb, pemb, semb, a], dim=-1), (h0, c0))
        return self.head(out)

    def _rollout(self, a, emotion, posed_faces, kp_src, src):
        state = self.init_state(posed_faces[:, 0], a[:, 0], kp_src)
        prev = kp_src
        outs = []
        for t in range(a.shape[1]):
            femb = _run_mlp(self.face_enc, self.film_face(posed_faces[:, t], emotion))
            pemb = _run_mlp(self.prev_enc, prev)
            x = torch.cat([femb, pemb, src, a[:, t]], dim=-1)[:, None]
            out, state = self.lstm(x, state)
            prev = self.head(out[:, 0])
            outs.append(prev)
        return torch.stack(outs, dim=1)

    @torch.no_grad()
    def rollout_posed(self, posed_faces: np.ndarray, space: Space, mfcc: np.ndarray,
                      kp_src: np.ndarray, emotion) -> np.ndarray:
        """Numpy-level rollout; posed_faces (T, 68, 3) must be in posed space."""
        if Space(space) is not Space.POSED:
            raise SpaceContractError(f"landmarks must be posed, got {Space(space).value}")
        was_training = self.training
        self.eval()
        try:
            p = next(self.parameters())
            t = posed_faces.shape[0]
            faces = torch.as_tensor(posed_faces.reshape(t, -1), dtype=p.dtype)[None]
            m = torch.as_tensor(np.asarray(mfcc), dtype=p.dtype)[None]
            src = torch.as_tensor(np.asarray(kp_src).reshape(-1), dtype=p.dtype)[None]
            kps = self.forward(m, emotion, faces, src)
        finally:
            self.train(was_training)
        return kps[0].numpy().reshape(t, 20, 3).astype(np.float64)


MODEL_CLASSES = {
    "s2l": SpeechToLandmarks,
    "posegen": PoseGenerator,
    "l2l": LandmarksToLatents,
}


def build_model(which: str, cfg: ModelConfig, seed: int = 0) -> nn.Module:
    """Construct a model with seeded initialization."""
    if which not in MODEL_CLASSES:
        raise ValueError(f"unknown model {which!r}; choose from {sorted(MODEL_CLASSES)}")
    torch.manual_seed(seed)
    return MODEL_CLASSES[which](cfg)
