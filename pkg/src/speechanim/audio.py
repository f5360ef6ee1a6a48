"""Waveform handling, video-frame-aligned MFCC extraction, and augmentation.

Feature framing is tied to the 30 fps video clock: the hop is
``round(sample_rate / 30)`` samples, analysis windows are 1024 samples wide
and centered on each video frame's timestamp, and a clip of n samples yields
``ceil(n * 30 / sample_rate)`` frames.  Mel/DCT choices (64 mel filters over
0-8 kHz, orthonormal DCT-II, log floor 1e-10) are fixed so that identical
waveforms always produce identical features.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft
import scipy.io.wavfile
import scipy.signal

from .errors import MisalignedClipError

VIDEO_FPS = 30
NUM_MFCC = 40
FFT_SIZE = 1024
NUM_MELS = 64
MEL_FMAX = 8000.0
LOG_FLOOR = 1e-10

MAX_PITCH_SEMITONES = 4.0
MAX_GAIN_DB = 6.0
MAX_EQ_GAIN_DB = 6.0
EQ_BAND_HZ = (250.0, 1500.0, 4000.0)  # low shelf, peaking, high shelf


@dataclass
class Waveform:
    """Mono waveform with samples in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64).reshape(-1)
        if self.samples.size == 0:
            raise ValueError("waveform is empty")
        if not np.isfinite(self.samples).all():
            raise ValueError("waveform has non-finite samples")
        if np.abs(self.samples).max() > 1.0 + 1e-6:
            raise ValueError("waveform samples exceed [-1, 1]")
        self.sample_rate = int(self.sample_rate)
        if self.sample_rate <= 0:
            raise ValueError("sample rate must be positive")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass
class AudioFeatures:
    """Per-video-frame MFCC matrix, shape (T, 40)."""

    mfcc: np.ndarray
    frame_rate: int = VIDEO_FPS

    def __post_init__(self):
        self.mfcc = np.asarray(self.mfcc, dtype=np.float64)
        if self.mfcc.ndim != 2 or self.mfcc.shape[1] != NUM_MFCC:
            raise ValueError(f"mfcc must be (T, {NUM_MFCC}), got {self.mfcc.shape}")

    @property
    def num_frames(self) -> int:
        return self.mfcc.shape[0]


def num_video_frames(n_samples: int, sample_rate: int) -> int:
    """Frame count at 30 fps: ceil(n * 30 / sample_rate), exact in integers."""
    return -(-n_samples * VIDEO_FPS // sample_rate)


def hop_length(sample_rate: int) -> int:
    return int(round(sample_rate / VIDEO_FPS))


def _mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_inv(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def _mel_filterbank(sample_rate: int) -> np.ndarray:
    """Triangular mel filterbank, (NUM_MELS, FFT_SIZE // 2 + 1)."""
    fmax = min(MEL_FMAX, sample_rate / 2.0)
    pts = _mel_inv(np.linspace(_mel(0.0), _mel(fmax), NUM_MELS + 2))
    bins = np.fft.rfftfreq(FFT_SIZE, d=1.0 / sample_rate)
    fb = np.zeros((NUM_MELS, bins.size))
    for i in range(NUM_MELS):
        lo, mid, hi = pts[i], pts[i + 1], pts[i + 2]
        up = (bins - lo) / max(mid - lo, 1e-9)
        down = (hi - bins) / max(hi - mid, 1e-9)
        fb[i] = np.clip(np.minimum(up, down), 0.0, None)
    return fb


def frame_signal(samples: np.ndarray, sample_rate: int, window: int) -> np.ndarray:
    """Slice windows of the given width centered on each video-frame timestamp."""
    n = samples.size
    hop = hop_length(sample_rate)
    n_frames = num_video_frames(n, sample_rate)
    half = window // 2
    padded = np.concatenate([np.zeros(half), samples, np.zeros(window)])
    idx = np.arange(n_frames)[:, None] * hop + np.arange(window)[None, :]
    return padded[idx]


def compute_mfcc(w: Waveform) -> AudioFeatures:
    """40 MFCCs per video frame using a 1024-sample FFT window at 30 fps."""
    if w.sample_rate < 8000:
        raise ValueError(f"sample rate {w.sample_rate} below the 8 kHz minimum")
    if w.samples.size < FFT_SIZE:
        raise ValueError(
            f"clip of {w.samples.size} samples is shorter than one {FFT_SIZE}-sample window"
        )
    frames = frame_signal(w.samples, w.sample_rate, FFT_SIZE)
    window = scipy.signal.get_window("hann", FFT_SIZE, fftbins=True)
    spec = np.abs(np.fft.rfft(frames * window, n=FFT_SIZE, axis=1)) ** 2
    mel = spec @ _mel_filterbank(w.sample_rate).T
    logmel = np.log(np.maximum(mel, LOG_FLOOR))
    coef = scipy.fft.dct(logmel, type=2, norm="ortho", axis=1)[:, :NUM_MFCC]
    return AudioFeatures(coef)


def align_frames(f: AudioFeatures, video_len: int) -> AudioFeatures:
    """Trim or edge-pad features to exactly video_len frames (slack of 2)."""
    t = f.num_frames
    if abs(t - video_len) > 2:
        raise MisalignedClipError(
            f"feature frames ({t}) and video frames ({video_len}) differ by more than 2"
        )
    if t == video_len:
        return AudioFeatures(f.mfcc.copy(), f.frame_rate)
    if t > video_len:
        return AudioFeatures(f.mfcc[:video_len].copy(), f.frame_rate)
    pad = np.repeat(f.mfcc[-1:], video_len - t, axis=0)
    return AudioFeatures(np.concatenate([f.mfcc, pad], axis=0), f.frame_rate)


def amplitude_envelope(w: Waveform, smooth_frames: int = 3) -> np.ndarray:
    """Per-video-frame RMS amplitude, lightly smoothed with a moving average."""
    hop = hop_length(w.sample_rate)
    frames = frame_signal(w.samples, w.sample_rate, 2 * hop)
    rms = np.sqrt(np.mean(frames**2, axis=1))
    if smooth_frames > 1:
        kernel = np.ones(smooth_frames) / smooth_frames
        rms = np.convolve(rms, kernel, mode="same")
    return rms


# -- augmentation -----------------------------------------------------------


@dataclass
class AugmentSpec:
    """Uniform draw ranges for the three augmentation knobs.

    A degenerate range (lo == hi) pins the knob; the all-zero default is the
    identity augmentation.
    """

    pitch_semitones: tuple[float, float] = (0.0, 0.0)
    gain_db: tuple[float, float] = (0.0, 0.0)
    eq_gains_db: tuple[tuple[float, float], ...] = field(
        default_factory=lambda: ((0.0, 0.0), (0.0, 0.0), (0.0, 0.0))
    )

    def __post_init__(self):
        self._check(self.pitch_semitones, MAX_PITCH_SEMITONES, "pitch_semitones")
        self._check(self.gain_db, MAX_GAIN_DB, "gain_db")
        if len(self.eq_gains_db) != len(EQ_BAND_HZ):
            raise ValueError(f"expected {len(EQ_BAND_HZ)} EQ band ranges")
        for band in self.eq_gains_db:
            self._check(band, MAX_EQ_GAIN_DB, "eq_gains_db")

    @staticmethod
    def _check(rng, bound, name):
        lo, hi = rng
        if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
            raise ValueError(f"{name} range {rng} is invalid")
        if lo < -bound or hi > bound:
            raise ValueError(f"{name} range {rng} exceeds +/-{bound}")


def _time_stretch(x: np.ndarray, n_out: int, frame: int = 1024, hop: int = 256) -> np.ndarray:
    """Granular overlap-add resize of x to n_out samples at constant pitch."""
    if x.size == n_out:
        return x.copy()
    win = scipy.signal.get_window("hann", frame, fftbins=True)
    out = np.zeros(n_out + frame)
    norm = np.zeros(n_out + frame)
    scale = x.size / n_out
    for k in range(0, n_out, hop):
        pos = int(round(k * scale))
        grain = x[pos : pos + frame]
        if grain.size < frame:
            grain = np.concatenate([grain, np.zeros(frame - grain.size)])
        out[k : k + frame] += grain * win
        norm[k : k + frame] += win
    return out[:n_out] / np.maximum(norm[:n_out], 1e-8)


def _pitch_shift(x: np.ndarray, semitones: float) -> np.ndarray:
    """Duration-preserving pitch shift: resample, then stretch back."""
    factor = 2.0 ** (semitones / 12.0)
    resampled = scipy.signal.resample(x, max(2, int(round(x.size / factor))))
    return _time_stretch(resampled, x.size)


def _shelving_eq(x: np.ndarray, sample_rate: int, gains_db) -> np.ndarray:
    """RBJ biquad EQ: low shelf, mid peaking, high shelf. Zero-gain bands skip."""
    out = x
    kinds = ("low", "peak", "high")
    for f0, gain, kind in zip(EQ_BAND_HZ, gains_db, kinds):
        if gain == 0.0:
            continue
        a_lin = 10.0 ** (gain / 40.0)
        w0 = 2.0 * np.pi * min(f0, 0.45 * sample_rate) / sample_rate
        cw, sw = np.cos(w0), np.sin(w0)
        q = 0.7071
        alpha = sw / (2.0 * q)
        if kind == "peak":
            b = [1 + alpha * a_lin, -2 * cw, 1 - alpha * a_lin]
            a = [1 + alpha / a_lin, -2 * cw, 1 - alpha / a_lin]
        else:
            sq = 2.0 * np.sqrt(a_lin) * alpha
            if kind == "low":
                b = [
                    a_lin * ((a_lin + 1) - (a_lin - 1) * cw + sq),
                    2 * a_lin * ((a_lin - 1) - (a_lin + 1) * cw),
                    a_lin * ((a_lin + 1) - (a_lin - 1) * cw - sq),
                ]
                a = [
                    (a_lin + 1) + (a_lin - 1) * cw + sq,
                    -2 * ((a_lin - 1) + (a_lin + 1) * cw),
                    (a_lin + 1) + (a_lin - 1) * cw - sq,
                ]
            else:
                b = [
                    a_lin * ((a_lin + 1) + (a_lin - 1) * cw + sq),
                    -2 * a_lin * ((a_lin - 1) + (a_lin + 1) * cw),
                    a_lin * ((a_lin + 1) + (a_lin - 1) * cw - sq),
                ]
                a = [
                    (a_lin + 1) - (a_lin - 1) * cw + sq,
                    2 * ((a_lin - 1) - (a_lin + 1) * cw),
                    (a_lin + 1) - (a_lin - 1) * cw - sq,
                ]
        out = scipy.signal.lfilter(b, a, out)
    return out


def augment(w: Waveform, spec: AugmentSpec, seed: int) -> Waveform:
    """Apply pitch shift, EQ, and gain drawn from spec ranges under the seed."""
    rng = np.random.default_rng(seed)
    pitch = float(rng.uniform(*spec.pitch_semitones))
    gain = float(rng.uniform(*spec.gain_db))
    eq = [float(rng.uniform(*band)) for band in spec.eq_gains_db]

    x = w.samples.copy()
    if pitch != 0.0:
        x = _pitch_shift(x, pitch)
    if any(g != 0.0 for g in eq):
        x = _shelving_eq(x, w.sample_rate, eq)
    if gain != 0.0:
        x = x * 10.0 ** (gain / 20.0)
    return Waveform(np.clip(x, -1.0, 1.0), w.sample_rate)


# -- file I/O ----------------------------------------------------------------


def load_wav(path) -> Waveform:
    """Read a mono PCM/float WAV file; 16 kHz preferred, others resampled."""
    rate, data = scipy.io.wavfile.read(path)
    data = np.asarray(data)
    if data.ndim > 1:
        data = data.mean(axis=1)
    if data.dtype == np.int16:
        data = data / 32768.0
    elif data.dtype == np.int32:
        data = data / 2147483648.0
    elif data.dtype == np.uint8:
        data = (data.astype(np.float64) - 128.0) / 128.0
    data = np.clip(data.astype(np.float64), -1.0, 1.0)
    if rate < 8000:
        target = 16000
        data = scipy.signal.resample(data, int(round(data.size * target / rate)))
        data = np.clip(data, -1.0, 1.0)
        rate = target
    return Waveform(data, rate)


def save_wav(path, w: Waveform):
    scipy.io.wavfile.write(path, w.sample_rate, w.samples.astype(np.float32))


def save_features(path, f: AudioFeatures):
    """Feature cache: npz with the matrix and (T, 40, frame_rate) header fields."""
    np.savez(
        path,
        mfcc=f.mfcc,
        num_frames=np.int64(f.num_frames),
        num_coeffs=np.int64(NUM_MFCC),
        frame_rate=np.int64(f.frame_rate),
    )


def load_features(path) -> AudioFeatures:
    with np.load(path) as data:
        return AudioFeatures(data["mfcc"], int(data["frame_rate"]))
