"""Emotion conditioning vector: 8 labels with intensity as vector magnitude."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

EMOTIONS = ("neutral", "happy", "sad", "angry", "fear", "surprise", "disgust", "contempt")
EMOTION_DIM = len(EMOTIONS)


@dataclass(eq=False)
class EmotionVector:
    """Nonnegative weights over the 8 emotion labels; L2 norm is the intensity."""

    weights: np.ndarray = field(default_factory=lambda: np.zeros(EMOTION_DIM))

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if self.weights.shape != (EMOTION_DIM,):
            raise ValueError(f"emotion vector must have {EMOTION_DIM} weights")
        if not np.isfinite(self.weights).all():
            raise ValueError("emotion weights must be finite")
        if (self.weights < 0).any() or (self.weights > 1 + 1e-9).any():
            raise ValueError("emotion weights must lie in [0, 1]")
        if np.linalg.norm(self.weights) > 1.0 + 1e-9:
            raise ValueError("emotion vector magnitude must not exceed 1")

    @classmethod
    def neutral(cls) -> "EmotionVector":
        return cls(np.zeros(EMOTION_DIM))

    @classmethod
    def one_hot(cls, name: str, intensity: float = 1.0) -> "EmotionVector":
        if name not in EMOTIONS:
            raise ValueError(f"unknown emotion {name!r}; choose from {EMOTIONS}")
        if not 0.0 <= intensity <= 1.0:
            raise ValueError("intensity must lie in [0, 1]")
        w = np.zeros(EMOTION_DIM)
        w[EMOTIONS.index(name)] = intensity
        return cls(w)

    @property
    def intensity(self) -> float:
        return float(np.linalg.norm(self.weights))
