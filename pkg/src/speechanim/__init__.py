"""Speech-driven facial landmark animation.

Pipeline: waveform -> MFCC features -> frontal normalized landmarks (S2L)
-> head pose (generated, transferred, or fixed) -> latent keypoints (L2L)
-> rendered frames.  Training and verification run on a procedurally
generated synthetic corpus whose latent keypoints come from a deterministic
oracle.
"""

from .audio import AudioFeatures, AugmentSpec, Waveform, align_frames, augment, compute_mfcc
from .emotion import EMOTIONS, EmotionVector
from .errors import (
    CheckpointError,
    DegenerateFaceError,
    MisalignedClipError,
    SpaceContractError,
    TrainingDivergedError,
)
from .geometry import (
    HeadPose,
    LandmarkFrame,
    Space,
    apply_pose,
    frontalize,
    metric_normalize,
    normalize_scale,
    project_orthographic,
    rotation_from_angles,
)
from .models import (
    FiLM,
    LandmarksToLatents,
    ModelConfig,
    PoseGenerator,
    SpeechToLandmarks,
    build_model,
)
from .synthdata import ClipRecord, ClipSpec, CorpusConfig, LatentOracle, build_corpus, generate_clip
from .training import TrainConfig, load_checkpoint, lr_schedule, save_checkpoint, train_model

__version__ = "0.1.0"
