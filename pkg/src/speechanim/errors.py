"""Exception types shared across the pipeline."""


class SpaceContractError(ValueError):
    """A landmark frame was passed in the wrong coordinate space."""


class DegenerateFaceError(ValueError):
    """Anchor landmarks coincide, so a normalizing transform is undefined."""


class MisalignedClipError(ValueError):
    """Audio and video frame counts differ by more than the tolerated slack."""


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite; a diagnostic checkpoint was written."""


class CheckpointError(RuntimeError):
    """Checkpoint file is missing, unreadable, or from an unsupported version."""
