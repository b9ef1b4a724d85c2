from .decoder import (
    MAEDecoderConfig,
    MaskedAutoencoder,
    masked_reconstruction_loss,
    pixel_targets,
)
from .schedule import PretrainSchedule, lr_at
from .train import MAETrainConfig, MAETrainResult, SampleStream, build_sample, train_mae

__all__ = [
    "MAEDecoderConfig",
    "MAETrainConfig",
    "MAETrainResult",
    "MaskedAutoencoder",
    "PretrainSchedule",
    "SampleStream",
    "build_sample",
    "lr_at",
    "masked_reconstruction_loss",
    "pixel_targets",
    "train_mae",
]
