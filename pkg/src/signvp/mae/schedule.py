"""Pretraining schedule: linear warmup then cosine decay."""

import math
from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True)
class PretrainSchedule:
    effective_epochs: int = 800
    warmup_epochs: float = 120
    peak_lr: float = 8e-4
    min_lr: float = 1e-5
    weight_decay: float = 0.05
    betas: tuple[float, float] = (0.9, 0.95)
    effective_batch: int = 256
    repeated_sampling: int = 2
    grad_clip: Optional[float] = None

    def __post_init__(self):
        if not (0 <= self.warmup_epochs < self.effective_epochs):
            raise ValueError(
                f"warmup {self.warmup_epochs} must be < total epochs {self.effective_epochs}"
            )
        if not (0 <= self.min_lr < self.peak_lr):
            raise ValueError(f"min_lr {self.min_lr} must be < peak_lr {self.peak_lr}")
        if self.repeated_sampling < 1:
            raise ValueError("repeated_sampling must be >= 1")


def lr_at(step: float, schedule: PretrainSchedule, steps_per_epoch: float = 1.0) -> float:
    """Learning rate at a step: linear warmup to peak, cosine decay to min_lr.

    With steps_per_epoch=1 the step argument is in epoch units.
    """
    total = schedule.effective_epochs * steps_per_epoch
    warmup = schedule.warmup_epochs * steps_per_epoch
    if not (0 <= step <= total):
        raise ValueError(f"step {step} outside [0, {total}]")
    if warmup > 0 and step < warmup:
        return schedule.peak_lr * step / warmup
    if total == warmup:
        return schedule.peak_lr
    progress = (step - warmup) / (total - warmup)
    return schedule.min_lr + 0.5 * (schedule.peak_lr - schedule.min_lr) * (
        1.0 + math.cos(math.pi * progress)
    )
