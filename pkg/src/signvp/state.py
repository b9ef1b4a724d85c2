"""Checkpoint serialization: named tensors, config echo, step count, RNG state."""

import io
from pathlib import Path

import torch


def save_checkpoint(
    path: Path,
    *,
    step: int,
    models: dict[str, dict],
    optimizers: dict[str, dict],
    config_echo: dict,
    extra: dict | None = None,
) -> None:
    payload = {
        "step": step,
        "models": models,
        "optimizers": optimizers,
        "config": config_echo,
        "rng_torch": torch.get_rng_state(),
        "extra": extra or {},
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buffer = io.BytesIO()
    torch.save(payload, buffer)
    path.write_bytes(buffer.getvalue())


def load_checkpoint(path: Path) -> dict:
    return torch.load(Path(path), map_location="cpu", weights_only=False)


def restore_rng(payload: dict) -> None:
    torch.set_rng_state(payload["rng_torch"])
