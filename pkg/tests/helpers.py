"""Shared test utilities: finite-difference gradient checking."""

import numpy as np
import torch


def central_difference_check(
    loss_fn,
    parameters: list[torch.nn.Parameter],
    n_coords: int = 100,
    h: float = 1e-5,
    seed: int = 0,
    rel_tol: float = 1e-3,
) -> tuple[int, float]:
    """Compare autograd gradients with central finite differences in float64.

    Samples n_coords scalar coordinates across the given parameters and
    returns (n_checked, max_relative_error). loss_fn must be deterministic.
    """
    params = [p for p in parameters if p.requires_grad]
    for p in params:
        assert p.dtype == torch.float64, "gradient check requires float64 parameters"
        p.grad = None
    loss = loss_fn()
    loss.backward()
    grads = [p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p) for p in params]

    sizes = np.array([p.numel() for p in params])
    total = int(sizes.sum())
    rng = np.random.default_rng(seed)
    coords = rng.choice(total, size=min(n_coords, total), replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    max_rel = 0.0
    checked = 0
    with torch.no_grad():
        for coord in coords:
            p_idx = int(np.searchsorted(offsets, coord, side="right") - 1)
            flat_idx = int(coord - offsets[p_idx])
            param = params[p_idx]
            flat = param.view(-1)
            original = flat[flat_idx].item()

            flat[flat_idx] = original + h
            loss_plus = float(loss_fn())
            flat[flat_idx] = original - h
            loss_minus = float(loss_fn())
            flat[flat_idx] = original

            numeric = (loss_plus - loss_minus) / (2 * h)
            analytic = float(grads[p_idx].view(-1)[flat_idx])
            scale = max(abs(numeric), abs(analytic))
            if scale < 1e-10:
                rel = 0.0
            else:
                rel = abs(numeric - analytic) / scale
            max_rel = max(max_rel, rel)
            checked += 1
    assert max_rel < rel_tol, f"gradient mismatch: max relative error {max_rel:.3e}"
    return checked, max_rel
