"""Deterministic DDIM inversion and sampling over the four-view latent stack.

Both directions walk a uniform grid tau_i = i/steps. A step between grid
points uses the backend's epsilon at the current latent with the label of the
step's upper end (the convention of published inversion code), predicts x0,
and re-noises to the target level. Inversion caches the whole trajectory so
guided sampling can evaluate original-branch features at matching timesteps.
"""

from __future__ import annotations

import numpy as np
import torch

from ..core.errors import NumericError
from ..core.images import LatentStack, MultiViewImageSet


def _step(z: torch.Tensor, eps: torch.Tensor, ab_from: float, ab_to: float) -> torch.Tensor:
    x0 = (z - np.sqrt(1.0 - ab_from) * eps) / np.sqrt(ab_from)
    return np.sqrt(ab_to) * x0 + np.sqrt(1.0 - ab_to) * eps


def ddim_invert(
    images: MultiViewImageSet | torch.Tensor, backend, steps: int
) -> tuple[LatentStack, list[torch.Tensor]]:
    """Map images to the terminal latent; returns (z_T, full trajectory z_0..z_T)."""
    if isinstance(images, MultiViewImageSet):
        z = backend.encode_images(images.rgb)
    else:
        z = torch.as_tensor(images)
    trajectory = [z]
    for i in range(steps):
        tau_next = (i + 1) / steps
        with torch.no_grad():
            eps = backend.predict(z, tau_next).epsilon
        z = _step(z, eps, backend.schedule.alpha_bar(i / steps), backend.schedule.alpha_bar(tau_next))
        if not bool(torch.isfinite(z).all()):
            raise NumericError(f"non-finite latent during inversion at step {i + 1}/{steps}")
        trajectory.append(z)
    return LatentStack(values=z, step=steps), trajectory


def ddim_sample(z_t: LatentStack | torch.Tensor, backend, steps: int) -> torch.Tensor:
    """Plain deterministic sampling from the terminal latent down to z_0."""
    z = z_t.values if isinstance(z_t, LatentStack) else torch.as_tensor(z_t)
    for i in range(steps, 0, -1):
        tau = i / steps
        with torch.no_grad():
            eps = backend.predict(z, tau).epsilon
        z = _step(z, eps, backend.schedule.alpha_bar(tau), backend.schedule.alpha_bar((i - 1) / steps))
        if not bool(torch.isfinite(z).all()):
            raise NumericError(f"non-finite latent during sampling at step {i}/{steps}")
    return z
