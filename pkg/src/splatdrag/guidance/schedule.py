"""Variance-preserving noise schedule over continuous time tau in [0, 1]."""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch

from ..core.errors import ValidationError


@dataclass(frozen=True)
class NoiseSchedule:
    """alpha_bar(tau) = exp(-beta_min*tau - (beta_max-beta_min)*tau^2/2).

    Monotone decreasing with alpha_bar(0) = 1 exactly. The default range ends
    at alpha_bar(1) ~ 0.078 (92% noise by variance): first-order inversion
    round-trip error grows with the total log-SNR traversal, and this range
    keeps a 150-step round trip comfortably inside 1e-2 relative error while
    still burying the signal for editing purposes.
    """

    beta_min: float = 0.1
    beta_max: float = 5.0

    def __post_init__(self):
        if self.beta_min < 0 or self.beta_max < self.beta_min:
            raise ValidationError("need 0 <= beta_min <= beta_max")

    def alpha_bar(self, tau: float) -> float:
        tau = float(tau)
        return math.exp(-self.beta_min * tau - 0.5 * (self.beta_max - self.beta_min) * tau * tau)

    def alpha_bar_tensor(self, tau: torch.Tensor) -> torch.Tensor:
        return torch.exp(-self.beta_min * tau - 0.5 * (self.beta_max - self.beta_min) * tau * tau)
