"""Fourier positional embedding for low-dimensional coordinate inputs."""

from __future__ import annotations

import torch


def fourier_embed(x: torch.Tensor, num_bands: int) -> torch.Tensor:
    """concat(x, sin(2^l pi x), cos(2^l pi x)) for l = 0..num_bands-1.

    Output dimension is 3 + 6*num_bands for 3-vectors; num_bands = 0 returns
    x unchanged. The identity term keeps the embedding injective.
    """
    parts = [x]
    for level in range(num_bands):
        arg = (2.0**level) * torch.pi * x
        parts.append(torch.sin(arg))
        parts.append(torch.cos(arg))
    return torch.cat(parts, dim=-1)
