"""Perceptual loss interface with a pixel-space fallback.

The real pipeline plugs a pretrained VGG-based perceptual metric in through
load_perceptual("adapter:..."); the hermetic suite runs on the summed squared
error fallback, which satisfies the same contract (zero at identity,
non-negative, differentiable in the first argument).
"""

from __future__ import annotations

from typing import Any, Protocol, runtime_checkable

import torch

from ..core.errors import ValidationError


@runtime_checkable
class PerceptualLoss(Protocol):
    def __call__(self, image_a: torch.Tensor, image_b: torch.Tensor) -> torch.Tensor: ...


class SquaredErrorLoss:
    """Sum of squared pixel differences (not averaged: gradient scale matters
    for the plain-gradient-descent deformation stage)."""

    def __call__(self, image_a: torch.Tensor, image_b: torch.Tensor) -> torch.Tensor:
        return ((image_a - image_b) ** 2).sum()


class MeanSquaredErrorLoss:
    """Per-pixel mean variant; the distillation stage defaults to this so its
    gradient scale (and the densification thresholds calibrated for it) stays
    independent of render resolution."""

    def __call__(self, image_a: torch.Tensor, image_b: torch.Tensor) -> torch.Tensor:
        return ((image_a - image_b) ** 2).mean()


def load_perceptual(spec: str, context: dict[str, Any] | None = None) -> PerceptualLoss:
    if spec in ("l2", "squared_error"):
        return SquaredErrorLoss()
    if spec.startswith("adapter:"):
        target = spec[len("adapter:") :]
        module_name, _, attr = target.partition(":")
        if not module_name or not attr:
            raise ValidationError("adapter spec must look like adapter:module.path:factory")
        import importlib

        factory = getattr(importlib.import_module(module_name), attr)
        return factory(context or {})
    raise ValidationError(f"unknown perceptual loss spec {spec!r}")
