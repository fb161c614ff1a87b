"""Denoiser backends: the pluggable interface plus exact analytic test models.

A backend bundles three things: the noise prediction epsilon(z, tau, y) with
per-layer decoder features, the noise schedule, and the latent codec. The
analytic Gaussian-mixture backend computes the score of the diffused mixture
in closed form, which makes inversion, sampling and guidance verifiable
end-to-end without any pretrained network.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Protocol, runtime_checkable

import numpy as np
import torch

from ..core.errors import ValidationError
from .schedule import NoiseSchedule


@dataclass
class DenoiserOutput:
    epsilon: torch.Tensor  # same shape as the latent stack (4, H, W, C)
    features: list[torch.Tensor]  # one (4, h, w, c) map per decoder layer


@runtime_checkable
class DenoiserBackend(Protocol):
    """What guided sampling needs from a (multi-view) denoiser.

    Real pretrained models plug in through this interface via an adapter;
    their weights and runtime are outside the hermetic test surface.
    """

    schedule: NoiseSchedule
    feature_strides: tuple[int, ...]
    latent_channels: int

    def predict(self, z: torch.Tensor, tau: float, condition: Any = None) -> DenoiserOutput: ...

    def encode_images(self, rgb: np.ndarray) -> torch.Tensor: ...

    def decode_latents(self, z: torch.Tensor) -> np.ndarray: ...

    def encode_rendered(self, rgb: torch.Tensor) -> torch.Tensor:
        """Differentiable image-to-latent map for tensors already on the graph."""
        ...


class _IdentityCodec:
    """Latents are the images themselves (C = 3); decode clips to [0, 1]."""

    latent_channels = 3

    def encode_images(self, rgb: np.ndarray) -> torch.Tensor:
        return torch.as_tensor(np.asarray(rgb, dtype=np.float32))

    def decode_latents(self, z: torch.Tensor) -> np.ndarray:
        return np.clip(z.detach().cpu().numpy(), 0.0, 1.0).astype(np.float32)

    def encode_rendered(self, rgb: torch.Tensor) -> torch.Tensor:
        return rgb


class GaussianMixtureBackend(_IdentityCodec):
    """Exact denoiser for data distributed as a Gaussian mixture.

    Components live in the flattened latent space; diffusing x0 ~ sum_k w_k
    N(mu_k, sigma_k^2 I) under alpha_bar gives marginals sum_k w_k
    N(sqrt(ab) mu_k, (ab sigma_k^2 + 1 - ab) I) whose score (and hence
    epsilon = -sqrt(1-ab) * score) is available in closed form.

    Features are the per-view latents themselves (stride 1), optionally mixed
    across views: feat_i = (1-m) z_i + m mean_j z_j, modeling the cross-view
    attention coupling of a multi-view denoiser.
    """

    def __init__(
        self,
        means: torch.Tensor,
        weights=None,
        sigmas=None,
        schedule: NoiseSchedule | None = None,
        view_mixing: float = 0.0,
    ):
        means = torch.as_tensor(means, dtype=torch.float32)
        if means.ndim == 4:
            means = means.unsqueeze(0)
        if means.ndim != 5 or means.shape[1] != 4:
            raise ValidationError("means must be (K, 4, H, W, C)")
        k = means.shape[0]
        weights = torch.ones(k) / k if weights is None else torch.as_tensor(weights, dtype=torch.float32)
        sigmas = torch.full((k,), 0.5) if sigmas is None else torch.as_tensor(sigmas, dtype=torch.float32)
        if weights.shape != (k,) or sigmas.shape != (k,):
            raise ValidationError("weights and sigmas must have one entry per component")
        if bool((weights <= 0).any()):
            raise ValidationError("weights must be positive")
        if bool((sigmas <= 0).any()):
            raise ValidationError("degenerate sigma: every component needs sigma > 0")
        if not 0.0 <= view_mixing <= 1.0:
            raise ValidationError("view_mixing must lie in [0, 1]")

        self.latent_shape = tuple(means.shape[1:])
        self.means_flat = means.reshape(k, -1)
        self.log_weights = torch.log(weights / weights.sum())
        self.sigmas = sigmas
        self.schedule = schedule or NoiseSchedule()
        self.view_mixing = float(view_mixing)
        self.feature_strides = (1,)

    def log_density(self, z: torch.Tensor, tau: float) -> torch.Tensor:
        """Log-density of the diffused mixture at z (differentiable)."""
        ab = self.schedule.alpha_bar(tau)
        flat = z.reshape(-1)
        d = flat.shape[0]
        var = ab * self.sigmas**2 + 1.0 - ab
        diff = flat.unsqueeze(0) - np.sqrt(ab) * self.means_flat
        comp = (
            self.log_weights
            - 0.5 * d * torch.log(2 * torch.pi * var)
            - 0.5 * (diff * diff).sum(dim=1) / var
        )
        return torch.logsumexp(comp, dim=0)

    def score(self, z: torch.Tensor, tau: float) -> torch.Tensor:
        ab = self.schedule.alpha_bar(tau)
        flat = z.reshape(-1)
        var = ab * self.sigmas**2 + 1.0 - ab
        diff = flat.unsqueeze(0) - np.sqrt(ab) * self.means_flat  # (K, D)
        d = flat.shape[0]
        comp = (
            self.log_weights
            - 0.5 * d * torch.log(2 * torch.pi * var)
            - 0.5 * (diff * diff).sum(dim=1) / var
        )
        resp = torch.softmax(comp, dim=0)  # (K,)
        s = -(resp / var).unsqueeze(1) * diff
        return s.sum(dim=0).reshape(z.shape)

    def predict(self, z: torch.Tensor, tau: float, condition: Any = None) -> DenoiserOutput:
        ab = self.schedule.alpha_bar(tau)
        eps = -np.sqrt(max(1.0 - ab, 0.0)) * self.score(z, tau)
        return DenoiserOutput(epsilon=eps, features=[self._features(z)])

    def _features(self, z: torch.Tensor) -> torch.Tensor:
        if self.view_mixing == 0.0:
            return z
        mixed = z.mean(dim=0, keepdim=True).expand_as(z)
        return (1.0 - self.view_mixing) * z + self.view_mixing * mixed

    def sample_data(self, generator: torch.Generator) -> torch.Tensor:
        """Draw one x0 from the mixture (component by weight, then Gaussian)."""
        probs = torch.exp(self.log_weights)
        k = int(torch.multinomial(probs, 1, generator=generator))
        noise = torch.randn(self.means_flat.shape[1], generator=generator)
        flat = self.means_flat[k] + self.sigmas[k] * noise
        return flat.reshape(self.latent_shape)


def load_backend(spec: str, context: dict[str, Any]) -> Any:
    """Resolve a backend spec string.

    "toy" builds a single-component mixture around the encoded input views
    (context needs "views"; optional "sigma", "view_mixing"). "adapter:pkg.mod:attr"
    imports attr and calls it with the context dict, letting external weights
    plug in without being a test dependency.
    """
    if spec == "toy":
        views = context["views"]
        codec = _IdentityCodec()
        mean = codec.encode_images(views.rgb).unsqueeze(0)
        return GaussianMixtureBackend(
            means=mean,
            sigmas=torch.tensor([float(context.get("sigma", 0.4))]),
            view_mixing=float(context.get("view_mixing", 0.0)),
        )
    if spec.startswith("adapter:"):
        target = spec[len("adapter:") :]
        module_name, _, attr = target.partition(":")
        if not module_name or not attr:
            raise ValidationError("adapter spec must look like adapter:module.path:factory")
        import importlib

        factory = getattr(importlib.import_module(module_name), attr)
        return factory(context)
    raise ValidationError(f"unknown denoiser backend spec {spec!r}")
