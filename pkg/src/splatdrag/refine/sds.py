"""Stage-2 refinement: image-conditioned multi-view score distillation.

Each iteration renders four orthogonal views at a random azimuth phase,
noises their latents to a level drawn from the decaying [t_min, t_max(iter)]
window, and applies (eps_hat - eps) through the renderer to every Gaussian
parameter, together with a perceptual term against the edited views at the
canonical rig poses. Densification and pruning run on a fixed interval.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import torch

from ..core.cameras import Camera, RigConfig
from ..core.errors import ValidationError
from ..core.gaussians import GaussianCloud, concat_clouds
from ..core.images import MultiViewImageSet
from ..render.gaussian_raster import quaternion_to_rotation, rasterize_gaussians
from .losses import MeanSquaredErrorLoss, PerceptualLoss

log = logging.getLogger(__name__)

MAX_CONSECUTIVE_NAN = 10


@dataclass
class SDSConfig:
    iterations: int = 1000
    t_max_start: float = 0.49
    t_max_end: float = 0.02
    t_min: float = 0.02
    densify_interval: int = 100
    densify_grad_threshold: float = 2e-4
    prune_opacity_threshold: float = 0.005
    densify_scale_threshold: float = 0.01  # clone below, split above
    max_gaussians: int = 20000  # densification stops above this count
    resolution: int | None = None
    perceptual_weight: float = 1.0
    seed: int = 0
    lr_position: float = 1.6e-4
    lr_sh: float = 2.5e-3
    lr_opacity: float = 0.05
    lr_scale: float = 5e-3
    lr_rotation: float = 1e-3

    def __post_init__(self):
        if self.t_max_start < self.t_max_end:
            raise ValidationError("t_max schedule must be non-increasing")
        if self.t_max_end < self.t_min:
            raise ValidationError("t_max must stay >= t_min")

    def t_max_at(self, iteration: int) -> float:
        frac = iteration / self.iterations
        return self.t_max_start + (self.t_max_end - self.t_max_start) * frac


@dataclass
class SDSResult:
    cloud: GaussianCloud
    t_max_trace: list[float] = field(default_factory=list)
    t_samples: list[float] = field(default_factory=list)
    perceptual_losses: list[float] = field(default_factory=list)
    gaussian_counts: list[int] = field(default_factory=list)


class TargetPullingBackend:
    """Analytic image-conditioned denoiser that pulls latents toward the
    rendering of a fixed reference cloud at the conditioning cameras.

    eps_hat(z_t) = (z_t - sqrt(ab) * target) / sqrt(1 - ab), the exact
    single-Gaussian (sigma -> 0) denoiser centered on the target rendering, so
    the SDS residual becomes sqrt(ab/(1-ab)) * (render - target). The
    conditioning image is accepted and ignored; cameras come from the
    condition dict.
    """

    feature_strides = (1,)
    latent_channels = 3

    def __init__(self, target_cloud: GaussianCloud, background: float = 0.5, schedule=None):
        from ..guidance.schedule import NoiseSchedule

        self.target_cloud = target_cloud
        self.background = background
        self.schedule = schedule or NoiseSchedule()

    def encode_images(self, rgb):
        return torch.as_tensor(np.asarray(rgb, dtype=np.float32))

    def decode_latents(self, z):
        return np.clip(z.detach().cpu().numpy(), 0.0, 1.0).astype(np.float32)

    def encode_rendered(self, rgb: torch.Tensor) -> torch.Tensor:
        return rgb

    def predict(self, z: torch.Tensor, tau: float, condition: Any = None):
        from ..guidance.backends import DenoiserOutput

        cameras = condition["cameras"] if condition else None
        if cameras is None:
            raise ValidationError("target-pulling backend needs conditioning cameras")
        with torch.no_grad():
            target = torch.stack(
                [
                    rasterize_gaussians(self.target_cloud, cam, bg=self.background).rgb
                    for cam in cameras
                ]
            )
        ab = self.schedule.alpha_bar(tau)
        eps = (z - np.sqrt(ab) * target) / np.sqrt(max(1.0 - ab, 1e-8))
        return DenoiserOutput(epsilon=eps, features=[z])


def _cloud_parameters(cloud: GaussianCloud) -> dict[str, torch.nn.Parameter]:
    return {
        "positions": torch.nn.Parameter(cloud.positions.clone()),
        "rotations": torch.nn.Parameter(cloud.rotations.clone()),
        "log_scales": torch.nn.Parameter(cloud.log_scales.clone()),
        "opacities": torch.nn.Parameter(cloud.opacities.clone()),
        "sh_dc": torch.nn.Parameter(cloud.sh_dc.clone()),
        "sh_rest": torch.nn.Parameter(cloud.sh_rest.clone()),
    }


def _make_optimizer(params: dict[str, torch.nn.Parameter], cfg: SDSConfig) -> torch.optim.Adam:
    groups = [
        {"params": [params["positions"]], "lr": cfg.lr_position},
        {"params": [params["rotations"]], "lr": cfg.lr_rotation},
        {"params": [params["log_scales"]], "lr": cfg.lr_scale},
        {"params": [params["opacities"]], "lr": cfg.lr_opacity},
        {"params": [params["sh_dc"], params["sh_rest"]], "lr": cfg.lr_sh},
    ]
    return torch.optim.Adam(groups, eps=1e-15)


def _as_cloud(params: dict[str, torch.nn.Parameter], view_id) -> GaussianCloud:
    return GaussianCloud(
        positions=params["positions"],
        rotations=params["rotations"],
        log_scales=params["log_scales"],
        opacities=params["opacities"],
        sh_dc=params["sh_dc"],
        sh_rest=params["sh_rest"],
        view_id=view_id,
    )


def densify_prune(
    cloud: GaussianCloud,
    grad_norms: torch.Tensor,
    grad_threshold: float = 2e-4,
    prune_opacity: float = 0.005,
    scale_threshold: float = 0.01,
) -> GaussianCloud:
    """Clone small / split large high-gradient Gaussians, drop transparent ones.

    Splits are deterministic: two children offset by +-0.5 of the major axis
    sigma, scales shrunk by 1.6. view_id is inherited. With zero gradients and
    healthy opacities this is the identity.
    """
    if len(cloud) == 0:
        return cloud
    keep = cloud.activated_opacities() >= prune_opacity
    out = cloud.select(keep)
    grad_norms = grad_norms[keep]

    hot = grad_norms > grad_threshold
    if not bool(hot.any()):
        return out
    major = out.activated_scales().max(dim=-1).values
    clone_mask = hot & (major <= scale_threshold)
    split_mask = hot & (major > scale_threshold)

    pieces = [out.select(~split_mask)]
    if bool(clone_mask.any()):
        pieces.append(out.select(clone_mask))
    if bool(split_mask.any()):
        src = out.select(split_mask)
        rot = quaternion_to_rotation(src.unit_rotations())
        axis_idx = src.activated_scales().argmax(dim=-1)
        axes = rot[torch.arange(len(src)), :, axis_idx]
        sigma = src.activated_scales().max(dim=-1).values.unsqueeze(-1)
        offset = 0.5 * sigma * axes
        for sign in (1.0, -1.0):
            child = src.clone()
            child.positions = src.positions + sign * offset
            child.log_scales = src.log_scales - float(np.log(1.6))
            pieces.append(child)
    pieces = [p for p in pieces if len(p)]
    return pieces[0] if len(pieces) == 1 else concat_clouds(pieces)


def sds_step(
    params: dict[str, torch.nn.Parameter],
    view_id,
    backend,
    edited_latents: torch.Tensor,
    edited_rgb: torch.Tensor,
    rig: RigConfig,
    cfg: SDSConfig,
    iteration: int,
    generator: torch.Generator,
    loss_fn: PerceptualLoss,
    canonical_cameras: list[Camera],
) -> tuple[torch.Tensor, float, float]:
    """One SDS iteration; returns (total loss, sampled t, perceptual value)."""
    res = cfg.resolution or rig.resolution
    psi = float(torch.rand((), generator=generator)) * 90.0
    cameras = [
        Camera(azimuth=psi + off, elevation=rig.elevation, distance=rig.distance,
               fov_y=rig.fov_y, resolution=res)
        for off in (0.0, 90.0, 180.0, 270.0)
    ]
    cond_idx = int(torch.randint(0, 4, (), generator=generator))

    t_max = cfg.t_max_at(iteration)
    t = cfg.t_min + float(torch.rand((), generator=generator)) * (t_max - cfg.t_min)

    cloud = _as_cloud(params, view_id)
    renders = torch.stack([rasterize_gaussians(cloud, cam, bg=rig.background).rgb for cam in cameras])
    latents = backend.encode_rendered(renders)
    ab = backend.schedule.alpha_bar(t)
    noise = torch.randn(latents.shape, generator=generator, dtype=latents.dtype)
    z_t = np.sqrt(ab) * latents + np.sqrt(1.0 - ab) * noise

    condition = {"image": edited_rgb[cond_idx], "cameras": cameras, "view": cond_idx}
    eps_hat = backend.predict(z_t, t, condition=condition).epsilon
    residual = (eps_hat - noise).detach()
    # the score objective is an expectation over (t, eps, o): average the
    # surrogate over the latent batch so gradient scale is resolution-free
    sds_loss = (residual * z_t).mean()

    perceptual = torch.zeros((), dtype=renders.dtype)
    if cfg.perceptual_weight > 0:
        canon = torch.stack(
            [rasterize_gaussians(cloud, cam, bg=rig.background).rgb for cam in canonical_cameras]
        )
        for v in range(4):
            perceptual = perceptual + loss_fn(canon[v], edited_rgb[v])
    total = sds_loss + cfg.perceptual_weight * perceptual
    return total, t, float(perceptual.detach())


def sds_refine(
    cloud: GaussianCloud,
    backend,
    edited_views: MultiViewImageSet,
    rig: RigConfig,
    cfg: SDSConfig,
    loss_fn: PerceptualLoss | None = None,
) -> SDSResult:
    """Run the full SDS loop with densify/prune on the configured interval."""
    loss_fn = loss_fn or MeanSquaredErrorLoss()
    generator = torch.Generator().manual_seed(cfg.seed)
    res = cfg.resolution or rig.resolution

    edited_rgb = torch.as_tensor(edited_views.rgb, dtype=cloud.dtype)
    if res != edited_views.resolution:
        if edited_views.resolution % res != 0:
            raise ValidationError("resolution must divide the edited view resolution")
        k = edited_views.resolution // res
        edited_rgb = edited_rgb.reshape(4, res, k, res, k, 3).mean(dim=(2, 4))
    edited_latents = backend.encode_rendered(edited_rgb)

    canonical = [
        Camera(azimuth=az, elevation=rig.elevation, distance=rig.distance,
               fov_y=rig.fov_y, resolution=res)
        for az in rig.azimuths
    ]

    params = _cloud_parameters(cloud)
    view_id = cloud.view_id if cloud.view_id is not None else torch.zeros(len(cloud), dtype=torch.int32)
    optimizer = _make_optimizer(params, cfg)
    grad_accum = torch.zeros(len(cloud))
    grad_count = 0

    result = SDSResult(cloud=cloud)
    consecutive_nan = 0
    for it in range(cfg.iterations):
        result.t_max_trace.append(cfg.t_max_at(it))
        optimizer.zero_grad()
        total, t, perceptual = sds_step(
            params, view_id, backend, edited_latents, edited_rgb, rig, cfg, it,
            generator, loss_fn, canonical,
        )
        result.t_samples.append(t)
        result.perceptual_losses.append(perceptual)
        total.backward()

        grads = [p.grad for p in params.values() if p.grad is not None]
        if any(not bool(torch.isfinite(g).all()) for g in grads):
            consecutive_nan += 1
            log.warning("skipping SDS iteration %d: non-finite gradient", it)
            if consecutive_nan >= MAX_CONSECUTIVE_NAN:
                raise ValidationError(
                    f"aborting after {MAX_CONSECUTIVE_NAN} consecutive non-finite gradients"
                )
            optimizer.zero_grad()
            continue
        consecutive_nan = 0
        if params["positions"].grad is not None:
            grad_accum += params["positions"].grad.norm(dim=-1)
            grad_count += 1
        optimizer.step()
        result.gaussian_counts.append(params["positions"].shape[0])

        due = cfg.densify_interval > 0 and (it + 1) % cfg.densify_interval == 0
        if due and it + 1 < cfg.iterations and params["positions"].shape[0] < cfg.max_gaussians:
            with torch.no_grad():
                snapshot = _as_cloud(params, view_id)
                snapshot = GaussianCloud(
                    positions=snapshot.positions.detach().clone(),
                    rotations=snapshot.rotations.detach().clone(),
                    log_scales=snapshot.log_scales.detach().clone(),
                    opacities=snapshot.opacities.detach().clone(),
                    sh_dc=snapshot.sh_dc.detach().clone(),
                    sh_rest=snapshot.sh_rest.detach().clone(),
                    view_id=view_id,
                )
                mean_grad = grad_accum / max(grad_count, 1)
                new_cloud = densify_prune(
                    snapshot,
                    mean_grad,
                    grad_threshold=cfg.densify_grad_threshold,
                    prune_opacity=cfg.prune_opacity_threshold,
                    scale_threshold=cfg.densify_scale_threshold,
                )
            params = _cloud_parameters(new_cloud)
            view_id = new_cloud.view_id
            optimizer = _make_optimizer(params, cfg)
            grad_accum = torch.zeros(len(new_cloud))
            grad_count = 0

    final = _as_cloud(params, view_id)
    result.cloud = GaussianCloud(
        positions=final.positions.detach().clone(),
        rotations=final.rotations.detach().clone(),
        log_scales=final.log_scales.detach().clone(),
        opacities=final.opacities.detach().clone(),
        sh_dc=final.sh_dc.detach().clone(),
        sh_rest=final.sh_rest.detach().clone(),
        view_id=view_id,
    )
    return result
