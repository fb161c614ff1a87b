"""Turn four edited views into a fused Gaussian cloud via a pluggable regressor.

Fusion is pure concatenation with per-view tags kept: overlapping regions
between views stay misaligned on purpose, because the deformation stage is
what corrects them. The hermetic test backend unprojects foreground pixels
through their depth into one isotropic Gaussian per pixel; the pretrained
large-reconstruction-model path is an adapter behind the same interface.
"""

from __future__ import annotations

from typing import Any, Protocol, runtime_checkable

import numpy as np
import torch

from .core.cameras import RigConfig
from .core.errors import ValidationError
from .core.gaussians import GaussianCloud, SH_C0, concat_clouds
from .core.images import MultiViewImageSet


@runtime_checkable
class ReconstructorBackend(Protocol):
    def regress(self, views: MultiViewImageSet, rig: RigConfig) -> list[GaussianCloud]: ...


class DepthUnprojectionBackend:
    """One Gaussian per foreground pixel, unprojected through the depth map.

    scale tracks the pixel footprint at the pixel's depth (z/f per pixel,
    times the sampling stride), so a re-render of the produced cloud covers
    the image without holes. Requires depth and alpha channels.
    """

    def __init__(self, stride: int = 1, opacity: float = 0.98, scale_factor: float = 0.8):
        if stride < 1:
            raise ValidationError("stride must be >= 1")
        self.stride = stride
        self.opacity = opacity
        self.scale_factor = scale_factor

    def regress(self, views: MultiViewImageSet, rig: RigConfig) -> list[GaussianCloud]:
        if views.depth is None or views.alpha is None:
            raise ValidationError("depth unprojection needs depth and alpha channels")
        clouds = []
        opacity_raw = float(np.log(self.opacity / (1.0 - self.opacity)))
        for i, camera in enumerate(rig.cameras()):
            depth = views.depth[i][:: self.stride, :: self.stride]
            alpha = views.alpha[i][:: self.stride, :: self.stride]
            rgb = views.rgb[i][:: self.stride, :: self.stride]
            rows, cols = np.nonzero((alpha >= 0.5) & np.isfinite(depth))
            n = rows.shape[0]
            if n == 0:
                clouds.append(_empty_cloud(i))
                continue
            z = depth[rows, cols].astype(np.float64)
            uv = np.stack(
                [cols * self.stride + 0.5, rows * self.stride + 0.5], axis=-1
            ).astype(np.float64)
            world = camera.unproject(uv, z)
            scale = self.scale_factor * self.stride * z / camera.focal_px
            colors = rgb[rows, cols].astype(np.float32)

            rot = np.zeros((n, 4), dtype=np.float32)
            rot[:, 0] = 1.0
            clouds.append(
                GaussianCloud(
                    positions=torch.from_numpy(world.astype(np.float32)),
                    rotations=torch.from_numpy(rot),
                    log_scales=torch.from_numpy(
                        np.repeat(np.log(scale)[:, None], 3, axis=1).astype(np.float32)
                    ),
                    opacities=torch.full((n,), opacity_raw, dtype=torch.float32),
                    sh_dc=torch.from_numpy((colors - 0.5) / SH_C0),
                    sh_rest=torch.zeros((n, 0, 3), dtype=torch.float32),
                    view_id=torch.full((n,), i, dtype=torch.int32),
                )
            )
        return clouds


def _empty_cloud(view: int) -> GaussianCloud:
    return GaussianCloud(
        positions=torch.zeros((0, 3)),
        rotations=torch.zeros((0, 4)),
        log_scales=torch.zeros((0, 3)),
        opacities=torch.zeros((0,)),
        sh_dc=torch.zeros((0, 3)),
        sh_rest=torch.zeros((0, 0, 3)),
        view_id=torch.zeros((0,), dtype=torch.int32),
    )


def regress_and_fuse(
    views: MultiViewImageSet, rig: RigConfig, backend: ReconstructorBackend
) -> GaussianCloud:
    """Concatenate the four per-view regressions, view_id preserved, no dedup."""
    clouds = backend.regress(views, rig)
    if len(clouds) != 4:
        raise ValidationError("reconstructor backend must return four per-view clouds")
    for i, c in enumerate(clouds):
        if c.view_id is None:
            c.view_id = torch.full((len(c),), i, dtype=torch.int32)
    return concat_clouds(clouds)


def load_reconstructor(spec: str, context: dict[str, Any] | None = None) -> ReconstructorBackend:
    """"unproj[:stride]" for the hermetic backend, "adapter:mod:attr" otherwise."""
    if spec == "unproj" or spec.startswith("unproj:"):
        stride = int(spec.split(":", 1)[1]) if ":" in spec else 1
        return DepthUnprojectionBackend(stride=stride)
    if spec.startswith("adapter:"):
        target = spec[len("adapter:") :]
        module_name, _, attr = target.partition(":")
        if not module_name or not attr:
            raise ValidationError("adapter spec must look like adapter:module.path:factory")
        import importlib

        factory = getattr(importlib.import_module(module_name), attr)
        return factory(context or {})
    raise ValidationError(f"unknown reconstructor backend spec {spec!r}")
