"""Rendering an asset into the four-view rig."""

from __future__ import annotations

import numpy as np
import torch

from ..core.cameras import RigConfig
from ..core.gaussians import GaussianCloud
from ..core.images import MultiViewImageSet
from ..core.mesh import TriMesh
from .gaussian_raster import RenderOutput, rasterize_gaussians
from .mesh_raster import rasterize_mesh


def rasterize(asset: GaussianCloud | TriMesh, camera, bg: float = 0.5) -> RenderOutput:
    if isinstance(asset, GaussianCloud):
        with torch.no_grad():
            return rasterize_gaussians(asset, camera, bg=bg)
    if isinstance(asset, TriMesh):
        return rasterize_mesh(asset, camera, bg=bg)
    raise TypeError(f"cannot render asset of type {type(asset).__name__}")


def render_rig(asset: GaussianCloud | TriMesh, rig: RigConfig) -> MultiViewImageSet:
    """Render the asset from all four rig cameras, azimuth order 0, 90, 180, 270."""
    rgb, depth, alpha = [], [], []
    for camera in rig.cameras():
        out = rasterize(asset, camera, bg=rig.background)
        rgb.append(out.rgb.detach().cpu().numpy())
        depth.append(out.depth.detach().cpu().numpy())
        alpha.append(out.alpha.detach().cpu().numpy())
    return MultiViewImageSet(
        rgb=np.stack(rgb).astype(np.float32),
        depth=np.stack(depth).astype(np.float32),
        alpha=np.stack(alpha).astype(np.float32),
        azimuths=rig.azimuths,
    )
