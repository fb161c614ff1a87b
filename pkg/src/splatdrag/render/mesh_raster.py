"""Forward-only z-buffered triangle rasterization (numpy)."""

from __future__ import annotations

import numpy as np
import torch

from ..core.cameras import Camera
from ..core.mesh import TriMesh
from .gaussian_raster import NEAR_PLANE, RenderOutput

DEFAULT_ALBEDO = 0.75


def rasterize_mesh(mesh: TriMesh, camera: Camera, bg: float = 0.5) -> RenderOutput:
    """Flat vertex-color (or constant albedo) shading, nearest-hit depth.

    Faces with any vertex at or behind the near plane are skipped; assets are
    normalized well inside the rig so near-plane clipping never matters here.
    """
    res = camera.resolution
    rgb = np.full((res, res, 3), float(bg), dtype=np.float64)
    depth = np.full((res, res), np.inf, dtype=np.float64)
    alpha = np.zeros((res, res), dtype=np.float64)

    if len(mesh) > 0:
        uv, z = camera.project(mesh.vertices)
        colors = mesh.colors if mesh.colors is not None else np.full(
            (len(mesh.vertices), 3), DEFAULT_ALBEDO
        )
        inv_z = np.zeros_like(z)
        front = z > NEAR_PLANE
        inv_z[front] = 1.0 / z[front]

        for face in mesh.faces:
            if not front[face].all():
                continue
            tri = uv[face]  # (3, 2)
            lo = np.floor(tri.min(axis=0)).astype(int)
            hi = np.ceil(tri.max(axis=0)).astype(int)
            x0, y0 = np.maximum(lo, 0)
            x1, y1 = np.minimum(hi, res)
            if x0 >= x1 or y0 >= y1:
                continue
            xs = np.arange(x0, x1) + 0.5
            ys = np.arange(y0, y1) + 0.5
            gx, gy = np.meshgrid(xs, ys)

            (ax, ay), (bx, by), (cx, cy) = tri
            area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
            if abs(area) < 1e-12:
                continue
            w0 = ((bx - gx) * (cy - gy) - (by - gy) * (cx - gx)) / area
            w1 = ((cx - gx) * (ay - gy) - (cy - gy) * (ax - gx)) / area
            w2 = 1.0 - w0 - w1
            inside = (w0 >= 0) & (w1 >= 0) & (w2 >= 0)
            if not inside.any():
                continue

            # perspective-correct: 1/z interpolates linearly in screen space
            izs = inv_z[face]
            iz = w0 * izs[0] + w1 * izs[1] + w2 * izs[2]
            zpix = np.where(iz > 0, 1.0 / np.maximum(iz, 1e-12), np.inf)
            col = (
                w0[..., None] * (colors[face[0]] * izs[0])
                + w1[..., None] * (colors[face[1]] * izs[1])
                + w2[..., None] * (colors[face[2]] * izs[2])
            ) / np.maximum(iz, 1e-12)[..., None]

            sub_depth = depth[y0:y1, x0:x1]
            win = inside & (zpix < sub_depth)
            sub_depth[win] = zpix[win]
            rgb[y0:y1, x0:x1][win] = np.clip(col[win], 0.0, 1.0)
            alpha[y0:y1, x0:x1][win] = 1.0

    return RenderOutput(
        rgb=torch.from_numpy(rgb.astype(np.float32)),
        depth=torch.from_numpy(depth.astype(np.float32)),
        alpha=torch.from_numpy(alpha.astype(np.float32)),
    )
