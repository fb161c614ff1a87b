"""Differentiable EWA splatting of 3D Gaussians, pure torch.

Per Gaussian the 3D covariance R S S^T R^T is pushed through the camera
rotation and the projective Jacobian to a 2D footprint; pixels composite
front-to-back with weights w_i = opacity_i * exp(-0.5 d^T Sigma2d^{-1} d).
Gradients flow to every Gaussian parameter. Designed for desk-scale scenes
(hundreds to a few thousand splats) on CPU, chunked over pixels to bound
memory.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from ..core.cameras import Camera
from ..core.errors import ValidationError
from ..core.gaussians import GaussianCloud

# px^2 added to the projected covariance diagonal; part of the footprint
# definition (shared by the brute-force oracle), not a tunable.
ANTIALIAS_VARIANCE = 0.3
NEAR_PLANE = 0.05
CULL_SIGMA = 3.0
MAX_PIXEL_CHUNK = 2048
MAX_SPLAT_WEIGHT = 0.9999

_SH_C0 = 0.28209479177387814
_SH_C1 = 0.4886025119029199
_SH_C2 = (1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
          -1.0925484305920792, 0.5462742152960396)
_SH_C3 = (-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
          0.3731763325901154, -0.4570457994644658, 1.445305721320277,
          -0.5900435899266435)


@dataclass
class RenderOutput:
    rgb: torch.Tensor  # (H, W, 3) in [0, 1]
    depth: torch.Tensor  # (H, W); +inf where alpha == 0
    alpha: torch.Tensor  # (H, W) in [0, 1]


def quaternion_to_rotation(q: torch.Tensor) -> torch.Tensor:
    """(N, 4) unit quaternions in (w, x, y, z) order to (N, 3, 3) matrices."""
    w, x, y, z = q.unbind(-1)
    return torch.stack(
        [
            torch.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], -1),
            torch.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], -1),
            torch.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], -1),
        ],
        dim=-2,
    )


def eval_sh(coeffs: torch.Tensor, dirs: torch.Tensor) -> torch.Tensor:
    """Evaluate real SH colors up to degree 3. coeffs (N, K, 3), dirs (N, 3) unit."""
    k = coeffs.shape[1]
    out = _SH_C0 * coeffs[:, 0]
    if k == 1:
        return out
    x, y, z = dirs.unbind(-1)
    out = out - _SH_C1 * y[:, None] * coeffs[:, 1]
    out = out + _SH_C1 * z[:, None] * coeffs[:, 2]
    out = out - _SH_C1 * x[:, None] * coeffs[:, 3]
    if k == 4:
        return out
    xx, yy, zz, xy, yz, xz = x * x, y * y, z * z, x * y, y * z, x * z
    out = out + _SH_C2[0] * xy[:, None] * coeffs[:, 4]
    out = out + _SH_C2[1] * yz[:, None] * coeffs[:, 5]
    out = out + _SH_C2[2] * (2 * zz - xx - yy)[:, None] * coeffs[:, 6]
    out = out + _SH_C2[3] * xz[:, None] * coeffs[:, 7]
    out = out + _SH_C2[4] * (xx - yy)[:, None] * coeffs[:, 8]
    if k == 9:
        return out
    out = out + _SH_C3[0] * (y * (3 * xx - yy))[:, None] * coeffs[:, 9]
    out = out + _SH_C3[1] * (xy * z)[:, None] * coeffs[:, 10]
    out = out + _SH_C3[2] * (y * (4 * zz - xx - yy))[:, None] * coeffs[:, 11]
    out = out + _SH_C3[3] * (z * (2 * zz - 3 * xx - 3 * yy))[:, None] * coeffs[:, 12]
    out = out + _SH_C3[4] * (x * (4 * zz - xx - yy))[:, None] * coeffs[:, 13]
    out = out + _SH_C3[5] * (z * (xx - yy))[:, None] * coeffs[:, 14]
    out = out + _SH_C3[6] * (x * (xx - 3 * yy))[:, None] * coeffs[:, 15]
    return out


def _background(camera: Camera, bg: float, dtype: torch.dtype) -> RenderOutput:
    res = camera.resolution
    return RenderOutput(
        rgb=torch.full((res, res, 3), float(bg), dtype=dtype),
        depth=torch.full((res, res), float("inf"), dtype=dtype),
        alpha=torch.zeros((res, res), dtype=dtype),
    )


def rasterize_gaussians(
    cloud: GaussianCloud,
    camera: Camera,
    bg: float = 0.5,
    antialias: float = ANTIALIAS_VARIANCE,
) -> RenderOutput:
    """Render one view; differentiable w.r.t. all cloud parameters.

    Depth is the alpha-weighted mean of per-splat camera z, +inf where no
    splat contributes. Splats whose CULL_SIGMA footprint misses the image are
    skipped.
    """
    dtype = cloud.dtype
    if len(cloud) == 0:
        return _background(camera, bg, dtype)
    for name, t in (("positions", cloud.positions), ("rotations", cloud.rotations),
                    ("log_scales", cloud.log_scales), ("opacities", cloud.opacities),
                    ("sh_dc", cloud.sh_dc)):
        if not bool(torch.isfinite(t).all()):
            raise ValidationError(f"non-finite {name}")

    res = camera.resolution
    rot_w2c = torch.as_tensor(camera.rotation(), dtype=dtype)
    eye = torch.as_tensor(camera.position, dtype=dtype)
    f = camera.focal_px

    pos_cam = (cloud.positions - eye) @ rot_w2c.T
    z = pos_cam[:, 2]

    rot_mats = quaternion_to_rotation(cloud.unit_rotations())
    scales = cloud.activated_scales()
    L = rot_mats * scales.unsqueeze(-2)  # R @ diag(s)
    cov3d = L @ L.transpose(-1, -2)
    cov_cam = rot_w2c @ cov3d @ rot_w2c.T

    zc = z.clamp_min(NEAR_PLANE)
    fz = f / zc
    jx = torch.stack([fz, torch.zeros_like(fz), -f * pos_cam[:, 0] / zc**2], dim=-1)
    jy = torch.stack([torch.zeros_like(fz), fz, -f * pos_cam[:, 1] / zc**2], dim=-1)
    J = torch.stack([jx, jy], dim=-2)  # (N, 2, 3)
    cov2d = J @ cov_cam @ J.transpose(-1, -2)
    cov2d = cov2d + antialias * torch.eye(2, dtype=dtype)

    mean2d = torch.stack(
        [f * pos_cam[:, 0] / zc + res / 2.0, f * pos_cam[:, 1] / zc + res / 2.0], dim=-1
    )

    # conservative cull: splats in front whose CULL_SIGMA box touches the image
    trace = cov2d[:, 0, 0] + cov2d[:, 1, 1]
    radius = CULL_SIGMA * torch.sqrt(trace.detach().clamp_min(0.0))
    m = mean2d.detach()
    keep = (
        (z.detach() > NEAR_PLANE)
        & (m[:, 0] + radius > 0) & (m[:, 0] - radius < res)
        & (m[:, 1] + radius > 0) & (m[:, 1] - radius < res)
    )
    if not bool(keep.any()):
        return _background(camera, bg, dtype)
    idx = torch.nonzero(keep, as_tuple=False).squeeze(-1)
    order = idx[torch.argsort(z.detach()[idx], stable=True)]

    mean2d = mean2d[order]
    cov2d = cov2d[order]
    z_sel = z[order]
    opacity = cloud.activated_opacities()[order]

    dirs = cloud.positions[order] - eye
    dirs = dirs / dirs.norm(dim=-1, keepdim=True).clamp_min(1e-12)
    colors = eval_sh(cloud.sh_coeffs()[order], dirs) + 0.5
    colors = colors.clamp_min(0.0)

    a = cov2d[:, 0, 0]
    b = cov2d[:, 0, 1]
    c = cov2d[:, 1, 1]
    det = (a * c - b * b).clamp_min(1e-12)
    inv_a = c / det
    inv_b = -b / det
    inv_c = a / det

    centers = torch.arange(res, dtype=dtype) + 0.5
    vs, us = torch.meshgrid(centers, centers, indexing="ij")
    px = torch.stack([us.reshape(-1), vs.reshape(-1)], dim=-1)  # (P, 2)

    n = mean2d.shape[0]
    rgb_rows, alpha_rows, depth_rows = [], [], []
    for start in range(0, px.shape[0], MAX_PIXEL_CHUNK):
        chunk = px[start : start + MAX_PIXEL_CHUNK]
        dx = chunk[None, :, 0] - mean2d[:, 0, None]
        dy = chunk[None, :, 1] - mean2d[:, 1, None]
        q = inv_a[:, None] * dx * dx + 2 * inv_b[:, None] * dx * dy + inv_c[:, None] * dy * dy
        w = (opacity[:, None] * torch.exp(-0.5 * q)).clamp_max(MAX_SPLAT_WEIGHT)
        # transmittance via exp(cumsum(log1p(-w))): same product, cheaper backward
        log_trans = torch.cumsum(torch.log1p(-w), dim=0)
        trans = torch.exp(log_trans)
        t_excl = torch.cat([torch.ones((1, w.shape[1]), dtype=dtype), trans[:-1]], dim=0)
        contrib = w * t_excl  # (n, P)
        alpha = 1.0 - trans[-1]
        rgb = (contrib.unsqueeze(-1) * colors.reshape(n, 1, 3)).sum(dim=0)
        rgb = rgb + (1.0 - alpha).unsqueeze(-1) * bg
        depth_num = (contrib * z_sel[:, None]).sum(dim=0)
        depth = torch.where(
            alpha > 0, depth_num / alpha.clamp_min(1e-12), torch.full_like(alpha, float("inf"))
        )
        rgb_rows.append(rgb)
        alpha_rows.append(alpha)
        depth_rows.append(depth)

    rgb = torch.cat(rgb_rows).reshape(res, res, 3).clamp(0.0, 1.0)
    alpha = torch.cat(alpha_rows).reshape(res, res)
    depth = torch.cat(depth_rows).reshape(res, res)
    return RenderOutput(rgb=rgb, depth=depth, alpha=alpha)
