from .gaussian_raster import (
    ANTIALIAS_VARIANCE,
    CULL_SIGMA,
    NEAR_PLANE,
    RenderOutput,
    eval_sh,
    quaternion_to_rotation,
    rasterize_gaussians,
)
from .mesh_raster import rasterize_mesh
from .rig import rasterize, render_rig

__all__ = [
    "ANTIALIAS_VARIANCE",
    "CULL_SIGMA",
    "NEAR_PLANE",
    "RenderOutput",
    "eval_sh",
    "quaternion_to_rotation",
    "rasterize",
    "rasterize_gaussians",
    "rasterize_mesh",
    "render_rig",
]
