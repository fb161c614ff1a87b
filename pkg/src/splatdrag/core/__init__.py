from .cameras import Camera, RigConfig, RIG_AZIMUTHS
from .drags import DragSet, ProjectedPair, ViewProjections, load_dragset, save_dragset
from .errors import DataError, FormatError, NumericError, ValidationError
from .gaussians import (
    GaussianCloud,
    SH_C0,
    concat_clouds,
    flat_color_cloud,
    load_gaussians,
    save_gaussians,
)
from .images import (
    LatentStack,
    MultiViewImageSet,
    decode_float_payload,
    encode_float_payload,
    load_png,
    load_raw_array,
    load_view_dir,
    save_png,
    save_raw_array,
    save_view_dir,
)
from .mesh import TriMesh, load_mesh

__all__ = [
    "Camera",
    "DataError",
    "DragSet",
    "FormatError",
    "GaussianCloud",
    "LatentStack",
    "MultiViewImageSet",
    "NumericError",
    "ProjectedPair",
    "RIG_AZIMUTHS",
    "RigConfig",
    "SH_C0",
    "TriMesh",
    "ValidationError",
    "ViewProjections",
    "concat_clouds",
    "decode_float_payload",
    "encode_float_payload",
    "flat_color_cloud",
    "load_dragset",
    "load_gaussians",
    "load_mesh",
    "load_png",
    "load_raw_array",
    "load_view_dir",
    "save_dragset",
    "save_gaussians",
    "save_png",
    "save_raw_array",
    "save_view_dir",
]
