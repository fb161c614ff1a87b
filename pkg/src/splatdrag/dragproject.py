"""Project 3D drag pairs into the rig views and cull by the rendered depth.

A pair is visible in a view when both endpoints land inside the image and
neither lies deeper than the rendered depth at its pixel (plus a small slack;
splat depth is soft). Points behind the camera are simply invisible.
"""

from __future__ import annotations

import logging
from dataclasses import replace

import numpy as np

from .core.cameras import RigConfig
from .core.drags import DragSet, ViewProjections
from .core.errors import ValidationError
from .core.images import MultiViewImageSet

log = logging.getLogger(__name__)

DEPTH_TOLERANCE_FACTOR = 0.01


def scene_radius_estimate(views: MultiViewImageSet, rig: RigConfig) -> float:
    """Object radius inferred from how close the nearest surface comes to a camera."""
    finite = views.depth[np.isfinite(views.depth)]
    if finite.size == 0:
        return 1.0
    return max(float(rig.distance - finite.min()), 1e-3)


def project_pairs(
    drags: DragSet,
    views: MultiViewImageSet,
    rig: RigConfig,
    depth_tolerance_factor: float = DEPTH_TOLERANCE_FACTOR,
) -> DragSet:
    """Fill per-view projections and visibility for every pair.

    Pairs that end up invisible in all four views are kept in the set (their
    flags make every downstream stage skip them) but logged as a warning,
    since the edit cannot act on them.
    """
    if views.resolution != rig.resolution:
        raise ValidationError("view set and rig resolutions differ")
    eps = depth_tolerance_factor * scene_radius_estimate(views, rig)
    res = rig.resolution
    k = len(drags)

    projections: list[ViewProjections] = []
    for i, camera in enumerate(rig.cameras()):
        p_uv, p_z = camera.project(drags.sources)
        q_uv, q_z = camera.project(drags.targets)
        p_px = np.zeros((k, 2), dtype=np.int64)
        q_px = np.zeros((k, 2), dtype=np.int64)
        visible = np.zeros(k, dtype=bool)
        for j in range(k):
            ok = True
            for uv, z, px in ((p_uv[j], p_z[j], p_px[j]), (q_uv[j], q_z[j], q_px[j])):
                if z <= 0 or not np.isfinite(uv).all():
                    ok = False
                    continue
                col, row = camera.pixel_index(uv)[0]
                px[0], px[1] = col, row
                if not (0 <= col < res and 0 <= row < res):
                    ok = False
                    continue
                if z > views.depth[i, row, col] + eps:
                    ok = False
            visible[j] = ok
        projections.append(
            ViewProjections(view=i, p_px=p_px, q_px=q_px, p_z=p_z, q_z=q_z, visible=visible)
        )

    any_view = np.zeros(k, dtype=bool)
    for vp in projections:
        any_view |= vp.visible
    dropped = np.nonzero(~any_view)[0]
    if dropped.size:
        log.warning(
            "drag pair(s) %s are occluded in all four views and will not "
            "contribute to guidance energies or DAI",
            ", ".join(str(int(d)) for d in dropped),
        )
    return replace(drags, projections=projections)
