"""Multi-view guidance energies over masked decoder features.

The edit energy compares destination patches of the edited branch against
source patches of the original branch; the content energy compares the
unedited complement of both branches. Each per-view term is
1 / (0.5 * cos(flattened_a, flattened_b) + 0.5), averaged over feature layers
and summed over the four views, so a perfect match contributes 1 per view and
orthogonal features contribute 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch

from ..core.drags import DragSet
from ..core.errors import ValidationError

PATCH_HALF = 1  # 3x3 image-space patches around the drag points
UNEDITED_DILATION = 1  # feature cells of clearance around the edit region


@dataclass
class EnergyMasks:
    """Per-stride boolean masks plus row-aligned gather indices per view.

    The boolean masks carry set semantics (unions, no double counting) and
    feed the unedited complement; the aligned index lists pair source and
    destination cells offset-by-offset so the flattened cosine is
    well-defined even when patches clip the border.
    """

    resolution: int
    strides: tuple[int, ...]
    edit: dict[int, torch.Tensor] = field(default_factory=dict)  # (4, h, w) bool
    origin: dict[int, torch.Tensor] = field(default_factory=dict)
    unedited: dict[int, torch.Tensor] = field(default_factory=dict)
    aligned: dict[int, list[tuple[torch.Tensor, torch.Tensor]]] = field(default_factory=dict)


def _feature_patch_cells(px: np.ndarray, stride: int, h: int) -> tuple[np.ndarray, np.ndarray]:
    """Offsets (dy, dx) and center for a drag point's patch at one feature scale."""
    half = max(1, math.ceil((2 * PATCH_HALF + 1) / stride)) // 2
    offs = np.array([(dy, dx) for dy in range(-half, half + 1) for dx in range(-half, half + 1)])
    center = np.array([px[1] // stride, px[0] // stride])  # (row, col)
    return offs, center


def build_masks(drags: DragSet, feature_strides: tuple[int, ...], resolution: int) -> EnergyMasks:
    """Map 3x3 image patches around every visible pair into each feature scale."""
    if drags.projections is None:
        raise ValidationError("drag projections must be computed before building masks")
    masks = EnergyMasks(resolution=resolution, strides=tuple(feature_strides))
    for stride in feature_strides:
        h = math.ceil(resolution / stride)
        edit = torch.zeros((4, h, h), dtype=torch.bool)
        origin = torch.zeros((4, h, h), dtype=torch.bool)
        aligned: list[tuple[torch.Tensor, torch.Tensor]] = []
        for vp in drags.projections:
            edi_cells: list[int] = []
            ori_cells: list[int] = []
            for j in range(len(drags)):
                if not vp.visible[j]:
                    continue
                offs, p_center = _feature_patch_cells(vp.p_px[j], stride, h)
                _, q_center = _feature_patch_cells(vp.q_px[j], stride, h)
                for dy, dx in offs:
                    pr, pc = p_center[0] + dy, p_center[1] + dx
                    qr, qc = q_center[0] + dy, q_center[1] + dx
                    # symmetric exclusion keeps source/destination cells paired
                    if not (0 <= pr < h and 0 <= pc < h and 0 <= qr < h and 0 <= qc < h):
                        continue
                    origin[vp.view, pr, pc] = True
                    edit[vp.view, qr, qc] = True
                    ori_cells.append(int(pr * h + pc))
                    edi_cells.append(int(qr * h + qc))
            aligned.append(
                (torch.tensor(edi_cells, dtype=torch.long), torch.tensor(ori_cells, dtype=torch.long))
            )
        union = edit | origin
        dilated = union.clone()
        for _ in range(UNEDITED_DILATION):
            grown = dilated.clone()
            grown[:, 1:, :] |= dilated[:, :-1, :]
            grown[:, :-1, :] |= dilated[:, 1:, :]
            grown[:, :, 1:] |= dilated[:, :, :-1]
            grown[:, :, :-1] |= dilated[:, :, 1:]
            dilated = grown
        masks.edit[stride] = edit
        masks.origin[stride] = origin
        masks.unedited[stride] = ~dilated
        masks.aligned[stride] = aligned
    return masks


def _cos_term(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    cos = (a * b).sum() / (a.norm() * b.norm()).clamp_min(1e-12)
    return 1.0 / (0.5 * cos + 0.5).clamp_min(1e-6)


def edit_energy(
    features_edi: list[torch.Tensor], features_ori: list[torch.Tensor], masks: EnergyMasks
) -> torch.Tensor:
    """Pulls edited-branch destination patches toward original source patches.

    The original branch enters under stop-gradient. Views with no visible
    cells contribute 0.
    """
    total = torch.zeros(())
    for view in range(4):
        layer_terms = []
        for stride, f_edi, f_ori in zip(masks.strides, features_edi, features_ori):
            idx_edi, idx_ori = masks.aligned[stride][view]
            if idx_edi.numel() == 0:
                continue
            c = f_edi.shape[-1]
            a = f_edi[view].reshape(-1, c)[idx_edi].reshape(-1)
            b = f_ori[view].reshape(-1, c)[idx_ori].reshape(-1).detach()
            layer_terms.append(_cos_term(a, b))
        if layer_terms:
            total = total + torch.stack(layer_terms).mean()
    return total


def content_energy(
    features_edi: list[torch.Tensor], features_ori: list[torch.Tensor], masks: EnergyMasks
) -> torch.Tensor:
    """Keeps the unedited complement of the edited branch near the original."""
    total = torch.zeros(())
    for view in range(4):
        layer_terms = []
        for stride, f_edi, f_ori in zip(masks.strides, features_edi, features_ori):
            mask = masks.unedited[stride][view].reshape(-1)
            if not bool(mask.any()):
                continue
            c = f_edi.shape[-1]
            a = f_edi[view].reshape(-1, c)[mask].reshape(-1)
            b = f_ori[view].reshape(-1, c)[mask].reshape(-1).detach()
            layer_terms.append(_cos_term(a, b))
        if layer_terms:
            total = total + torch.stack(layer_terms).mean()
    return total
