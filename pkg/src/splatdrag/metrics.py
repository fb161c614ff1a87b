"""Drag accuracy: squared patch difference between source content in the
original views and destination content in the edited views.

For patch radius gamma, every visible pair contributes
||I[patch(p)] - I_e[patch(q)]||^2 / (1+2*gamma)^2 in its view; pair terms are
summed per view and the four view totals averaged. The normalizer counts
patch pixels, not channels. Cells falling outside the image are excluded
symmetrically from both patches and from the normalizer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core.drags import DragSet
from .core.errors import ValidationError
from .core.images import MultiViewImageSet

GAMMAS = (1, 3, 5, 7, 10)


@dataclass
class DAIReport:
    scores: dict[int, float]  # as written: sum over pairs
    per_pair_mean: dict[int, float]  # normalized by visible-pair count
    per_view: dict[int, list[float]]  # per gamma: four view totals
    visible_pairs: list[int]  # per view
    culled_pairs: int  # pairs visible nowhere
    external_elo: float | None = None  # slot for externally produced ratings

    def to_json(self) -> dict:
        return {
            "gammas": list(self.scores.keys()),
            "scores": {str(g): v for g, v in self.scores.items()},
            "per_pair_mean": {str(g): v for g, v in self.per_pair_mean.items()},
            "per_view": {str(g): v for g, v in self.per_view.items()},
            "visible_pairs": self.visible_pairs,
            "culled_pairs": self.culled_pairs,
            "external_elo": self.external_elo,
        }


def _patch_term(
    original: np.ndarray, edited: np.ndarray, p: np.ndarray, q: np.ndarray, gamma: int
) -> float:
    res = original.shape[0]
    offs = np.arange(-gamma, gamma + 1)
    du, dv = np.meshgrid(offs, offs, indexing="xy")
    pc, pr = p[0] + du, p[1] + dv
    qc, qr = q[0] + du, q[1] + dv
    valid = (
        (pc >= 0) & (pc < res) & (pr >= 0) & (pr < res)
        & (qc >= 0) & (qc < res) & (qr >= 0) & (qr < res)
    )
    count = int(valid.sum())
    if count == 0:
        return 0.0
    diff = original[pr[valid], pc[valid]] - edited[qr[valid], qc[valid]]
    return float((diff * diff).sum()) / count


def dai(
    original: MultiViewImageSet,
    edited: MultiViewImageSet,
    drags: DragSet,
    gamma: int,
) -> float:
    """Vectorized drag-accuracy for one patch radius; lower is better.

    Visibility must have been computed on the ORIGINAL views.
    """
    if original.resolution != edited.resolution:
        raise ValidationError("original and edited view resolutions differ")
    if drags.projections is None:
        raise ValidationError("drag projections required (run project first)")
    total = 0.0
    for vp in drags.projections:
        o = original.rgb[vp.view].astype(np.float64)
        e = edited.rgb[vp.view].astype(np.float64)
        for j in range(len(drags)):
            if not vp.visible[j]:
                continue
            total += _patch_term(o, e, vp.p_px[j], vp.q_px[j], gamma)
    return total / 4.0


def dai_report(
    original: MultiViewImageSet, edited: MultiViewImageSet, drags: DragSet
) -> DAIReport:
    """All five gamma values plus per-view breakdown and culling counts."""
    if drags.projections is None:
        raise ValidationError("drag projections required (run project first)")
    scores: dict[int, float] = {}
    per_pair: dict[int, float] = {}
    per_view: dict[int, list[float]] = {}
    visible = [int(vp.visible.sum()) for vp in drags.projections]
    any_view = np.zeros(len(drags), dtype=bool)
    for vp in drags.projections:
        any_view |= vp.visible
    culled = int((~any_view).sum())

    for gamma in GAMMAS:
        views = []
        for vp in drags.projections:
            o = original.rgb[vp.view].astype(np.float64)
            e = edited.rgb[vp.view].astype(np.float64)
            v_total = 0.0
            for j in range(len(drags)):
                if vp.visible[j]:
                    v_total += _patch_term(o, e, vp.p_px[j], vp.q_px[j], gamma)
            views.append(v_total)
        score = sum(views) / 4.0
        scores[gamma] = score
        total_visible = sum(visible)
        per_pair[gamma] = 4.0 * score / total_visible if total_visible else 0.0
        per_view[gamma] = views
    return DAIReport(
        scores=scores,
        per_pair_mean=per_pair,
        per_view=per_view,
        visible_pairs=visible,
        culled_pairs=culled,
    )


def save_report(report: DAIReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json(), fh, indent=2)
