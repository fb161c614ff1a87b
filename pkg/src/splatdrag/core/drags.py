"""Drag handles: 3D source/target pairs and their per-view projections."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError


@dataclass
class ViewProjections:
    """Per-view projections for all k pairs of one rig view."""

    view: int
    p_px: np.ndarray  # (k, 2) int pixel (col, row) of the source point
    q_px: np.ndarray  # (k, 2) int pixel of the target point
    p_z: np.ndarray  # (k,) camera-space depth of the source
    q_z: np.ndarray  # (k,) depth of the target
    visible: np.ndarray  # (k,) bool


@dataclass
class ProjectedPair:
    """One (view, pair) record, convenient for iteration and JSON."""

    view: int
    pair: int
    p_px: tuple[int, int]
    q_px: tuple[int, int]
    p_z: float
    q_z: float
    visible: bool


@dataclass
class DragSet:
    sources: np.ndarray  # (k, 3)
    targets: np.ndarray  # (k, 3)
    projections: list[ViewProjections] | None = None

    def __post_init__(self):
        self.sources = np.asarray(self.sources, dtype=np.float64).reshape(-1, 3)
        self.targets = np.asarray(self.targets, dtype=np.float64).reshape(-1, 3)
        if self.sources.shape[0] < 1:
            raise ValidationError("a drag set needs at least one pair")
        if self.sources.shape != self.targets.shape:
            raise ValidationError("sources and targets must pair up")
        if not (np.isfinite(self.sources).all() and np.isfinite(self.targets).all()):
            raise ValidationError("drag points must be finite")

    def __len__(self) -> int:
        return self.sources.shape[0]

    def pairs(self) -> list[ProjectedPair]:
        if self.projections is None:
            raise ValidationError("projections not computed yet")
        out = []
        for vp in self.projections:
            for j in range(len(self)):
                out.append(
                    ProjectedPair(
                        view=vp.view,
                        pair=j,
                        p_px=(int(vp.p_px[j, 0]), int(vp.p_px[j, 1])),
                        q_px=(int(vp.q_px[j, 0]), int(vp.q_px[j, 1])),
                        p_z=float(vp.p_z[j]),
                        q_z=float(vp.q_z[j]),
                        visible=bool(vp.visible[j]),
                    )
                )
        return out

    def to_json(self) -> dict:
        doc: dict = {
            "pairs": [
                {"source": [float(x) for x in s], "target": [float(x) for x in t]}
                for s, t in zip(self.sources, self.targets)
            ]
        }
        if self.projections is not None:
            doc["views"] = [
                {
                    "view": vp.view,
                    "pairs": [
                        {
                            "p": [int(vp.p_px[j, 0]), int(vp.p_px[j, 1])],
                            "q": [int(vp.q_px[j, 0]), int(vp.q_px[j, 1])],
                            "p_z": float(vp.p_z[j]),
                            "q_z": float(vp.q_z[j]),
                            "visible": bool(vp.visible[j]),
                        }
                        for j in range(len(self))
                    ],
                }
                for vp in self.projections
            ]
        return doc

    @staticmethod
    def from_json(doc: dict) -> "DragSet":
        if not isinstance(doc, dict) or "pairs" not in doc:
            raise FormatError("drag JSON must be an object with a 'pairs' list")
        pairs = doc["pairs"]
        if not isinstance(pairs, list):
            raise FormatError("'pairs' must be a list")
        if len(pairs) == 0:
            raise ValidationError("a drag set needs at least one pair")
        sources, targets = [], []
        for i, p in enumerate(pairs):
            try:
                s = [float(x) for x in p["source"]]
                t = [float(x) for x in p["target"]]
            except (KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"pair {i}: needs 'source' and 'target' 3-vectors") from exc
            if len(s) != 3 or len(t) != 3:
                raise FormatError(f"pair {i}: points must have 3 coordinates")
            sources.append(s)
            targets.append(t)
        ds = DragSet(sources=np.array(sources), targets=np.array(targets))
        if "views" in doc:
            views = []
            for v in doc["views"]:
                k = len(ds)
                recs = v["pairs"]
                if len(recs) != k:
                    raise FormatError("projection record count does not match pair count")
                views.append(
                    ViewProjections(
                        view=int(v["view"]),
                        p_px=np.array([r["p"] for r in recs], dtype=np.int64),
                        q_px=np.array([r["q"] for r in recs], dtype=np.int64),
                        p_z=np.array([r["p_z"] for r in recs], dtype=np.float64),
                        q_z=np.array([r["q_z"] for r in recs], dtype=np.float64),
                        visible=np.array([r["visible"] for r in recs], dtype=bool),
                    )
                )
            ds.projections = views
        return ds


def load_dragset(path: str | Path) -> DragSet:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"malformed drag JSON: {exc}") from exc
    return DragSet.from_json(doc)


def save_dragset(drags: DragSet, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(drags.to_json(), fh, indent=2)
