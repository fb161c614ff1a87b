"""Triangle mesh container and OBJ loading."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError


@dataclass
class TriMesh:
    vertices: np.ndarray  # (V, 3) float64
    faces: np.ndarray  # (F, 3) int64
    colors: np.ndarray | None = None  # (V, 3) in [0, 1]

    def __len__(self) -> int:
        return self.faces.shape[0]

    def normalize_to_unit_sphere(self) -> "TriMesh":
        center = self.vertices.mean(axis=0)
        centered = self.vertices - center
        radius = max(float(np.linalg.norm(centered, axis=-1).max()), 1e-12)
        return TriMesh(vertices=centered / radius, faces=self.faces, colors=self.colors)


def _face_areas(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    a = vertices[faces[:, 1]] - vertices[faces[:, 0]]
    b = vertices[faces[:, 2]] - vertices[faces[:, 0]]
    return 0.5 * np.linalg.norm(np.cross(a, b), axis=-1)


def load_mesh(path: str | Path, normalize: bool = False) -> TriMesh:
    """Parse an OBJ (v / f lines, optional per-vertex colors, fan triangulation).

    Degenerate zero-area faces are dropped as part of load cleanup.
    """
    verts: list[list[float]] = []
    colors: list[list[float]] = []
    faces: list[list[int]] = []
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            tag = parts[0]
            if tag == "v":
                vals = [float(x) for x in parts[1:]]
                if len(vals) not in (3, 6):
                    raise FormatError(f"line {lineno}: vertex needs 3 or 6 floats")
                verts.append(vals[:3])
                if len(vals) == 6:
                    colors.append(vals[3:])
            elif tag == "f":
                idx = []
                for tok in parts[1:]:
                    i = int(tok.split("/")[0])
                    idx.append(i - 1 if i > 0 else len(verts) + i)
                if len(idx) < 3:
                    raise FormatError(f"line {lineno}: face needs at least 3 vertices")
                for k in range(1, len(idx) - 1):
                    faces.append([idx[0], idx[k], idx[k + 1]])

    vertices = np.asarray(verts, dtype=np.float64).reshape(-1, 3)
    face_arr = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if face_arr.size and (face_arr.min() < 0 or face_arr.max() >= len(vertices)):
        raise DataError("face index out of range")
    if not np.isfinite(vertices).all():
        raise DataError("non-finite vertex coordinates")

    if face_arr.size:
        face_arr = face_arr[_face_areas(vertices, face_arr) > 1e-14]

    color_arr = None
    if colors:
        if len(colors) != len(verts):
            raise FormatError("either all or no vertices may carry colors")
        color_arr = np.clip(np.asarray(colors, dtype=np.float64), 0.0, 1.0)

    mesh = TriMesh(vertices=vertices, faces=face_arr, colors=color_arr)
    return mesh.normalize_to_unit_sphere() if normalize else mesh
