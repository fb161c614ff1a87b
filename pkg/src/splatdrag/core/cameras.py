"""Pinhole cameras orbiting the origin and the four-orthogonal-azimuth rig."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

# A unit-radius object needs fov >= 2*asin(1/distance); 3.0 with 50 degrees
# frames the unit bounding sphere with ~25% margin.
DEFAULT_DISTANCE = 3.0
DEFAULT_FOV_Y = 50.0
DEFAULT_RESOLUTION = 256
DEFAULT_BACKGROUND = 0.5
RIG_AZIMUTHS = (0.0, 90.0, 180.0, 270.0)

WORLD_UP = np.array([0.0, 0.0, 1.0])


def _unit(v: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise ValidationError("zero-length direction vector")
    return v / n


@dataclass(frozen=True)
class Camera:
    """Camera at spherical (azimuth, elevation, distance) looking at the origin.

    Camera space follows the OpenCV convention: x right, y down, z forward, so
    the depth of a point in front of the lens is its positive camera-space z.
    Continuous pixel coordinates place (0, 0) at the top-left image corner and
    pixel (r, c) covers [c, c+1) x [r, r+1) with its center at half-integers;
    the world origin projects to (resolution/2, resolution/2).
    """

    azimuth: float
    elevation: float = 0.0
    distance: float = DEFAULT_DISTANCE
    fov_y: float = DEFAULT_FOV_Y
    resolution: int = DEFAULT_RESOLUTION

    def __post_init__(self):
        object.__setattr__(self, "azimuth", float(self.azimuth) % 360.0)
        if self.resolution <= 0:
            raise ValidationError("resolution must be positive")
        if not 0.0 < self.fov_y < 180.0:
            raise ValidationError("fov_y must lie in (0, 180) degrees")
        if self.distance <= 0.0:
            raise ValidationError("camera distance must be positive")

    @property
    def focal_px(self) -> float:
        return 0.5 * self.resolution / math.tan(math.radians(self.fov_y) / 2.0)

    @property
    def position(self) -> np.ndarray:
        az = math.radians(self.azimuth)
        el = math.radians(self.elevation)
        return self.distance * np.array(
            [math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), math.sin(el)]
        )

    def rotation(self) -> np.ndarray:
        """World-to-camera rotation; rows are (right, down, forward)."""
        forward = _unit(-self.position)
        right = _unit(np.cross(forward, WORLD_UP))
        down = np.cross(forward, right)
        return np.stack([right, down, forward])

    def world_to_camera(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return (pts - self.position) @ self.rotation().T

    def project(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Project world points to continuous pixel coordinates (u, v) and depth z.

        Points at or behind the camera plane get non-finite pixel coordinates;
        callers decide whether that is an error (it usually just means
        invisible).
        """
        cam = self.world_to_camera(points)
        z = cam[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = self.focal_px * cam[:, 0] / z + self.resolution / 2.0
            v = self.focal_px * cam[:, 1] / z + self.resolution / 2.0
        uv = np.stack([u, v], axis=-1)
        uv[z <= 0.0] = np.nan
        return uv, z

    def unproject(self, uv: np.ndarray, z: np.ndarray) -> np.ndarray:
        """Inverse of project: pixel coordinates plus depth back to world space."""
        uv = np.atleast_2d(np.asarray(uv, dtype=np.float64))
        z = np.atleast_1d(np.asarray(z, dtype=np.float64))
        x = (uv[:, 0] - self.resolution / 2.0) * z / self.focal_px
        y = (uv[:, 1] - self.resolution / 2.0) * z / self.focal_px
        cam = np.stack([x, y, z], axis=-1)
        return cam @ self.rotation() + self.position

    def pixel_index(self, uv: np.ndarray) -> np.ndarray:
        """Nearest pixel (column, row) for continuous coordinates; may be out of bounds."""
        return np.floor(np.atleast_2d(uv)).astype(np.int64)


@dataclass(frozen=True)
class RigConfig:
    """The four-view rig: orthogonal azimuths at a fixed zero elevation."""

    azimuths: tuple[float, float, float, float] = RIG_AZIMUTHS
    elevation: float = 0.0
    distance: float = DEFAULT_DISTANCE
    fov_y: float = DEFAULT_FOV_Y
    resolution: int = DEFAULT_RESOLUTION
    background: float = DEFAULT_BACKGROUND

    def __post_init__(self):
        if len(self.azimuths) != 4:
            raise ValidationError("rig needs exactly four azimuths")
        gaps = {round((self.azimuths[(i + 1) % 4] - self.azimuths[i]) % 360.0, 6) for i in range(4)}
        if gaps != {90.0}:
            raise ValidationError("rig azimuths must be pairwise 90 degrees apart")
        if not 0.0 <= self.background <= 1.0:
            raise ValidationError("background gray level must lie in [0, 1]")

    def cameras(self) -> tuple[Camera, ...]:
        return tuple(
            Camera(
                azimuth=az,
                elevation=self.elevation,
                distance=self.distance,
                fov_y=self.fov_y,
                resolution=self.resolution,
            )
            for az in self.azimuths
        )
