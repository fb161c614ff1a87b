"""Multi-view image/latent containers and their file formats.

RGB goes to 8-bit PNG; depth and alpha go to raw little-endian float32 arrays
in NPY format (written under a .raw suffix). For wire transfer the service
uses a one-line JSON header followed by raw float32 payload, which a browser
client can slice without a PNG decode.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .cameras import RIG_AZIMUTHS
from .errors import FormatError, ValidationError

DEPTH_BACKGROUND = np.float32(np.inf)


@dataclass
class MultiViewImageSet:
    """Four RGB views in azimuth order 0, 90, 180, 270 plus depth and alpha."""

    rgb: np.ndarray  # (4, H, W, 3) float32 in [0, 1]
    depth: np.ndarray  # (4, H, W) float32, +inf on background
    alpha: np.ndarray  # (4, H, W) float32 in [0, 1]
    azimuths: tuple[float, float, float, float] = RIG_AZIMUTHS

    def __post_init__(self):
        self.rgb = np.asarray(self.rgb, dtype=np.float32)
        self.depth = np.asarray(self.depth, dtype=np.float32)
        self.alpha = np.asarray(self.alpha, dtype=np.float32)
        if self.rgb.ndim != 4 or self.rgb.shape[0] != 4 or self.rgb.shape[3] != 3:
            raise ValidationError("rgb must be (4, H, W, 3)")
        h, w = self.rgb.shape[1:3]
        if h != w:
            raise ValidationError("views must be square")
        if self.depth.shape != (4, h, w) or self.alpha.shape != (4, h, w):
            raise ValidationError("depth/alpha must match rgb resolution")
        if tuple(self.azimuths) != RIG_AZIMUTHS:
            raise ValidationError("views must be ordered by azimuth 0, 90, 180, 270")

    @property
    def resolution(self) -> int:
        return self.rgb.shape[1]

    def copy(self) -> "MultiViewImageSet":
        return MultiViewImageSet(
            rgb=self.rgb.copy(), depth=self.depth.copy(), alpha=self.alpha.copy()
        )


@dataclass
class LatentStack:
    """4 x H x W x C latent tensor at a diffusion timestep index."""

    values: torch.Tensor
    step: int

    def __post_init__(self):
        if self.values.ndim != 4 or self.values.shape[0] != 4:
            raise ValidationError("latent stack must be (4, H, W, C)")
        if not bool(torch.isfinite(self.values).all()):
            raise ValidationError("latent stack must be finite")


# -- primitive codecs ----------------------------------------------------------


def save_png(rgb: np.ndarray, path: str | Path) -> None:
    arr = np.clip(np.asarray(rgb, dtype=np.float64) * 255.0, 0.0, 255.0)
    Image.fromarray(np.round(arr).astype(np.uint8), mode="RGB").save(path)


def load_png(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32)
    return arr / 255.0


def save_raw_array(arr: np.ndarray, path: str | Path) -> None:
    with open(path, "wb") as fh:
        np.save(fh, np.asarray(arr, dtype=np.float32))


def load_raw_array(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        return np.load(fh)


def encode_float_payload(arr: np.ndarray) -> bytes:
    """JSON header line + little-endian float32 payload (service wire format)."""
    arr = np.asarray(arr, dtype="<f4")
    header = json.dumps({"dtype": "float32", "shape": list(arr.shape), "order": "C"})
    return header.encode("ascii") + b"\n" + arr.tobytes(order="C")


def decode_float_payload(payload: bytes) -> np.ndarray:
    nl = payload.find(b"\n")
    if nl < 0:
        raise FormatError("missing header line in float payload")
    header = json.loads(payload[:nl].decode("ascii"))
    arr = np.frombuffer(payload[nl + 1 :], dtype="<f4")
    return arr.reshape(header["shape"]).copy()


# -- directory layout ----------------------------------------------------------


def save_view_dir(views: MultiViewImageSet, out_dir: str | Path) -> dict[str, str]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    outputs: dict[str, str] = {}
    for i in range(4):
        png = out / f"view_{i}.png"
        save_png(views.rgb[i], png)
        outputs[f"view_{i}"] = str(png)
        depth = out / f"depth_{i}.raw"
        save_raw_array(views.depth[i], depth)
        outputs[f"depth_{i}"] = str(depth)
        alpha = out / f"alpha_{i}.raw"
        save_raw_array(views.alpha[i], alpha)
        outputs[f"alpha_{i}"] = str(alpha)
    return outputs


def load_view_dir(view_dir: str | Path) -> MultiViewImageSet:
    d = Path(view_dir)
    rgb, depth, alpha = [], [], []
    for i in range(4):
        png = d / f"view_{i}.png"
        if not png.exists():
            raise FormatError(f"missing {png}")
        rgb.append(load_png(png))
        depth_path = d / f"depth_{i}.raw"
        if depth_path.exists():
            depth.append(load_raw_array(depth_path))
        else:
            depth.append(np.full(rgb[-1].shape[:2], DEPTH_BACKGROUND, dtype=np.float32))
        alpha_path = d / f"alpha_{i}.raw"
        if alpha_path.exists():
            alpha.append(load_raw_array(alpha_path))
        else:
            alpha.append((np.isfinite(depth[-1])).astype(np.float32))
    return MultiViewImageSet(rgb=np.stack(rgb), depth=np.stack(depth), alpha=np.stack(alpha))
