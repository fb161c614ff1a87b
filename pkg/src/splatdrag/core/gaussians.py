"""Gaussian cloud container and binary PLY I/O.

The on-disk layout follows the de-facto community splat PLY: float32
properties x, y, z, nx, ny, nz, f_dc_0..2, f_rest_*, opacity, scale_0..2,
rot_0..3 (quaternion w, x, y, z), binary little-endian. Scales are stored as
logs, opacities pre-sigmoid. An optional int32 ``view_id`` property records
which rig view produced each Gaussian during reconstruction.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import torch

from .errors import DataError, FormatError, ValidationError

SH_C0 = 0.28209479177387814

# f_rest column counts for supported SH degrees 0..3
_REST_COUNTS = {0: 0, 1: 9, 2: 24, 3: 45}


@dataclass
class GaussianCloud:
    """Parameter tensors of a splat cloud (raw, pre-activation).

    positions (N, 3); rotations (N, 4) quaternions in (w, x, y, z) order;
    log_scales (N, 3); opacities (N,) pre-sigmoid; sh_dc (N, 3); sh_rest
    (N, M, 3) with M = (degree+1)^2 - 1; view_id (N,) int32, -1 if untagged.
    """

    positions: torch.Tensor
    rotations: torch.Tensor
    log_scales: torch.Tensor
    opacities: torch.Tensor
    sh_dc: torch.Tensor
    sh_rest: torch.Tensor
    view_id: torch.Tensor | None = None

    def __post_init__(self):
        n = self.positions.shape[0]
        if self.positions.shape != (n, 3):
            raise ValidationError("positions must be (N, 3)")
        if self.rotations.shape != (n, 4):
            raise ValidationError("rotations must be (N, 4)")
        if self.log_scales.shape != (n, 3):
            raise ValidationError("log_scales must be (N, 3)")
        if self.opacities.shape != (n,):
            raise ValidationError("opacities must be (N,)")
        if self.sh_dc.shape != (n, 3):
            raise ValidationError("sh_dc must be (N, 3)")
        if self.sh_rest.ndim != 3 or self.sh_rest.shape[0] != n or self.sh_rest.shape[2] != 3:
            raise ValidationError("sh_rest must be (N, M, 3)")
        if self.sh_rest.shape[1] not in (0, 3, 8, 15):
            raise ValidationError("sh_rest count implies an unsupported SH degree")
        if self.view_id is not None and self.view_id.shape != (n,):
            raise ValidationError("view_id must be (N,)")
        if n and not bool(torch.isfinite(self.positions).all()):
            raise ValidationError("positions must be finite")

    def __len__(self) -> int:
        return self.positions.shape[0]

    @property
    def sh_degree(self) -> int:
        return {0: 0, 3: 1, 8: 2, 15: 3}[self.sh_rest.shape[1]]

    @property
    def dtype(self) -> torch.dtype:
        return self.positions.dtype

    # -- activations ---------------------------------------------------------

    def unit_rotations(self) -> torch.Tensor:
        return self.rotations / self.rotations.norm(dim=-1, keepdim=True).clamp_min(1e-12)

    def activated_scales(self) -> torch.Tensor:
        return torch.exp(self.log_scales)

    def activated_opacities(self) -> torch.Tensor:
        return torch.sigmoid(self.opacities)

    def sh_coeffs(self) -> torch.Tensor:
        """Full (N, K, 3) coefficient stack, dc band first."""
        return torch.cat([self.sh_dc.unsqueeze(1), self.sh_rest], dim=1)

    # -- structural helpers --------------------------------------------------

    def with_positions(self, positions: torch.Tensor) -> "GaussianCloud":
        """Shallow copy sharing every field except positions (differentiable)."""
        return replace(self, positions=positions)

    def select(self, index) -> "GaussianCloud":
        return GaussianCloud(
            positions=self.positions[index],
            rotations=self.rotations[index],
            log_scales=self.log_scales[index],
            opacities=self.opacities[index],
            sh_dc=self.sh_dc[index],
            sh_rest=self.sh_rest[index],
            view_id=None if self.view_id is None else self.view_id[index],
        )

    def clone(self) -> "GaussianCloud":
        return GaussianCloud(
            positions=self.positions.clone(),
            rotations=self.rotations.clone(),
            log_scales=self.log_scales.clone(),
            opacities=self.opacities.clone(),
            sh_dc=self.sh_dc.clone(),
            sh_rest=self.sh_rest.clone(),
            view_id=None if self.view_id is None else self.view_id.clone(),
        )

    def to(self, dtype: torch.dtype) -> "GaussianCloud":
        return GaussianCloud(
            positions=self.positions.to(dtype),
            rotations=self.rotations.to(dtype),
            log_scales=self.log_scales.to(dtype),
            opacities=self.opacities.to(dtype),
            sh_dc=self.sh_dc.to(dtype),
            sh_rest=self.sh_rest.to(dtype),
            view_id=self.view_id,
        )

    def normalize_to_unit_sphere(self) -> "GaussianCloud":
        """Center on the position centroid and scale so max radius is 1.

        Scales shrink by the same factor so the cloud keeps its shape.
        """
        if len(self) == 0:
            return self.clone()
        center = self.positions.mean(dim=0)
        centered = self.positions - center
        radius = centered.norm(dim=-1).max().clamp_min(1e-12)
        out = self.clone()
        out.positions = centered / radius
        out.log_scales = self.log_scales - torch.log(radius)
        return out


def concat_clouds(clouds: list[GaussianCloud]) -> GaussianCloud:
    if not clouds:
        raise ValidationError("need at least one cloud to concatenate")
    view_ids = []
    for c in clouds:
        view_ids.append(
            c.view_id if c.view_id is not None else torch.full((len(c),), -1, dtype=torch.int32)
        )
    return GaussianCloud(
        positions=torch.cat([c.positions for c in clouds]),
        rotations=torch.cat([c.rotations for c in clouds]),
        log_scales=torch.cat([c.log_scales for c in clouds]),
        opacities=torch.cat([c.opacities for c in clouds]),
        sh_dc=torch.cat([c.sh_dc for c in clouds]),
        sh_rest=torch.cat([c.sh_rest for c in clouds]),
        view_id=torch.cat(view_ids),
    )


def flat_color_cloud(
    positions: np.ndarray | torch.Tensor,
    rgb: np.ndarray | torch.Tensor,
    scale: float = 0.05,
    opacity: float = 0.9,
) -> GaussianCloud:
    """Isotropic, identity-rotation cloud with flat (degree 0) colors."""
    pos = torch.as_tensor(np.asarray(positions), dtype=torch.float32).reshape(-1, 3)
    col = torch.as_tensor(np.asarray(rgb), dtype=torch.float32).reshape(-1, 3).expand(pos.shape[0], 3)
    n = pos.shape[0]
    rot = torch.zeros((n, 4), dtype=torch.float32)
    rot[:, 0] = 1.0
    opacity = min(max(opacity, 1e-6), 1.0 - 1e-6)
    return GaussianCloud(
        positions=pos,
        rotations=rot,
        log_scales=torch.full((n, 3), float(np.log(scale)), dtype=torch.float32),
        opacities=torch.full((n,), float(np.log(opacity / (1.0 - opacity))), dtype=torch.float32),
        sh_dc=(col - 0.5) / SH_C0,
        sh_rest=torch.zeros((n, 0, 3), dtype=torch.float32),
    )


# -- PLY ----------------------------------------------------------------------

_PROP_RE = re.compile(r"^property\s+(\w+)\s+(\S+)$")

_PLY_TYPES = {"float": "<f4", "float32": "<f4", "int": "<i4", "int32": "<i4", "uint": "<u4",
              "uchar": "u1", "uint8": "u1", "double": "<f8", "float64": "<f8"}


def _read_header(fh) -> tuple[list[tuple[str, str]], int]:
    magic = fh.readline().strip()
    if magic != b"ply":
        raise FormatError("not a PLY file")
    fmt = fh.readline().strip()
    if fmt != b"format binary_little_endian 1.0":
        raise FormatError("expected binary little-endian PLY")
    props: list[tuple[str, str]] = []
    count = None
    while True:
        line = fh.readline()
        if not line:
            raise FormatError("unterminated PLY header")
        text = line.decode("ascii", "replace").strip()
        if text == "end_header":
            break
        if text.startswith("comment"):
            continue
        if text.startswith("element"):
            parts = text.split()
            if parts[1] != "vertex":
                raise FormatError(f"unexpected element {parts[1]!r}")
            count = int(parts[2])
            continue
        m = _PROP_RE.match(text)
        if m:
            ply_type, name = m.group(1), m.group(2)
            if ply_type not in _PLY_TYPES:
                raise FormatError(f"unsupported property type {ply_type!r}")
            props.append((name, _PLY_TYPES[ply_type]))
    if count is None:
        raise FormatError("PLY header has no vertex element")
    return props, count


def load_gaussians(path: str | Path, normalize: bool = False) -> GaussianCloud:
    """Load a splat PLY; quaternions are renormalized on load.

    ``normalize=True`` additionally recenters the cloud and scales it into the
    unit bounding sphere, the convention every rig camera default assumes.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        props, count = _read_header(fh)
        dtype = np.dtype([(name, t) for name, t in props])
        raw = np.frombuffer(fh.read(dtype.itemsize * count), dtype=dtype, count=count)

    names = {name for name, _ in props}
    required = {"x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity",
                "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"}
    missing = sorted(required - names)
    if missing:
        raise FormatError(f"missing PLY properties: {', '.join(missing)}")

    rest_names = sorted(
        (n for n in names if n.startswith("f_rest_")), key=lambda n: int(n.split("_")[-1])
    )
    if len(rest_names) not in _REST_COUNTS.values():
        raise FormatError(f"unsupported f_rest count {len(rest_names)} (SH degree must be 0..3)")

    def col(name: str) -> np.ndarray:
        return np.ascontiguousarray(raw[name], dtype=np.float32)

    pos = np.stack([col("x"), col("y"), col("z")], axis=-1)
    dc = np.stack([col("f_dc_0"), col("f_dc_1"), col("f_dc_2")], axis=-1)
    scales = np.stack([col(f"scale_{i}") for i in range(3)], axis=-1)
    rots = np.stack([col(f"rot_{i}") for i in range(4)], axis=-1)
    opac = col("opacity")
    if rest_names:
        rest_flat = np.stack([col(n) for n in rest_names], axis=-1)
        # channel-major flattening: all coefficients for R, then G, then B
        rest = rest_flat.reshape(count, 3, -1).transpose(0, 2, 1)
    else:
        rest = np.zeros((count, 0, 3), dtype=np.float32)

    for name, arr in (("position", pos), ("f_dc", dc), ("scale", scales),
                      ("rot", rots), ("opacity", opac), ("f_rest", rest)):
        if arr.size and not np.isfinite(arr).all():
            raise DataError(f"non-finite values in {name} fields")

    cloud = GaussianCloud(
        positions=torch.from_numpy(pos.copy()),
        rotations=torch.from_numpy(rots.copy()),
        log_scales=torch.from_numpy(scales.copy()),
        opacities=torch.from_numpy(opac.copy()),
        sh_dc=torch.from_numpy(dc.copy()),
        sh_rest=torch.from_numpy(rest.copy()),
        view_id=(
            torch.from_numpy(np.ascontiguousarray(raw["view_id"], dtype=np.int32).copy())
            if "view_id" in names
            else None
        ),
    )
    if count:
        norms = cloud.rotations.norm(dim=-1)
        if bool((norms < 1e-8).any()):
            raise DataError("zero-norm quaternion")
        cloud.rotations = cloud.rotations / norms.unsqueeze(-1)
    if normalize:
        cloud = cloud.normalize_to_unit_sphere()
    return cloud


def save_gaussians(cloud: GaussianCloud, path: str | Path) -> None:
    """Write the community splat PLY layout; round-trip safe with load_gaussians."""
    path = Path(path)
    n = len(cloud)
    rest = cloud.sh_rest.detach().cpu().numpy().astype(np.float32)
    m = rest.shape[1]
    fields = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
    fields += [f"f_rest_{i}" for i in range(3 * m)]
    fields += ["opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"]
    dtype = [(f, "<f4") for f in fields]
    has_view = cloud.view_id is not None
    if has_view:
        dtype.append(("view_id", "<i4"))

    out = np.zeros(n, dtype=np.dtype(dtype))
    out["x"], out["y"], out["z"] = (
        cloud.positions.detach().cpu().numpy().astype(np.float32).T if n else ([], [], [])
    )
    dc = cloud.sh_dc.detach().cpu().numpy().astype(np.float32)
    for i in range(3):
        out[f"f_dc_{i}"] = dc[:, i] if n else []
    if m:
        rest_flat = rest.transpose(0, 2, 1).reshape(n, 3 * m)
        for i in range(3 * m):
            out[f"f_rest_{i}"] = rest_flat[:, i]
    out["opacity"] = cloud.opacities.detach().cpu().numpy().astype(np.float32)
    scales = cloud.log_scales.detach().cpu().numpy().astype(np.float32)
    rots = cloud.unit_rotations().detach().cpu().numpy().astype(np.float32)
    for i in range(3):
        out[f"scale_{i}"] = scales[:, i] if n else []
    for i in range(4):
        out[f"rot_{i}"] = rots[:, i] if n else []
    if has_view:
        out["view_id"] = cloud.view_id.cpu().numpy().astype(np.int32)

    header = ["ply", "format binary_little_endian 1.0", f"element vertex {n}"]
    header += [f"property float {f}" for f in fields]
    if has_view:
        header.append("property int view_id")
    header.append("end_header")
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(out.tobytes())
