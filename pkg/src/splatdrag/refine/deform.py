"""Stage-1 refinement: per-view deformation MLPs align the fused cloud.

One two-layer MLP per rig view predicts a displacement for every Gaussian
that view produced; new_position = position + mlp(pe(position)). The final
linear layer is zero-initialized so training starts from the identity
deformation, and only positions ever change in this stage.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch

from ..core.cameras import RigConfig
from ..core.errors import NumericError, ValidationError
from ..core.gaussians import GaussianCloud
from ..core.images import MultiViewImageSet
from ..render.gaussian_raster import rasterize_gaussians
from .fourier import fourier_embed
from .losses import PerceptualLoss, SquaredErrorLoss

DEFAULT_NUM_BANDS = 6
DEFAULT_HIDDEN = 64
DEFAULT_ITERATIONS = 2000
DEFAULT_LR = 1e-5
DIVERGENCE_FACTOR = 10.0


class DeformationNet(torch.nn.Module):
    """linear -> ReLU -> linear on Fourier-embedded coordinates."""

    def __init__(self, num_bands: int = DEFAULT_NUM_BANDS, hidden: int = DEFAULT_HIDDEN):
        super().__init__()
        self.num_bands = num_bands
        in_dim = 3 + 6 * num_bands
        self.hidden = torch.nn.Linear(in_dim, hidden)
        self.out = torch.nn.Linear(hidden, 3)
        torch.nn.init.zeros_(self.out.weight)
        torch.nn.init.zeros_(self.out.bias)

    def forward(self, xyz: torch.Tensor) -> torch.Tensor:
        return self.out(torch.relu(self.hidden(fourier_embed(xyz, self.num_bands))))


@dataclass
class DeformationResult:
    cloud: GaussianCloud
    losses: list[float] = field(default_factory=list)
    displacement_rms: float = 0.0
    iterations_run: int = 0


def _displaced_positions(
    cloud: GaussianCloud, nets: list[DeformationNet]
) -> tuple[torch.Tensor, torch.Tensor]:
    pos = cloud.positions
    disp = torch.zeros_like(pos)
    for v, net in enumerate(nets):
        idx = torch.nonzero(cloud.view_id == v, as_tuple=False).squeeze(-1)
        if idx.numel():
            # index_put keeps each view's gradient on its own MLP only
            disp = disp.index_put((idx,), net(pos[idx]), accumulate=True)
    return pos + disp, disp


def optimize_positions(
    cloud: GaussianCloud,
    targets: MultiViewImageSet,
    rig: RigConfig,
    loss_fn: PerceptualLoss | None = None,
    iterations: int = DEFAULT_ITERATIONS,
    lr: float = DEFAULT_LR,
    resolution: int | None = None,
    stop_displacement_tol: float | None = None,
    reference_offsets: torch.Tensor | None = None,
    seed: int = 0,
) -> DeformationResult:
    """Jointly train the four MLPs with plain gradient descent on the summed
    per-view loss; densification and pruning stay off and only positions move.

    resolution optionally downsamples the optimization renders (targets are
    average-pooled to match). stop_displacement_tol, when given together with
    reference_offsets (the known injected misalignment, used by the recovery
    tests), stops early once the residual offset RMS falls below it.
    """
    if cloud.view_id is None:
        raise ValidationError("stage-1 refinement needs per-Gaussian view tags")
    if len(cloud) == 0:
        return DeformationResult(cloud=cloud.clone())
    loss_fn = loss_fn or SquaredErrorLoss()

    res = resolution or targets.resolution
    target_t = torch.as_tensor(targets.rgb, dtype=cloud.dtype)
    if res != targets.resolution:
        if targets.resolution % res != 0:
            raise ValidationError("resolution must divide the target resolution")
        k = targets.resolution // res
        target_t = (
            target_t.reshape(4, res, k, res, k, 3).mean(dim=(2, 4))
        )
    cameras = [
        type(c)(azimuth=c.azimuth, elevation=c.elevation, distance=c.distance,
                fov_y=c.fov_y, resolution=res)
        for c in rig.cameras()
    ]

    torch.manual_seed(seed)
    nets = [DeformationNet() for _ in range(4)]
    params = [p for net in nets for p in net.parameters()]
    for net in nets:
        net.to(cloud.dtype)
    optimizer = torch.optim.SGD(params, lr=lr)

    frozen = cloud.clone()
    losses: list[float] = []
    initial = None
    iterations_run = 0
    for it in range(iterations):
        optimizer.zero_grad()
        new_pos, disp = _displaced_positions(frozen, nets)
        moved = frozen.with_positions(new_pos)
        total = torch.zeros((), dtype=cloud.dtype)
        for v, cam in enumerate(cameras):
            out = rasterize_gaussians(moved, cam, bg=rig.background)
            total = total + loss_fn(out.rgb, target_t[v])
        if not bool(torch.isfinite(total)):
            raise NumericError(f"non-finite deformation loss at iteration {it}")
        value = float(total.detach())
        losses.append(value)
        if initial is None:
            initial = value
        elif value > DIVERGENCE_FACTOR * max(initial, 1e-12):
            raise NumericError(
                f"deformation diverged at iteration {it}: loss {value:.4g} "
                f"exceeds 10x the initial {initial:.4g}"
            )
        total.backward()
        optimizer.step()
        iterations_run = it + 1

        if stop_displacement_tol is not None and reference_offsets is not None and it % 25 == 24:
            with torch.no_grad():
                _, d = _displaced_positions(frozen, nets)
                residual = d + reference_offsets
                rms = float(residual.pow(2).mean().sqrt())
            if rms < stop_displacement_tol:
                break

    with torch.no_grad():
        final_pos, disp = _displaced_positions(frozen, nets)
    out_cloud = frozen.clone()
    out_cloud.positions = final_pos.detach()
    return DeformationResult(
        cloud=out_cloud,
        losses=losses,
        displacement_rms=float(disp.pow(2).mean().sqrt()),
        iterations_run=iterations_run,
    )
