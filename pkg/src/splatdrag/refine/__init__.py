from .deform import DeformationNet, DeformationResult, optimize_positions
from .fourier import fourier_embed
from .losses import PerceptualLoss, SquaredErrorLoss, load_perceptual
from .sds import SDSConfig, SDSResult, TargetPullingBackend, densify_prune, sds_refine, sds_step

__all__ = [
    "DeformationNet",
    "DeformationResult",
    "PerceptualLoss",
    "SDSConfig",
    "SDSResult",
    "SquaredErrorLoss",
    "TargetPullingBackend",
    "densify_prune",
    "fourier_embed",
    "load_perceptual",
    "optimize_positions",
    "sds_refine",
    "sds_step",
]
