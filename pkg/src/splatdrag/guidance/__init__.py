from .backends import DenoiserBackend, DenoiserOutput, GaussianMixtureBackend, load_backend
from .ddim import ddim_invert, ddim_sample
from .energy import EnergyMasks, build_masks, content_energy, edit_energy
from .sampling import GuidanceConfig, GuidedSampleLog, guided_sample, perturb_background
from .schedule import NoiseSchedule

__all__ = [
    "DenoiserBackend",
    "DenoiserOutput",
    "EnergyMasks",
    "GaussianMixtureBackend",
    "GuidanceConfig",
    "GuidedSampleLog",
    "NoiseSchedule",
    "build_masks",
    "content_energy",
    "ddim_invert",
    "ddim_sample",
    "edit_energy",
    "guided_sample",
    "load_backend",
    "perturb_background",
]
