"""Drag-based 3D editing of Gaussian splats.

A 3D drag is decomposed into consistent edits of four orthogonal renders via
energy-guided diffusion sampling, the edited views are fused back into a
Gaussian cloud, and the cloud is refined by per-view deformation fields plus
image-conditioned score distillation. Every stochastic or learned component
sits behind a pluggable backend so the full pipeline runs hermetically with
exact analytic denoisers.
"""

__version__ = "0.1.0"
