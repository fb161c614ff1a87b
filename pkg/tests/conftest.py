import numpy as np
import pytest
import torch

from splatdrag.core import GaussianCloud, RigConfig, TriMesh, flat_color_cloud
from splatdrag.core.gaussians import SH_C0


def random_cloud(n=20, seed=0, sh_degree=0, spread=0.4, view_ids=False) -> GaussianCloud:
    rng = np.random.RandomState(seed)
    rest = {0: 0, 1: 3, 2: 8, 3: 15}[sh_degree]
    quats = rng.randn(n, 4).astype(np.float32)
    quats /= np.linalg.norm(quats, axis=-1, keepdims=True)
    cloud = GaussianCloud(
        positions=torch.from_numpy((rng.randn(n, 3) * spread).astype(np.float32)),
        rotations=torch.from_numpy(quats),
        log_scales=torch.from_numpy(rng.uniform(-3.5, -2.0, (n, 3)).astype(np.float32)),
        opacities=torch.from_numpy(rng.uniform(-1.0, 2.0, n).astype(np.float32)),
        sh_dc=torch.from_numpy(rng.uniform(-0.8, 0.8, (n, 3)).astype(np.float32)),
        sh_rest=torch.from_numpy((rng.randn(n, rest, 3) * 0.05).astype(np.float32)),
        view_id=torch.from_numpy(rng.randint(0, 4, n).astype(np.int32)) if view_ids else None,
    )
    return cloud


def fibonacci_sphere_cloud(n=2000, radius=1.0, scale=0.03, color=(0.7, 0.4, 0.2), opacity=0.95):
    """Splat sphere: n points on a Fibonacci lattice with isotropic footprints."""
    i = np.arange(n) + 0.5
    phi = np.arccos(1 - 2 * i / n)
    theta = np.pi * (1 + 5**0.5) * i
    pts = radius * np.stack(
        [np.sin(phi) * np.cos(theta), np.sin(phi) * np.sin(theta), np.cos(phi)], axis=-1
    )
    return flat_color_cloud(pts, [color], scale=scale, opacity=opacity)


def cube_mesh(half=0.5, color=None) -> TriMesh:
    v = np.array(
        [
            [-1, -1, -1], [1, -1, -1], [1, 1, -1], [-1, 1, -1],
            [-1, -1, 1], [1, -1, 1], [1, 1, 1], [-1, 1, 1],
        ],
        dtype=np.float64,
    ) * half
    f = np.array(
        [
            [0, 2, 1], [0, 3, 2],  # bottom (z-)
            [4, 5, 6], [4, 6, 7],  # top (z+)
            [0, 1, 5], [0, 5, 4],  # y-
            [2, 3, 7], [2, 7, 6],  # y+
            [1, 2, 6], [1, 6, 5],  # x+
            [3, 0, 4], [3, 4, 7],  # x-
        ],
        dtype=np.int64,
    )
    colors = np.tile(np.asarray(color, dtype=np.float64), (8, 1)) if color is not None else None
    return TriMesh(vertices=v, faces=f, colors=colors)


def uv_sphere_mesh(radius=0.8, stacks=16, slices=24, color=(0.6, 0.6, 0.9)) -> TriMesh:
    verts, faces = [], []
    for s in range(stacks + 1):
        phi = np.pi * s / stacks
        for sl in range(slices):
            theta = 2 * np.pi * sl / slices
            verts.append(
                [
                    radius * np.sin(phi) * np.cos(theta),
                    radius * np.sin(phi) * np.sin(theta),
                    radius * np.cos(phi),
                ]
            )
    for s in range(stacks):
        for sl in range(slices):
            a = s * slices + sl
            b = s * slices + (sl + 1) % slices
            c = (s + 1) * slices + sl
            d = (s + 1) * slices + (sl + 1) % slices
            faces.append([a, b, d])
            faces.append([a, d, c])
    mesh = TriMesh(
        vertices=np.asarray(verts, dtype=np.float64),
        faces=np.asarray(faces, dtype=np.int64),
        colors=np.tile(np.asarray(color), (len(verts), 1)),
    )
    mesh.faces = mesh.faces[
        np.linalg.norm(
            np.cross(
                mesh.vertices[mesh.faces[:, 1]] - mesh.vertices[mesh.faces[:, 0]],
                mesh.vertices[mesh.faces[:, 2]] - mesh.vertices[mesh.faces[:, 0]],
            ),
            axis=-1,
        )
        > 1e-14
    ]
    return mesh


@pytest.fixture
def small_rig():
    return RigConfig(resolution=64)


def flat_dc(rgb):
    return (np.asarray(rgb) - 0.5) / SH_C0
