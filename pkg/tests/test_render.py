import numpy as np
import pytest
import torch

from splatdrag.core import Camera, RigConfig, ValidationError, flat_color_cloud
from splatdrag.render import (
    quaternion_to_rotation,
    rasterize_gaussians,
    rasterize_mesh,
    render_rig,
)
from conftest import cube_mesh, fibonacci_sphere_cloud, random_cloud, uv_sphere_mesh
from oracles import brute_force_splat_render


def world_covariances(cloud):
    rot = quaternion_to_rotation(cloud.unit_rotations()).double()
    s = cloud.activated_scales().double()
    L = rot * s.unsqueeze(-2)
    return (L @ L.transpose(-1, -2)).numpy()


def activated_colors(cloud):
    from splatdrag.core.gaussians import SH_C0

    return np.clip(SH_C0 * cloud.sh_dc.numpy() + 0.5, 0.0, None)


class TestAgainstBruteForce:
    def test_footprint_and_compositing_match_oracle(self):
        cloud = random_cloud(n=12, seed=5, spread=0.3)
        cam = Camera(azimuth=30.0, resolution=32)
        with torch.no_grad():
            out = rasterize_gaussians(cloud.to(torch.float64), cam, bg=0.5)
        rgb, depth, alpha = brute_force_splat_render(
            cloud.positions.double().numpy(),
            world_covariances(cloud),
            cloud.activated_opacities().double().numpy(),
            activated_colors(cloud),
            azimuth_deg=30.0,
            distance=cam.distance,
            fov_y_deg=cam.fov_y,
            resolution=32,
            bg=0.5,
        )
        assert np.abs(out.alpha.numpy() - alpha).max() < 1e-5
        assert np.abs(out.rgb.numpy() - rgb).max() < 1e-5
        # depth is a quotient of vanishing quantities at near-zero alpha, so
        # compare it where some splat meaningfully covers the pixel
        covered = alpha > 1e-9
        assert np.abs(out.depth.numpy()[covered] - depth[covered]).max() < 1e-5

    def test_single_gaussian_center_and_radial_decay(self):
        cloud = flat_color_cloud([[0.0, 0.0, 0.0]], [[0.9, 0.1, 0.1]], scale=0.08, opacity=0.9)
        cam = Camera(azimuth=0.0, resolution=64)
        with torch.no_grad():
            out = rasterize_gaussians(cloud, cam)
        a = out.alpha.numpy()
        r, c = np.unravel_index(a.argmax(), a.shape)
        assert (r, c) in {(31, 31), (31, 32), (32, 31), (32, 32)}
        # alpha decreases monotonically moving right from the peak
        row = a[r, c:]
        assert np.all(np.diff(row) <= 1e-7)

    def test_empty_cloud_is_pure_background(self):
        cloud = random_cloud(n=5).select(torch.zeros(5, dtype=torch.bool))
        cam = Camera(azimuth=0.0, resolution=16)
        out = rasterize_gaussians(cloud, cam, bg=0.25)
        assert torch.all(out.rgb == 0.25)
        assert torch.all(out.alpha == 0)
        assert torch.all(torch.isinf(out.depth))

    def test_background_exact_where_alpha_zero(self):
        cloud = flat_color_cloud([[0, 0, 0]], [[1, 0, 0]], scale=0.02, opacity=0.9)
        cam = Camera(azimuth=0.0, resolution=64)
        with torch.no_grad():
            out = rasterize_gaussians(cloud, cam, bg=0.5)
        mask = out.alpha == 0
        assert bool(mask.any())
        assert torch.all(out.rgb[mask] == 0.5)
        assert torch.all(torch.isinf(out.depth[mask]))

    def test_translation_shifts_image_by_pinhole_amount(self):
        # move the cloud along the camera-right axis; the brightness centroid
        # must move by delta*f/z pixels (analytic pinhole oracle)
        cam = Camera(azimuth=0.0, resolution=128)
        delta = 0.08
        right = np.array([0.0, 1.0, 0.0])  # camera at azimuth 0 looks down -x
        base = flat_color_cloud([[0, 0, 0]], [[1, 1, 1]], scale=0.05, opacity=0.95)
        moved = base.clone()
        moved.positions = base.positions + torch.tensor(right * delta, dtype=torch.float32)

        def centroid(alpha):
            a = alpha.numpy()
            cols = np.arange(a.shape[1]) + 0.5
            return float((a.sum(axis=0) * cols).sum() / a.sum())

        with torch.no_grad():
            c0 = centroid(rasterize_gaussians(base, cam).alpha)
            c1 = centroid(rasterize_gaussians(moved, cam).alpha)
        expected = delta * cam.focal_px / cam.distance
        assert abs((c1 - c0) - expected) < 0.5

    def test_non_finite_parameters_rejected(self):
        cloud = random_cloud(n=3)
        cloud.opacities = cloud.opacities.clone()
        cloud.opacities[0] = float("nan")
        with pytest.raises(ValidationError):
            rasterize_gaussians(cloud, Camera(azimuth=0, resolution=16))

    def test_camera_behind_content_gives_background(self):
        cloud = flat_color_cloud([[5.0, 0, 0]], [[1, 0, 0]], scale=0.05, opacity=0.9)
        cam = Camera(azimuth=0.0, distance=1.5, resolution=16)  # content behind the camera
        with torch.no_grad():
            out = rasterize_gaussians(cloud, cam)
        assert torch.all(out.alpha == 0)


class TestGradients:
    def test_gradcheck_against_finite_differences(self):
        # relative error < 1e-3 for position, scale, opacity, sh-dc on a
        # 3-Gaussian scene (the acceptance criterion at small resolution)
        cloud = random_cloud(n=3, seed=7, spread=0.2).to(torch.float64)
        cloud.opacities = cloud.opacities.clamp(-1.0, 1.0)
        cam = Camera(azimuth=20.0, resolution=24)

        params = {
            "positions": cloud.positions,
            "log_scales": cloud.log_scales,
            "opacities": cloud.opacities,
            "sh_dc": cloud.sh_dc,
        }
        for t in params.values():
            t.requires_grad_(True)

        out = rasterize_gaussians(cloud, cam)
        total = out.rgb.sum()
        total.backward()

        step = 1e-4
        for name, tensor in params.items():
            analytic = tensor.grad.clone()
            flat = tensor.detach().reshape(-1)
            fd = torch.zeros_like(flat)
            for i in range(flat.numel()):
                orig = flat[i].item()
                for sign in (+1, -1):
                    flat[i] = orig + sign * step
                    with torch.no_grad():
                        val = rasterize_gaussians(cloud, cam).rgb.sum()
                    fd[i] += sign * val / (2 * step)
                flat[i] = orig
            fd = fd.reshape(tensor.shape)
            denom = max(float(analytic.norm()), float(fd.norm()), 1e-12)
            rel = float((analytic - fd).norm()) / denom
            assert rel < 1e-3, f"{name}: rel error {rel}"

    def test_gradients_flow_to_rotation(self):
        cloud = random_cloud(n=2, seed=1).to(torch.float64)
        cloud.rotations.requires_grad_(True)
        out = rasterize_gaussians(cloud, Camera(azimuth=0, resolution=16))
        out.rgb.sum().backward()
        assert cloud.rotations.grad is not None
        assert torch.isfinite(cloud.rotations.grad).all()


class TestMeshRaster:
    def test_cube_front_face_centered_and_flat(self):
        mesh = cube_mesh(half=0.4, color=(0.2, 0.6, 0.3))
        cam = Camera(azimuth=0.0, resolution=64)
        out = rasterize_mesh(mesh, cam)
        d = out.depth.numpy()
        a = out.alpha.numpy()
        assert a[32, 32] == 1.0
        # front face plane sits at x = 0.4 so depth = distance - 0.4
        face = d[30:34, 30:34]
        assert np.allclose(face, cam.distance - 0.4, atol=1e-4)
        assert a[0, 0] == 0.0

    def test_empty_mesh_background(self):
        mesh = cube_mesh()
        mesh.faces = mesh.faces[:0]
        out = rasterize_mesh(mesh, Camera(azimuth=0, resolution=16), bg=0.5)
        assert torch.all(out.rgb == 0.5)
        assert torch.all(out.alpha == 0)

    def test_sphere_depth_minimal_at_center(self):
        mesh = uv_sphere_mesh(radius=0.7)
        cam = Camera(azimuth=0.0, resolution=64)
        out = rasterize_mesh(mesh, cam)
        d = out.depth.numpy()
        center = d[31:33, 31:33].min()
        assert center == pytest.approx(d[np.isfinite(d)].min(), abs=1e-6)
        assert center == pytest.approx(cam.distance - 0.7, abs=0.02)


class TestRig:
    def test_sphere_views_identical(self):
        cloud = fibonacci_sphere_cloud(n=400, radius=0.6, scale=0.08)
        rig = RigConfig(resolution=32)
        views = render_rig(cloud, rig)
        for i in range(1, 4):
            assert np.abs(views.rgb[i] - views.rgb[0]).max() < 0.06

    def test_rig_matches_single_view_render(self):
        cloud = random_cloud(n=10, seed=4)
        rig = RigConfig(resolution=32)
        views = render_rig(cloud, rig)
        for i, cam in enumerate(rig.cameras()):
            with torch.no_grad():
                single = rasterize_gaussians(cloud, cam, bg=rig.background)
            assert np.array_equal(views.rgb[i], single.rgb.numpy().astype(np.float32))

    def test_closed_object_visible_from_far_side(self):
        cloud = fibonacci_sphere_cloud(n=400, radius=0.6, scale=0.08)
        views = render_rig(cloud, RigConfig(resolution=32))
        assert (views.alpha[2] > 0.5).sum() > 50

    def test_mesh_rig(self):
        views = render_rig(cube_mesh(half=0.4), RigConfig(resolution=32))
        assert views.rgb.shape == (4, 32, 32, 3)
        assert np.isfinite(views.depth).any()
