"""Command-line entry points for every pipeline stage plus run and serve."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import torch

ARTIFACT_ROOT_ENV = "SPLATDRAG_ARTIFACTS"

from .core.cameras import RigConfig
from .core.drags import load_dragset, save_dragset
from .core.gaussians import load_gaussians, save_gaussians
from .core.images import load_view_dir, save_view_dir
from .dragproject import project_pairs
from .guidance import GuidanceConfig, ddim_invert, guided_sample, load_backend, perturb_background
from .metrics import dai_report, save_report
from .pipeline import RunConfig, load_asset, run_pipeline
from .reconstruct import load_reconstructor, regress_and_fuse
from .refine import SDSConfig, TargetPullingBackend, load_perceptual, optimize_positions, sds_refine
from .render import render_rig
from .report import save_curve_figure, save_dai_figure, write_curve_csv, write_dai_csv


def _rig_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--res", type=int, default=256, help="rig render resolution")
    p.add_argument("--bg", type=float, default=0.5, help="background gray level")
    p.add_argument("--distance", type=float, default=3.0, help="camera orbit radius")
    p.add_argument("--fov", type=float, default=50.0, help="vertical field of view, degrees")


def _rig(args) -> RigConfig:
    return RigConfig(resolution=args.res, background=args.bg,
                     distance=args.distance, fov_y=args.fov)


def cmd_render(args) -> int:
    asset = load_asset(args.asset)
    views = render_rig(asset, _rig(args))
    save_view_dir(views, args.out)
    print(f"wrote 4 views to {args.out}")
    return 0


def cmd_project(args) -> int:
    rig = _rig(args)
    asset = load_asset(args.asset)
    views = render_rig(asset, rig)
    drags = project_pairs(load_dragset(args.drags), views, rig)
    save_dragset(drags, args.out)
    visible = [int(vp.visible.sum()) for vp in drags.projections]
    print(f"wrote {args.out}; visible pairs per view: {visible}")
    return 0


def cmd_drag(args) -> int:
    views = load_view_dir(args.views)
    rig = RigConfig(resolution=views.resolution, background=args.bg,
                    distance=args.distance, fov_y=args.fov)
    drags = load_dragset(args.proj)
    if drags.projections is None:
        drags = project_pairs(drags, views, rig)
    torch.manual_seed(args.seed)
    perturbed = perturb_background(views, args.bg_noise_std, seed=args.seed)
    backend = load_backend(args.backend, {"views": perturbed, "seed": args.seed})
    z_t, trajectory = ddim_invert(perturbed, backend, args.steps)
    config = GuidanceConfig(eta=args.eta, alpha=args.alpha, beta=args.beta,
                            cfg_scale=args.cfg, ddim_steps=args.steps,
                            bg_noise_std=args.bg_noise_std)
    edited, _, log = guided_sample(z_t, backend, drags, config, trajectory,
                                   source_views=views)
    out = Path(args.out)
    save_view_dir(edited, out)
    with open(out / "drag_log.json", "w", encoding="utf-8") as fh:
        json.dump(log.steps, fh, indent=2)
    write_curve_csv(log.steps, out / "drag_log.csv")
    series = {
        k: [r[k] for r in log.steps if k in r]
        for k in ("energy_edit", "energy_content", "energy")
    }
    series = {k: v for k, v in series.items() if v}
    if series:
        save_curve_figure(series, out / "drag_energies.png", "sampling step", "energy")
    print(f"wrote edited views and run log to {out}")
    return 0


def cmd_reconstruct(args) -> int:
    views = load_view_dir(args.views)
    rig = RigConfig(resolution=views.resolution, background=args.bg,
                    distance=args.distance, fov_y=args.fov)
    backend = load_reconstructor(args.backend)
    fused = regress_and_fuse(views, rig, backend)
    save_gaussians(fused, args.out)
    print(f"wrote {len(fused)} Gaussians to {args.out}")
    return 0


def cmd_refine(args) -> int:
    cloud = load_gaussians(args.cloud)
    views = load_view_dir(args.views)
    rig = RigConfig(resolution=views.resolution, background=args.bg,
                    distance=args.distance, fov_y=args.fov)
    loss_fn = load_perceptual(args.perceptual)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    logs: dict[str, list] = {}

    if args.stage in ("deform", "both"):
        result = optimize_positions(
            cloud, views, rig, loss_fn=loss_fn, iterations=args.deform_iters,
            lr=args.deform_lr, resolution=args.work_res, seed=args.seed,
        )
        cloud = result.cloud
        logs["deform"] = [{"iteration": i, "loss": v} for i, v in enumerate(result.losses)]
        save_curve_figure({"loss": result.losses}, out.parent / "deform_loss.png",
                          "iteration", "alignment loss", logy=True)
    if args.stage in ("sds", "both"):
        cfg = SDSConfig(iterations=args.sds_iters, resolution=args.sds_res,
                        densify_interval=args.densify_interval, seed=args.seed)
        if args.backend.startswith("adapter:"):
            backend = load_backend(args.backend, {"views": views, "seed": args.seed})
        else:
            backend = TargetPullingBackend(cloud.clone(), background=rig.background)
        sds_loss = loss_fn if args.perceptual.startswith("adapter:") else None
        result = sds_refine(cloud, backend, views, rig, cfg, loss_fn=sds_loss)
        cloud = result.cloud
        logs["sds"] = [
            {"iteration": i, "t_max": tm, "t": t, "perceptual": p}
            for i, (tm, t, p) in enumerate(
                zip(result.t_max_trace, result.t_samples, result.perceptual_losses)
            )
        ]
        save_curve_figure({"perceptual": result.perceptual_losses},
                          out.parent / "sds_loss.png", "iteration", "perceptual loss",
                          logy=True)

    save_gaussians(cloud, out)
    log_path = out.parent / "refine_log.json"
    with open(log_path, "w", encoding="utf-8") as fh:
        json.dump(logs, fh, indent=2)
    for stage, rows in logs.items():
        write_curve_csv(rows, out.parent / f"{stage}_log.csv")
    print(f"wrote {out} ({len(cloud)} Gaussians) and {log_path}")
    return 0


def cmd_evaluate(args) -> int:
    original = load_view_dir(args.orig)
    edited = load_view_dir(args.edited)
    drags = load_dragset(args.proj)
    report = dai_report(original, edited, drags)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_report(report, out)
    write_dai_csv(report, out.with_suffix(".csv"))
    save_dai_figure(report, out.with_suffix(".png"))
    print(json.dumps(report.to_json()["scores"], indent=2))
    return 0


def cmd_run(args) -> int:
    if args.config:
        config = RunConfig.from_json(json.loads(Path(args.config).read_text()))
    else:
        if not (args.asset and args.drags and args.out):
            print("run needs either --config or --asset/--drags/--out", file=sys.stderr)
            return 2
        config = RunConfig(asset=args.asset, drags=args.drags, out_dir=args.out,
                           seed=args.seed)
    manifest = run_pipeline(config)
    statuses = {k: v.get("status") for k, v in manifest.stages.items()}
    print(json.dumps(statuses, indent=2))
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    defaults = {}
    if args.defaults:
        defaults = json.loads(Path(args.defaults).read_text())
    serve(args.asset, args.artifacts, port=args.port, host=args.host,
          run_defaults=defaults)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splatdrag", description="drag-based 3D editing of Gaussian splats"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="render an asset into the four-view rig")
    p.add_argument("--asset", required=True)
    p.add_argument("--out", required=True)
    _rig_args(p)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("project", help="project drag pairs into the views")
    p.add_argument("--asset", required=True)
    p.add_argument("--drags", required=True)
    p.add_argument("--out", required=True)
    _rig_args(p)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("drag", help="energy-guided multi-view editing")
    p.add_argument("--views", required=True, help="directory with rendered views")
    p.add_argument("--proj", required=True, help="projected drag JSON")
    p.add_argument("--backend", default="toy", help="toy | adapter:module:factory")
    p.add_argument("--alpha", type=float, default=8.0)
    p.add_argument("--beta", type=float, default=4.0)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--cfg", type=float, default=5.0)
    p.add_argument("--steps", type=int, default=150)
    p.add_argument("--bg-noise-std", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _rig_args(p)
    p.set_defaults(func=cmd_drag)

    p = sub.add_parser("reconstruct", help="fuse edited views into Gaussians")
    p.add_argument("--views", required=True)
    p.add_argument("--backend", default="unproj:4", help="unproj[:stride] | adapter:...")
    p.add_argument("--out", required=True)
    _rig_args(p)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("refine", help="deformation and/or SDS refinement")
    p.add_argument("--cloud", required=True)
    p.add_argument("--views", required=True)
    p.add_argument("--stage", choices=("deform", "sds", "both"), default="both")
    p.add_argument("--backend", default="toy")
    p.add_argument("--perceptual", default="l2", help="l2 | adapter:module:factory")
    p.add_argument("--deform-iters", type=int, default=2000)
    p.add_argument("--deform-lr", type=float, default=1e-5)
    p.add_argument("--work-res", type=int, default=64)
    p.add_argument("--sds-iters", type=int, default=1000)
    p.add_argument("--sds-res", type=int, default=48)
    p.add_argument("--densify-interval", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _rig_args(p)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("evaluate", help="drag-accuracy report")
    p.add_argument("--orig", required=True)
    p.add_argument("--edited", required=True)
    p.add_argument("--proj", required=True)
    p.add_argument("--out", required=True, help="dai.json (csv/png land beside it)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run", help="full pipeline from a config or flags")
    p.add_argument("--config", help="RunConfig JSON path")
    p.add_argument("--asset")
    p.add_argument("--drags")
    p.add_argument("--out", default=os.environ.get(ARTIFACT_ROOT_ENV),
                   help=f"output directory (default ${ARTIFACT_ROOT_ENV})")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("serve", help="HTTP service for the annotator UI")
    p.add_argument("--asset", required=True)
    p.add_argument("--artifacts", default=os.environ.get(ARTIFACT_ROOT_ENV),
                   required=ARTIFACT_ROOT_ENV not in os.environ,
                   help=f"artifact root (default ${ARTIFACT_ROOT_ENV})")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--defaults", help="JSON file with RunConfig field overrides")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
