/**
 * Annotation session: depth-validated point picks assembled into drag pairs.
 *
 * Every 3D handle traces back to a foreground pixel pick in one of the four
 * views: the pixel's depth unprojects through that view's camera, and the
 * resulting point must reproject into the same view within a pixel. A pair
 * becomes submittable only when both endpoints hold valid picks.
 */

import { ViewCamera, Vec3, pixelIndex, project, unproject } from "./camera.js";
import { DepthMap, depthAt, isForeground } from "./depth.js";
import { DragPairJson } from "./api.js";

export interface ViewData {
  camera: ViewCamera;
  depth: DepthMap;
  imageUrl: string;
}

export interface Pick {
  view: number;
  col: number;
  row: number;
  world: Vec3;
  depth: number;
  reprojectError: number;
}

export type PickResult = { ok: true; pick: Pick } | { ok: false; reason: string };

export interface PendingPair {
  source: Pick | null;
  target: Pick | null;
}

export class AnnotationSession {
  readonly views: ViewData[];
  pairs: PendingPair[] = [];

  constructor(views: ViewData[]) {
    if (views.length !== 4) throw new Error("the rig has exactly four views");
    this.views = views;
  }

  pickPoint(viewIndex: number, col: number, row: number): PickResult {
    const view = this.views[viewIndex];
    if (!view) return { ok: false, reason: `no view ${viewIndex}` };
    if (!isForeground(view.depth, row, col)) {
      return { ok: false, reason: "background pixel: no surface to pick" };
    }
    const z = depthAt(view.depth, row, col);
    const world = unproject(view.camera, col + 0.5, row + 0.5, z);
    const back = project(view.camera, world);
    const [bc, br] = pixelIndex(back.u, back.v);
    const err = Math.hypot(back.u - (col + 0.5), back.v - (row + 0.5));
    if (bc !== col || br !== row) {
      return { ok: false, reason: `pick does not reproject onto its pixel (err ${err.toFixed(3)}px)` };
    }
    return {
      ok: true,
      pick: { view: viewIndex, col, row, world, depth: z, reprojectError: err },
    };
  }

  /** Place the next endpoint: source first, then target, opening pairs as needed. */
  place(pick: Pick): PendingPair {
    const open = this.pairs.find((p) => p.source === null || p.target === null);
    if (!open) {
      const pair: PendingPair = { source: pick, target: null };
      this.pairs.push(pair);
      return pair;
    }
    if (open.source === null) open.source = pick;
    else open.target = pick;
    return open;
  }

  removePair(index: number): void {
    this.pairs.splice(index, 1);
  }

  completePairs(): { source: Pick; target: Pick }[] {
    return this.pairs.filter((p): p is { source: Pick; target: Pick } =>
      Boolean(p.source && p.target),
    );
  }

  get submittable(): boolean {
    return this.completePairs().length >= 1;
  }

  toDragPairs(): DragPairJson[] {
    return this.completePairs().map((p) => ({
      source: [...p.source.world] as [number, number, number],
      target: [...p.target.world] as [number, number, number],
    }));
  }
}
