/**
 * Annotation session: depth-validated point picks assembled into drag pairs.
 *
 * Every 3D handle traces back to a foreground pixel pick in one of the four
 * views: the pixel's depth unprojects through that view's camera, and the
 * resulting point must reproject into the same view within a pixel. A pair
 * becomes submittable only when both endpoints hold valid picks.
 */
import { pixelIndex, project, unproject } from "./camera.js";
import { depthAt, isForeground } from "./depth.js";
export class AnnotationSession {
    views;
    pairs = [];
    constructor(views) {
        if (views.length !== 4)
            throw new Error("the rig has exactly four views");
        this.views = views;
    }
    pickPoint(viewIndex, col, row) {
        const view = this.views[viewIndex];
        if (!view)
            return { ok: false, reason: `no view ${viewIndex}` };
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
    place(pick) {
        const open = this.pairs.find((p) => p.source === null || p.target === null);
        if (!open) {
            const pair = { source: pick, target: null };
            this.pairs.push(pair);
            return pair;
        }
        if (open.source === null)
            open.source = pick;
        else
            open.target = pick;
        return open;
    }
    removePair(index) {
        this.pairs.splice(index, 1);
    }
    completePairs() {
        return this.pairs.filter((p) => Boolean(p.source && p.target));
    }
    get submittable() {
        return this.completePairs().length >= 1;
    }
    toDragPairs() {
        return this.completePairs().map((p) => ({
            source: [...p.source.world],
            target: [...p.target.world],
        }));
    }
}
