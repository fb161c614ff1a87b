import assert from "node:assert/strict";
import { test } from "node:test";

import { decodeFloatPayload, depthAt, isForeground } from "../src/depth.js";
import { ViewCamera, eyePosition, pixelIndex, project, unproject } from "../src/camera.js";
import { AnnotationSession, ViewData } from "../src/session.js";
import { buildGalleryModel } from "../src/gallery.js";
import { ServiceClient, RunStatus, DaiReportJson } from "../src/api.js";

function encodePayload(rows: number, cols: number, values: number[]): ArrayBuffer {
  const header = new TextEncoder().encode(
    JSON.stringify({ dtype: "float32", shape: [rows, cols], order: "C" }) + "\n",
  );
  const data = new Float32Array(values);
  const out = new Uint8Array(header.length + data.byteLength);
  out.set(header, 0);
  out.set(new Uint8Array(data.buffer), header.length);
  return out.buffer;
}

const CAMERA: ViewCamera = { azimuth: 0, elevation: 0, distance: 3, fovY: 50, resolution: 64 };

test("depth payload round trip with infinities", () => {
  const payload = encodePayload(2, 2, [1.5, Infinity, 2.25, 0.5]);
  const map = decodeFloatPayload(payload);
  assert.equal(map.rows, 2);
  assert.equal(depthAt(map, 0, 0), 1.5);
  assert.equal(depthAt(map, 0, 1), Infinity);
  assert.equal(isForeground(map, 0, 1), false);
  assert.equal(isForeground(map, 1, 1), true);
  assert.equal(isForeground(map, 5, 0), false); // out of bounds
});

test("world origin projects to the image center", () => {
  for (const azimuth of [0, 90, 180, 270]) {
    const cam = { ...CAMERA, azimuth };
    const { u, v, z } = project(cam, [0, 0, 0]);
    assert.ok(Math.abs(u - 32) < 1e-9 && Math.abs(v - 32) < 1e-9, `azimuth ${azimuth}`);
    assert.ok(Math.abs(z - cam.distance) < 1e-9);
  }
});

test("project and unproject are inverse", () => {
  const pts: [number, number, number][] = [
    [0.2, -0.1, 0.3],
    [-0.4, 0.2, -0.2],
    [0.05, 0.33, 0.11],
  ];
  for (const azimuth of [0, 90, 217.5]) {
    const cam = { ...CAMERA, azimuth };
    for (const p of pts) {
      const { u, v, z } = project(cam, p);
      const back = unproject(cam, u, v, z);
      for (let i = 0; i < 3; i++) assert.ok(Math.abs(back[i] - p[i]) < 1e-9);
    }
  }
});

test("points above the origin appear in the upper image half", () => {
  const { v } = project(CAMERA, [0, 0, 0.3]);
  assert.ok(v < 32);
});

test("eye position sits on the orbit circle", () => {
  const eye = eyePosition({ ...CAMERA, azimuth: 90 });
  assert.ok(Math.abs(eye[0]) < 1e-12 && Math.abs(eye[1] - 3) < 1e-12);
});

function sessionWithFlatDepth(depthValue = 2.5): AnnotationSession {
  const res = 16;
  const views: ViewData[] = [0, 90, 180, 270].map((azimuth) => {
    const data = new Float32Array(res * res).fill(Infinity);
    // a small solid square in the middle of each view
    for (let r = 6; r < 10; r++)
      for (let c = 6; c < 10; c++) data[r * res + c] = depthValue;
    return {
      camera: { azimuth, elevation: 0, distance: 3, fovY: 50, resolution: res },
      depth: { rows: res, cols: res, data },
      imageUrl: `view_${azimuth}.png`,
    };
  });
  return new AnnotationSession(views);
}

test("background pick is rejected, foreground pick reprojects onto its pixel", () => {
  const session = sessionWithFlatDepth();
  const rejected = session.pickPoint(0, 0, 0);
  assert.equal(rejected.ok, false);

  const picked = session.pickPoint(0, 7, 8);
  assert.ok(picked.ok);
  if (picked.ok) {
    assert.equal(picked.pick.view, 0);
    assert.ok(picked.pick.reprojectError < 1.0);
    assert.deepEqual([picked.pick.col, picked.pick.row], [7, 8]);
  }
});

test("pairs gate submission: both endpoints required", () => {
  const session = sessionWithFlatDepth();
  assert.equal(session.submittable, false);
  const a = session.pickPoint(0, 7, 7);
  const b = session.pickPoint(1, 8, 8);
  assert.ok(a.ok && b.ok);
  if (a.ok) session.place(a.pick);
  assert.equal(session.submittable, false); // half a pair
  if (b.ok) session.place(b.pick);
  assert.equal(session.submittable, true);
  const pairs = session.toDragPairs();
  assert.equal(pairs.length, 1);
  assert.equal(pairs[0].source.length, 3);
});

test("every handle traces to a depth-valid pixel pick", () => {
  const session = sessionWithFlatDepth(2.0);
  const pick = session.pickPoint(2, 9, 6);
  assert.ok(pick.ok);
  if (pick.ok) {
    // unprojected depth matches the depth map value the pick came from
    assert.equal(pick.pick.depth, 2.0);
  }
});

test("gallery model assembles 4+4 images and 5 table rows", () => {
  const client = new ServiceClient("http://example.test");
  const run: RunStatus = {
    id: "r1",
    status: "complete",
    error: null,
    manifest: { config: {}, stages: {} },
  };
  const report: DaiReportJson = {
    gammas: [1, 3, 5, 7, 10],
    scores: { "1": 0.1, "3": 0.2, "5": 0.3, "7": 0.4, "10": 0.5 },
    per_pair_mean: { "1": 0.1, "3": 0.2, "5": 0.3, "7": 0.4, "10": 0.5 },
    visible_pairs: [1, 1, 1, 1],
    culled_pairs: 0,
  };
  const model = buildGalleryModel(client, run, report);
  assert.equal(model.originals.length, 4);
  assert.equal(model.edited.length, 4);
  assert.equal(model.dai.length, 5);
  assert.ok(model.originals[0].endsWith("/runs/r1/artifacts/views/view_0.png"));
  assert.ok(model.edited[3].endsWith("/runs/r1/artifacts/final_views/view_3.png"));
});

test("gallery model refuses incomplete runs", () => {
  const client = new ServiceClient("http://example.test");
  const run: RunStatus = { id: "r2", status: "running", error: null, manifest: null };
  assert.throws(() =>
    buildGalleryModel(client, run, {
      gammas: [],
      scores: {},
      per_pair_mean: {},
      visible_pairs: [],
      culled_pairs: 0,
    }),
  );
});
