/** Before/after review model for a completed run. */

import { DaiReportJson, RunStatus, ServiceClient } from "./api.js";

export interface GalleryRow {
  gamma: number;
  score: number;
  perPair: number;
}

export interface GalleryModel {
  runId: string;
  originals: string[]; // 4 urls, azimuth order
  edited: string[]; // 4 urls of the refined result's renders
  dai: GalleryRow[]; // one row per patch radius
  culledPairs: number;
}

export function buildGalleryModel(
  client: ServiceClient,
  run: RunStatus,
  report: DaiReportJson,
): GalleryModel {
  if (run.status !== "complete") {
    throw new Error(`run ${run.id} is ${run.status}, not complete`);
  }
  const originals = [0, 1, 2, 3].map((i) => client.artifactUrl(run.id, `views/view_${i}.png`));
  const edited = [0, 1, 2, 3].map((i) =>
    client.artifactUrl(run.id, `final_views/view_${i}.png`),
  );
  const dai = report.gammas.map((gamma) => ({
    gamma,
    score: report.scores[String(gamma)],
    perPair: report.per_pair_mean[String(gamma)],
  }));
  return { runId: run.id, originals, edited, dai, culledPairs: report.culled_pairs };
}
