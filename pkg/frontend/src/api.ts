/** Typed client for the pipeline service HTTP API. */

import { DepthMap, decodeFloatPayload } from "./depth.js";

export interface ViewInfo {
  index: number;
  azimuth: number;
  elevation: number;
  distance: number;
  fov_y: number;
  image: string;
  depth: string;
}

export interface ViewsManifest {
  resolution: number;
  background: number;
  views: ViewInfo[];
}

export interface DragPairJson {
  source: [number, number, number];
  target: [number, number, number];
}

export interface ProjectedPairJson {
  p: [number, number];
  q: [number, number];
  p_z: number;
  q_z: number;
  visible: boolean;
}

export interface DragsResponse {
  id: string;
  drags: {
    pairs: DragPairJson[];
    views: { view: number; pairs: ProjectedPairJson[] }[];
  };
}

export interface RunStatus {
  id: string;
  status: "queued" | "running" | "complete" | "failed";
  error: string | null;
  manifest: { config: Record<string, unknown>; stages: Record<string, { status: string }> } | null;
}

export interface DaiReportJson {
  gammas: number[];
  scores: Record<string, number>;
  per_pair_mean: Record<string, number>;
  visible_pairs: number[];
  culled_pairs: number;
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ServiceClient {
  constructor(
    private base: string,
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  url(path: string): string {
    return this.base.replace(/\/$/, "") + path;
  }

  private async getJson<T>(path: string): Promise<T> {
    const r = await this.fetchFn(this.url(path));
    if (!r.ok) throw new Error(`GET ${path}: ${r.status}`);
    return (await r.json()) as T;
  }

  getViews(): Promise<ViewsManifest> {
    return this.getJson("/asset/views");
  }

  async getDepth(view: ViewInfo): Promise<DepthMap> {
    const r = await this.fetchFn(this.url(view.depth));
    if (!r.ok) throw new Error(`GET ${view.depth}: ${r.status}`);
    return decodeFloatPayload(await r.arrayBuffer());
  }

  async postDrags(pairs: DragPairJson[]): Promise<DragsResponse> {
    const r = await this.fetchFn(this.url("/drags"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ pairs }),
    });
    if (!r.ok) {
      const body = await r.text();
      throw new Error(`POST /drags: ${r.status} ${body}`);
    }
    return (await r.json()) as DragsResponse;
  }

  async startRun(dragsId: string, overrides: Record<string, unknown> = {}): Promise<string> {
    const r = await this.fetchFn(this.url("/runs"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ drags_id: dragsId, overrides }),
    });
    if (!r.ok) {
      const body = await r.text();
      throw new Error(`POST /runs: ${r.status} ${body}`);
    }
    const doc = (await r.json()) as { id: string };
    return doc.id;
  }

  getRun(runId: string): Promise<RunStatus> {
    return this.getJson(`/runs/${runId}`);
  }

  artifactUrl(runId: string, name: string): string {
    return this.url(`/runs/${runId}/artifacts/${name}`);
  }

  async getDaiReport(runId: string): Promise<DaiReportJson> {
    return this.getJson(`/runs/${runId}/artifacts/dai.json`);
  }

  /** Polls until the run leaves the queue; resolves with the final status. */
  async waitForRun(runId: string, timeoutMs = 600_000, intervalMs = 500): Promise<RunStatus> {
    const start = Date.now();
    for (;;) {
      const status = await this.getRun(runId);
      if (status.status === "complete" || status.status === "failed") return status;
      if (Date.now() - start > timeoutMs) throw new Error(`run ${runId} timed out`);
      await new Promise((resolve) => setTimeout(resolve, intervalMs));
    }
  }
}
