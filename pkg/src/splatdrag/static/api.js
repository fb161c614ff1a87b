/** Typed client for the pipeline service HTTP API. */
import { decodeFloatPayload } from "./depth.js";
export class ServiceClient {
    base;
    fetchFn;
    constructor(base, fetchFn = (input, init) => fetch(input, init)) {
        this.base = base;
        this.fetchFn = fetchFn;
    }
    url(path) {
        return this.base.replace(/\/$/, "") + path;
    }
    async getJson(path) {
        const r = await this.fetchFn(this.url(path));
        if (!r.ok)
            throw new Error(`GET ${path}: ${r.status}`);
        return (await r.json());
    }
    getViews() {
        return this.getJson("/asset/views");
    }
    async getDepth(view) {
        const r = await this.fetchFn(this.url(view.depth));
        if (!r.ok)
            throw new Error(`GET ${view.depth}: ${r.status}`);
        return decodeFloatPayload(await r.arrayBuffer());
    }
    async postDrags(pairs) {
        const r = await this.fetchFn(this.url("/drags"), {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: JSON.stringify({ pairs }),
        });
        if (!r.ok) {
            const body = await r.text();
            throw new Error(`POST /drags: ${r.status} ${body}`);
        }
        return (await r.json());
    }
    async startRun(dragsId, overrides = {}) {
        const r = await this.fetchFn(this.url("/runs"), {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: JSON.stringify({ drags_id: dragsId, overrides }),
        });
        if (!r.ok) {
            const body = await r.text();
            throw new Error(`POST /runs: ${r.status} ${body}`);
        }
        const doc = (await r.json());
        return doc.id;
    }
    getRun(runId) {
        return this.getJson(`/runs/${runId}`);
    }
    artifactUrl(runId, name) {
        return this.url(`/runs/${runId}/artifacts/${name}`);
    }
    async getDaiReport(runId) {
        return this.getJson(`/runs/${runId}/artifacts/dai.json`);
    }
    /** Polls until the run leaves the queue; resolves with the final status. */
    async waitForRun(runId, timeoutMs = 600_000, intervalMs = 500) {
        const start = Date.now();
        for (;;) {
            const status = await this.getRun(runId);
            if (status.status === "complete" || status.status === "failed")
                return status;
            if (Date.now() - start > timeoutMs)
                throw new Error(`run ${runId} timed out`);
            await new Promise((resolve) => setTimeout(resolve, intervalMs));
        }
    }
}
