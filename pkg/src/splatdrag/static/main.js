/**
 * Browser wiring: four view canvases with click-to-pick handles, run
 * submission, progress polling, and the before/after gallery.
 */
import { ServiceClient } from "./api.js";
import { AnnotationSession } from "./session.js";
import { buildGalleryModel } from "./gallery.js";
const HANDLE_COLORS = { source: "#2b8a3e", target: "#c92a2a" };
function el(tag, attrs = {}, ...children) {
    const node = document.createElement(tag);
    for (const [k, v] of Object.entries(attrs))
        node.setAttribute(k, v);
    node.append(...children);
    return node;
}
class App {
    client = new ServiceClient("");
    session = null;
    manifest = null;
    canvases = [];
    images = [];
    statusLine = el("p", { class: "status" }, "loading views…");
    pairList = el("ul", { class: "pairs" });
    submitBtn = el("button", { disabled: "true" }, "run edit");
    gallery = el("div", { class: "gallery" });
    async start(root) {
        const grid = el("div", { class: "grid" });
        root.append(this.statusLine, grid, this.pairList, this.submitBtn, this.gallery);
        this.submitBtn.addEventListener("click", () => void this.submit());
        try {
            this.manifest = await this.client.getViews();
            const views = [];
            for (const info of this.manifest.views) {
                const depth = await this.client.getDepth(info);
                views.push({
                    camera: {
                        azimuth: info.azimuth,
                        elevation: info.elevation,
                        distance: info.distance,
                        fovY: info.fov_y,
                        resolution: this.manifest.resolution,
                    },
                    depth,
                    imageUrl: this.client.url(info.image),
                });
            }
            this.session = new AnnotationSession(views);
            views.forEach((view, i) => grid.append(this.viewCell(view, i)));
            this.statusLine.textContent =
                "click a view to place the source handle, click again for the target";
        }
        catch (err) {
            this.statusLine.textContent = `failed to load asset views: ${err}`;
        }
    }
    viewCell(view, index) {
        const res = view.camera.resolution;
        const canvas = el("canvas", {
            width: String(res),
            height: String(res),
            title: `azimuth ${view.camera.azimuth}°`,
        });
        const img = new Image();
        img.src = view.imageUrl;
        img.addEventListener("load", () => this.redraw(index));
        this.canvases[index] = canvas;
        this.images[index] = img;
        canvas.addEventListener("click", (ev) => {
            const rect = canvas.getBoundingClientRect();
            const col = Math.floor(((ev.clientX - rect.left) / rect.width) * res);
            const row = Math.floor(((ev.clientY - rect.top) / rect.height) * res);
            this.handleClick(index, col, row);
        });
        return el("figure", {}, canvas, el("figcaption", {}, `view ${index} · ${view.camera.azimuth}°`));
    }
    handleClick(view, col, row) {
        if (!this.session)
            return;
        const result = this.session.pickPoint(view, col, row);
        if (!result.ok) {
            this.statusLine.textContent = `rejected: ${result.reason}`;
            return;
        }
        const pair = this.session.place(result.pick);
        const role = pair.target === null ? "source" : "target";
        this.statusLine.textContent =
            `${role} placed in view ${view} at (${col}, ${row}), ` +
                `depth ${result.pick.depth.toFixed(3)}`;
        this.refreshPairs();
        this.redrawAll();
    }
    refreshPairs() {
        if (!this.session)
            return;
        this.pairList.replaceChildren(...this.session.pairs.map((p, i) => {
            const label = `pair ${i}: source ${p.source ? "set" : "…"} / target ${p.target ? "set" : "…"}`;
            const remove = el("button", {}, "remove");
            remove.addEventListener("click", () => {
                this.session.removePair(i);
                this.refreshPairs();
                this.redrawAll();
            });
            return el("li", {}, label, " ", remove);
        }));
        this.submitBtn.disabled = !this.session.submittable;
    }
    redrawAll() {
        this.canvases.forEach((_, i) => this.redraw(i));
    }
    redraw(view) {
        if (!this.session)
            return;
        const canvas = this.canvases[view];
        const ctx = canvas.getContext("2d");
        if (!ctx)
            return;
        ctx.drawImage(this.images[view], 0, 0);
        for (const pair of this.session.pairs) {
            for (const [role, pick] of [
                ["source", pair.source],
                ["target", pair.target],
            ]) {
                if (pick && pick.view === view)
                    this.dot(ctx, pick, HANDLE_COLORS[role]);
            }
            if (pair.source?.view === view && pair.target?.view === view) {
                ctx.strokeStyle = "#f59f00";
                ctx.beginPath();
                ctx.moveTo(pair.source.col + 0.5, pair.source.row + 0.5);
                ctx.lineTo(pair.target.col + 0.5, pair.target.row + 0.5);
                ctx.stroke();
            }
        }
    }
    dot(ctx, pick, color) {
        ctx.fillStyle = color;
        ctx.beginPath();
        ctx.arc(pick.col + 0.5, pick.row + 0.5, 3, 0, 2 * Math.PI);
        ctx.fill();
    }
    async submit() {
        if (!this.session || !this.session.submittable)
            return;
        this.submitBtn.disabled = true;
        try {
            this.statusLine.textContent = "validating drags…";
            const drags = await this.client.postDrags(this.session.toDragPairs());
            this.statusLine.textContent = "starting run…";
            const runId = await this.client.startRun(drags.id);
            this.statusLine.textContent = `run ${runId} queued`;
            const status = await this.client.waitForRun(runId, 3_600_000, 1000);
            if (status.status !== "complete") {
                this.statusLine.textContent = `run ${runId} failed: ${status.error}`;
                return;
            }
            const report = await this.client.getDaiReport(runId);
            this.renderGallery(buildGalleryModel(this.client, status, report));
            this.statusLine.textContent = `run ${runId} complete`;
        }
        catch (err) {
            this.statusLine.textContent = `run failed: ${err}`;
        }
        finally {
            this.submitBtn.disabled = !this.session.submittable;
        }
    }
    renderGallery(model) {
        const rows = model.dai.map((row) => el("tr", {}, el("td", {}, String(row.gamma)), el("td", {}, row.score.toFixed(4)), el("td", {}, row.perPair.toFixed(4))));
        this.gallery.replaceChildren(el("h2", {}, `run ${model.runId}`), el("h3", {}, "original"), el("div", { class: "strip" }, ...model.originals.map((src) => el("img", { src }))), el("h3", {}, "edited"), el("div", { class: "strip" }, ...model.edited.map((src) => el("img", { src }))), el("table", {}, el("thead", {}, el("tr", {}, el("th", {}, "radius"), el("th", {}, "sum"), el("th", {}, "per pair"))), el("tbody", {}, ...rows)));
    }
}
if (typeof document !== "undefined") {
    const root = document.getElementById("app");
    if (root)
        void new App().start(root);
}
