/** Before/after review model for a completed run. */
export function buildGalleryModel(client, run, report) {
    if (run.status !== "complete") {
        throw new Error(`run ${run.id} is ${run.status}, not complete`);
    }
    const originals = [0, 1, 2, 3].map((i) => client.artifactUrl(run.id, `views/view_${i}.png`));
    const edited = [0, 1, 2, 3].map((i) => client.artifactUrl(run.id, `final_views/view_${i}.png`));
    const dai = report.gammas.map((gamma) => ({
        gamma,
        score: report.scores[String(gamma)],
        perPair: report.per_pair_mean[String(gamma)],
    }));
    return { runId: run.id, originals, edited, dai, culledPairs: report.culled_pairs };
}
