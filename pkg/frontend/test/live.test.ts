import { describe, expect, it } from "vitest";
import { Api } from "../src/api.js";

// Full loop against a real server.  Start one with
//   mapsmith serve --port 8000 --fdm fdm.mshm --ddm ddm.mshm --aligner aligner.mshm
// then: MAPSMITH_SERVER_URL=http://127.0.0.1:8000 npm test
const url = process.env.MAPSMITH_SERVER_URL;

describe.skipIf(!url)("live server loop", () => {
  const api = new Api(url ?? "");

  it("reports healthy models", async () => {
    const health = await api.health();
    expect(health.status).toBe("ok");
    expect(health.models.length).toBeGreaterThan(0);
  });

  it("generate twice with one seed, tweak prompt, inspect", async () => {
    const req = { prompt: "a mossy cavern beside a lake", model: "fdm" as const, seed: 11 };
    const first = await api.generate(req);
    const again = await api.generate(req);
    expect(again.grid).toEqual(first.grid);

    const tweaked = await api.generate({ ...req, prompt: req.prompt + " of lava" });
    expect(tweaked.grid).not.toEqual(first.grid);

    const analysis = await api.analyze(first.grid);
    expect(analysis.connectivity.components).toBeGreaterThanOrEqual(0);

    const score = await api.score(req.prompt, first.grid);
    expect(score).toBeGreaterThanOrEqual(0);
    expect(score).toBeLessThanOrEqual(100);
  });

  it("DDM playback returns the intermediate frames", async () => {
    const res = await api.generate({
      prompt: "winding stone halls",
      model: "ddm",
      seed: 3,
      steps: 30,
      dump_steps: true,
    });
    expect(res.frames).toHaveLength(11);
  });
});
