import { describe, expect, test } from "vitest";

import { ApiError, FlameClient } from "../src/api.js";

function stubFetch(status: number, body: unknown) {
  const calls: Array<{ input: string; init?: RequestInit }> = [];
  const impl = async (input: string, init?: RequestInit) => {
    calls.push({ input, init });
    return new Response(JSON.stringify(body), {
      status,
      headers: { "content-type": "application/json" },
    });
  };
  return { impl, calls };
}

describe("FlameClient", () => {
  test("createSession posts the config payload", async () => {
    const { impl, calls } = stubFetch(201, {
      session_id: "abc", status: "awaiting_labels", shot_count: 5,
      effective_k: 5,
    });
    const client = new FlameClient("http://svc", impl);
    const created = await client.createSession("pool.jsonl", "query.json",
      { shots_k: 5, seed: 1 });
    expect(created.session_id).toBe("abc");
    expect(calls[0].input).toBe("http://svc/sessions");
    const body = JSON.parse(String(calls[0].init?.body));
    expect(body.pool_path).toBe("pool.jsonl");
    expect(body.config.shots_k).toBe(5);
  });

  test("service errors map to ApiError with code and details", async () => {
    const { impl } = stubFetch(422, {
      code: "empty_band",
      message: "no sample in band",
      details: { mode_density: 1.5 },
    });
    const client = new FlameClient("http://svc", impl);
    const err = await client.getCandidates("x").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(422);
    expect(err.code).toBe("empty_band");
    expect(err.details.mode_density).toBe(1.5);
  });

  test("network failures become ApiError with status 0", async () => {
    const client = new FlameClient("http://svc", async () => {
      throw new Error("connection refused");
    });
    const err = await client.getSession("x").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(0);
    expect(err.code).toBe("network_error");
  });

  test("submitLabels wraps the label map", async () => {
    const { impl, calls } = stubFetch(200, { accepted: 2, remaining: 0 });
    const client = new FlameClient("http://svc", impl);
    const result = await client.submitLabels("sid", { a: 1, b: 0 });
    expect(result.remaining).toBe(0);
    expect(JSON.parse(String(calls[0].init?.body))).toEqual(
      { labels: { a: 1, b: 0 } });
  });

  test("train passes allow_partial", async () => {
    const { impl, calls } = stubFetch(200, { ap_flame: 0.9, ap_baseline: 0.5 });
    const client = new FlameClient("http://svc", impl);
    await client.train("sid", true);
    expect(JSON.parse(String(calls[0].init?.body)).allow_partial).toBe(true);
  });

  test("assetUrl joins the base", () => {
    const client = new FlameClient("http://svc:1234");
    expect(client.assetUrl("crops/a.png")).toBe("http://svc:1234/assets/crops/a.png");
  });
});
