import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { buildOverrideBody } from "../src/overrideDialog.js";

describe("score-override dialog", () => {
  it("builds the exact override_score body", () => {
    expect(
      buildOverrideBody({
        nodeId: "s7",
        criterion: "importance",
        likert: 5,
        explanation: "this step matters most",
      }),
    ).toEqual({
      node_id: "s7",
      criterion: "importance",
      likert: 5,
      explanation: "this step matters most",
    });
  });

  it("rejects invalid dialog state", () => {
    const base = { nodeId: "s7", criterion: "importance", likert: 3, explanation: "" };
    expect(() => buildOverrideBody({ ...base, nodeId: "" })).toThrow("no node");
    expect(() => buildOverrideBody({ ...base, criterion: "vibes" })).toThrow("criterion");
    expect(() => buildOverrideBody({ ...base, likert: 0 })).toThrow("likert");
    expect(() => buildOverrideBody({ ...base, likert: 6 })).toThrow("likert");
    expect(() => buildOverrideBody({ ...base, likert: 2.5 })).toThrow("likert");
  });

  it("posts the exact body to the override endpoint", async () => {
    const calls: { url: string; init?: RequestInit }[] = [];
    const fakeFetch = async (url: string, init?: RequestInit) => {
      calls.push({ url, init });
      return new Response(JSON.stringify({ updated: ["s7", "s1"] }), { status: 200 });
    };
    const client = new ApiClient("http://api", fakeFetch);
    const result = await client.overrideScore("sess-1", {
      nodeId: "s7",
      criterion: "coherence",
      likert: 2,
      explanation: "judges overrated this",
    });
    expect(result.updated).toEqual(["s7", "s1"]);
    expect(calls).toHaveLength(1);
    expect(calls[0]!.url).toBe("http://api/sessions/sess-1/tree/override_score");
    expect(calls[0]!.init?.method).toBe("POST");
    expect(JSON.parse(String(calls[0]!.init?.body))).toEqual({
      node_id: "s7",
      criterion: "coherence",
      likert: 2,
      explanation: "judges overrated this",
    });
  });

  it("surfaces API errors with status and message", async () => {
    const fakeFetch = async () =>
      new Response(JSON.stringify({ error: "unknown node 'sX'" }), { status: 404 });
    const client = new ApiClient("http://api", fakeFetch);
    await expect(
      client.overrideScore("sess-1", {
        nodeId: "sX",
        criterion: "importance",
        likert: 1,
        explanation: "",
      }),
    ).rejects.toMatchObject({ status: 404, message: "unknown node 'sX'" });
  });
});
