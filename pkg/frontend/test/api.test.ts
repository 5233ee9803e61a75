import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiError, fetchGroup, postWhatif } from "../src/api.js";
import fixtures from "../src/fixtures/builtin_scenarios.json";
import {
  draftToIntervention,
  emptyDraft,
  whatifRequestBody,
} from "../src/intervention.js";

const SKUS = ["Gen3.5", "Gen4", "Gen5.2", "Gen6"];

function mockFetch(status: number, body: unknown) {
  const calls: Array<{ url: string; init?: RequestInit }> = [];
  const impl = vi.fn(async (url: string, init?: RequestInit) => {
    calls.push({ url, init });
    return {
      ok: status >= 200 && status < 300,
      status,
      json: async () => body,
    } as Response;
  });
  vi.stubGlobal("fetch", impl);
  return calls;
}

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("mocked API transport", () => {
  it("sends the spare-tokens-off preset body byte-identically to the fixture", async () => {
    const calls = mockFetch(200, { before: {}, after: {}, changed: false, intervention: {} });
    const draft = { ...emptyDraft(), spareTokensOff: true };
    const body = whatifRequestBody("group:1", draftToIntervention(draft, SKUS));
    await postWhatif(body);
    expect(calls).toHaveLength(1);
    expect(calls[0].url).toBe("/api/whatif");
    const sent = calls[0].init?.body as string;
    expect(sent).toBe(`{"group_key":"group:1","intervention":${fixtures["spare-tokens-off"]}}`);
  });

  it("every preset body embeds its fixture bytes unchanged", async () => {
    for (const [name, fixture] of Object.entries(fixtures)) {
      const draft =
        name === "spare-tokens-off"
          ? { ...emptyDraft(), spareTokensOff: true }
          : name === "load-balance"
            ? { ...emptyDraft(), loadBalance: true }
            : { ...emptyDraft(), skuShift: { from: "Gen3.5", to: "Gen5.2" } };
      const body = whatifRequestBody("k", draftToIntervention(draft, SKUS));
      expect(body).toContain(fixture);
    }
  });

  it("URL-encodes group keys (hash placeholders included)", async () => {
    const calls = mockFetch(200, {});
    await fetchGroup("synth_00001_#:abcd");
    expect(calls[0].url).toBe("/api/groups/synth_00001_%23%3Aabcd");
  });

  it("maps error payloads to ApiError with the server message", async () => {
    mockFetch(404, { error: "unknown group 'x'" });
    await expect(fetchGroup("x")).rejects.toThrowError(ApiError);
    mockFetch(404, { error: "unknown group 'x'" });
    await expect(fetchGroup("x")).rejects.toThrow(/unknown group/);
  });
});
