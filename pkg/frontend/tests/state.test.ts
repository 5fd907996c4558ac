import { describe, expect, test } from "vitest";

import type { QueryResponse } from "../src/api.js";
import {
  highlightsFor,
  initialState,
  replayRequests,
  withError,
  withQueryResult,
  withSource,
} from "../src/state.js";

const response: QueryResponse = {
  query: { method: "Earth::JDE_FOR", instr: 33, variable: "W" },
  definitions: [
    {
      method: "Earth::JD_NUM_FOR",
      file: "earth.vb",
      line: 41,
      instr: 105,
      kind: "byref-callee-store",
      note: "via call Earth::JD_NUM_FOR -> byref astroJDnum",
    },
    {
      method: "Earth::JD_NUM_FOR",
      file: "other.vb",
      line: 3,
      instr: 9,
      kind: "direct-store",
      note: null,
    },
  ],
  truncated: false,
  snippets: [],
};

const request = { file: "earth.vb", line: 17, variable: "W" };

describe("history", () => {
  test("appends one entry per completed query", () => {
    let state = withQueryResult(initialState, request, response, 1000);
    state = withQueryResult(
      state,
      { file: "earth.vb", line: 41, variable: "JD" },
      { ...response, definitions: [] },
      2000,
    );
    expect(state.history).toHaveLength(2);
    expect(state.history[0].definitionCount).toBe(2);
    expect(state.history[1].definitionCount).toBe(0);
  });

  test("errors leave history and the last result untouched", () => {
    const before = withQueryResult(initialState, request, response, 1000);
    const after = withError(before, "boom");
    expect(after.history).toEqual(before.history);
    expect(after.response).toBe(before.response);
    expect(after.error).toBe("boom");
  });

  test("replay re-issues identical requests in order", () => {
    let state = withQueryResult(initialState, request, response, 1000);
    state = withQueryResult(
      state,
      { file: "earth.vb", line: 41, variable: "JD", occurrence: 2 },
      response,
      2000,
    );
    expect(replayRequests(state.history)).toEqual([
      { file: "earth.vb", line: 17, variable: "W" },
      { file: "earth.vb", line: 41, variable: "JD", occurrence: 2 },
    ]);
  });
});

describe("highlights", () => {
  test("map one to one onto the last response's definitions per file", () => {
    const state = withQueryResult(initialState, request, response, 1000);
    const here = highlightsFor(state, "earth.vb");
    expect([...here.keys()]).toEqual([41]);
    expect(here.get(41)).toHaveLength(1);
    const elsewhere = highlightsFor(state, "other.vb");
    expect([...elsewhere.keys()]).toEqual([3]);
    const total = [...here.values()].flat().length +
      [...elsewhere.values()].flat().length;
    expect(total).toBe(response.definitions.length);
  });

  test("empty without a response", () => {
    const state = withSource(initialState, { file: "earth.vb", lines: [] });
    expect(highlightsFor(state, "earth.vb").size).toBe(0);
  });
});
