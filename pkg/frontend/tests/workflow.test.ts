// @vitest-environment happy-dom
//
// Scripted UI workflow against a live service: click W at the
// `fracRes = W + Q` line, jump to the located definition, continue the
// chain there, and verify the history. Spawns `duct serve` on a test
// port with the shipped earth.mil fixture.

import { ChildProcess, spawn } from "node:child_process";
import { fileURLToPath } from "node:url";
import path from "node:path";
import { afterAll, beforeAll, expect, test, vi } from "vitest";

import { DuctClient } from "../src/api.js";
import { Navigator } from "../src/controller.js";
import { render } from "../src/render.js";
import { replayRequests } from "../src/state.js";

const PORT = 8917;
const BASE = `http://127.0.0.1:${PORT}`;
const FIXTURE = path.resolve(
  path.dirname(fileURLToPath(import.meta.url)),
  "../../fixtures/earth.mil",
);

let server: ChildProcess;

beforeAll(async () => {
  server = spawn("duct", [
    "serve", "--program", FIXTURE, "--port", String(PORT),
  ], { stdio: "ignore" });
  const deadline = Date.now() + 20_000;
  for (;;) {
    try {
      const response = await fetch(`${BASE}/health`);
      if (response.ok) break;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) throw new Error("service did not start");
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
}, 30_000);

afterAll(() => {
  server?.kill();
});

function makeApp() {
  const root = document.createElement("div");
  document.body.appendChild(root);
  const client = new DuctClient(BASE);
  const navigator: Navigator = new Navigator(client, (state) =>
    render(root, state, navigator),
  );
  return { root, client, navigator };
}

function clickToken(root: HTMLElement, line: number, token: string): void {
  const span = root.querySelector(
    `.line[data-line="${line}"] .token[data-token="${token}"]`,
  ) as HTMLElement | null;
  expect(span, `token ${token} on line ${line}`).not.toBeNull();
  span!.click();
}

test("click W, navigate to the definition, continue the chain", async () => {
  const { root, navigator } = makeApp();
  await navigator.boot();
  expect(navigator.state.file).toBe("earth.vb");

  const fracResLine = navigator.state.source!.lines.find((l) =>
    l.text.includes("fracRes = W + Q"),
  )!;
  expect(fracResLine.vars).toContain("W");

  // round 1: click W on the fracRes line
  clickToken(root, fracResLine.line, "W");
  await vi.waitFor(() => {
    expect(root.querySelectorAll(".definition-row")).toHaveLength(1);
  });
  const def = navigator.state.response!.definitions[0];
  expect(def.method).toBe("Earth::JD_NUM_FOR");
  expect(def.kind).toBe("byref-callee-store");
  const astroLine = navigator.state.source!.lines.find((l) =>
    l.text.includes("astroJDnum = JD - 0.5"),
  )!;
  expect(def.line).toBe(astroLine.line);
  expect(navigator.state.history).toHaveLength(1);

  // the located definition is highlighted in the source pane, 1:1
  expect(root.querySelectorAll(".line.definition")).toHaveLength(1);
  expect(
    root.querySelector(`.line.definition[data-line="${def.line}"]`),
  ).not.toBeNull();

  // round 2: click the definition row; same file, so no source refetch
  const sourceBefore = navigator.state.source;
  (root.querySelector(".definition-row") as HTMLElement).click();
  await vi.waitFor(() => {
    expect(root.querySelector(".line.focus")).not.toBeNull();
  });
  expect(navigator.state.focus).toEqual({
    file: "earth.vb",
    line: astroLine.line,
  });
  expect(navigator.state.source).toBe(sourceBefore);
  // highlights survive navigation
  expect(root.querySelectorAll(".line.definition")).toHaveLength(1);

  // round 3: continue the chain from the definition line
  expect(astroLine.vars).toContain("JD");
  clickToken(root, astroLine.line, "JD");
  await vi.waitFor(() => {
    expect(navigator.state.history).toHaveLength(2);
  });
  const second = navigator.state.response!.definitions;
  expect(second).toHaveLength(1);
  expect(second[0].line).toBe(astroLine.line - 1); // the JD = ... line
  const chips = root.querySelectorAll(".history-entry");
  expect(chips).toHaveLength(2);
  expect(chips[0].textContent).toContain("W@earth.vb");
  expect(chips[1].textContent).toContain("JD@earth.vb");
});

test("zero-definition responses render the empty banner", async () => {
  const { root, navigator } = makeApp();
  await navigator.boot();
  // every clickable read in earth.mil has a definition, so render the
  // empty-result state directly
  const state = {
    ...navigator.state,
    response: {
      query: { method: "Earth::JDE_FOR", instr: 1, variable: "x" },
      definitions: [],
      truncated: false,
      snippets: [],
    },
  };
  render(root, state, navigator);
  const banner = root.querySelector(".banner.empty");
  expect(banner).not.toBeNull();
  expect(banner!.textContent).toBe("no reaching definitions");
  expect(root.querySelectorAll(".definition-row")).toHaveLength(0);
});

test("service 4xx renders inline and leaves state intact", async () => {
  const { root, navigator } = makeApp();
  await navigator.boot();
  await navigator.selectVariable("earth.vb", 17, "W");
  const before = navigator.state;
  await navigator.selectVariable("earth.vb", 17, "Zz");
  expect(navigator.state.error).toContain("not in scope");
  expect(navigator.state.response).toBe(before.response);
  expect(navigator.state.history).toEqual(before.history);
  expect(root.querySelector(".banner.error")).not.toBeNull();
});

test("offline service yields an error banner, history unchanged", async () => {
  const client = new DuctClient("http://127.0.0.1:1");
  const root = document.createElement("div");
  const navigator: Navigator = new Navigator(client, (state) =>
    render(root, state, navigator),
  );
  await navigator.selectVariable("earth.vb", 17, "W");
  expect(navigator.state.error).not.toBeNull();
  expect(navigator.state.history).toHaveLength(0);
});

test("last click wins when queries overlap", async () => {
  const { navigator } = makeApp();
  await navigator.boot();
  const first = navigator.selectVariable("earth.vb", 17, "W");
  const second = navigator.selectVariable("earth.vb", 17, "Q");
  await Promise.all([first, second]);
  expect(navigator.state.history).toHaveLength(1);
  expect(navigator.state.history[0].query.variable).toBe("Q");
  expect(navigator.state.response!.query.variable).toBe("Q");
});

test("replaying the history reproduces the identical view", async () => {
  const { navigator } = makeApp();
  await navigator.boot();
  await navigator.selectVariable("earth.vb", 17, "W");
  await navigator.navigateToDefinition(0);
  await navigator.selectVariable("earth.vb", 41, "JD");

  const { navigator: fresh } = makeApp();
  await fresh.boot();
  await fresh.replay(replayRequests(navigator.state.history));

  expect(fresh.state.response).toEqual(navigator.state.response);
  const summary = (n: Navigator) =>
    n.state.history.map((e) => [e.query, e.definitionCount]);
  expect(summary(fresh)).toEqual(summary(navigator));
});
