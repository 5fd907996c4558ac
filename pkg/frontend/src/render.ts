// DOM rendering of the two-pane layout: source on top, definition list
// and history below. Tokens come solely from the service's per-line
// variable metadata; no source parsing happens here.

import type { AppState } from "./state.js";
import { highlightsFor } from "./state.js";
import type { Navigator } from "./controller.js";

export function render(
  root: HTMLElement,
  state: AppState,
  navigator: Navigator,
): void {
  const doc = root.ownerDocument;
  root.textContent = "";

  root.appendChild(fileBar(doc, state, navigator));
  if (state.error) {
    const banner = doc.createElement("div");
    banner.className = "banner error";
    banner.textContent = state.error;
    root.appendChild(banner);
  }
  root.appendChild(sourcePane(doc, state, navigator));
  root.appendChild(outputPane(doc, state, navigator));
  root.appendChild(historyStrip(doc, state));

  if (state.focus && state.focus.file === state.file) {
    const target = root.querySelector(
      `[data-line="${state.focus.line}"]`,
    ) as HTMLElement | null;
    target?.scrollIntoView?.({ block: "center" });
  }
}

function fileBar(
  doc: Document,
  state: AppState,
  navigator: Navigator,
): HTMLElement {
  const bar = doc.createElement("div");
  bar.className = "filebar";
  for (const file of state.files) {
    const button = doc.createElement("button");
    button.className = "file" + (file === state.file ? " active" : "");
    button.textContent = file;
    button.addEventListener("click", () => void navigator.open(file));
    bar.appendChild(button);
  }
  if (state.busy) {
    const spinner = doc.createElement("span");
    spinner.className = "busy";
    spinner.textContent = "querying…";
    bar.appendChild(spinner);
  }
  return bar;
}

function sourcePane(
  doc: Document,
  state: AppState,
  navigator: Navigator,
): HTMLElement {
  const pane = doc.createElement("div");
  pane.className = "pane source";
  if (!state.source) {
    pane.textContent = "no source loaded";
    return pane;
  }
  const file = state.source.file;
  const highlights = highlightsFor(state, file);
  for (const line of state.source.lines) {
    const row = doc.createElement("div");
    row.className = "line";
    row.dataset.line = String(line.line);
    if (highlights.has(line.line)) row.classList.add("definition");
    if (state.focus?.file === file && state.focus.line === line.line) {
      row.classList.add("focus");
    }
    const number = doc.createElement("span");
    number.className = "lineno";
    number.textContent = String(line.line).padStart(4, " ");
    row.appendChild(number);
    row.appendChild(lineBody(doc, file, line.line, line.text, line.vars,
                             navigator));
    pane.appendChild(row);
  }
  return pane;
}

function lineBody(
  doc: Document,
  file: string,
  lineNo: number,
  text: string,
  vars: string[],
  navigator: Navigator,
): HTMLElement {
  const body = doc.createElement("span");
  body.className = "code";
  // wrap each clickable token's first textual occurrence; tokens the text
  // does not contain verbatim (e.g. "v[]") render as trailing chips
  const spans: { start: number; end: number; token: string }[] = [];
  const taken: [number, number][] = [];
  for (const token of [...vars].sort((a, b) => b.length - a.length)) {
    const base = token.replace(/\[\]$/, "").split(".")[0];
    const pattern = new RegExp(`\\b${escapeRe(base)}\\b`, "g");
    let match: RegExpExecArray | null;
    while ((match = pattern.exec(text)) !== null) {
      const span = [match.index, match.index + base.length] as [number, number];
      if (taken.some(([s, e]) => span[0] < e && s < span[1])) continue;
      taken.push(span);
      spans.push({ start: span[0], end: span[1], token });
      break;
    }
  }
  spans.sort((a, b) => a.start - b.start);
  let cursor = 0;
  for (const { start, end, token } of spans) {
    if (start > cursor) {
      body.appendChild(doc.createTextNode(text.slice(cursor, start)));
    }
    body.appendChild(tokenSpan(doc, file, lineNo, token,
                               text.slice(start, end), navigator));
    cursor = end;
  }
  if (cursor < text.length) {
    body.appendChild(doc.createTextNode(text.slice(cursor)));
  }
  for (const token of vars) {
    if (!spans.some((s) => s.token === token)) {
      body.appendChild(doc.createTextNode(" "));
      body.appendChild(tokenSpan(doc, file, lineNo, token, token, navigator));
    }
  }
  return body;
}

function tokenSpan(
  doc: Document,
  file: string,
  lineNo: number,
  token: string,
  label: string,
  navigator: Navigator,
): HTMLElement {
  const span = doc.createElement("span");
  span.className = "token";
  span.dataset.token = token;
  span.textContent = label;
  span.title = `definitions of ${token}`;
  span.addEventListener("click", () =>
    void navigator.selectVariable(file, lineNo, token),
  );
  return span;
}

function outputPane(
  doc: Document,
  state: AppState,
  navigator: Navigator,
): HTMLElement {
  const pane = doc.createElement("div");
  pane.className = "pane output";
  const heading = doc.createElement("div");
  heading.className = "heading";
  if (!state.response) {
    heading.textContent = "select a variable in the source pane";
    pane.appendChild(heading);
    return pane;
  }
  const q = state.response.query;
  heading.textContent =
    `definitions reaching ${q.variable} (${q.method} @${q.instr})`;
  pane.appendChild(heading);
  if (state.response.truncated) {
    const warn = doc.createElement("div");
    warn.className = "banner warn";
    warn.textContent = "search budget exhausted; list may be incomplete";
    pane.appendChild(warn);
  }
  if (state.response.definitions.length === 0) {
    const empty = doc.createElement("div");
    empty.className = "banner empty";
    empty.textContent = "no reaching definitions";
    pane.appendChild(empty);
    return pane;
  }
  state.response.definitions.forEach((definition, index) => {
    const row = doc.createElement("div");
    row.className = "definition-row";
    row.dataset.index = String(index);
    const where = doc.createElement("span");
    where.className = "where";
    where.textContent = `${definition.file}:${definition.line}`;
    const what = doc.createElement("span");
    what.className = "what";
    what.textContent =
      ` ${definition.method} @${definition.instr} — ${definition.kind}` +
      (definition.note ? ` (${definition.note})` : "");
    row.appendChild(where);
    row.appendChild(what);
    const snippet = state.response!.snippets[index];
    if (snippet && snippet.context.length > 0) {
      const ctx = doc.createElement("pre");
      ctx.className = "snippet";
      ctx.textContent = snippet.context
        .map((l) => `${String(l.line).padStart(4, " ")} ${l.text}`)
        .join("\n");
      row.appendChild(ctx);
    }
    row.addEventListener("click", () =>
      void navigator.navigateToDefinition(index),
    );
    pane.appendChild(row);
  });
  return pane;
}

function historyStrip(doc: Document, state: AppState): HTMLElement {
  const strip = doc.createElement("div");
  strip.className = "history";
  const label = doc.createElement("span");
  label.className = "heading";
  label.textContent = `history (${state.history.length})`;
  strip.appendChild(label);
  for (const entry of state.history) {
    const chip = doc.createElement("span");
    chip.className = "history-entry";
    chip.textContent =
      `${entry.query.variable}@${entry.query.file}:${entry.query.line}` +
      ` → ${entry.definitionCount}`;
    strip.appendChild(chip);
  }
  return strip;
}

function escapeRe(text: string): string {
  return text.replace(/[.*+?^${}()|[\]\\]/g, "\\$&");
}
