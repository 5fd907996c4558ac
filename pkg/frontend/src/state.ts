// Pure view-state core: every transition returns a new state, so the
// rendered view is a function of (loaded source, query history) and a
// replayed history reproduces it exactly.

import type { Definition, QueryRequest, QueryResponse, SourceFile } from "./api.js";

export interface NavigationEntry {
  query: QueryRequest;
  definitionCount: number;
  timestamp: number;
}

export interface Focus {
  file: string;
  line: number;
}

export interface AppState {
  files: string[];
  file: string | null;
  source: SourceFile | null;
  response: QueryResponse | null;
  history: NavigationEntry[]; // append-only within a session
  focus: Focus | null;
  error: string | null;
  busy: boolean;
}

export const initialState: AppState = {
  files: [],
  file: null,
  source: null,
  response: null,
  history: [],
  focus: null,
  error: null,
  busy: false,
};

export function withFiles(state: AppState, files: string[]): AppState {
  return { ...state, files };
}

export function withSource(state: AppState, source: SourceFile): AppState {
  return { ...state, file: source.file, source, error: null };
}

export function withBusy(state: AppState, busy: boolean): AppState {
  return { ...state, busy };
}

export function withQueryResult(
  state: AppState,
  request: QueryRequest,
  response: QueryResponse,
  timestamp: number,
): AppState {
  const entry: NavigationEntry = {
    query: request,
    definitionCount: response.definitions.length,
    timestamp,
  };
  return {
    ...state,
    response,
    history: [...state.history, entry],
    error: null,
    busy: false,
  };
}

export function withError(state: AppState, message: string): AppState {
  // errors render inline and never corrupt history or the last result
  return { ...state, error: message, busy: false };
}

export function withFocus(state: AppState, focus: Focus): AppState {
  return { ...state, focus };
}

/** Definitions of the last response that sit in the given file, keyed by
 *  line; rendered highlights correspond 1:1 to these. */
export function highlightsFor(
  state: AppState,
  file: string,
): Map<number, Definition[]> {
  const map = new Map<number, Definition[]>();
  if (!state.response) return map;
  for (const definition of state.response.definitions) {
    if (definition.file !== file) continue;
    const bucket = map.get(definition.line) ?? [];
    bucket.push(definition);
    map.set(definition.line, bucket);
  }
  return map;
}

/** The exact requests a replay must re-issue, in order. */
export function replayRequests(history: NavigationEntry[]): QueryRequest[] {
  return history.map((entry) => ({ ...entry.query }));
}
