// Drives the view state against the service. At most one query is in
// flight: a newer click aborts the older request (last click wins).

import { ApiError, DuctClient } from "./api.js";
import type { QueryRequest } from "./api.js";
import {
  AppState,
  initialState,
  withBusy,
  withError,
  withFiles,
  withFocus,
  withQueryResult,
  withSource,
} from "./state.js";

export class Navigator {
  state: AppState = initialState;
  private inflight: AbortController | null = null;
  private sequence = 0;

  constructor(
    private readonly client: DuctClient,
    private readonly onChange: (state: AppState) => void = () => {},
    private readonly now: () => number = Date.now,
  ) {}

  private set(state: AppState): void {
    this.state = state;
    this.onChange(state);
  }

  async boot(): Promise<void> {
    try {
      const files = await this.client.files();
      this.set(withFiles(this.state, files));
      if (files.length > 0) await this.open(files[0]);
    } catch (error) {
      this.set(withError(this.state, describe(error)));
    }
  }

  async open(file: string): Promise<void> {
    if (this.state.source?.file === file) return; // same file: no refetch
    try {
      const source = await this.client.source(file);
      this.set(withSource(this.state, source));
    } catch (error) {
      this.set(withError(this.state, describe(error)));
    }
  }

  /** Click on a variable token: issue the query and render the result. */
  async selectVariable(
    file: string,
    line: number,
    token: string,
    occurrence: number | null = null,
  ): Promise<void> {
    const request: QueryRequest = { file, line, variable: token, occurrence };
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    const ticket = ++this.sequence;
    this.set(withBusy(this.state, true));
    try {
      const response = await this.client.query(request, controller.signal);
      if (ticket !== this.sequence) return; // a later click superseded us
      this.set(withQueryResult(this.state, request, response, this.now()));
    } catch (error) {
      if (ticket !== this.sequence || isAbort(error)) return;
      this.set(withError(this.state, describe(error)));
    }
  }

  /** Click on a definition row: show its file centered on its line,
   *  keeping the current highlights, so the chain can be continued. */
  async navigateToDefinition(index: number): Promise<void> {
    const definition = this.state.response?.definitions[index];
    if (!definition) return;
    await this.open(definition.file);
    this.set(
      withFocus(this.state, { file: definition.file, line: definition.line }),
    );
  }

  /** Re-issue the identical requests of a recorded history in order. */
  async replay(requests: QueryRequest[]): Promise<void> {
    for (const request of requests) {
      await this.open(request.file);
      await this.selectVariable(
        request.file,
        request.line,
        request.variable,
        request.occurrence ?? null,
      );
    }
  }
}

function isAbort(error: unknown): boolean {
  return error instanceof Error && error.name === "AbortError";
}

function describe(error: unknown): string {
  if (error instanceof ApiError) return error.message;
  if (error instanceof Error) return `service unreachable: ${error.message}`;
  return String(error);
}
