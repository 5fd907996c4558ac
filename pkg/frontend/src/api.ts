// Typed client for the duct query service.

export interface SourceLine {
  line: number;
  text: string;
  vars: string[];
}

export interface SourceFile {
  file: string;
  lines: SourceLine[];
}

export interface ChainQuery {
  method: string;
  instr: number;
  variable: string;
}

export interface Definition {
  method: string;
  file: string;
  line: number;
  instr: number;
  kind: string;
  note: string | null;
}

export interface SnippetLine {
  line: number;
  text: string;
}

export interface Snippet {
  method: string;
  file: string;
  line: number;
  context: SnippetLine[];
}

export interface QueryResponse {
  query: ChainQuery;
  definitions: Definition[];
  truncated: boolean;
  snippets: Snippet[];
}

export interface QueryRequest {
  file: string;
  line: number;
  variable: string;
  occurrence?: number | null;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
    readonly code: string | null = null,
  ) {
    super(message);
  }
}

async function errorFrom(response: Response): Promise<ApiError> {
  let message = `HTTP ${response.status}`;
  let code: string | null = null;
  try {
    const body = await response.json();
    const detail = body?.detail;
    if (typeof detail?.error === "string") message = detail.error;
    if (typeof detail?.code === "string") code = detail.code;
  } catch {
    // non-JSON error body; keep the status message
  }
  return new ApiError(response.status, message, code);
}

export class DuctClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async files(): Promise<string[]> {
    const response = await fetch(this.url("/program/files"));
    if (!response.ok) throw await errorFrom(response);
    return (await response.json()).files;
  }

  async source(file: string): Promise<SourceFile> {
    const response = await fetch(
      this.url(`/source?file=${encodeURIComponent(file)}`),
    );
    if (!response.ok) throw await errorFrom(response);
    return response.json();
  }

  async query(
    request: QueryRequest,
    signal?: AbortSignal,
  ): Promise<QueryResponse> {
    const response = await fetch(this.url("/query"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(request),
      signal,
    });
    if (!response.ok) throw await errorFrom(response);
    return response.json();
  }
}
