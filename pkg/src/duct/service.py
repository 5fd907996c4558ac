"""Session and query services shared by the HTTP API and the CLI.

A session holds one immutable loaded program plus its index; queries are
read-only and may run concurrently. Responses are rendered through one
canonical JSON encoder so the CLI --json output and the POST /query body
are byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path

from pydantic import BaseModel, Field

from .cfg import dump_edges
from .chains import DEFAULT_BUDGET, TraversalState, chain_json_dict, \
    compute_ud_chain
from .index import build_program_index
from .model import MethodRef, ResolveError
from .parser import parse_program
from .uses import line_tokens, resolve_use_site


class QueryRequest(BaseModel):
    file: str
    line: int = Field(ge=1)
    variable: str = Field(min_length=1)
    occurrence: int | None = None


class ChainQuery(BaseModel):
    method: str
    instr: int
    variable: str


class DefinitionOut(BaseModel):
    method: str
    file: str
    line: int
    instr: int
    kind: str
    note: str | None


class SnippetLine(BaseModel):
    line: int
    text: str


class Snippet(BaseModel):
    method: str
    file: str
    line: int
    context: list[SnippetLine]


class QueryResponse(BaseModel):
    query: ChainQuery
    definitions: list[DefinitionOut]
    truncated: bool
    snippets: list[Snippet]


class SourceLine(BaseModel):
    line: int
    text: str
    vars: list[str]


class SourceOut(BaseModel):
    file: str
    lines: list[SourceLine]


class FilesOut(BaseModel):
    files: list[str]


class Session:
    def __init__(self, program_path: str | Path,
                 budget: int | None = None):
        self.path = Path(program_path)
        self.program = parse_program(self.path.read_text())
        self.index = build_program_index(self.program)
        self.budget = budget if budget is not None else DEFAULT_BUDGET
        self.source_dir = self.path.parent
        self._source_cache: dict[str, list[str] | None] = {}
        self._token_cache: dict[str, dict[int, list[str]]] = {}

    def source_text(self, file: str) -> list[str] | None:
        """Lines of a referenced source file from disk, or None."""
        if file not in self._source_cache:
            if file not in self.program.source_files:
                self._source_cache[file] = None
            else:
                path = self.source_dir / file
                self._source_cache[file] = (
                    path.read_text().splitlines() if path.is_file() else None)
        return self._source_cache[file]

    def tokens(self, file: str) -> dict[int, list[str]]:
        if file not in self._token_cache:
            self._token_cache[file] = line_tokens(self.program, file)
        return self._token_cache[file]


def canonical_json(model: BaseModel) -> str:
    return json.dumps(model.model_dump(), separators=(",", ":"))


def _snippet(session: Session, method: str, file: str,
             line: int) -> Snippet:
    text = session.source_text(file)
    context: list[SnippetLine] = []
    if text is not None:
        lo = max(1, line - 2)
        hi = min(len(text), line + 2)
        context = [SnippetLine(line=n, text=text[n - 1])
                   for n in range(lo, hi + 1)]
    return Snippet(method=method, file=file, line=line, context=context)


def run_query(session: Session, request: QueryRequest,
              budget: int | None = None) -> QueryResponse:
    """Resolve and execute one chain query; raises ResolveError for
    unresolvable selections."""
    use = resolve_use_site(session.program, request.file, request.line,
                           request.variable, request.occurrence)
    state = TraversalState(
        budget=budget if budget is not None else session.budget)
    chain = compute_ud_chain(session.program, session.index, use,
                             state=state)
    wire = chain_json_dict(chain)
    return QueryResponse(
        query=ChainQuery(**wire["query"]),
        definitions=[DefinitionOut(**d) for d in wire["definitions"]],
        truncated=wire["truncated"],
        snippets=[_snippet(session, d["method"], d["file"], d["line"])
                  for d in wire["definitions"]],
    )


def file_list(session: Session) -> FilesOut:
    return FilesOut(files=list(session.program.source_files))


def source_listing(session: Session, file: str) -> SourceOut | None:
    text = session.source_text(file)
    if text is None:
        return None
    tokens = session.tokens(file)
    return SourceOut(file=file, lines=[
        SourceLine(line=n, text=raw, vars=tokens.get(n, []))
        for n, raw in enumerate(text, start=1)
    ])


def dump_cfg_text(session: Session, method: str) -> str:
    ref = MethodRef.parse(method)
    if not session.program.has_method(ref):
        raise ResolveError(f"unknown method {method}", "unknown-method")
    return dump_edges(session.index.cfg(ref))


def stats_dict(session: Session) -> dict[str, int]:
    return session.index.stats.as_dict()
