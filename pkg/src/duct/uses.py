"""Mapping between source-level positions and IL use sites.

A "read" of a variable is a direct load (ldloc/ldarg), a field or element
load whose base is that variable, or a call argument binding it (byref
address or by-value). Debug line info then lets a (file, line, name)
query resolve to a concrete use site without ever parsing the high-level
source.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import absstack
from .cfg import leader_indexes
from .model import (
    CALL_OPCODES,
    SEL_NONE,
    MethodDef,
    Program,
    ResolveError,
    Selector,
    UseSite,
    VariableId,
    format_variable,
    parse_variable,
)


@dataclass(frozen=True)
class Read:
    index: int
    name: str
    is_arg: bool
    selector: Selector


def method_reads(program: Program, method: MethodDef) -> list[Read]:
    reads: set[Read] = set()
    needs_sim = False
    for i, ins in enumerate(method.body):
        if ins.opcode == "ldloc":
            reads.add(Read(i, ins.operand, False, SEL_NONE))
        elif ins.opcode == "ldarg":
            reads.add(Read(i, ins.operand, True, SEL_NONE))
        elif ins.opcode in ("ldfld", "ldelem") or ins.opcode in CALL_OPCODES:
            needs_sim = True
    if needs_sim:
        bounds = leader_indexes(method.body) + [len(method.body)]
        for start, end in zip(bounds, bounds[1:]):
            states = None
            for i in range(start, end):
                ins = method.body[i]
                if ins.opcode not in ("ldfld", "ldelem") \
                        and ins.opcode not in CALL_OPCODES:
                    continue
                if states is None:
                    states, _ = absstack.simulate_range(
                        program, method, start, end)
                stack = states[i - start]
                if ins.opcode == "ldfld":
                    base = stack[-1][0]
                    if base.tag == absstack.TAG_VAR:
                        reads.add(Read(i, base.name, base.is_arg,
                                       ("field", ins.operand.name)))
                elif ins.opcode == "ldelem":
                    arr = stack[-2][0]
                    if arr.tag == absstack.TAG_VAR:
                        reads.add(Read(i, arr.name, arr.is_arg,
                                       ("element",)))
                else:
                    for value, _ in absstack.call_arg_slots(
                            program, method, stack, i):
                        if value.tag in (absstack.TAG_VAR, absstack.TAG_ADDR):
                            reads.add(Read(i, value.name, value.is_arg,
                                           SEL_NONE))
    return sorted(reads, key=lambda r: (r.index, r.name, r.selector))


def _reads_matching(reads: list[Read], name: str,
                    selector: Selector) -> list[Read]:
    if selector == SEL_NONE:
        return [r for r in reads if r.name == name]
    return [r for r in reads if r.name == name and r.selector == selector]


def resolve_use_site(program: Program, file: str, line: int, variable: str,
                     occurrence: int | None = None) -> UseSite:
    """Resolve a source-level selection to the use it denotes.

    With several reads of the variable on one line the last one wins;
    `occurrence` (1-based, in instruction order) overrides that choice.
    """
    name, selector = parse_variable(variable)
    if file not in program.source_files:
        raise ResolveError(f"unknown source file {file!r}", "unknown-file")

    covering = [m for m in program.methods
                if (file, line) in m.line_map]
    if not covering:
        raise ResolveError(f"no method covers {file}:{line}",
                           "no-method-for-line")

    candidates: list[tuple[MethodDef, list[Read]]] = []
    in_scope = False
    for method in covering:
        if not (method.is_local(name) or method.is_param(name)):
            continue
        in_scope = True
        on_line = [r for r in method_reads(program, method)
                   if method.line_map[r.index] == (file, line)]
        matching = _reads_matching(on_line, name, selector)
        if matching:
            candidates.append((method, matching))
    if not in_scope:
        raise ResolveError(
            f"variable {variable!r} is not in scope at {file}:{line}",
            "not-in-scope")
    if not candidates:
        raise ResolveError(
            f"variable {variable!r} is never read at {file}:{line}",
            "never-read-on-line")
    if len(candidates) > 1:
        raise ResolveError(
            f"{file}:{line} maps into several methods; query by a line "
            "unique to one method", "ambiguous-line")

    method, matching = candidates[0]
    matching.sort(key=lambda r: r.index)
    if occurrence is not None:
        if not 1 <= occurrence <= len(matching):
            raise ResolveError(
                f"occurrence {occurrence} out of range 1..{len(matching)}",
                "bad-occurrence")
        read = matching[occurrence - 1]
    else:
        read = matching[-1]

    kind = "arg" if read.is_arg else "local"
    var = VariableId(method.ref, kind, name, selector)
    return UseSite(method.ref, read.index, var)


def line_tokens(program: Program, file: str) -> dict[int, list[str]]:
    """Per-line clickable variable tokens, derived purely from IL debug
    info (line -> sorted token strings like "W", "obj.f", "arr[]")."""
    tokens: dict[int, set[str]] = {}
    for method in program.methods:
        for read in method_reads(program, method):
            f, line = method.line_map[read.index]
            if f != file:
                continue
            tokens.setdefault(line, set()).add(
                format_variable(read.name, read.selector))
    return {line: sorted(names) for line, names in tokens.items()}
