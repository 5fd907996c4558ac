"""MiniIL text loader.

One instruction per line; directives `.class`, `.field`, `.method`,
`.locals`, `.line file:n`; comments start with `;`. Loading verifies every
structural invariant (name resolution, label uniqueness, acyclic class
hierarchy, override markers, total line coverage, balanced operand stack
with statically known depths, and address-valued arguments for byref
parameters), so any Program handed to the analyses is well formed.
"""

from __future__ import annotations

import json
import re

from . import absstack
from .cfg import leader_indexes
from .model import (
    BRANCH_OPCODES,
    CALL_OPCODES,
    OPCODES,
    OP_ARG,
    OP_CONST,
    OP_FIELD,
    OP_LABEL,
    OP_LOCAL,
    OP_METHOD,
    OP_NONE,
    TERMINATORS,
    ClassDef,
    FieldRef,
    Instruction,
    MethodDef,
    MethodRef,
    Param,
    ParseError,
    Program,
    stack_effect,
)

_IDENT = re.compile(r"[A-Za-z_]\w*$")
_CLASS_RE = re.compile(r"\.class\s+([A-Za-z_]\w*)\s*(?::\s*([A-Za-z_]\w*))?$")
_FIELD_RE = re.compile(r"\.field\s+([A-Za-z_]\w*)$")
_METHOD_RE = re.compile(
    r"\.method\s+(?:(virtual|override)\s+)?([A-Za-z_]\w*)\s*\((.*)\)$")
_INT_RE = re.compile(r"-?\d+$")


def _strip_comment(line: str) -> str:
    out = []
    in_str = False
    i = 0
    while i < len(line):
        ch = line[i]
        if in_str:
            out.append(ch)
            if ch == "\\" and i + 1 < len(line):
                out.append(line[i + 1])
                i += 1
            elif ch == '"':
                in_str = False
        elif ch == ";":
            break
        else:
            if ch == '"':
                in_str = True
            out.append(ch)
        i += 1
    return "".join(out).strip()


def _parse_operand(opcode: str, text: str, where: str):
    kind = OPCODES[opcode][2]
    if kind == OP_NONE:
        if text:
            raise ParseError(f"{opcode} takes no operand", where)
        return None
    if not text:
        raise ParseError(f"{opcode} requires an operand", where)
    if kind == OP_CONST:
        if _INT_RE.match(text):
            return int(text)
        if text.startswith('"'):
            try:
                return json.loads(text)
            except ValueError:
                raise ParseError(f"bad string constant {text}", where)
        raise ParseError(f"bad constant {text!r}", where)
    if kind in (OP_LOCAL, OP_ARG, OP_LABEL):
        if not _IDENT.match(text):
            raise ParseError(f"bad identifier {text!r}", where)
        return text
    if kind == OP_FIELD:
        owner, dot, name = text.partition(".")
        if not dot or not _IDENT.match(owner) or not _IDENT.match(name):
            raise ParseError(f"bad field reference {text!r}", where)
        return FieldRef(owner, name)
    if kind == OP_METHOD:
        owner, sep, name = text.partition("::")
        if not sep or not _IDENT.match(owner) or not _IDENT.match(name):
            raise ParseError(f"bad method reference {text!r}", where)
        return MethodRef(owner, name)
    raise AssertionError(kind)


def _parse_params(text: str, where: str) -> list[Param]:
    text = text.strip()
    if not text:
        return []
    params = []
    for piece in text.split(","):
        words = piece.split()
        if len(words) == 1 and _IDENT.match(words[0]):
            params.append(Param(words[0], False))
        elif len(words) == 2 and words[0] == "byref" and _IDENT.match(words[1]):
            params.append(Param(words[1], True))
        else:
            raise ParseError(f"bad parameter {piece.strip()!r}", where)
    return params


class _RawMethod:
    def __init__(self, owner, name, params, virtual, override, where):
        self.owner = owner
        self.name = name
        self.params = params
        self.locals: list[str] = []
        self.virtual = virtual
        self.override = override
        self.body: list[Instruction] = []
        self.line_map: list[tuple[str, int]] = []
        self.src_lines: list[int] = []  # .mil line per instruction, for errors
        self.where = where


def parse_program(text: str) -> Program:
    """Parse and verify MiniIL source; raises ParseError naming the
    offending .mil line on any violation."""
    classes: list[ClassDef] = []
    raw_methods: list[_RawMethod] = []
    cur_class: ClassDef | None = None
    cur_method: _RawMethod | None = None
    cur_line: tuple[str, int] | None = None
    source_files: list[str] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        where = f"line {lineno}"

        if line.startswith(".class"):
            m = _CLASS_RE.match(line)
            if not m:
                raise ParseError("malformed .class directive", where)
            name, parent = m.group(1), m.group(2)
            if any(c.name == name for c in classes):
                raise ParseError(f"duplicate class {name!r}", where)
            cur_class = ClassDef(name, parent, [], [])
            classes.append(cur_class)
            cur_method = None
        elif line.startswith(".field"):
            m = _FIELD_RE.match(line)
            if not m:
                raise ParseError("malformed .field directive", where)
            if cur_class is None:
                raise ParseError(".field outside a class", where)
            if m.group(1) in cur_class.fields:
                raise ParseError(f"duplicate field {m.group(1)!r}", where)
            cur_class.fields.append(m.group(1))
            cur_method = None
        elif line.startswith(".method"):
            m = _METHOD_RE.match(line)
            if not m:
                raise ParseError("malformed .method directive", where)
            if cur_class is None:
                raise ParseError(".method outside a class", where)
            flag, name, params_text = m.group(1), m.group(2), m.group(3)
            if any(r.name == name and r.owner == cur_class.name
                   for r in raw_methods):
                raise ParseError(
                    f"duplicate method {cur_class.name}::{name}", where)
            cur_method = _RawMethod(
                owner=cur_class.name,
                name=name,
                params=_parse_params(params_text, where),
                virtual=flag == "virtual",
                override=flag == "override",
                where=where,
            )
            raw_methods.append(cur_method)
            cur_line = None
        elif line.startswith(".locals"):
            if cur_method is None:
                raise ParseError(".locals outside a method", where)
            names = [n.strip() for n in line[len(".locals"):].split(",")]
            for n in names:
                if not _IDENT.match(n):
                    raise ParseError(f"bad local name {n!r}", where)
                cur_method.locals.append(n)
        elif line.startswith(".line"):
            if cur_method is None:
                raise ParseError(".line outside a method", where)
            rest = line[len(".line"):].strip()
            fname, sep, num = rest.rpartition(":")
            if not sep or not fname or not num.isdigit():
                raise ParseError("malformed .line directive", where)
            cur_line = (fname, int(num))
            if fname not in source_files:
                source_files.append(fname)
        elif line.startswith("."):
            raise ParseError(f"unknown directive {line.split()[0]}", where)
        else:
            if cur_method is None:
                raise ParseError("instruction outside a method", where)
            parts = line.split(None, 1)
            opcode = parts[0]
            if opcode not in OPCODES:
                raise ParseError(f"unknown opcode {opcode!r}", where)
            operand = _parse_operand(
                opcode, parts[1].strip() if len(parts) > 1 else "", where)
            if cur_line is None:
                raise ParseError(
                    "instruction not covered by a .line directive", where)
            cur_method.body.append(Instruction(opcode, operand))
            cur_method.line_map.append(cur_line)
            cur_method.src_lines.append(lineno)

    if not classes:
        raise ParseError("no classes defined", "line 1")

    for rm in raw_methods:
        method = MethodDef(
            owner=rm.owner,
            name=rm.name,
            params=rm.params,
            locals=rm.locals,
            virtual_flag=rm.virtual,
            override_flag=rm.override,
            body=rm.body,
            line_map=rm.line_map,
        )
        next(c for c in classes if c.name == rm.owner).methods.append(method)

    program = Program(classes=classes, source_files=source_files)
    _verify(program, {(r.owner, r.name): r for r in raw_methods})
    return program


def _verify(program: Program, raws: dict) -> None:
    _check_hierarchy(program)
    _check_overrides(program)
    for method in program.methods:
        raw = raws[(method.owner, method.name)]
        _check_names(program, method, raw)
        _check_labels(method, raw)
        _check_balance(program, method, raw)
        _check_byref_args(program, method, raw)


def _check_hierarchy(program: Program) -> None:
    for cls in program.classes:
        if cls.parent is not None and not program.has_class(cls.parent):
            raise ParseError(
                f"class {cls.name}: unknown parent {cls.parent!r}",
                f"class {cls.name}")
    for cls in program.classes:
        seen = {cls.name}
        cur = cls.parent
        while cur is not None:
            if cur in seen:
                raise ParseError(
                    f"cyclic class hierarchy through {cls.name!r}",
                    f"class {cls.name}")
            seen.add(cur)
            cur = program.class_named(cur).parent


def _virtual_ancestor(program: Program, method: MethodDef) -> MethodDef | None:
    for anc in program.ancestors(method.owner):
        ref = MethodRef(anc, method.name)
        if program.has_method(ref):
            cand = program.method(ref)
            if cand.arity == method.arity and (
                    cand.virtual_flag or cand.override_flag):
                return cand
    return None


def _check_overrides(program: Program) -> None:
    for method in program.methods:
        if method.virtual_flag and method.override_flag:
            raise ParseError(
                f"{method.ref}: cannot be both virtual and override",
                f"method {method.ref}")
        anc = _virtual_ancestor(program, method)
        if method.override_flag:
            if anc is None:
                raise ParseError(
                    f"{method.ref}: override has no matching virtual "
                    "ancestor method", f"method {method.ref}")
            if [p.byref for p in anc.params] != [p.byref for p in method.params]:
                raise ParseError(
                    f"{method.ref}: override byref signature differs from "
                    f"{anc.ref}", f"method {method.ref}")
        elif anc is not None and not method.virtual_flag:
            raise ParseError(
                f"{method.ref}: hides virtual {anc.ref}; mark it override",
                f"method {method.ref}")


def _check_names(program: Program, method: MethodDef, raw) -> None:
    where = raw.where
    seen: set[str] = set()
    for p in method.params:
        if p.name in seen:
            raise ParseError(f"duplicate parameter {p.name!r}", where)
        seen.add(p.name)
    for name in method.locals:
        if name in seen:
            raise ParseError(
                f"local {name!r} duplicates a parameter or local", where)
        seen.add(name)

    for i, ins in enumerate(method.body):
        where_i = f"line {raw.src_lines[i]}"
        kind = OPCODES[ins.opcode][2]
        if kind == OP_LOCAL and ins.operand not in method.locals:
            raise ParseError(f"undefined local {ins.operand!r}", where_i)
        if kind == OP_ARG and not method.is_param(ins.operand):
            raise ParseError(f"undefined parameter {ins.operand!r}", where_i)
        if kind == OP_FIELD:
            ref: FieldRef = ins.operand
            if not program.has_class(ref.owner):
                raise ParseError(f"unknown class {ref.owner!r}", where_i)
            if program.field_owner(ref.owner, ref.name) is None:
                raise ParseError(f"undefined field {ref}", where_i)
        if kind == OP_METHOD:
            if not program.has_method(ins.operand):
                raise ParseError(f"undefined method {ins.operand}", where_i)
            callee = program.method(ins.operand)
            if ins.opcode == "callvirt" and not (
                    callee.virtual_flag or callee.override_flag):
                raise ParseError(
                    f"callvirt on non-virtual {ins.operand}", where_i)
            if ins.opcode == "newobj" and callee.arity < 1:
                raise ParseError(
                    f"newobj target {ins.operand} needs a receiver "
                    "parameter", where_i)


def _check_labels(method: MethodDef, raw) -> None:
    labels: dict[str, int] = {}
    for i, ins in enumerate(method.body):
        if ins.opcode == "label":
            if ins.operand in labels:
                raise ParseError(f"duplicate label {ins.operand!r}",
                                 f"line {raw.src_lines[i]}")
            labels[ins.operand] = i
    for i, ins in enumerate(method.body):
        if ins.opcode in BRANCH_OPCODES and ins.operand not in labels:
            raise ParseError(f"undefined label {ins.operand!r}",
                             f"line {raw.src_lines[i]}")


def _check_balance(program: Program, method: MethodDef, raw) -> None:
    body = method.body
    if not body:
        raise ParseError(f"{method.ref}: empty method body", raw.where)
    if body[-1].opcode not in TERMINATORS:
        raise ParseError(f"{method.ref}: control falls off method end",
                         f"line {raw.src_lines[-1]}")

    labels = {ins.operand: i for i, ins in enumerate(body)
              if ins.opcode == "label"}
    depth: list[int | None] = [None] * len(body)
    work = [(0, 0)]
    while work:
        i, d = work.pop()
        where = f"line {raw.src_lines[i]}"
        if depth[i] is not None:
            if depth[i] != d:
                raise ParseError(
                    f"conflicting stack depths {depth[i]} vs {d}", where)
            continue
        depth[i] = d
        ins = body[i]
        pops, pushes = stack_effect(ins, program)
        if d < pops:
            raise ParseError(
                f"{ins.opcode} pops {pops} with only {d} on the stack",
                where)
        if ins.opcode == "ret":
            if d != 0:
                raise ParseError(
                    f"operand stack not empty at ret (depth {d})", where)
            continue
        nd = d - pops + pushes
        if ins.opcode in BRANCH_OPCODES:
            work.append((labels[ins.operand], nd))
            if ins.opcode != "br":
                work.append((i + 1, nd))
        else:
            work.append((i + 1, nd))

    for i, d in enumerate(depth):
        if d is None:
            raise ParseError("unreachable code", f"line {raw.src_lines[i]}")
    method.stack_depth = depth  # type: ignore[assignment]


def _check_byref_args(program: Program, method: MethodDef, raw) -> None:
    leaders = leader_indexes(method.body)
    bounds = leaders + [len(method.body)]
    for start, end in zip(bounds, bounds[1:]):
        if not any(ins.opcode in CALL_OPCODES
                   for ins in method.body[start:end]):
            continue
        states, _ = absstack.simulate_range(program, method, start, end)
        for i in range(start, end):
            ins = method.body[i]
            if ins.opcode not in CALL_OPCODES:
                continue
            callee = program.method(ins.operand)
            slots = absstack.call_arg_slots(program, method,
                                            states[i - start], i)
            formals = (callee.params[1:] if ins.opcode == "newobj"
                       else callee.params)
            for formal, (value, _) in zip(formals, slots):
                if formal.byref and value.tag not in (
                        absstack.TAG_ADDR,
                        absstack.TAG_FIELD_ADDR,
                        absstack.TAG_ELEM_ADDR):
                    raise ParseError(
                        f"byref parameter {formal.name!r} of {callee.ref} "
                        "bound to a non-address value",
                        f"line {raw.src_lines[i]}")
