"""Data model for MiniIL: a small stack-based IL with classes, byref
parameters, virtual dispatch, and per-instruction debug lines.

Programs are immutable after loading and safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

# Operand kinds
OP_NONE = "none"
OP_CONST = "const"
OP_LOCAL = "local"
OP_ARG = "arg"
OP_FIELD = "field"    # Class.field
OP_METHOD = "method"  # Class::method
OP_LABEL = "label"

# opcode -> (pops, pushes, operand kind); call-like opcodes pop per callee
# arity and are handled specially (pops marked -1).
OPCODES: dict[str, tuple[int, int, str]] = {
    "ldc": (0, 1, OP_CONST),
    "ldloc": (0, 1, OP_LOCAL),
    "stloc": (1, 0, OP_LOCAL),
    "ldloca": (0, 1, OP_LOCAL),
    "ldarg": (0, 1, OP_ARG),
    "starg": (1, 0, OP_ARG),
    "ldarga": (0, 1, OP_ARG),
    "ldfld": (1, 1, OP_FIELD),
    "stfld": (2, 0, OP_FIELD),
    "ldflda": (1, 1, OP_FIELD),
    "ldelem": (2, 1, OP_NONE),
    "stelem": (3, 0, OP_NONE),
    "ldelema": (2, 1, OP_NONE),
    "ldind": (1, 1, OP_NONE),
    "stind": (2, 0, OP_NONE),
    "call": (-1, 1, OP_METHOD),
    "callvirt": (-1, 1, OP_METHOD),
    "newobj": (-1, 1, OP_METHOD),
    "ret": (0, 0, OP_NONE),
    "br": (0, 0, OP_LABEL),
    "brtrue": (1, 0, OP_LABEL),
    "brfalse": (1, 0, OP_LABEL),
    "label": (0, 0, OP_LABEL),
    "pop": (1, 0, OP_NONE),
    "dup": (1, 2, OP_NONE),
    "binop": (2, 1, OP_NONE),
}

STORE_OPCODES = frozenset({"starg", "stelem", "stind", "stfld", "stloc"})
CALL_OPCODES = frozenset({"call", "callvirt", "newobj"})
BRANCH_OPCODES = frozenset({"br", "brtrue", "brfalse"})
# Instruction kinds that may legally end a method body.
TERMINATORS = frozenset({"ret", "br"})


class MilError(Exception):
    """Base error; carries a human-readable location."""

    def __init__(self, message: str, location: str = ""):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class ParseError(MilError):
    """Raised for any load-time failure (syntax or verification)."""


class ResolveError(MilError):
    """Raised when a (file, line, variable) query cannot be resolved.

    `code` is machine-readable: no-method-for-line, not-in-scope,
    never-read-on-line, unknown-file, bad-occurrence, ambiguous-line.
    """

    def __init__(self, message: str, code: str):
        self.code = code
        super().__init__(message)


@dataclass(frozen=True, order=True)
class MethodRef:
    owner: str
    name: str

    def __str__(self) -> str:
        return f"{self.owner}::{self.name}"

    @classmethod
    def parse(cls, text: str) -> "MethodRef":
        owner, sep, name = text.partition("::")
        if not sep or not owner or not name:
            raise ValueError(f"bad method reference {text!r}")
        return cls(owner, name)


@dataclass(frozen=True, order=True)
class FieldRef:
    owner: str
    name: str

    def __str__(self) -> str:
        return f"{self.owner}.{self.name}"


@dataclass(frozen=True)
class Param:
    name: str
    byref: bool = False


@dataclass(frozen=True)
class Instruction:
    opcode: str
    operand: object = None  # per OPCODES operand kind

    def __str__(self) -> str:
        if self.operand is None:
            return self.opcode
        if isinstance(self.operand, str) and OPCODES[self.opcode][2] == OP_CONST:
            return f"{self.opcode} {json.dumps(self.operand)}"
        return f"{self.opcode} {self.operand}"


# Selector for a variable query: () whole variable, ("field", f) a member
# field, ("element",) an array element.
Selector = tuple

SEL_NONE: Selector = ()


def format_variable(name: str, selector: Selector) -> str:
    if selector == SEL_NONE:
        return name
    if selector[0] == "field":
        return f"{name}.{selector[1]}"
    return f"{name}[]"


def parse_variable(text: str) -> tuple[str, Selector]:
    """Parse the query surface syntax: "v", "v.f", or "v[]"."""
    text = text.strip()
    if text.endswith("[]"):
        return text[:-2], ("element",)
    if "." in text:
        base, _, fld = text.partition(".")
        if not base or not fld:
            raise ValueError(f"bad variable syntax {text!r}")
        return base, ("field", fld)
    return text, SEL_NONE


@dataclass(frozen=True)
class VariableId:
    method: MethodRef
    kind: str  # "local" | "arg"
    name: str
    selector: Selector = SEL_NONE

    def __str__(self) -> str:
        return format_variable(self.name, self.selector)


@dataclass(frozen=True)
class UseSite:
    method: MethodRef
    instr_index: int
    variable: VariableId


@dataclass
class MethodDef:
    owner: str
    name: str
    params: list[Param]
    locals: list[str]
    virtual_flag: bool
    override_flag: bool
    body: list[Instruction]
    # (file, line) per instruction, total over the body
    line_map: list[tuple[str, int]]
    # verified operand-stack depth before each instruction (load-time)
    stack_depth: list[int] = field(default_factory=list, compare=False)

    @property
    def ref(self) -> MethodRef:
        return MethodRef(self.owner, self.name)

    @property
    def arity(self) -> int:
        return len(self.params)

    def param_index(self, name: str) -> int:
        for i, p in enumerate(self.params):
            if p.name == name:
                return i
        raise KeyError(name)

    def is_local(self, name: str) -> bool:
        return name in self.locals

    def is_param(self, name: str) -> bool:
        return any(p.name == name for p in self.params)

    def line_of(self, index: int) -> tuple[str, int]:
        return self.line_map[index]


@dataclass
class ClassDef:
    name: str
    parent: str | None
    fields: list[str]
    methods: list[MethodDef]


@dataclass
class Program:
    classes: list[ClassDef]
    source_files: list[str]

    def __post_init__(self) -> None:
        self._class_by_name = {c.name: c for c in self.classes}
        self._method_by_ref = {
            m.ref: m for c in self.classes for m in c.methods
        }

    @property
    def methods(self) -> list[MethodDef]:
        return [m for c in self.classes for m in c.methods]

    def class_named(self, name: str) -> ClassDef:
        return self._class_by_name[name]

    def has_class(self, name: str) -> bool:
        return name in self._class_by_name

    def method(self, ref: MethodRef) -> MethodDef:
        return self._method_by_ref[ref]

    def has_method(self, ref: MethodRef) -> bool:
        return ref in self._method_by_ref

    def ancestors(self, class_name: str) -> list[str]:
        """Strict ancestors, nearest first."""
        out = []
        cur = self._class_by_name[class_name].parent
        while cur is not None:
            out.append(cur)
            cur = self._class_by_name[cur].parent
        return out

    def field_owner(self, class_name: str, field_name: str) -> str | None:
        """Class (self or ancestor) declaring the field, or None."""
        for name in [class_name] + self.ancestors(class_name):
            if field_name in self._class_by_name[name].fields:
                return name
        return None

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Program):
            return NotImplemented
        return (self.classes, self.source_files) == (
            other.classes,
            other.source_files,
        )


def stack_effect(instr: Instruction, program: Program) -> tuple[int, int]:
    """(pops, pushes) for an instruction; call-like opcodes consult callee
    arity (newobj binds the receiver slot itself, so it pops arity - 1)."""
    pops, pushes, _ = OPCODES[instr.opcode]
    if instr.opcode in CALL_OPCODES:
        arity = program.method(instr.operand).arity
        pops = arity - 1 if instr.opcode == "newobj" else arity
    return pops, pushes
