"""Symbolic execution of the operand stack within one basic block.

Indirect stores (stind/stfld/stelem) take their target from the stack;
simulating the block resolves which variable that is. Tracking is
deliberately block-local: values entering a block are `unknown`, and a
store whose address cannot be traced resolves to `unknown` rather than
to a guess, so downstream analysis never pins a store to the wrong
variable.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import CALL_OPCODES, Instruction, MethodDef, Program, stack_effect

TAG_CONST = "const"
TAG_VAR = "var"            # value_of(variable)
TAG_ADDR = "addr"          # address_of(variable), from ldloca/ldarga
TAG_FIELD_ADDR = "field_addr"  # from ldflda
TAG_ELEM_ADDR = "elem_addr"    # from ldelema
TAG_CALL = "call_result"
TAG_UNKNOWN = "unknown"


@dataclass(frozen=True)
class AbstractValue:
    tag: str
    name: str | None = None
    is_arg: bool = False
    base: "AbstractValue | None" = None
    field: str | None = None


UNKNOWN = AbstractValue(TAG_UNKNOWN)

# A stack slot is (value, producer instruction index or None for values
# that entered the block on the stack).
Slot = tuple[AbstractValue, "int | None"]


@dataclass(frozen=True)
class StoreTarget:
    kind: str  # "direct" | "field" | "element" | "unknown"
    name: str | None = None
    is_arg: bool = False
    field: str | None = None


UNKNOWN_TARGET = StoreTarget("unknown")


def entry_stack(method: MethodDef, index: int) -> list[AbstractValue]:
    """All-unknown stack at the verified depth before `index`."""
    return [UNKNOWN] * method.stack_depth[index]


def _transfer(ins: Instruction, index: int, stack: list[Slot],
              program: Program) -> None:
    op = ins.opcode
    pops, pushes = stack_effect(ins, program)
    popped = stack[len(stack) - pops:] if pops else []
    del stack[len(stack) - pops:]

    if op == "ldc":
        stack.append((AbstractValue(TAG_CONST), index))
    elif op == "ldloc":
        stack.append((AbstractValue(TAG_VAR, ins.operand, False), index))
    elif op == "ldarg":
        stack.append((AbstractValue(TAG_VAR, ins.operand, True), index))
    elif op == "ldloca":
        stack.append((AbstractValue(TAG_ADDR, ins.operand, False), index))
    elif op == "ldarga":
        stack.append((AbstractValue(TAG_ADDR, ins.operand, True), index))
    elif op == "ldfld":
        stack.append((UNKNOWN, index))
    elif op == "ldflda":
        base = popped[0][0]
        stack.append(
            (AbstractValue(TAG_FIELD_ADDR, base=base, field=ins.operand.name),
             index))
    elif op == "ldelem" or op == "ldind":
        stack.append((UNKNOWN, index))
    elif op == "ldelema":
        base = popped[0][0]  # [array, index] popped; index untracked
        stack.append((AbstractValue(TAG_ELEM_ADDR, base=base), index))
    elif op in CALL_OPCODES:
        stack.append((AbstractValue(TAG_CALL), index))
    elif op == "dup":
        val, producer = popped[0]
        stack.append((val, producer))
        stack.append((val, producer))
    elif op == "binop":
        # arithmetic results (including over addresses) are not tracked
        stack.append((UNKNOWN, index))
    elif pushes:
        stack.append((UNKNOWN, index))


def simulate_range(program: Program, method: MethodDef, start: int,
                   end: int) -> tuple[list[list[Slot]], list[Slot]]:
    """Simulate body[start:end) from an all-unknown entry stack.

    Returns the stack before each instruction in the range, plus the exit
    stack. Pure function; repeated calls agree.
    """
    stack: list[Slot] = [(UNKNOWN, None)] * method.stack_depth[start]
    states: list[list[Slot]] = []
    for i in range(start, end):
        states.append(list(stack))
        ins = method.body[i]
        if ins.opcode == "ret":
            stack.clear()
        else:
            _transfer(ins, i, stack, program)
    return states, stack


def simulate_block(program: Program, method: MethodDef, block,
                   entry: list[AbstractValue] | None = None):
    """Spec surface over simulate_range for a BasicBlock; `entry` defaults
    to the verified all-unknown entry stack."""
    if entry is not None and len(entry) != method.stack_depth[block.start]:
        raise ValueError(
            f"entry stack depth {len(entry)} != verified depth "
            f"{method.stack_depth[block.start]}")
    return simulate_range(program, method, block.start, block.end)


def _classify_address(addr: AbstractValue) -> StoreTarget:
    if addr.tag == TAG_ADDR:
        return StoreTarget("direct", addr.name, addr.is_arg)
    if addr.tag == TAG_FIELD_ADDR and addr.base is not None \
            and addr.base.tag == TAG_VAR:
        return StoreTarget("field", addr.base.name, addr.base.is_arg,
                           addr.field)
    if addr.tag == TAG_ELEM_ADDR and addr.base is not None \
            and addr.base.tag == TAG_VAR:
        return StoreTarget("element", addr.base.name, addr.base.is_arg)
    return UNKNOWN_TARGET


def resolve_with_states(method: MethodDef, states_before: list[Slot],
                        instr_index: int) -> StoreTarget:
    """Classify the store at instr_index given the stack before it."""
    ins = method.body[instr_index]
    op = ins.opcode
    if op == "stloc":
        return StoreTarget("direct", ins.operand, False)
    if op == "starg":
        return StoreTarget("direct", ins.operand, True)
    if op == "stfld":
        obj = states_before[-2][0]  # [obj, value]
        if obj.tag == TAG_VAR:
            return StoreTarget("field", obj.name, obj.is_arg,
                               ins.operand.name)
        return UNKNOWN_TARGET
    if op == "stelem":
        arr = states_before[-3][0]  # [array, index, value]
        if arr.tag == TAG_VAR:
            return StoreTarget("element", arr.name, arr.is_arg)
        return UNKNOWN_TARGET
    if op == "stind":
        return _classify_address(states_before[-2][0])  # [addr, value]
    raise ValueError(f"{method.ref}@{instr_index}: {op} is not a store")


def resolve_store_target(program: Program, method: MethodDef, cfg,
                         instr_index: int) -> StoreTarget:
    """Resolve which variable the store at instr_index writes.

    Returns `unknown` (never an error) when the address producer lies
    outside the containing block or is untrackable.
    """
    op = method.body[instr_index].opcode
    if op == "stloc":
        return StoreTarget("direct", method.body[instr_index].operand, False)
    if op == "starg":
        return StoreTarget("direct", method.body[instr_index].operand, True)
    block = cfg.block_at(instr_index)
    states, _ = simulate_range(program, method, block.start, block.end)
    return resolve_with_states(method, states[instr_index - block.start],
                               instr_index)


def call_arg_slots(program: Program, method: MethodDef,
                   states_before: list[Slot], instr_index: int) -> list[Slot]:
    """Stack slots feeding a call at instr_index, leftmost argument first.

    For newobj the receiver is the freshly created object, so the slots
    map to the callee's params[1:].
    """
    ins = method.body[instr_index]
    pops, _ = stack_effect(ins, program)
    if pops == 0:
        return []
    return list(states_before[len(states_before) - pops:])
