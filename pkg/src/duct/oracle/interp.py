"""Concrete small-step interpreter for executable MiniIL fixtures.

Runs a program for real (integers, heap objects, byref bindings) and
records, for every store, the concrete storage slot written together
with a snapshot of what each in-scope variable denoted at that moment.
The snapshot lets a test check statically resolved store targets against
ground truth: a resolution naming variable v is right iff v denoted the
written slot when the store executed.

binop is integer addition; calls concretely run the statically named
method and push an opaque 0 result; arrays are not executable.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..model import CALL_OPCODES, MethodDef, MethodRef, Program

_UNSET = object()


class NotExecutable(Exception):
    pass


class StepBudgetExceeded(Exception):
    pass


@dataclass(frozen=True)
class StoreRecord:
    method: MethodRef
    instr_index: int
    slot: tuple  # ("local", frame_id, name) | ("field", obj_id, field)
    # variable name -> (denoted slot, current value) at store time
    env: dict


class _Frame:
    _next_id = 0

    def __init__(self, method: MethodDef):
        self.method = method
        self.id = _Frame._next_id
        _Frame._next_id = self.id + 1
        self.vars: dict[str, object] = {}
        self.refs: dict[str, tuple] = {}  # byref param -> bound slot


class _Machine:
    def __init__(self, program: Program, max_steps: int):
        self.program = program
        self.max_steps = max_steps
        self.steps = 0
        self.heap: dict[int, dict[str, object]] = {}
        self.next_obj = 0
        self.records: list[StoreRecord] = []
        _Frame._next_id = 0

    # -- storage ------------------------------------------------------

    def read_slot(self, slot: tuple):
        if slot[0] == "local":
            frame_vars = self._frames[slot[1]].vars
            value = frame_vars.get(slot[2], _UNSET)
            if value is _UNSET:
                raise NotExecutable(f"read of unset {slot}")
            return value
        return self.heap[slot[1]].get(slot[2], 0)

    def write_slot(self, slot: tuple, value) -> None:
        if slot[0] == "local":
            self._frames[slot[1]].vars[slot[2]] = value
        else:
            self.heap[slot[1]][slot[2]] = value

    def var_slot(self, frame: _Frame, name: str) -> tuple:
        if name in frame.refs:
            return frame.refs[name]
        return ("local", frame.id, name)

    def snapshot(self, frame: _Frame) -> dict:
        env = {}
        method = frame.method
        for name in ([p.name for p in method.params] + method.locals):
            slot = self.var_slot(frame, name)
            if slot[0] == "local":
                value = self._frames[slot[1]].vars.get(slot[2], _UNSET)
            else:
                value = self.heap[slot[1]].get(slot[2], 0)
            env[name] = (slot, value)
        return env

    # -- execution ------------------------------------------------------

    def run(self, method: MethodDef, args: list) -> None:
        self._frames: dict[int, _Frame] = {}
        frame = _Frame(method)
        self._frames[frame.id] = frame
        # synthesize caller cells so byref entry parameters have storage
        root = _Frame(method)
        self._frames[root.id] = root
        for i, p in enumerate(method.params):
            value = args[i] if i < len(args) else 0
            if p.byref:
                cell = f"cell{i}"
                root.vars[cell] = value
                frame.refs[p.name] = ("local", root.id, cell)
            else:
                frame.vars[p.name] = value
        self._exec(frame)

    def _exec(self, frame: _Frame) -> None:
        method = frame.method
        body = method.body
        labels = {ins.operand: i for i, ins in enumerate(body)
                  if ins.opcode == "label"}
        stack: list = []
        pc = 0
        while True:
            self.steps += 1
            if self.steps > self.max_steps:
                raise StepBudgetExceeded(f"{self.steps} steps")
            ins = body[pc]
            op = ins.opcode
            if op == "ret":
                return
            if op == "label":
                pc += 1
                continue
            if op == "br":
                pc = labels[ins.operand]
                continue
            if op in ("brtrue", "brfalse"):
                cond = stack.pop()
                if not isinstance(cond, int):
                    raise NotExecutable("branch on non-integer")
                taken = (cond != 0) if op == "brtrue" else (cond == 0)
                pc = labels[ins.operand] if taken else pc + 1
                continue
            if op == "ldc":
                stack.append(ins.operand)
            elif op == "ldloc":
                value = frame.vars.get(ins.operand, _UNSET)
                if value is _UNSET:
                    raise NotExecutable(f"ldloc of unset {ins.operand}")
                stack.append(value)
            elif op == "stloc":
                value = stack.pop()
                self._record(frame, pc, ("local", frame.id, ins.operand))
                frame.vars[ins.operand] = value
            elif op == "ldloca":
                stack.append(("local", frame.id, ins.operand))
            elif op == "ldarg":
                stack.append(self.read_slot(self.var_slot(frame,
                                                          ins.operand)))
            elif op == "starg":
                value = stack.pop()
                slot = self.var_slot(frame, ins.operand)
                self._record(frame, pc, slot)
                self.write_slot(slot, value)
            elif op == "ldarga":
                stack.append(self.var_slot(frame, ins.operand))
            elif op == "ldfld":
                obj = stack.pop()
                stack.append(self.heap[self._obj(obj)].get(
                    ins.operand.name, 0))
            elif op == "stfld":
                value = stack.pop()
                obj = stack.pop()
                slot = ("field", self._obj(obj), ins.operand.name)
                self._record(frame, pc, slot)
                self.write_slot(slot, value)
            elif op == "ldflda":
                obj = stack.pop()
                stack.append(("field", self._obj(obj), ins.operand.name))
            elif op == "ldind":
                stack.append(self.read_slot(self._addr(stack.pop())))
            elif op == "stind":
                value = stack.pop()
                slot = self._addr(stack.pop())
                self._record(frame, pc, slot)
                self.write_slot(slot, value)
            elif op in ("ldelem", "stelem", "ldelema"):
                raise NotExecutable("array instructions")
            elif op == "pop":
                stack.pop()
            elif op == "dup":
                stack.append(stack[-1])
            elif op == "binop":
                b, a = stack.pop(), stack.pop()
                if not (isinstance(a, int) and isinstance(b, int)):
                    raise NotExecutable("binop on non-integers")
                stack.append(a + b)
            elif op in CALL_OPCODES:
                callee = self.program.method(ins.operand)
                if op == "newobj":
                    n_args = callee.arity - 1
                else:
                    n_args = callee.arity
                raw_args = stack[len(stack) - n_args:] if n_args else []
                del stack[len(stack) - n_args:]
                new_frame = _Frame(callee)
                self._frames[new_frame.id] = new_frame
                formals = callee.params
                if op == "newobj":
                    obj_id = self.next_obj
                    self.next_obj += 1
                    self.heap[obj_id] = {}
                    new_frame.vars[formals[0].name] = ("obj", obj_id)
                    formals = formals[1:]
                for formal, value in zip(formals, raw_args):
                    if formal.byref:
                        if not isinstance(value, tuple) or value[0] not in (
                                "local", "field"):
                            raise NotExecutable("byref arg is not an address")
                        new_frame.refs[formal.name] = value
                    else:
                        new_frame.vars[formal.name] = value
                self._exec(new_frame)
                stack.append(("obj", obj_id) if op == "newobj" else 0)
            else:
                raise NotExecutable(f"unhandled opcode {op}")
            pc += 1

    def _obj(self, value) -> int:
        if isinstance(value, tuple) and value[0] == "obj":
            return value[1]
        raise NotExecutable(f"not an object: {value!r}")

    def _addr(self, value) -> tuple:
        if isinstance(value, tuple) and value[0] in ("local", "field"):
            return value
        raise NotExecutable(f"not an address: {value!r}")

    def _record(self, frame: _Frame, pc: int, slot: tuple) -> None:
        self.records.append(StoreRecord(
            method=frame.method.ref,
            instr_index=pc,
            slot=slot,
            env=self.snapshot(frame),
        ))


def interpret(program: Program, entry: MethodRef, inputs: list,
              max_steps: int = 200_000) -> list[StoreRecord]:
    """Run `entry` with the given argument values and return the store
    trace. Raises NotExecutable / StepBudgetExceeded on unrunnable input."""
    machine = _Machine(program, max_steps)
    machine.run(program.method(entry), list(inputs))
    return machine.records
