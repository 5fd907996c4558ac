"""Reference chain computation by brute-force backward path enumeration.

Walks individual instructions (no basic blocks, no worklists, no caching,
no memoized kill analysis): every backward control path from the use is
enumerated explicitly, loops unrolled a bounded number of times, calls
expanded by walking callee paths exit-to-entry, and call sites of a
method expanded when a parameter scan walks past instruction 0. Store
targets are resolved by a private forward stack simulation scoped to the
enclosing straight-line run, mirroring the block-local scoping rule of
the main engine without sharing its code.

Exceeding a bound raises OracleBoundsError naming the bound; the oracle
never silently truncates.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..model import (
    BRANCH_OPCODES,
    CALL_OPCODES,
    SEL_NONE,
    STORE_OPCODES,
    MethodDef,
    MethodRef,
    Program,
    UseSite,
    stack_effect,
)


@dataclass(frozen=True)
class OracleBounds:
    max_loop_unroll: int = 2
    max_call_depth: int = 6
    max_paths: int = 100_000


class OracleBoundsError(Exception):
    def __init__(self, bound: str):
        self.bound = bound
        super().__init__(f"oracle bound exceeded: {bound}")


# tracking modes, mirroring the engine's semantics (independent table)
_REF = "ref"
_VAL = "val"
_SLOT_KILL = "slot-kill"
_SLOT_NOKILL = "slot-nokill"


def _run_starts(body) -> list[int]:
    starts = {0}
    for i, ins in enumerate(body):
        if ins.opcode == "label":
            starts.add(i)
        if ins.opcode in BRANCH_OPCODES or ins.opcode == "ret":
            if i + 1 < len(body):
                starts.add(i + 1)
    return sorted(starts)


class _MethodInfo:
    """Backward predecessors and straight-line-run simulation results."""

    def __init__(self, program: Program, method: MethodDef):
        body = method.body
        self.method = method
        self.preds: list[list[int]] = [[] for _ in body]
        labels = {ins.operand: i for i, ins in enumerate(body)
                  if ins.opcode == "label"}
        for i, ins in enumerate(body):
            succ = []
            if ins.opcode == "ret":
                succ = []
            elif ins.opcode == "br":
                succ = [labels[ins.operand]]
            elif ins.opcode in ("brtrue", "brfalse"):
                succ = [i + 1, labels[ins.operand]]
            else:
                if i + 1 < len(body):
                    succ = [i + 1]
            for s in succ:
                self.preds[s].append(i)
        self.rets = [i for i, ins in enumerate(body) if ins.opcode == "ret"]

        # forward simulation per straight-line run; stack values are
        # ("const",) ("var",n,a) ("addr",n,a) ("fa",base,f) ("ea",base)
        # ("call",) ("unk",) each paired with the pushing index.
        starts = _run_starts(body)
        ends = starts[1:] + [len(body)]
        self.stack_before: list[list[tuple]] = [None] * len(body)
        for s, e in zip(starts, ends):
            stack: list[tuple] = []
            for i in range(s, e):
                self.stack_before[i] = list(stack)
                ins = body[i]
                op = ins.opcode
                pops, _ = stack_effect(ins, program)
                popped = stack[len(stack) - pops:] if pops else []
                del stack[len(stack) - pops:]
                while len(popped) < pops:  # values entering the run
                    popped.insert(0, (("unk",), None))
                if op == "ldc":
                    stack.append((("const",), i))
                elif op == "ldloc":
                    stack.append((("var", ins.operand, False), i))
                elif op == "ldarg":
                    stack.append((("var", ins.operand, True), i))
                elif op == "ldloca":
                    stack.append((("addr", ins.operand, False), i))
                elif op == "ldarga":
                    stack.append((("addr", ins.operand, True), i))
                elif op == "ldflda":
                    stack.append((("fa", popped[0][0], ins.operand.name), i))
                elif op == "ldelema":
                    stack.append((("ea", popped[0][0]), i))
                elif op in CALL_OPCODES:
                    stack.append((("call",), i))
                elif op == "dup":
                    stack.append(popped[0])
                    stack.append(popped[0])
                elif op == "ret":
                    stack.clear()
                elif OPS_PUSH_UNKNOWN.get(op, False):
                    stack.append((("unk",), i))

    def args_of_call(self, program: Program, i: int) -> list[tuple]:
        ins = self.method.body[i]
        pops, _ = stack_effect(ins, program)
        stack = self.stack_before[i]
        slots = stack[len(stack) - pops:] if pops else []
        while len(slots) < pops:
            slots.insert(0, (("unk",), None))
        return slots

    def store_target(self, program: Program, i: int) -> tuple:
        """("direct",n,a) | ("field",n,a,f) | ("element",n,a) | ("unk",)"""
        ins = self.method.body[i]
        op = ins.opcode
        if op == "stloc":
            return ("direct", ins.operand, False)
        if op == "starg":
            return ("direct", ins.operand, True)
        stack = self.stack_before[i]

        def at(depth):
            return stack[-depth][0] if len(stack) >= depth else ("unk",)

        if op == "stfld":
            base = at(2)
            if base[0] == "var":
                return ("field", base[1], base[2], ins.operand.name)
            return ("unk",)
        if op == "stelem":
            arr = at(3)
            if arr[0] == "var":
                return ("element", arr[1], arr[2])
            return ("unk",)
        if op == "stind":
            addr = at(2)
            if addr[0] == "addr":
                return ("direct", addr[1], addr[2])
            if addr[0] == "fa" and addr[1][0] == "var":
                return ("field", addr[1][1], addr[1][2], addr[2])
            if addr[0] == "ea" and addr[1][0] == "var":
                return ("element", addr[1][1], addr[1][2])
            return ("unk",)
        raise ValueError(f"not a store at {i}")


OPS_PUSH_UNKNOWN = {"ldfld": True, "ldelem": True, "ldind": True,
                    "binop": True}


def _matches(res: tuple, name: str, is_arg: bool, selector, mode
             ) -> tuple[bool, bool]:
    if res[0] == "unk":
        return True, False
    if mode in (_SLOT_KILL, _SLOT_NOKILL):
        if res[0] == "direct" and res[1] == name and res[2] == is_arg:
            return True, mode == _SLOT_KILL
        return False, False
    if res[1] != name or res[2] != is_arg:
        return False, False
    if res[0] == "direct":
        if mode == _VAL:
            return False, False
        return True, True
    if res[0] == "field":
        if selector == ("field", res[3]):
            return True, mode == _REF
        if selector == SEL_NONE:
            return True, False
        return False, False
    if res[0] == "element":
        return selector in (SEL_NONE, ("element",)), False
    return False, False


def _bind_mode(value: tuple, byref: bool, name: str, is_arg: bool,
               selector, mode) -> str | None:
    if value[0] == "addr" and value[1] == name and value[2] == is_arg:
        if not byref:
            return _VAL
        return mode if mode != _REF else _REF
    if mode in (_SLOT_KILL, _SLOT_NOKILL):
        return None
    if value[0] == "var" and value[1] == name and value[2] == is_arg:
        return _VAL
    if value[0] == "fa" and value[1][0] == "var" and value[1][1] == name \
            and value[1][2] == is_arg:
        if not byref:
            return _VAL
        if selector == ("field", value[2]):
            return _SLOT_KILL if mode == _REF else _SLOT_NOKILL
        if selector == SEL_NONE:
            return _SLOT_NOKILL
        return None
    if value[0] == "ea" and value[1][0] == "var" and value[1][1] == name \
            and value[1][2] == is_arg:
        if not byref:
            return _VAL
        if selector in (SEL_NONE, ("element",)):
            return _SLOT_NOKILL
        return None
    return None


class _Enumerator:
    def __init__(self, program: Program, bounds: OracleBounds):
        self.program = program
        self.bounds = bounds
        self.infos: dict[MethodRef, _MethodInfo] = {}
        self.found: set[tuple[MethodRef, int]] = set()
        self.steps = 0

    def info(self, ref: MethodRef) -> _MethodInfo:
        if ref not in self.infos:
            self.infos[ref] = _MethodInfo(self.program,
                                          self.program.method(ref))
        return self.infos[ref]

    def run(self, use: UseSite) -> set[tuple[MethodRef, int]]:
        var = use.variable
        tracked = ((var.name, var.kind == "arg", var.selector, _REF),)
        info = self.info(use.method)
        limit = self.bounds.max_loop_unroll + 1
        # state: (mref, pos, tracked, frames, counts, depth)
        # frames/counts are immutable tuples; counts is per-activation.
        start_states = [
            (use.method, p, tracked, (), ((),), 0)
            for p in self._backstep(info, use.instr_index)
        ]
        stack = list(reversed(start_states))
        while stack:
            self.steps += 1
            if self.steps > self.bounds.max_paths:
                raise OracleBoundsError("max_paths")
            mref, pos, tracked, frames, counts, depth = stack.pop()
            if pos == -1:
                stack.extend(self._entry_reached(
                    mref, tracked, frames, counts, depth))
                continue
            info = self.info(mref)
            body = info.method.body
            top = counts[-1]
            seen = sum(1 for p in top if p == pos)
            if seen >= limit:
                continue  # loop unroll bound: cut this path
            counts = counts[:-1] + (top + (pos,),)
            ins = body[pos]
            ended = False
            if ins.opcode in STORE_OPCODES:
                res = info.store_target(self.program, pos)
                for (name, is_arg, sel, mode) in tracked:
                    hit, kills = _matches(res, name, is_arg, sel, mode)
                    if hit:
                        self.found.add((mref, pos))
                    if hit and kills:
                        ended = True
            elif ins.opcode in CALL_OPCODES:
                descents = self._descend(info, pos, tracked)
                if descents:
                    if depth + 1 > self.bounds.max_call_depth:
                        raise OracleBoundsError("max_call_depth")
                    resume = (mref, pos, tracked, frames, counts, depth)
                    for callee_ref, inner_tracked in descents:
                        cinfo = self.info(callee_ref)
                        for ret_i in cinfo.rets:
                            stack.append((callee_ref, ret_i, inner_tracked,
                                          frames + (resume,),
                                          counts + ((),), depth + 1))
                    ended = True  # resumption happens via frame pops
            if ended:
                continue
            for p in self._backstep(info, pos):
                stack.append((mref, p, tracked, frames, counts, depth))
        return self.found

    def _backstep(self, info: _MethodInfo, pos: int) -> list[int]:
        nxt = list(info.preds[pos])
        if pos == 0:
            nxt.append(-1)
        return nxt

    def _descend(self, info: _MethodInfo, pos: int, tracked):
        """[(callee ref, inner tracked tuple)] for every dispatch target,
        or [] when no tracked variable escapes into the call."""
        ins = info.method.body[pos]
        named = self.program.method(ins.operand)
        offset = 1 if ins.opcode == "newobj" else 0
        slots = info.args_of_call(self.program, pos)
        per_slot = []
        for pslot, (value, _) in enumerate(slots):
            byref = named.params[pslot + offset].byref
            for (name, is_arg, sel, mode) in tracked:
                inner = _bind_mode(value, byref, name, is_arg, sel, mode)
                if inner is not None:
                    per_slot.append((pslot, sel, inner))
        if not per_slot:
            return []
        if ins.opcode == "callvirt":
            targets = [named] + self._overriders(named)
        else:
            targets = [named]
        out = []
        for callee in targets:
            inner_tracked = tuple(
                (callee.params[pslot + offset].name, True,
                 sel if inner in (_REF, _VAL) else SEL_NONE, inner)
                for pslot, sel, inner in per_slot
            )
            out.append((callee.ref, inner_tracked))
        return out

    def _overriders(self, base: MethodDef) -> list[MethodDef]:
        subs = set()
        frontier = {base.owner}
        while frontier:
            nxt = {c.name for c in self.program.classes
                   if c.parent in frontier}
            nxt -= subs
            subs |= nxt
            frontier = nxt
        return [m for m in self.program.methods
                if m.override_flag and m.owner in subs
                and m.name == base.name and m.arity == base.arity]

    def _entry_reached(self, mref, tracked, frames, counts, depth):
        if frames:
            # finished a callee activation with no kill: the caller path
            # resumes just before the call site at its original depth
            (caller_ref, site, caller_tracked, caller_frames, caller_counts,
             caller_depth) = frames[-1]
            cinfo = self.info(caller_ref)
            out = []
            for p in self._backstep(cinfo, site):
                out.append((caller_ref, p, caller_tracked, caller_frames,
                            caller_counts, caller_depth))
            return out
        # top activation: a parameter scan walked past instruction 0
        name, is_arg, sel, mode = tracked[0]
        if len(tracked) != 1 or not is_arg or mode != _REF:
            return []
        method = self.program.method(mref)
        out = []
        for caller_ref, site in self._callsites(method):
            if depth + 1 > self.bounds.max_call_depth:
                raise OracleBoundsError("max_call_depth")
            cinfo = self.info(caller_ref)
            ins = cinfo.method.body[site]
            position = method.param_index(name)
            if ins.opcode == "newobj":
                if position == 0:
                    self.found.add((caller_ref, site))
                    continue
                slot = position - 1
            else:
                slot = position
            value, producer = cinfo.args_of_call(self.program, site)[slot]
            cont = self._cont_target(value, sel)
            if cont is None:
                self.found.add(
                    (caller_ref, producer if producer is not None else site))
                continue
            for p in self._backstep(cinfo, site):
                out.append((caller_ref, p, (cont,), (), ((),), depth + 1))
        return out

    def _cont_target(self, value: tuple, selector):
        if value[0] in ("addr", "var"):
            return (value[1], value[2], selector, _REF)
        if value[0] == "fa" and value[1][0] == "var" and selector == SEL_NONE:
            return (value[1][1], value[1][2], ("field", value[2]), _REF)
        if value[0] == "ea" and value[1][0] == "var" and selector == SEL_NONE:
            return (value[1][1], value[1][2], ("element",), _REF)
        return None

    def _callsites(self, method: MethodDef) -> list[tuple[MethodRef, int]]:
        sites = []
        virtual_names = {method.name}
        anc_refs = {method.ref}
        # methods this one overrides, walking up the parent chain
        cur = self.program.class_named(method.owner).parent
        while cur is not None:
            ref = MethodRef(cur, method.name)
            if self.program.has_method(ref):
                cand = self.program.method(ref)
                if cand.arity == method.arity and (
                        cand.virtual_flag or cand.override_flag):
                    anc_refs.add(ref)
            cur = self.program.class_named(cur).parent
        for caller in self.program.methods:
            for i, ins in enumerate(caller.body):
                if ins.opcode not in CALL_OPCODES:
                    continue
                if ins.opcode == "callvirt":
                    if ins.operand in anc_refs:
                        sites.append((caller.ref, i))
                elif ins.operand == method.ref:
                    sites.append((caller.ref, i))
        return sorted(set(sites))


def reference_ud_chain(program: Program, use: UseSite,
                       bounds: OracleBounds | None = None
                       ) -> set[tuple[MethodRef, int]]:
    """Reference answer as a set of (method, instruction index) definition
    sites; raises OracleBoundsError rather than truncating."""
    return _Enumerator(program, bounds or OracleBounds()).run(use)
