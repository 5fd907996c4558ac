"""Demand-driven interprocedural use-define chain construction.

The search walks the CFG backward from a use site. Within the starting
block an earlier store to the queried variable is the unique reaching
definition; otherwise every predecessor path is scanned for the last
definition. Call sites where the variable escapes (byref binding, or an
object passed by value) continue the search inside each possible callee,
and a call kills the current path only when every control path of every
dispatch target definitely writes the bound formal. A scan that reaches
the entry of a method while tracking a parameter resumes at each call
site of that method.

A visited set over (method, block, tracked variable) bounds the search on
cyclic CFGs and recursive call graphs; an overall budget turns pathological
queries into truncated results instead of hangs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import absstack
from .cfg import Cfg
from .index import ProgramIndex, callsites_of, dispatch_targets
from .model import (
    CALL_OPCODES,
    SEL_NONE,
    STORE_OPCODES,
    MethodDef,
    MethodRef,
    Program,
    Selector,
    UseSite,
)

DEFAULT_BUDGET = 100_000

# Tracking modes. REF: the tracked name denotes the queried storage
# itself (kills allowed). VAL: the object was passed by value, so only
# mutations through it count and nothing kills. SLOT_*: the tracked
# formal is bound to one field/element slot of the queried variable;
# only whole-slot (direct) stores are relevant.
REF = "ref"
VAL = "val"
SLOT_KILL = "slot-kill"
SLOT_NOKILL = "slot-nokill"


@dataclass(frozen=True)
class Target:
    name: str
    is_arg: bool
    selector: Selector
    mode: str


@dataclass(frozen=True)
class Definition:
    method: MethodRef
    instr_index: int
    source: tuple[str, int]
    kind: str
    path_note: str = ""


@dataclass(frozen=True)
class UDChain:
    query: UseSite
    definitions: tuple[Definition, ...]
    truncated: bool

    def site_set(self) -> set[tuple[MethodRef, int]]:
        return {(d.method, d.instr_index) for d in self.definitions}


@dataclass
class TraversalState:
    budget: int = DEFAULT_BUDGET
    visited: set = field(default_factory=set)
    continuations: set = field(default_factory=set)
    states: int = 0
    scanned_methods: set = field(default_factory=set)


class _BudgetExhausted(Exception):
    pass


def _match(res: absstack.StoreTarget, t: Target) -> tuple[bool, bool]:
    """(reported, kills) for a resolved store against a tracked target.
    Unknown targets are always reported and never kill; element stores
    never kill; field stores kill only on an exact selector match."""
    if res.kind == "unknown":
        return True, False
    if t.mode in (SLOT_KILL, SLOT_NOKILL):
        if res.kind == "direct" and res.name == t.name \
                and res.is_arg == t.is_arg:
            return True, t.mode == SLOT_KILL
        return False, False
    if res.name != t.name or res.is_arg != t.is_arg:
        return False, False
    if res.kind == "direct":
        if t.mode == VAL:
            return False, False
        return True, True
    if res.kind == "field":
        if t.selector == ("field", res.field):
            return True, t.mode == REF
        if t.selector == SEL_NONE:
            return True, False
        return False, False
    if res.kind == "element":
        return t.selector in (SEL_NONE, ("element",)), False
    return False, False


def _def_kind(res: absstack.StoreTarget, in_callee: bool) -> str:
    if res.kind == "unknown":
        return "unknown-address"
    if res.kind == "field":
        return "field-store"
    if res.kind == "element":
        return "element-store"
    return "byref-callee-store" if in_callee else "direct-store"


class _MustKill:
    """Does every entry-to-exit path of a method surely kill one of the
    tracked targets? Forward must dataflow (meet = AND over predecessors)
    at block granularity, equivalent on finite CFGs including loops to
    quantifying over paths. A block kills through its own stores or
    through a call site whose every dispatch target recursively must-kill
    the bound formals. Recursive call-graph cycles conservatively count
    as not killing, and results touched by a cycle are not memoized."""

    def __init__(self, program: Program, index: ProgramIndex):
        self.program = program
        self.index = index
        self.in_progress: set = set()
        self.cycle_seen = False
        self.local: dict = {}

    def query(self, method: MethodDef, targets: frozenset) -> bool:
        if not targets:
            return False
        key = (method.ref, targets)
        memo = self.index.cache.must_define_memo
        if key in memo:
            self.index.stats.cache_hits += 1
            return memo[key]
        if key in self.local:
            return self.local[key]
        if key in self.in_progress:
            self.cycle_seen = True
            return False
        self.in_progress.add(key)
        result = self._compute(method, targets)
        self.in_progress.discard(key)
        self.local[key] = result
        return result

    def finish(self) -> None:
        if not self.cycle_seen:
            self.index.cache.must_define_memo.update(self.local)

    def _compute(self, method: MethodDef, targets: frozenset) -> bool:
        cfg = self.index.cfg(method.ref)
        gen = []
        for b in cfg.blocks:
            has_kill = False
            for i in range(b.start, b.end):
                ins = method.body[i]
                if ins.opcode in STORE_OPCODES:
                    res = self.index.store_target(method, cfg, i)
                    if any(_match(res, t)[1] for t in targets):
                        has_kill = True
                        break
                elif ins.opcode in CALL_OPCODES:
                    if self._call_kills(method, cfg, i, targets):
                        has_kill = True
                        break
            gen.append(has_kill)

        out = [True] * len(cfg.blocks)
        changed = True
        while changed:
            changed = False
            for b in cfg.blocks:
                if b.id == cfg.entry:
                    new = gen[b.id]
                else:
                    new = gen[b.id] or all(out[p] for p in b.predecessors)
                if new != out[b.id]:
                    out[b.id] = new
                    changed = True
        return all(out[e] for e in cfg.exits)

    def _call_kills(self, method: MethodDef, cfg: Cfg, idx: int,
                    targets: frozenset) -> bool:
        ins = method.body[idx]
        named = self.program.method(ins.operand)
        offset = 1 if ins.opcode == "newobj" else 0
        slots = self.index.call_args(method, cfg, idx)
        bound: list[tuple[int, str]] = []  # (slot pos, inner mode)
        for pos, (value, _) in enumerate(slots):
            byref = named.params[pos + offset].byref
            for t in targets:
                mode = _bind_mode(value, byref, t)
                if mode in (REF, SLOT_KILL):
                    bound.append((pos, mode, t.selector))
        if not bound:
            return False
        if ins.opcode == "callvirt":
            callees = dispatch_targets(self.program, self.index.hierarchy,
                                       ins)
        else:
            callees = [named]
        for callee in callees:
            inner = frozenset(
                Target(callee.params[pos + offset].name, True,
                       sel if mode == REF else SEL_NONE, mode)
                for pos, mode, sel in bound)
            if not self.query(callee, inner):
                return False
        return True


def _bind_mode(value: absstack.AbstractValue, byref: bool,
               t: Target) -> str | None:
    """Inner tracking mode when `value` carries target `t` into a callee
    parameter, or None when it does not."""
    def is_base(v):
        return v.tag == absstack.TAG_VAR and v.name == t.name \
            and v.is_arg == t.is_arg

    if value.tag == absstack.TAG_ADDR and value.name == t.name \
            and value.is_arg == t.is_arg:
        if not byref:
            return VAL  # the address escapes as a plain value
        return t.mode if t.mode != REF else REF
    if t.mode in (SLOT_KILL, SLOT_NOKILL):
        return None  # only the whole-slot address carries a slot target
    if is_base(value):
        return VAL
    if value.tag == absstack.TAG_FIELD_ADDR and value.base is not None \
            and is_base(value.base):
        if not byref:
            return VAL
        if t.selector == ("field", value.field):
            return SLOT_KILL if t.mode == REF else SLOT_NOKILL
        if t.selector == SEL_NONE:
            return SLOT_NOKILL
        return None
    if value.tag == absstack.TAG_ELEM_ADDR and value.base is not None \
            and is_base(value.base):
        if not byref:
            return VAL
        if t.selector in (SEL_NONE, ("element",)):
            return SLOT_NOKILL
        return None
    return None


def all_paths_define(program: Program, index: ProgramIndex,
                     method: MethodDef, formals: frozenset) -> bool:
    """True iff every entry-to-exit path of `method` surely writes one of
    the named byref formals (directly, or via a call that does so on all
    of its own paths)."""
    targets = frozenset(Target(name, True, SEL_NONE, REF)
                        for name in formals)
    analysis = _MustKill(program, index)
    result = analysis.query(method, targets)
    analysis.finish()
    return result


class _Search:
    def __init__(self, program: Program, index: ProgramIndex,
                 state: TraversalState, kill_rule: bool):
        self.program = program
        self.index = index
        self.state = state
        self.kill_rule = kill_rule
        self.must = _MustKill(program, index)
        self.defs: dict[tuple[MethodRef, int], tuple[str, str]] = {}
        # tasks: ("scan", mref, block_id, from_index, target, in_callee, note)
        #     or ("entry", mref, target)
        self.tasks: list[tuple] = []

    # -- recording ---------------------------------------------------

    def _record(self, mref: MethodRef, idx: int, kind: str,
                note: str) -> None:
        key = (mref, idx)
        prev = self.defs.get(key)
        new = (kind, note)
        if prev is None or new < prev:
            self.defs[key] = new

    # -- block scan events (cached per scan origin) -------------------

    def _events(self, method: MethodDef, cfg: Cfg, block, from_index: int,
                target: Target) -> tuple:
        key = (method.ref, block.id, from_index, target)
        memo = self.index.cache.scan_memo
        cached = memo.get(key)
        if cached is not None:
            self.index.stats.cache_hits += 1
            return cached
        events = []
        for i in range(from_index - 1, block.start - 1, -1):
            ins = method.body[i]
            if ins.opcode in STORE_OPCODES:
                res = self.index.store_target(method, cfg, i)
                reported, kills = _match(res, target)
                if reported:
                    events.append(("def", i, res, kills))
            elif ins.opcode in CALL_OPCODES:
                if self._bindings(method, cfg, i, target):
                    events.append(("call", i))
        result = tuple(events)
        memo[key] = result
        return result

    # -- call-site handling -------------------------------------------

    def _bindings(self, method: MethodDef, cfg: Cfg, idx: int,
                  target: Target) -> list[tuple[int, str]]:
        """(arg position, inner tracking mode) for every argument slot
        that carries the tracked variable into the callee."""
        ins = method.body[idx]
        callee = self.program.method(ins.operand)
        offset = 1 if ins.opcode == "newobj" else 0
        slots = self.index.call_args(method, cfg, idx)
        out = []
        for pos, (value, _) in enumerate(slots):
            formal = callee.params[pos + offset]
            mode = _bind_mode(value, formal.byref, target)
            if mode is not None:
                out.append((pos, mode))
        return out

    def _process_call(self, method: MethodDef, cfg: Cfg, idx: int,
                      target: Target) -> bool:
        ins = method.body[idx]
        bindings = self._bindings(method, cfg, idx, target)
        if not bindings:
            return False
        if ins.opcode == "callvirt":
            callees = dispatch_targets(self.program, self.index.hierarchy,
                                       ins)
        else:
            callees = [self.program.method(ins.operand)]
        offset = 1 if ins.opcode == "newobj" else 0

        all_targets_kill = True
        for callee in callees:
            callee_cfg = self.index.cfg(callee.ref)
            kill_targets = set()
            for pos, mode in bindings:
                formal = callee.params[pos + offset]
                inner_sel = target.selector if mode in (REF, VAL) else SEL_NONE
                inner = Target(formal.name, True, inner_sel, mode)
                if mode in (REF, SLOT_KILL):
                    kill_targets.add(inner)
                word = "object" if mode == VAL else "byref"
                note = f"via {ins.opcode} {callee.ref} -> {word} {formal.name}"
                for exit_id in callee_cfg.exits:
                    self._push_scan(callee.ref, exit_id,
                                    callee_cfg.blocks[exit_id].end, inner,
                                    in_callee=True, note=note,
                                    full_block=True)
            if not (self.kill_rule and kill_targets
                    and self.must.query(callee, frozenset(kill_targets))):
                all_targets_kill = False
        return all_targets_kill

    # -- entry-of-method continuation ----------------------------------

    def _entry_continuation(self, method: MethodDef,
                            target: Target) -> None:
        position = method.param_index(target.name)
        sites = callsites_of(self.index.call_graph, self.index.hierarchy,
                             self.program, method)
        for caller_ref, site in sites:
            key = ("site", caller_ref, site, target)
            if key in self.state.continuations:
                continue
            self.state.continuations.add(key)
            caller = self.program.method(caller_ref)
            caller_cfg = self.index.cfg(caller_ref)
            ins = caller.body[site]
            if ins.opcode == "newobj":
                if position == 0:
                    # the receiver is born at the site itself
                    self._record(caller_ref, site, "direct-store",
                                 "argument at call site")
                    continue
                slot_pos = position - 1
            else:
                slot_pos = position
            value, producer = self.index.call_args(
                caller, caller_cfg, site)[slot_pos]
            cont = self._continuation_target(value, target.selector)
            if cont is None:
                at = producer if producer is not None else site
                self._record(caller_ref, at, "direct-store",
                             "argument at call site")
            else:
                block = caller_cfg.block_at(site)
                self._push_scan(caller_ref, block.id, site, cont,
                                in_callee=False, note="")

    def _continuation_target(self, value: absstack.AbstractValue,
                             selector: Selector) -> Target | None:
        if value.tag in (absstack.TAG_ADDR, absstack.TAG_VAR):
            return Target(value.name, value.is_arg, selector, REF)
        if value.tag == absstack.TAG_FIELD_ADDR and value.base is not None \
                and value.base.tag == absstack.TAG_VAR \
                and selector == SEL_NONE:
            return Target(value.base.name, value.base.is_arg,
                          ("field", value.field), REF)
        if value.tag == absstack.TAG_ELEM_ADDR and value.base is not None \
                and value.base.tag == absstack.TAG_VAR \
                and selector == SEL_NONE:
            return Target(value.base.name, value.base.is_arg,
                          ("element",), REF)
        return None

    # -- traversal ------------------------------------------------------

    def _push_scan(self, mref: MethodRef, block_id: int, from_index: int,
                   target: Target, in_callee: bool, note: str,
                   full_block: bool = False) -> None:
        if full_block:
            key = (mref, block_id, target)
            if key in self.state.visited:
                return
            self.state.visited.add(key)
        self.tasks.append(
            ("scan", mref, block_id, from_index, target, in_callee, note))

    def _do_scan(self, mref: MethodRef, block_id: int, from_index: int,
                 target: Target, in_callee: bool, note: str) -> None:
        self.state.states += 1
        if self.state.states > self.state.budget:
            raise _BudgetExhausted()
        stats = self.index.stats
        stats.visited_states += 1
        stats.blocks_visited += 1
        if mref not in self.state.scanned_methods:
            self.state.scanned_methods.add(mref)
            stats.methods_scanned += 1

        method = self.program.method(mref)
        cfg = self.index.cfg(mref)
        block = cfg.blocks[block_id]
        killed = False
        for event in self._events(method, cfg, block, from_index, target):
            if event[0] == "def":
                _, idx, res, kills = event
                self._record(mref, idx, _def_kind(res, in_callee), note)
                if kills:
                    killed = True
                    break
            else:
                if self._process_call(method, cfg, event[1], target):
                    killed = True
                    break
        if killed:
            return
        if block_id == cfg.entry and target.is_arg and not in_callee:
            key = ("entry", mref, target)
            if key not in self.state.continuations:
                self.state.continuations.add(key)
                self.tasks.append(("entry", mref, target))
        for pred in reversed(block.predecessors):
            self._push_scan(mref, pred, cfg.blocks[pred].end, target,
                            in_callee, note, full_block=True)

    def run(self, use: UseSite) -> UDChain:
        var = use.variable
        target = Target(var.name, var.kind == "arg", var.selector, REF)
        cfg = self.index.cfg(use.method)
        block = cfg.block_at(use.instr_index)
        self._push_scan(use.method, block.id, use.instr_index, target,
                        in_callee=False, note="")
        truncated = False
        try:
            while self.tasks:
                task = self.tasks.pop()
                if task[0] == "scan":
                    self._do_scan(*task[1:])
                else:
                    _, mref, tgt = task
                    self._entry_continuation(self.program.method(mref), tgt)
        except _BudgetExhausted:
            truncated = True
        self.must.finish()

        defs = tuple(
            Definition(
                method=mref,
                instr_index=idx,
                source=self.program.method(mref).line_of(idx),
                kind=kind,
                path_note=note,
            )
            for (mref, idx), (kind, note) in sorted(
                self.defs.items(), key=lambda kv: (str(kv[0][0]), kv[0][1]))
        )
        return UDChain(query=use, definitions=defs, truncated=truncated)


def compute_ud_chain(program: Program, index: ProgramIndex, use: UseSite,
                     state: TraversalState | None = None,
                     kill_rule: bool = True) -> UDChain:
    """All definitions reaching `use`. Deterministic; budget exhaustion
    yields truncated=True, never an exception."""
    if state is None:
        state = TraversalState()
    return _Search(program, index, state, kill_rule).run(use)


def chain_json_dict(chain: UDChain) -> dict:
    """Wire form with pinned field order (golden-file tested)."""
    return {
        "query": {
            "method": str(chain.query.method),
            "instr": chain.query.instr_index,
            "variable": str(chain.query.variable),
        },
        "definitions": [
            {
                "method": str(d.method),
                "file": d.source[0],
                "line": d.source[1],
                "instr": d.instr_index,
                "kind": d.kind,
                "note": d.path_note or None,
            }
            for d in chain.definitions
        ],
        "truncated": chain.truncated,
    }
