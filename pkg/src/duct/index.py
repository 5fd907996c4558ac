"""Whole-program index: one linear sweep for the call graph, class
hierarchy from declarations, and the memoization layer for lazily built
CFGs, block simulations, and partial scan results.

Cache contents never change a query answer; they only avoid rework.
Writes are idempotent (everything cached is a pure function of the
immutable Program), so concurrent readers need no locking.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import absstack
from .cfg import Cfg, build_cfg
from .model import (
    CALL_OPCODES,
    Instruction,
    MethodDef,
    MethodRef,
    Program,
)


@dataclass(frozen=True)
class CallEdge:
    caller: MethodRef
    site: int  # call-site instruction index
    callee: MethodRef
    static: bool  # True for call/newobj; callvirt edges dispatch at query time


@dataclass
class Statistics:
    instructions_visited: int = 0
    methods_scanned: int = 0
    blocks_visited: int = 0
    visited_states: int = 0
    cache_hits: int = 0
    cfg_builds: int = 0

    def as_dict(self) -> dict[str, int]:
        return {
            "instructions_visited": self.instructions_visited,
            "methods_scanned": self.methods_scanned,
            "blocks_visited": self.blocks_visited,
            "visited_states": self.visited_states,
            "cache_hits": self.cache_hits,
            "cfg_builds": self.cfg_builds,
        }


class CallGraph:
    def __init__(self, edges: list[CallEdge]):
        self.edges = edges
        self._static_to: dict[MethodRef, list[CallEdge]] = {}
        self._virtual_to: dict[MethodRef, list[CallEdge]] = {}
        for e in edges:
            table = self._static_to if e.static else self._virtual_to
            table.setdefault(e.callee, []).append(e)

    def static_edges_to(self, ref: MethodRef) -> list[CallEdge]:
        return self._static_to.get(ref, [])

    def virtual_edges_to(self, ref: MethodRef) -> list[CallEdge]:
        return self._virtual_to.get(ref, [])


def build_call_graph(program: Program,
                     stats: Statistics | None = None) -> CallGraph:
    """Single syntactic pass; visits each instruction exactly once."""
    edges = []
    for method in program.methods:
        for i, ins in enumerate(method.body):
            if stats is not None:
                stats.instructions_visited += 1
            if ins.opcode in CALL_OPCODES:
                edges.append(CallEdge(
                    caller=method.ref,
                    site=i,
                    callee=ins.operand,
                    static=ins.opcode != "callvirt",
                ))
    return CallGraph(edges)


class ClassHierarchy:
    def __init__(self, program: Program):
        self.parent = {c.name: c.parent for c in program.classes}
        self._program = program
        self._subclasses: dict[str, set[str]] = {
            c.name: set() for c in program.classes}
        for c in program.classes:
            anc = c.parent
            while anc is not None:
                self._subclasses[anc].add(c.name)
                anc = self.parent[anc]

    def subclasses(self, class_name: str) -> set[str]:
        return self._subclasses[class_name]

    def overriders(self, ref: MethodRef) -> list[MethodDef]:
        """Every override of `ref` in every transitive subclass, in
        program declaration order."""
        base = self._program.method(ref)
        subs = self._subclasses[ref.owner]
        return [
            m for m in self._program.methods
            if m.override_flag and m.owner in subs
            and m.name == base.name and m.arity == base.arity
        ]

    def virtual_ancestors(self, method: MethodDef) -> list[MethodRef]:
        """Same-name, same-arity virtual methods on strict ancestors."""
        out = []
        for anc in self._program.ancestors(method.owner):
            ref = MethodRef(anc, method.name)
            if self._program.has_method(ref):
                cand = self._program.method(ref)
                if cand.arity == method.arity and (
                        cand.virtual_flag or cand.override_flag):
                    out.append(ref)
        return out


def build_class_hierarchy(program: Program) -> ClassHierarchy:
    return ClassHierarchy(program)


def dispatch_targets(program: Program, hierarchy: ClassHierarchy,
                     ins: Instruction) -> list[MethodDef]:
    """Possible callees of a callvirt: the named method plus overriding
    methods in each subclass."""
    named = program.method(ins.operand)
    if not (named.virtual_flag or named.override_flag):
        raise ValueError(f"{named.ref} is not virtual")
    return [named] + hierarchy.overriders(named.ref)


def callsites_of(graph: CallGraph, hierarchy: ClassHierarchy,
                 program: Program,
                 method: MethodDef) -> list[tuple[MethodRef, int]]:
    """Call sites that may invoke `method`: static edges to it, plus
    callvirt edges to it or to any virtual method it overrides."""
    sites = [(e.caller, e.site) for e in graph.static_edges_to(method.ref)]
    virtual_names = [method.ref] + hierarchy.virtual_ancestors(method)
    for ref in virtual_names:
        sites.extend(
            (e.caller, e.site) for e in graph.virtual_edges_to(ref))
    return sorted(set(sites))


@dataclass
class AnalysisCache:
    cfg_memo: dict = field(default_factory=dict)
    sim_memo: dict = field(default_factory=dict)
    scan_memo: dict = field(default_factory=dict)  # partial chain results
    must_define_memo: dict = field(default_factory=dict)
    statistics: Statistics = field(default_factory=Statistics)


class ProgramIndex:
    """Immutable program plus the call graph, hierarchy, and caches."""

    def __init__(self, program: Program):
        self.program = program
        self.cache = AnalysisCache()
        self.call_graph = build_call_graph(program, self.cache.statistics)
        self.hierarchy = build_class_hierarchy(program)

    @property
    def stats(self) -> Statistics:
        return self.cache.statistics

    def cfg(self, ref: MethodRef) -> Cfg:
        cached = self.cache.cfg_memo.get(ref)
        if cached is not None:
            self.cache.statistics.cache_hits += 1
            return cached
        built = build_cfg(self.program.method(ref))
        self.cache.statistics.cfg_builds += 1
        self.cache.cfg_memo[ref] = built
        return built

    def sim_states(self, method: MethodDef, block_start: int,
                   block_end: int) -> list[list[absstack.Slot]]:
        key = (method.ref, block_start)
        cached = self.cache.sim_memo.get(key)
        if cached is not None:
            self.cache.statistics.cache_hits += 1
            return cached
        states, _ = absstack.simulate_range(
            self.program, method, block_start, block_end)
        self.cache.sim_memo[key] = states
        return states

    def store_target(self, method: MethodDef, cfg: Cfg,
                     instr_index: int) -> absstack.StoreTarget:
        ins = method.body[instr_index]
        if ins.opcode == "stloc":
            return absstack.StoreTarget("direct", ins.operand, False)
        if ins.opcode == "starg":
            return absstack.StoreTarget("direct", ins.operand, True)
        block = cfg.block_at(instr_index)
        states = self.sim_states(method, block.start, block.end)
        return absstack.resolve_with_states(
            method, states[instr_index - block.start], instr_index)

    def call_args(self, method: MethodDef, cfg: Cfg,
                  instr_index: int) -> list[absstack.Slot]:
        block = cfg.block_at(instr_index)
        states = self.sim_states(method, block.start, block.end)
        return absstack.call_arg_slots(
            self.program, method, states[instr_index - block.start],
            instr_index)


def build_program_index(program: Program) -> ProgramIndex:
    return ProgramIndex(program)
