"""Seeded random MiniIL program generator.

Emits loader-valid text by construction: call graphs are acyclic (methods
only call later-generated ones), byref arguments always receive addresses
produced in the same block, and a variable is bound to at most one
argument slot per call. Generated programs mix diamonds, loops, byref and
virtual calls, object field traffic, and callees that define a byref
formal on only some paths. `executable=True` restricts output to shapes
the concrete interpreter can run (no arrays, initialized locals, counted
loops).
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from ..model import MethodRef, Program, UseSite, VariableId
from ..parser import parse_program
from ..uses import method_reads


@dataclass(frozen=True)
class GeneratorLimits:
    max_methods: int = 8
    max_blocks_per_method: int = 30
    max_locals: int = 6
    max_class_depth: int = 3
    byref_probability: float = 0.3
    virtual_probability: float = 0.3
    seed: int = 0


class _MethodPlan:
    def __init__(self, index, owner, name, params, byrefs, virtual, override):
        self.index = index
        self.owner = owner
        self.name = name
        self.params = params      # names
        self.byrefs = byrefs      # bool per param
        self.virtual = virtual
        self.override = override
        self.locals: list[str] = []
        self.family: list[int] = [index]  # base + override indexes


class _Emitter:
    def __init__(self, rng: random.Random, executable: bool):
        self.rng = rng
        self.executable = executable
        self.lines: list[str] = []
        self.src_line = 0
        self.label_n = 0

    def stmt(self, *instrs: str) -> None:
        self.src_line += 1
        self.lines.append(f"    .line gen.vb:{self.src_line}")
        for ins in instrs:
            self.lines.append(f"    {ins}")

    def raw(self, text: str) -> None:
        self.lines.append(text)

    def fresh_label(self) -> str:
        self.label_n += 1
        return f"L{self.label_n}"


def generate_random_program(
        limits: GeneratorLimits,
        executable: bool = False) -> tuple[Program, list[UseSite], str]:
    """Returns (program, valid use sites, source text); identical output
    for identical limits."""
    for name in ("max_methods", "max_blocks_per_method", "max_locals",
                 "max_class_depth"):
        if getattr(limits, name) < 1:
            raise ValueError(f"{name} must be >= 1")
    rng = random.Random(limits.seed)

    # class tree
    n_classes = rng.randint(1, min(4, max(1, limits.max_methods)))
    parents: list[str | None] = []
    depths: list[int] = []
    names = [f"K{i}" for i in range(n_classes)]
    for i in range(n_classes):
        choices = [j for j in range(i)
                   if depths[j] + 1 < limits.max_class_depth]
        if i > 0 and choices and rng.random() < 0.6:
            p = rng.choice(choices)
            parents.append(names[p])
            depths.append(depths[p] + 1)
        else:
            parents.append(None)
            depths.append(0)

    def subclass_names(cls: str) -> list[str]:
        out = []
        for i, nm in enumerate(names):
            anc = parents[i]
            while anc is not None:
                if anc == cls:
                    out.append(nm)
                    break
                anc = parents[names.index(anc)]
        return out

    # method plans; overrides are appended after the base slots, so every
    # callee (and every dispatch target) has a higher index than callers
    n_methods = rng.randint(1, limits.max_methods)
    plans: list[_MethodPlan] = []
    for i in range(n_methods):
        owner = rng.choice(names)
        arity = rng.randint(0, 3)
        byrefs = [rng.random() < limits.byref_probability
                  for _ in range(arity)]
        virtual = (rng.random() < limits.virtual_probability
                   and bool(subclass_names(owner)))
        plans.append(_MethodPlan(i, owner, f"m{i}",
                                 [f"p{k}" for k in range(arity)],
                                 byrefs, virtual, False))
    for base in list(plans):
        if not base.virtual:
            continue
        for sub in subclass_names(base.owner):
            if rng.random() < 0.5:
                ov = _MethodPlan(len(plans), sub, base.name,
                                 list(base.params), list(base.byrefs),
                                 False, True)
                plans.append(ov)
                base.family.append(ov.index)

    for plan in plans:
        n_locals = rng.randint(1, limits.max_locals)
        plan.locals = [f"v{k}" for k in range(n_locals)]

    emitter = _Emitter(rng, executable)
    for ci, cname in enumerate(names):
        header = f".class {cname}"
        if parents[ci] is not None:
            header += f" : {parents[ci]}"
        emitter.raw(header)
        emitter.raw("  .field f0")
        emitter.raw("  .field f1")
        emitter.raw("  .method ctor(self)")
        emitter.stmt("ret")
        for plan in plans:
            if plan.owner != cname:
                continue
            _emit_method(emitter, plan, plans, names, rng, executable,
                         limits.max_blocks_per_method)

    text = "\n".join(emitter.lines) + "\n"
    program = parse_program(text)

    use_sites: list[UseSite] = []
    for method in program.methods:
        if method.name == "ctor":
            continue
        for read in method_reads(program, method):
            kind = "arg" if read.is_arg else "local"
            use_sites.append(UseSite(
                method.ref, read.index,
                VariableId(method.ref, kind, read.name, read.selector)))
    return program, use_sites, text


def _emit_method(em: _Emitter, plan: _MethodPlan, plans, classes,
                 rng: random.Random, executable: bool,
                 max_blocks: int) -> None:
    marker = "virtual " if plan.virtual else "override " if plan.override \
        else ""
    params = ", ".join(
        ("byref " if br else "") + p
        for p, br in zip(plan.params, plan.byrefs))
    em.raw(f"  .method {marker}{plan.name}({params})")
    em.raw(f"    .locals {', '.join(plan.locals)}")

    scope = _Scope(plan, classes, rng, executable)
    # initialize locals (all of them when executable, most otherwise; the
    # first always, so a .line precedes any label instruction)
    for k, v in enumerate(plan.locals):
        if executable or k == 0 or rng.random() < 0.7:
            em.stmt(f"ldc {rng.randint(0, 9)}", f"stloc {v}")
            scope.initialized.add(v)
    if scope.obj_class is not None:
        em.stmt(f"newobj {scope.obj_class}::ctor", f"stloc {scope.obj_var}")

    callees = [p for p in plans if min(p.family) > plan.index
               and not p.override]
    budget = rng.randint(1, max_blocks)
    calls_left = 3
    while budget > 0:
        kind = rng.random()
        if kind < 0.45 or budget < 4:
            _emit_straight(em, scope, rng)
            budget -= 1
        elif kind < 0.75:
            _emit_diamond(em, scope, rng)
            budget -= 4
        else:
            _emit_loop(em, scope, rng, executable)
            budget -= 3
        if calls_left and callees and rng.random() < 0.5:
            callee = rng.choice(callees)
            if _emit_call(em, scope, callee, rng):
                calls_left -= 1
    # a guaranteed trailing read keeps every method queryable
    em.stmt(f"ldloc {scope.read_var()}", "pop")
    em.stmt("ret")


class _Scope:
    def __init__(self, plan: _MethodPlan, classes, rng, executable):
        self.plan = plan
        self.rng = rng
        self.executable = executable
        self.initialized: set[str] = set()
        self.protected: set[str] = set()  # live loop counters
        self.obj_class = (rng.choice(classes)
                          if len(plan.locals) >= 2 and rng.random() < 0.5
                          else None)
        self.obj_var = plan.locals[-1] if self.obj_class else None
        self.array_var = (plan.locals[0]
                          if not executable and len(plan.locals) >= 3
                          and rng.random() < 0.3 else None)

    @property
    def plain_locals(self) -> list[str]:
        return [v for v in self.plan.locals
                if v != self.obj_var and v != self.array_var]

    def read_var(self) -> str:
        pool = [v for v in self.plain_locals if v in self.initialized] \
            or [v for v in self.plain_locals] or self.plan.locals
        return self.rng.choice(pool)

    def write_var(self) -> str:
        pool = [v for v in (self.plain_locals or self.plan.locals)
                if v not in self.protected] or self.plan.locals
        v = self.rng.choice(pool)
        self.initialized.add(v)
        return v


def _emit_straight(em: _Emitter, scope: _Scope, rng: random.Random) -> None:
    plan = scope.plan
    choices = ["const", "copy", "read"]
    if plan.params:
        choices += ["argread", "argwrite"]
    if scope.obj_class is not None:
        choices += ["fldstore", "fldload"]
    if scope.array_var is not None:
        choices += ["elemstore", "elemload"]
    choices.append("stind")
    for _ in range(rng.randint(1, 3)):
        what = rng.choice(choices)
        if what == "const":
            em.stmt(f"ldc {rng.randint(0, 9)}", f"stloc {scope.write_var()}")
        elif what == "copy":
            a, b = scope.read_var(), scope.read_var()
            em.stmt(f"ldloc {a}", f"ldloc {b}", "binop",
                    f"stloc {scope.write_var()}")
        elif what == "read":
            em.stmt(f"ldloc {scope.read_var()}", "pop")
        elif what == "argread":
            p = rng.choice(plan.params)
            em.stmt(f"ldarg {p}", f"stloc {scope.write_var()}")
        elif what == "argwrite":
            i = rng.randrange(len(plan.params))
            p = plan.params[i]
            if rng.random() < 0.5:
                em.stmt(f"ldc {rng.randint(0, 9)}", f"starg {p}")
            else:
                em.stmt(f"ldarga {p}", f"ldc {rng.randint(0, 9)}", "stind")
        elif what == "fldstore":
            fld = rng.choice(["f0", "f1"])
            em.stmt(f"ldloc {scope.obj_var}", f"ldc {rng.randint(0, 9)}",
                    f"stfld {scope.obj_class}.{fld}")
        elif what == "fldload":
            fld = rng.choice(["f0", "f1"])
            em.stmt(f"ldloc {scope.obj_var}",
                    f"ldfld {scope.obj_class}.{fld}",
                    f"stloc {scope.write_var()}")
        elif what == "elemstore":
            em.stmt(f"ldloc {scope.array_var}", "ldc 0",
                    f"ldc {rng.randint(0, 9)}", "stelem")
        elif what == "elemload":
            em.stmt(f"ldloc {scope.array_var}", "ldc 0", "ldelem",
                    f"stloc {scope.write_var()}")
        elif what == "stind":
            v = scope.write_var()
            em.stmt(f"ldloca {v}", f"ldc {rng.randint(0, 9)}", "stind")


def _emit_diamond(em: _Emitter, scope: _Scope, rng: random.Random) -> None:
    l_else, l_join = em.fresh_label(), em.fresh_label()
    em.stmt(f"ldloc {scope.read_var()}", f"brfalse {l_else}")
    _emit_straight(em, scope, rng)
    em.stmt(f"br {l_join}")
    em.raw(f"    label {l_else}")
    if rng.random() < 0.7:
        _emit_straight(em, scope, rng)
    em.raw(f"    label {l_join}")


def _emit_loop(em: _Emitter, scope: _Scope, rng: random.Random,
               executable: bool) -> None:
    if executable:
        # counted loop; the counter must stay out of reach of body writes
        candidates = [v for v in scope.plain_locals
                      if v not in scope.protected]
        if len(candidates) < 2:
            _emit_straight(em, scope, rng)
            return
        head, exit_ = em.fresh_label(), em.fresh_label()
        counter = rng.choice(candidates)
        scope.initialized.add(counter)
        scope.protected.add(counter)
        em.stmt(f"ldc {rng.randint(1, 3)}", f"stloc {counter}")
        em.raw(f"    label {head}")
        em.stmt(f"ldloc {counter}", f"brfalse {exit_}")
        _emit_straight(em, scope, rng)
        em.stmt(f"ldloc {counter}", "ldc -1", "binop", f"stloc {counter}")
        em.stmt(f"br {head}")
        scope.protected.discard(counter)
    else:
        head, exit_ = em.fresh_label(), em.fresh_label()
        em.raw(f"    label {head}")
        em.stmt(f"ldloc {scope.read_var()}", f"brfalse {exit_}")
        _emit_straight(em, scope, rng)
        em.stmt(f"br {head}")
    em.raw(f"    label {exit_}")


def _emit_call(em: _Emitter, scope: _Scope, callee: _MethodPlan,
               rng: random.Random) -> bool:
    plan = scope.plan
    addressable = list(scope.plain_locals)
    byval_pool = [v for v in scope.plain_locals
                  if v in scope.initialized or not scope.executable]
    if scope.obj_var is not None and not scope.executable:
        # callees do integer arithmetic on byval params, so objects only
        # flow into calls in analysis-only programs
        byval_pool.append(scope.obj_var)
    args: list[list[str]] = []
    used: set[str] = set()
    for i, byref in enumerate(callee.byrefs):
        if byref:
            pool = [v for v in addressable if v not in used]
            pool += [p for p in plan.params if p not in used]
            if not pool:
                return False
            pick = rng.choice(pool)
            used.add(pick)
            if pick in plan.params:
                args.append([f"ldarga {pick}"])
            else:
                args.append([f"ldloca {pick}"])
        else:
            pool = [v for v in byval_pool if v not in used]
            if pool and rng.random() < 0.7:
                pick = rng.choice(pool)
                used.add(pick)
                args.append([f"ldloc {pick}"])
            else:
                args.append([f"ldc {rng.randint(0, 9)}"])
    opcode = "callvirt" if callee.virtual else "call"
    flat = [ins for group in args for ins in group]
    target = f"{callee.owner}::{callee.name}"
    if rng.random() < 0.5:
        em.stmt(*flat, f"{opcode} {target}", "pop")
    else:
        em.stmt(*flat, f"{opcode} {target}", f"stloc {scope.write_var()}")
    return True
