"""Per-method control flow graphs built with conventional leader marking.

Construction is a pure function of the method body; callers memoize
(see duct.index). Blocks partition the body in instruction order, so a
block's instructions execute strictly sequentially.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import BRANCH_OPCODES, Instruction, MethodDef, MethodRef


class CfgError(Exception):
    pass


@dataclass(frozen=True)
class BasicBlock:
    id: int
    start: int
    end: int  # half-open [start, end)
    successors: tuple[int, ...]
    predecessors: tuple[int, ...]


@dataclass(frozen=True)
class Cfg:
    method: MethodRef
    blocks: tuple[BasicBlock, ...]
    entry: int
    exits: tuple[int, ...]

    def block_at(self, instr_index: int) -> BasicBlock:
        for b in self.blocks:
            if b.start <= instr_index < b.end:
                return b
        raise CfgError(f"instruction index {instr_index} out of range")


def leader_indexes(body: list[Instruction]) -> list[int]:
    """Leaders: index 0, every label, every instruction after a branch or
    ret. Labels are targeted by name, so each one begins a block."""
    leaders = {0}
    for i, ins in enumerate(body):
        if ins.opcode == "label":
            leaders.add(i)
        if ins.opcode in BRANCH_OPCODES or ins.opcode == "ret":
            if i + 1 < len(body):
                leaders.add(i + 1)
    return sorted(leaders)


def build_cfg(method: MethodDef) -> Cfg:
    body = method.body
    if not body:
        raise CfgError(f"{method.ref}: empty body")
    leaders = leader_indexes(body)
    starts = {start: bid for bid, start in enumerate(leaders)}
    bounds = leaders + [len(body)]
    label_block = {
        ins.operand: starts[i]
        for i, ins in enumerate(body)
        if ins.opcode == "label"
    }

    succs: list[list[int]] = [[] for _ in leaders]
    exits = []
    for bid in range(len(leaders)):
        start, end = bounds[bid], bounds[bid + 1]
        last = body[end - 1]
        if last.opcode == "ret":
            exits.append(bid)
            continue
        targets = set()
        if last.opcode in BRANCH_OPCODES:
            targets.add(label_block[last.operand])
        if last.opcode != "br":  # conditional branches fall through
            if end >= len(body):
                raise CfgError(f"{method.ref}: control falls off method end")
            targets.add(starts[end])
        succs[bid] = sorted(targets)

    preds: list[list[int]] = [[] for _ in leaders]
    for bid, ts in enumerate(succs):
        for t in ts:
            preds[t].append(bid)

    reached = {0}
    stack = [0]
    while stack:
        for t in succs[stack.pop()]:
            if t not in reached:
                reached.add(t)
                stack.append(t)
    for bid in range(len(leaders)):
        if bid not in reached:
            first = body[bounds[bid]]
            where = (
                f"label {first.operand}"
                if first.opcode == "label"
                else f"instruction {bounds[bid]}"
            )
            raise CfgError(f"{method.ref}: unreachable block at {where}")

    blocks = tuple(
        BasicBlock(
            id=bid,
            start=bounds[bid],
            end=bounds[bid + 1],
            successors=tuple(succs[bid]),
            predecessors=tuple(sorted(preds[bid])),
        )
        for bid in range(len(leaders))
    )
    return Cfg(method=method.ref, blocks=blocks, entry=0, exits=tuple(exits))


def predecessors(cfg: Cfg, block_id: int) -> list[int]:
    if not 0 <= block_id < len(cfg.blocks):
        raise CfgError(f"unknown block id {block_id}")
    return list(cfg.blocks[block_id].predecessors)


def dump_edges(cfg: Cfg) -> str:
    """Deterministic textual edge list, used by --dump-cfg and goldens."""
    lines = [f"cfg {cfg.method}"]
    lines.append(f"entry {cfg.entry}")
    lines.append("exits " + (",".join(map(str, cfg.exits)) or "-"))
    for b in cfg.blocks:
        succ = ",".join(map(str, b.successors)) or "-"
        lines.append(f"block {b.id} [{b.start},{b.end}) -> {succ}")
    return "\n".join(lines) + "\n"
