"""Canonical MiniIL printer. Output is byte-stable for a fixed Program
and re-parses to a structurally identical Program."""

from __future__ import annotations

from .model import Program


def print_program(program: Program) -> str:
    out: list[str] = []
    for ci, cls in enumerate(program.classes):
        if ci:
            out.append("")
        header = f".class {cls.name}"
        if cls.parent is not None:
            header += f" : {cls.parent}"
        out.append(header)
        for fld in cls.fields:
            out.append(f"  .field {fld}")
        for m in cls.methods:
            marker = ("virtual " if m.virtual_flag
                      else "override " if m.override_flag else "")
            params = ", ".join(
                ("byref " if p.byref else "") + p.name for p in m.params)
            out.append(f"  .method {marker}{m.name}({params})")
            if m.locals:
                out.append(f"    .locals {', '.join(m.locals)}")
            cur = None
            for i, ins in enumerate(m.body):
                loc = m.line_map[i]
                if loc != cur:
                    out.append(f"    .line {loc[0]}:{loc[1]}")
                    cur = loc
                out.append(f"    {ins}")
    return "\n".join(out) + "\n"
