from __future__ import annotations

from pathlib import Path

import pytest

from duct.index import build_program_index
from duct.parser import parse_program

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURES = REPO_ROOT / "fixtures"
GOLDENS = Path(__file__).resolve().parent / "goldens"


@pytest.fixture(scope="session")
def earth_text() -> str:
    return (FIXTURES / "earth.mil").read_text()


@pytest.fixture(scope="session")
def earth_program(earth_text):
    return parse_program(earth_text)


@pytest.fixture()
def earth_index(earth_program):
    return build_program_index(earth_program)


LOOP_MIL = """
.class App
  .method main()
    .locals x, i
    .line loop.vb:1
    ldc 1
    stloc x
    .line loop.vb:2
    ldc 3
    stloc i
    label HEAD
    .line loop.vb:3
    ldloc i
    brfalse EXIT
    .line loop.vb:4
    ldc 2
    stloc x
    .line loop.vb:5
    ldloc i
    ldc -1
    binop
    stloc i
    br HEAD
    label EXIT
    .line loop.vb:6
    ldloc x
    pop
    ret
"""

MUTUAL_MIL = """
.class App
  .method ping(byref x)
    .locals t
    .line m.vb:1
    ldc 1
    stloc t
    .line m.vb:2
    ldloc t
    brfalse OUT
    .line m.vb:3
    ldarga x
    call App::pong
    pop
    label OUT
    .line m.vb:4
    ldarg x
    pop
    ret
  .method pong(byref y)
    .locals u
    .line m.vb:5
    ldc 0
    stloc u
    .line m.vb:6
    ldloc u
    brfalse SKIP
    .line m.vb:7
    ldarga y
    call App::ping
    pop
    br DONE
    label SKIP
    .line m.vb:8
    ldc 7
    starg y
    label DONE
    .line m.vb:9
    ret
  .method main()
    .locals q
    .line m.vb:10
    ldloca q
    call App::ping
    pop
    .line m.vb:11
    ldloc q
    pop
    ret
"""

SELFREC_MIL = """
.class App
  .method fill(byref x)
    .locals c
    .line s.vb:1
    ldc 1
    stloc c
    .line s.vb:2
    ldloc c
    brfalse BASE
    .line s.vb:3
    ldarga x
    call App::fill
    pop
    br DONE
    label BASE
    .line s.vb:4
    ldc 5
    starg x
    label DONE
    .line s.vb:5
    ldarg x
    pop
    ret
"""


@pytest.fixture(scope="session")
def loop_program():
    return parse_program(LOOP_MIL)


@pytest.fixture(scope="session")
def mutual_program():
    return parse_program(MUTUAL_MIL)


@pytest.fixture(scope="session")
def selfrec_program():
    return parse_program(SELFREC_MIL)
