import pytest

from duct.model import MethodRef, ResolveError
from duct.parser import parse_program
from duct.uses import line_tokens, method_reads, resolve_use_site


def test_resolve_w_at_frac_res_line(earth_program):
    use = resolve_use_site(earth_program, "earth.vb", 17, "W")
    assert use.method == MethodRef("Earth", "JDE_FOR")
    ins = earth_program.method(use.method).body[use.instr_index]
    assert ins.opcode == "ldloc" and ins.operand == "W"
    assert use.variable.kind == "local"


def test_resolve_unknown_variable(earth_program):
    with pytest.raises(ResolveError) as err:
        resolve_use_site(earth_program, "earth.vb", 17, "Zz")
    assert err.value.code == "not-in-scope"


def test_resolve_write_only_line(earth_program):
    # line 5 assigns INTERFACE_DATE from a constant; nothing reads it there
    # (independent confirmation: no load of the name maps to that line)
    for method in earth_program.methods:
        for i, loc in enumerate(method.line_map):
            if loc == ("earth.vb", 5):
                ins = method.body[i]
                assert not (ins.opcode in ("ldloc", "ldarg", "ldloca",
                                           "ldarga")
                            and ins.operand == "INTERFACE_DATE")
    with pytest.raises(ResolveError) as err:
        resolve_use_site(earth_program, "earth.vb", 5, "INTERFACE_DATE")
    assert err.value.code == "never-read-on-line"


def test_resolve_no_method_for_line(earth_program):
    with pytest.raises(ResolveError) as err:
        resolve_use_site(earth_program, "earth.vb", 2, "Q")
    assert err.value.code == "no-method-for-line"


def test_resolve_unknown_file(earth_program):
    with pytest.raises(ResolveError) as err:
        resolve_use_site(earth_program, "mars.vb", 17, "W")
    assert err.value.code == "unknown-file"


def test_last_read_rule(earth_program):
    # line 40 reads Q twice; the default pick is the later instruction
    use = resolve_use_site(earth_program, "earth.vb", 40, "Q")
    first = resolve_use_site(earth_program, "earth.vb", 40, "Q",
                             occurrence=1)
    assert use.instr_index > first.instr_index


def test_byref_call_argument_counts_as_read(earth_program):
    # line 7 passes Q byref to JDE_FOR; the call instruction is its read
    use = resolve_use_site(earth_program, "earth.vb", 7, "Q")
    ins = earth_program.method(use.method).body[use.instr_index]
    assert ins.opcode == "call"


def test_resolution_independent_of_declaration_order(earth_text):
    # reorder the classes; resolution must not change
    chunks = earth_text.split(".class ")
    reordered = ".class ".join(
        [chunks[0]] + [chunks[3], chunks[1], chunks[2]])
    program = parse_program(reordered)
    use = resolve_use_site(program, "earth.vb", 17, "W")
    assert use.method == MethodRef("Earth", "JDE_FOR")
    ins = program.method(use.method).body[use.instr_index]
    assert ins.opcode == "ldloc" and ins.operand == "W"


def test_field_selector_reads(earth_program):
    method = earth_program.method(
        MethodRef("Earth", "ComputeButton_Click"))
    reads = method_reads(earth_program, method)
    # Text2.Text = Q on line 9: direct reads of Text2 and Q
    line9 = [r for r in reads
             if method.line_map[r.index] == ("earth.vb", 9)]
    assert {(r.name, r.selector) for r in line9} == {
        ("Text2", ()), ("Q", ())}


def test_field_selector_query():
    program = parse_program("""
.class Box
  .field f
  .method New(self)
    .line b.vb:1
    ret
.class App
  .method main()
    .locals o, x
    .line b.vb:2
    newobj Box::New
    stloc o
    .line b.vb:3
    ldloc o
    ldfld Box.f
    stloc x
    ret
""")
    use = resolve_use_site(program, "b.vb", 3, "o.f")
    ins = program.method(use.method).body[use.instr_index]
    assert ins.opcode == "ldfld"
    assert use.variable.selector == ("field", "f")


def test_line_tokens(earth_program):
    tokens = line_tokens(earth_program, "earth.vb")
    assert tokens[17] == ["Q", "W"]
    assert "Q" in tokens[8]  # byref argument to EARTH_LBR_FOR
    assert 5 not in tokens  # write-only line has no clickable reads
