from duct.chains import (
    TraversalState,
    all_paths_define,
    chain_json_dict,
    compute_ud_chain,
)
from duct.index import build_program_index
from duct.model import MethodRef
from duct.parser import parse_program
from duct.uses import resolve_use_site


def _query(text, file, line, var, **kwargs):
    program = parse_program(text)
    index = build_program_index(program)
    use = resolve_use_site(program, file, line, var)
    chain = compute_ud_chain(program, index, use, **kwargs)
    return program, index, chain


def _sites(chain):
    return {(str(d.method), d.instr_index) for d in chain.definitions}


def test_same_block_definition_is_unique():
    _, _, chain = _query("""
.class App
  .method main()
    .locals x
    .line t.vb:1
    ldc 9
    stloc x
    .line t.vb:2
    ldc 1
    stloc x
    .line t.vb:3
    ldloc x
    pop
    ret
""", "t.vb", 3, "x")
    assert _sites(chain) == {("App::main", 3)}
    assert chain.definitions[0].kind == "direct-store"


def test_diamond_yields_both_arms():
    _, _, chain = _query("""
.class App
  .method main()
    .locals c, x
    .line t.vb:1
    ldc 0
    stloc x
    .line t.vb:2
    ldloc c
    brtrue T
    .line t.vb:3
    ldc 1
    stloc x
    br J
    label T
    .line t.vb:4
    ldc 2
    stloc x
    label J
    .line t.vb:5
    ldloc x
    pop
    ret
""", "t.vb", 5, "x")
    assert len(chain.definitions) == 2
    assert {d.source[1] for d in chain.definitions} == {3, 4}


def test_uninitialized_local_empty_chain():
    _, _, chain = _query("""
.class App
  .method main()
    .locals x
    .line t.vb:1
    ldloc x
    pop
    ret
""", "t.vb", 1, "x")
    assert chain.definitions == ()
    assert not chain.truncated


BYREF_FULL_KILL = """
.class App
  .method init(byref p)
    .line k.vb:1
    ldc 7
    starg p
    ret
  .method main()
    .locals x
    .line k.vb:2
    ldc 1
    stloc x
    .line k.vb:3
    ldloca x
    call App::init
    pop
    .line k.vb:4
    ldloc x
    pop
    ret
"""


def test_full_path_callee_definition_kills():
    _, _, chain = _query(BYREF_FULL_KILL, "k.vb", 4, "x")
    assert _sites(chain) == {("App::init", 1)}
    d = chain.definitions[0]
    assert d.kind == "byref-callee-store"
    assert "via call App::init" in d.path_note


PARTIAL_KILL = """
.class App
  .method maybe(byref p, q)
    .line k.vb:1
    ldarg q
    brfalse SKIP
    .line k.vb:2
    ldc 7
    starg p
    label SKIP
    .line k.vb:3
    ret
  .method main()
    .locals x, c
    .line k.vb:4
    ldc 1
    stloc x
    .line k.vb:5
    ldloca x
    ldloc c
    call App::maybe
    pop
    .line k.vb:6
    ldloc x
    pop
    ret
"""


def test_partial_path_callee_reports_and_continues():
    _, _, chain = _query(PARTIAL_KILL, "k.vb", 6, "x")
    # the callee's one-arm definition AND the caller's earlier store
    assert _sites(chain) == {("App::maybe", 3), ("App::main", 1)}


VIRTUAL_NON_UNANIMOUS = """
.class Base
  .method virtual fill(byref p)
    .line v.vb:1
    ldc 1
    starg p
    ret
.class A : Base
  .method override fill(byref p)
    .line v.vb:2
    ldc 2
    starg p
    ret
.class B : Base
  .method override fill(byref p)
    .line v.vb:3
    ret
.class App
  .method main()
    .locals x
    .line v.vb:4
    ldc 0
    stloc x
    .line v.vb:5
    ldloca x
    callvirt Base::fill
    pop
    .line v.vb:6
    ldloc x
    pop
    ret
"""


def test_virtual_kill_requires_unanimity():
    _, _, chain = _query(VIRTUAL_NON_UNANIMOUS, "v.vb", 6, "x")
    # defining overrides reported; the non-defining one breaks the kill,
    # so the caller-side store remains visible
    assert _sites(chain) == {
        ("Base::fill", 1), ("A::fill", 1), ("App::main", 1)}


VIRTUAL_UNANIMOUS = VIRTUAL_NON_UNANIMOUS.replace(
    """.class B : Base
  .method override fill(byref p)
    .line v.vb:3
    ret
""",
    """.class B : Base
  .method override fill(byref p)
    .line v.vb:3
    ldc 3
    starg p
    ret
""")


def test_virtual_kill_when_all_targets_define():
    _, _, chain = _query(VIRTUAL_UNANIMOUS, "v.vb", 6, "x")
    assert _sites(chain) == {
        ("Base::fill", 1), ("A::fill", 1), ("B::fill", 1)}


def test_entry_reached_continues_at_callsites(earth_program, earth_index):
    use = resolve_use_site(earth_program, "earth.vb", 22, "Q")
    chain = compute_ud_chain(earth_program, earth_index, use)
    assert [(str(d.method), d.source) for d in chain.definitions] == \
        [("Earth::JDE_FOR", ("earth.vb", 17))]


def test_uncalled_method_parameter_empty():
    _, _, chain = _query("""
.class App
  .method lonely(p)
    .line t.vb:1
    ldarg p
    pop
    ret
""", "t.vb", 1, "p")
    assert chain.definitions == ()


def test_constant_argument_reported_at_call_site():
    _, _, chain = _query("""
.class App
  .method callee(p)
    .line t.vb:1
    ldarg p
    pop
    ret
  .method main()
    .line t.vb:2
    ldc 42
    call App::callee
    pop
    ret
""", "t.vb", 1, "p")
    assert len(chain.definitions) == 1
    d = chain.definitions[0]
    assert str(d.method) == "App::main" and d.source == ("t.vb", 2)
    assert d.path_note == "argument at call site"


def test_byval_variable_argument_chains_into_caller():
    _, _, chain = _query("""
.class App
  .method callee(p)
    .line t.vb:1
    ldarg p
    pop
    ret
  .method main()
    .locals v
    .line t.vb:2
    ldc 4
    stloc v
    .line t.vb:3
    ldloc v
    call App::callee
    pop
    ret
""", "t.vb", 1, "p")
    assert _sites(chain) == {("App::main", 1)}


STELEM_PROGRAM = """
.class App
  .method main()
    .locals arr, x
    .line a.vb:1
    ldc 0
    stloc arr
    .line a.vb:2
    ldloc arr
    ldc 0
    ldc 5
    stelem
    .line a.vb:3
    ldloc arr
    ldc 0
    ldelem
    stloc x
    ret
"""


def test_element_store_reported_without_killing():
    _, _, chain = _query(STELEM_PROGRAM, "a.vb", 3, "arr[]")
    # the element store AND the earlier whole-array definition both reach
    kinds = {d.kind for d in chain.definitions}
    assert _sites(chain) == {("App::main", 1), ("App::main", 5)}
    assert kinds == {"direct-store", "element-store"}


def test_field_store_kills_exact_selector_only():
    text = """
.class Box
  .field f
  .field g
  .method New(self)
    .line f.vb:1
    ret
.class App
  .method main()
    .locals o, x
    .line f.vb:2
    newobj Box::New
    stloc o
    .line f.vb:3
    ldloc o
    ldc 1
    stfld Box.g
    .line f.vb:4
    ldloc o
    ldc 2
    stfld Box.f
    .line f.vb:5
    ldloc o
    ldfld Box.f
    stloc x
    ret
"""
    _, _, chain = _query(text, "f.vb", 5, "o.f")
    # exact f store kills; the g store does not match; stloc o unreachable
    assert _sites(chain) == {("App::main", 7)}

    _, _, whole = _query(text, "f.vb", 5, "o")
    # whole-object query: field stores reported but only stloc o kills
    assert _sites(whole) == {
        ("App::main", 1), ("App::main", 4), ("App::main", 7)}


def test_unknown_address_reported_never_kills():
    _, _, chain = _query("""
.class App
  .method main()
    .locals a, x
    .line u.vb:1
    ldc 1
    stloc x
    .line u.vb:2
    ldloca x
    br NEXT
    label NEXT
    .line u.vb:3
    ldc 5
    stind
    .line u.vb:4
    ldloc x
    pop
    ret
""", "u.vb", 4, "x")
    kinds = {d.kind for d in chain.definitions}
    assert kinds == {"direct-store", "unknown-address"}


def test_budget_truncates_without_exception(mutual_program):
    index = build_program_index(mutual_program)
    use = resolve_use_site(mutual_program, "m.vb", 11, "q")
    state = TraversalState(budget=1)
    chain = compute_ud_chain(mutual_program, index, use, state=state)
    assert chain.truncated


def test_termination_on_recursion(mutual_program, selfrec_program,
                                  loop_program):
    for program, file, line, var in [
        (loop_program, "loop.vb", 6, "x"),
        (mutual_program, "m.vb", 11, "q"),
        (selfrec_program, "s.vb", 5, "x"),
    ]:
        index = build_program_index(program)
        use = resolve_use_site(program, file, line, var)
        state = TraversalState()
        chain = compute_ud_chain(program, index, use, state=state)
        assert not chain.truncated
        assert state.states < 10_000
        assert chain.definitions  # all three have reachable definitions


def test_all_paths_define_examples():
    program = parse_program(PARTIAL_KILL)
    index = build_program_index(program)
    maybe = program.method(MethodRef("App", "maybe"))
    assert not all_paths_define(program, index, maybe, frozenset({"p"}))

    program2 = parse_program(BYREF_FULL_KILL)
    index2 = build_program_index(program2)
    init = program2.method(MethodRef("App", "init"))
    assert all_paths_define(program2, index2, init, frozenset({"p"}))


def test_all_paths_define_loop_with_bypass():
    text = """
.class App
  .method m(byref p, c)
    .line l.vb:1
    label H
    ldarg c
    brfalse OUT
    .line l.vb:2
    ldc 1
    starg p
    br H
    label OUT
    .line l.vb:3
    ret
"""
    program = parse_program(text)
    index = build_program_index(program)
    m = program.method(MethodRef("App", "m"))
    assert not all_paths_define(program, index, m, frozenset({"p"}))


def test_deterministic_serialization(earth_program):
    results = []
    for _ in range(2):
        index = build_program_index(earth_program)
        use = resolve_use_site(earth_program, "earth.vb", 17, "W")
        import json
        results.append(json.dumps(
            chain_json_dict(compute_ud_chain(earth_program, index, use))))
    assert results[0] == results[1]


def test_demand_driven_locality():
    text = """
.class App
  .method main()
    .locals x
    .line d.vb:1
    ldc 1
    stloc x
    .line d.vb:2
    ldloc x
    pop
    ret
  .method unrelated()
    .locals y
    .line d.vb:3
    ldc 2
    stloc y
    .line d.vb:4
    ldloc y
    pop
    call App::leafer
    pop
    ret
  .method leafer()
    .line d.vb:5
    ret
"""
    program = parse_program(text)
    index = build_program_index(program)
    use = resolve_use_site(program, "d.vb", 2, "x")
    compute_ud_chain(program, index, use)
    # answer lies inside main: no other method's CFG may be built
    assert index.stats.cfg_builds == 1
