from duct import absstack
from duct.cfg import build_cfg
from duct.parser import parse_program


def _setup(text, name="main"):
    program = parse_program(text)
    method = next(m for m in program.methods if m.name == name)
    return program, method, build_cfg(method)


def test_ldc_pushes_const():
    program, method, cfg = _setup("""
.class App
  .method main()
    .line t.vb:1
    ldc 5
    pop
    ret
""")
    states, exit_stack = absstack.simulate_block(program, method,
                                                 cfg.blocks[0])
    assert states[1][0][0].tag == absstack.TAG_CONST
    assert exit_stack == []


def test_stind_sees_address_and_const():
    program, method, cfg = _setup("""
.class App
  .method main()
    .locals a
    .line t.vb:1
    ldloca a
    ldc 5
    stind
    ret
""")
    states, _ = absstack.simulate_block(program, method, cfg.blocks[0])
    addr, const = states[2][0][0], states[2][1][0]
    assert addr.tag == absstack.TAG_ADDR and addr.name == "a"
    assert const.tag == absstack.TAG_CONST
    target = absstack.resolve_store_target(program, method, cfg, 2)
    assert target == absstack.StoreTarget("direct", "a", False)


def test_binop_result_untracked():
    program, method, cfg = _setup("""
.class App
  .method main(p)
    .line t.vb:1
    ldarg p
    ldc 1
    binop
    pop
    ret
""")
    _, _ = absstack.simulate_block(program, method, cfg.blocks[0])
    states, _ = absstack.simulate_range(program, method, 0, 4)
    assert states[3][0][0].tag == absstack.TAG_UNKNOWN


def test_stloc_resolves_without_simulation():
    program, method, cfg = _setup("""
.class App
  .method main()
    .locals a
    .line t.vb:1
    ldc 1
    stloc a
    ret
""")
    assert absstack.resolve_store_target(program, method, cfg, 1) == \
        absstack.StoreTarget("direct", "a", False)


def test_stind_through_ldarga_is_direct_arg():
    program, method, cfg = _setup("""
.class App
  .method main(byref p)
    .line t.vb:1
    ldarga p
    ldc 5
    stind
    ret
""")
    assert absstack.resolve_store_target(program, method, cfg, 2) == \
        absstack.StoreTarget("direct", "p", True)


def test_cross_block_address_degrades_to_unknown():
    program, method, cfg = _setup("""
.class App
  .method main()
    .locals a
    .line t.vb:1
    ldloca a
    br NEXT
    label NEXT
    .line t.vb:2
    ldc 5
    stind
    ret
""")
    assert absstack.resolve_store_target(program, method, cfg, 4) == \
        absstack.StoreTarget("unknown")


def test_stfld_through_variable_base():
    program, method, cfg = _setup("""
.class App
  .field f
  .method main()
    .locals o
    .line t.vb:1
    newobj App::ctor
    stloc o
    ldloc o
    ldc 1
    stfld App.f
    ret
  .method ctor(self)
    .line t.vb:2
    ret
""")
    assert absstack.resolve_store_target(program, method, cfg, 4) == \
        absstack.StoreTarget("field", "o", False, "f")


def test_dup_copies_address_exactly():
    program, method, cfg = _setup("""
.class App
  .method main()
    .locals a
    .line t.vb:1
    ldloca a
    dup
    ldc 1
    stind
    ldc 2
    stind
    ret
""")
    assert absstack.resolve_store_target(program, method, cfg, 3) == \
        absstack.StoreTarget("direct", "a", False)
    assert absstack.resolve_store_target(program, method, cfg, 5) == \
        absstack.StoreTarget("direct", "a", False)


def test_simulation_is_pure_and_depth_consistent():
    program, method, cfg = _setup("""
.class App
  .method main()
    .locals a
    .line t.vb:1
    ldc 1
    ldc 2
    brtrue T
    pop
    ret
    label T
    .line t.vb:2
    stloc a
    ret
""")
    for block in cfg.blocks:
        first, exit1 = absstack.simulate_block(program, method, block)
        second, exit2 = absstack.simulate_block(program, method, block)
        assert first == second and exit1 == exit2
        if method.body[block.end - 1].opcode != "ret":
            next_depth = method.stack_depth[block.end]
            assert len(exit1) == next_depth
