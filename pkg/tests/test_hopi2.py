import random

import pytest
from hypothesis import given

from hopsi.hopi2 import (
    HOPI2,
    UNIT,
    Ch,
    ChIn,
    ChOut,
    InTag,
    Level,
    LevelViolation,
    OutTag,
    Plain,
    Terminated,
    compose,
    embed_judgment,
    gen_well_typed,
    h2_size,
    infer_level,
    omega,
    termination_probe,
)
from hopsi.instance import IllTyped
from hopsi.parser import parse_source
from hopsi.typecheck import is_well_typed

from .conftest import rngs

DECLS = "a : ch^2\nb : ch^1\n"


def level(body):
    src = parse_source(DECLS + body, "hopi2")
    return infer_level(dict(src.declarations), src.body)


def test_levels_of_small_processes():
    assert level("0") == 0
    assert level("'b<0>.0") == 1
    assert level("'a<'b<0>.0>.0") == 2
    assert level("a(X).X") == 1
    assert level("b(X).X | 'b<0>.0") == 1
    assert level("(new c:ch^3)'c<'a<0>.0>.0") == 3


def test_payload_must_sit_below_the_channel():
    with pytest.raises(LevelViolation, match="need 1 < 1"):
        level("'b<'b<0>.0>.0")
    with pytest.raises(LevelViolation):
        level("a(X).'b<X>.0")


def test_unbound_variable():
    with pytest.raises(IllTyped):
        level("X")


def test_omega_is_rejected_by_a_forced_k_less_than_k():
    env, q = omega(2)
    with pytest.raises(LevelViolation) as e:
        infer_level(env, q)
    assert e.value.rule == "LEVEL"
    assert e.value.message.endswith("need 2 < 2")


def test_composition_takes_the_maximum():
    assert compose(Plain(1), Plain(3)) == Plain(3)
    assert compose(InTag(1), InTag(2)) == InTag(2)
    assert compose(InTag(1), OutTag(2)) == Plain(2)
    assert compose(UNIT, OutTag(2)) == OutTag(2)
    assert compose(OutTag(2), UNIT) == OutTag(2)


def test_name_types_depend_on_the_level():
    from hopsi.nominal import supply

    a = supply().named("a")
    g, _, _ = embed_judgment({a: Ch(2)}, parse_source("0", "hopi2").body, 0)
    assert set(HOPI2.term_types(g, Plain(2), a)) == {Ch(2), ChIn(2), ChOut(2)}
    assert HOPI2.term_types(g, Plain(1), a) == [ChIn(2)]


def test_compatibility_and_subtyping():
    assert HOPI2.compat(Ch(3), "+") == Level(2)
    assert HOPI2.compat(ChIn(3), "-") == Level(2)
    assert HOPI2.compat(ChOut(3), "+") == Level(2)
    with pytest.raises(IllTyped):
        HOPI2.compat(ChIn(3), "+")
    assert HOPI2.subtype(Level(1), Level(2))
    assert not HOPI2.subtype(Level(2), Level(1))
    assert not HOPI2.subtype(ChIn(2), Ch(2))


def test_extraction_needs_a_high_enough_level():
    from hopsi.instance import EMPTY_ENV

    assert HOPI2.extract_env(Level(1), EMPTY_ENV, Plain(2)) == EMPTY_ENV
    with pytest.raises(IllTyped):
        HOPI2.extract_env(Level(3), EMPTY_ENV, Plain(2))


def test_termination_of_a_two_step_process():
    src = parse_source(DECLS + "'a<'b<0>.0>.0 | a(X).X | b(Y).Y", "hopi2")
    r = termination_probe(dict(src.declarations), src.body)
    assert r == Terminated(depth=2, states=3)


@given(rngs)
def test_direct_and_embedded_checkers_agree(rng):
    env, q, n = gen_well_typed(rng, 8)
    g, psi, e = embed_judgment(env, q, n)
    assert is_well_typed(g, psi, e, HOPI2)
    if n > 0:
        g, psi, e = embed_judgment(env, q, n - 1)
        assert not is_well_typed(g, psi, e, HOPI2)


@given(rngs)
def test_generated_processes_terminate(rng):
    env, q, _ = gen_well_typed(rng, 8)
    assert h2_size(q) <= 8
    assert isinstance(termination_probe(env, q, budget=2000), Terminated)


def test_level_violations_are_caught_by_the_embedded_checker_too():
    env, q = omega(2)
    for n in range(4):
        g, psi, e = embed_judgment(env, q, n)
        assert not is_well_typed(g, psi, e, HOPI2)


def test_gen_well_typed_is_deterministic():
    from hopsi.hopi2 import show
    from hopsi.nominal import NameSupply, set_supply

    def sample():
        set_supply(NameSupply())
        env, q, n = gen_well_typed(random.Random(11), 8)
        return show(q), n

    assert sample() == sample()
