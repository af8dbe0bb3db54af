import random

import pytest
from hypothesis import given

from hopsi.instance import EMPTY_ENV
from hopsi.parser import parse_process
from hopsi.rho import (
    CHAN,
    NO_DECLS,
    RHO,
    RHO_TYPED,
    RNIL,
    ZERO,
    Equiv,
    MissingAnnotation,
    Quote,
    behav_eq,
    correspondence_check,
    decode,
    encode,
    encode_name,
    encode_typed,
    enumerate_processes,
    gen_corpus,
    gen_rho,
    gen_typed_rho,
    name_eq,
    name_eq_oracle_check,
    norm_name,
    preserves_name_eq,
    rho_canon,
    rho_explore,
    rho_size,
    rho_step,
    show,
    struct_cong,
)
from hopsi.semantics import explore, reduce_steps
from hopsi.syntax import NIL, render
from hopsi.typecheck import check_report, is_well_typed

from .conftest import rngs


def r(text):
    return parse_process(text, "rho")


def rt(text):
    return parse_process(text, "rho-typed")


def q(text):
    return Quote(r(text))


# -- names -------------------------------------------------------------------


def test_quote_of_drop_is_the_name():
    assert name_eq(q("*@0"), ZERO)
    assert norm_name(q("*@(0 | 0)")) == norm_name(ZERO)


def test_names_are_compared_up_to_congruence():
    assert name_eq(q("0 | 0"), ZERO)
    assert name_eq(q("*@0 | 0"), ZERO)
    assert name_eq(q("@0!(0) | *@0"), q("*@0 | @(0|0)!(0)"))
    assert not name_eq(q("*@0 | *@0"), ZERO)
    assert not name_eq(q("@0!(0)"), q("@0!(*@0 | *@0)"))


def test_binders_are_alpha_converted_inside_names():
    assert name_eq(q("@0?(y).*y"), q("@0?(z).*z"))
    assert not name_eq(q("@0?(y).*y"), q("@0?(y).*@0"))


def test_sizes():
    assert rho_size(r("0")) == 1
    assert rho_size(r("@0!(0)")) == 2
    assert rho_size(r("*@0")) == 2
    assert rho_size(r("*@(0 | 0)")) == 3
    assert rho_size(r("@0?(y).*y")) == 3


def test_enumeration_counts_by_hand():
    # size 2: 0|0, @0!(0), @0?(y).0, *@0
    # size 3: 8 compositions (0 beside a size-2 process, either side),
    # 8 lifts (@0 with a size-2 payload, or a size-2 quote sending 0),
    # 11 inputs (7 size-2 bodies with the binder in scope, 4 size-2 quotes
    # receiving into 0) and 4 drops of size-2 quotes
    assert len(enumerate_processes(1)) == 1
    assert len(enumerate_processes(2)) == 1 + 4
    assert len(enumerate_processes(3)) == 1 + 4 + 31
    shown = {show(p) for p in enumerate_processes(2)}
    assert {"0", "0 | 0", "@0!(0)", "*@0"} <= shown


# -- reduction --------------------------------------------------------------


def test_communication_delivers_the_quoted_process():
    assert [show(s) for s in rho_step(r("@0!(*@0) | @0?(y).*y"))] == ["*@0"]


def test_subjects_match_up_to_name_equivalence():
    (s,) = rho_step(r("@(0|0)!(0) | @0?(y).*y"))
    assert struct_cong(s, RNIL)
    assert rho_step(r("@0!(0) | @(*@0|*@0)?(y).*y")) == []


def test_received_names_become_channels():
    succ = rho_step(r("@0!(0) | @0?(y).y!(*y) | @0?(z).0"))
    assert len(succ) == 2
    assert any(struct_cong(s, r("@0?(z).0 | @0!(0)")) for s in succ)


def test_exploration():
    run = rho_explore(r("@0!(0) | @0?(y).y!(0) | @0?(z).z?(w).0"), 5)
    assert not run.truncated
    assert len(run.states) == 4


def test_canonical_form_is_stable():
    p = r("@0?(y).(y!(0) | *y) | 0 | *@0")
    assert rho_canon(rho_canon(p)) == rho_canon(p)
    assert struct_cong(p, r("*@0 | @0?(w).(*w | w!(0))"))


# -- encoding ----------------------------------------------------------------


def test_free_drop_encodes_to_nil():
    assert encode(r("*@0")) == NIL


def test_encoding_shape():
    text = render(encode(r("@0!(0) | @0?(y).*y")))
    assert text.startswith("'@[0]<<0>>.0 | @[0](\\y")
    assert text.endswith(".run " + text.split("\\")[1].split(")")[0])


def test_decode_inverts_encode():
    p = r("@0!(*@0) | @(0|0)?(y).(y!(0) | *y)")
    assert struct_cong(decode(encode(p)), p)


def test_channel_equivalence_through_the_encoding():
    assert RHO.entails(NO_DECLS, Equiv(encode_name(q("*@0")), encode_name(ZERO)))
    assert not RHO.entails(NO_DECLS, Equiv(encode_name(q("*@0 | *@0")), encode_name(ZERO)))


def test_behavioural_equivalence_unfolds_runs():
    from hopsi.rho import DynQuote
    from hopsi.syntax import Run

    p = r("@0!(0)")
    assert behav_eq(Run(DynQuote(p)), encode(p))
    assert not behav_eq(Run(DynQuote(p)), NIL)


def test_correspondence_on_a_branching_process():
    rep = correspondence_check(r("@0!(0) | @0?(y).y!(0) | @0?(z).z?(w).0"), 3)
    assert rep.passed and rep.states >= 3


@given(rngs)
def test_correspondence_on_random_processes(rng):
    p = gen_rho(rng, 6)
    assert correspondence_check(p, 2).passed


def _drops_free_quote(p):
    from hopsi.rho import Lift, RDrop, RIn, RPar

    match p:
        case RDrop(x):
            return isinstance(x, Quote)
        case RPar(a, b):
            return _drops_free_quote(a) or _drops_free_quote(b)
        case RIn(_, _, b, _):
            return _drops_free_quote(b)
    return False


@given(rngs)
def test_encoding_round_trips(rng):
    # a drop of a quoted name translates to 0, so only other processes round-trip
    p = gen_rho(rng, 8)
    if not _drops_free_quote(p):
        assert struct_cong(decode(encode(p)), p)


def test_name_equivalence_is_preserved_on_all_small_names():
    names = [Quote(p) for p in enumerate_processes(3)]
    assert all(preserves_name_eq(a, b) for a in names for b in names)


def test_oracle_agrees_on_names_of_size_three():
    rep = name_eq_oracle_check(3)
    assert rep.passed and rep.names == len(enumerate_processes(3))


def test_corpus_is_distinct_and_reducing():
    corpus = gen_corpus(random.Random(0), 20, 6)
    assert len(corpus) == 20
    assert len({rho_canon(p) for p in corpus}) == 20
    assert all(rho_step(p) and rho_size(p) <= 6 for p in corpus)


# -- typed variant -------------------------------------------------------------


def typed_ok(text):
    return check_report(EMPTY_ENV, NO_DECLS, encode_typed(rt(text)), RHO_TYPED)["result"] == "ok"


def test_typed_communication():
    assert typed_ok("@0!(0 : <B>) | @0?(y:<B>).*y")
    assert typed_ok("@(*@0|*@0)?(c:<<B>>).c!(0 : <B>)")


def test_a_plain_name_is_not_a_channel():
    assert not typed_ok("@0?(y:<B>).y!(0 : <B>)")


def test_annotations_are_required_in_typed_mode():
    with pytest.raises(MissingAnnotation):
        encode_typed(r("@0!(0)"))


def test_mismatched_annotations_do_not_communicate():
    p = encode_typed(rt("@0!(0 : <B>) | @0?(y:<<B>>).y!(0 : <B>)"))
    assert reduce_steps(NO_DECLS, p, RHO_TYPED) == []


def test_channel_type_printing():
    assert str(CHAN) == "<<B>>"


@given(rngs)
def test_typed_subject_reduction(rng):
    p = encode_typed(gen_typed_rho(rng, 7, {}))
    if not is_well_typed(EMPTY_ENV, NO_DECLS, p, RHO_TYPED):
        return
    ex = explore(NO_DECLS, p, RHO_TYPED, 3)
    assert all(is_well_typed(EMPTY_ENV, NO_DECLS, n.process, RHO_TYPED) for n in ex.nodes.values())
