import random

import pytest

from hopsi.hopi import HOPI, EMPTY
from hopsi.hopi2 import HOPI2
from hopsi.instance import IllFormedJudgment, IllTyped
from hopsi.parser import parse_source
from hopsi.typecheck import (
    ASSUMPTIONS,
    LEMMAS,
    assumption_harness,
    check_process,
    check_report,
    is_well_typed,
    mutant,
)

CH = "ch(drop{})"


def report(text):
    src = parse_source(text, "hopi")
    psi = src.assertion if src.assertion is not None else EMPTY
    return check_report(src.env, psi, src.body, HOPI)


def rule_of(text):
    r = report(text)
    assert r["result"] != "ok", r
    return r["errors"][0]["rule"]


def error_of(text):
    r = report(text)
    assert r["result"] == "ill-typed", r
    return r["errors"][0]["rule"], r["errors"][0]["message"]


def test_sending_a_declared_process():
    assert report(f"a : {CH}\nassume {{[0]: drop{{}}}}\n'a<[0]>.0")["result"] == "ok"


def test_a_process_term_needs_a_binding():
    rule, message = error_of(f"a : {CH}\n'a<[0]>.0")
    assert rule == "T-OUT" and "no drop binding for [0]" in message


def test_the_unwanted_example_is_rejected():
    text = f"a : {CH}\nb : {CH}\nassume {{[0]: drop{{}}}}\n'a<[0]>.0 | a(\\x:drop{{}})x.'x<b>.0"
    assert rule_of(text) == "T-OUT"


def test_running_a_received_process_only_warns():
    r = report(f"a : {CH}\na(\\x:drop{{}})x.run x")
    assert r["result"] == "ok"
    assert len(r["warnings"]) == 1 and "deadlock" in r["warnings"][0]


def test_input_pattern_must_fit_the_channel():
    assert report(f"a : {CH}\na(\\x:{CH})x.0")["result"] == "ill-typed"


def test_sending_on_a_non_channel():
    assert report(f"b : drop{{}}\nassume {{[0]: drop{{}}}}\n'b<[0]>.0")["result"] == "ill-typed"


def test_conditions_compare_channels_only():
    rule, message = error_of("a : drop{}\ncase a = a : 0")
    assert rule == "T-CASE" and "a is not a channel" in message
    assert report(f"a : {CH}\ncase a = a : 0")["result"] == "ok"


def test_unbound_names_make_the_judgment_ill_formed():
    r = report("'a<b>.0")
    assert r["result"] == "ill-formed" and r["errors"][0]["rule"] == "JUDGMENT"


def test_unguarded_assertion_under_replication_is_ill_formed():
    r = report(f"a : {CH}\n!(| {{}} |)")
    assert r["result"] == "ill-formed" and r["errors"][0]["rule"] == "WELL-FORMED"


def test_check_process_raises():
    src = parse_source("'a<b>.0", "hopi")
    with pytest.raises(IllFormedJudgment):
        check_process(src.env, EMPTY, src.body, HOPI)
    src = parse_source(f"a : {CH}\n'a<[0]>.0", "hopi")
    with pytest.raises(IllTyped):
        check_process(src.env, EMPTY, src.body, HOPI)
    assert not is_well_typed(src.env, EMPTY, src.body, HOPI)


def test_harness_passes_on_the_sound_instance():
    r = assumption_harness(HOPI, 80, seed=3)
    assert r.passed, r.as_json()
    assert [x.name for x in r.results] == list(ASSUMPTIONS)
    assert all(x.applicable > 0 for x in r.results)


def test_harness_reports_are_reproducible():
    a = assumption_harness(HOPI, 40, seed=9).as_json()
    b = assumption_harness(HOPI, 40, seed=9).as_json()
    assert a == b


@pytest.mark.parametrize(
    "inst, kind, assumption",
    [(HOPI, "compose", "T-ASS-WEAK"), (HOPI, "subst", "T-SUBS"), (HOPI2, "compat", "COMPAT-CONTRACT")],
)
def test_mutants_are_caught(inst, kind, assumption):
    r = assumption_harness(mutant(inst, kind), 1000, seed=0, only=[assumption], stop_on_failure=True)
    assert not r.passed
    assert r.results[0].counterexample is not None


def test_unknown_mutation():
    with pytest.raises(ValueError):
        mutant(HOPI, "types")


@pytest.mark.parametrize("lemma", sorted(LEMMAS))
@pytest.mark.parametrize("inst", [HOPI, HOPI2], ids=lambda i: i.name)
def test_lemmas_hold_on_random_cases(inst, lemma):
    rng = random.Random(f"lemma:{lemma}")
    applicable = 0
    for _ in range(150):
        ok, cex = LEMMAS[lemma](inst, rng)
        applicable += ok
        assert cex is None, cex
    assert applicable > 0
