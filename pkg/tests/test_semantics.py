import json

import pytest
from hypothesis import given

from hopsi.hopi import EMPTY, HOPI, unwanted_example
from hopsi.parser import parse_process
from hopsi.semantics import (
    eval_steps,
    explore,
    frame_invariant_eval,
    frame_monotone,
    reduce_steps,
    trace_lines,
)
from hopsi.syntax import struct_eq

from .conftest import rngs

T = "drop{}"


def p(text):
    return parse_process(text, "hopi")


def successors(text, eval_depth=3):
    return [q for q, _ in reduce_steps(EMPTY, p(text), HOPI, eval_depth)]


def test_communication_substitutes_the_object():
    (after,) = successors(f"'a<b>.run b | a(\\x:{T})x.'x<c>.0")
    assert struct_eq(after, p("run b | 'b<c>.0"), HOPI.canon_term)


def test_rule_names():
    [(_, step)] = reduce_steps(EMPTY, p(f"'a<b>.0 | a(\\x:{T})x.0"), HOPI)
    assert step.rule == "R-COM" and step.evals == ()
    [(_, step)] = reduce_steps(EMPTY, p(f"case a = a : 'a<b>.0 | a(\\x:{T})x.0"), HOPI)
    assert step.rule == "R-EVAL" and step.evals == ("E-CASE",)


def test_case_fires_only_on_entailed_branches():
    assert successors(f"case a = b : 'a<b>.0 | a(\\x:{T})x.0") == []
    (after,) = successors(f"case a = b : 'a<a>.0 [] true : 'a<b>.0 | a(\\x:{T})x.'x<x>.0")
    assert struct_eq(after, p("'b<b>.0"), HOPI.canon_term)


def test_run_unfolds_a_handle_before_communicating():
    (after,) = successors(f"run ['a<b>.0] | a(\\x:{T})x.0")
    assert struct_eq(after, p("0"), HOPI.canon_term)
    assert successors(f"run ['a<b>.0] | a(\\x:{T})x.0", eval_depth=0) == []


def test_replication_unfolds_lazily():
    (after,) = successors(f"!'a<b>.0 | a(\\x:{T})x.0", eval_depth=1)
    assert struct_eq(after, p("!'a<b>.0"), HOPI.canon_term)
    # each further evaluation step may unfold one more copy
    assert len(successors(f"!'a<b>.0 | a(\\x:{T})x.0", eval_depth=3)) == 3
    (q, rule), = eval_steps(EMPTY, p("!run a"), HOPI)
    assert rule == "E-REP" and struct_eq(q, p("run a | !run a"), HOPI.canon_term)


def test_restricted_channel_is_distinct_from_a_free_one():
    assert successors(f"(new a:{T})'a<b>.0 | a(\\x:{T})x.0") == []
    assert len(successors(f"(new a:{T})('a<b>.0 | a(\\x:{T})x.0)")) == 1


def test_output_nondeterminism_gives_one_successor_per_class():
    # two identical receivers: a single class up to congruence
    assert len(successors(f"'a<b>.0 | a(\\x:{T})x.0 | a(\\y:{T})y.0")) == 1
    assert len(successors(f"'a<b>.0 | a(\\x:{T})x.0 | a(\\y:{T})y.'y<y>.0")) == 2


CHAIN = f"'a<b>.0 | a(\\x:{T})x.'c<x>.0 | c(\\y:{T})y.0"


def test_exhaustive_exploration_of_a_chain():
    ex = explore(EMPTY, p(CHAIN), HOPI, 5)
    assert len(ex.nodes) == 3
    assert len(ex.normal_forms()) == 1
    assert ex.max_depth() == 2
    assert not ex.depth_exceeded


def test_depth_bound_marks_truncation():
    ex = explore(EMPTY, p(CHAIN), HOPI, 1)
    assert ex.depth_exceeded and ex.max_depth() == 1


def test_budget_caps_states():
    ex = explore(EMPTY, p(CHAIN), HOPI, 5, budget=2)
    assert ex.budget_exceeded and len(ex.nodes) == 2


def test_negative_depth_is_rejected():
    with pytest.raises(ValueError):
        explore(EMPTY, p("0"), HOPI, -1)


def test_first_strategy_on_a_normal_form_has_an_empty_trace():
    ex = explore(EMPTY, p("'a<b>.0"), HOPI, 5, strategy="first")
    assert ex.trace == [] and len(ex.nodes) == 1


def test_wrong_is_reached_by_the_unwanted_example():
    psi = parse_process("(| {[0]: drop{}} |)", "hopi").assertion
    ex = explore(psi, unwanted_example(), HOPI, 5, detect_wrong=True)
    [node] = ex.wrong_nodes()
    assert node.depth == 1
    assert node.wrong[0].payload == "process used as channel"


def test_trace_lines():
    ex = explore(EMPTY, p(CHAIN), HOPI, 5, strategy="first")
    lines = trace_lines(HOPI, ex.trace)
    assert [ln.split("\t")[:3] for ln in lines] == [["1", "R-COM", "{}"], ["2", "R-COM", "{}"]]
    assert lines[-1].split("\t")[3] == "0"
    rec = json.loads(trace_lines(HOPI, ex.trace, "json")[0])
    assert set(rec) == {"step", "rule", "ambient", "process"}


@given(rngs)
def test_random_traces_are_reproducible(rng):
    env = HOPI.gen_env(rng)
    psi = HOPI.gen_assertion(rng, env)
    q = HOPI.gen_process(rng, env, psi, 8)
    seed = rng.randrange(1000)
    runs = [trace_lines(HOPI, explore(psi, q, HOPI, 5, strategy="random", seed=seed).trace) for _ in range(2)]
    assert runs[0] == runs[1]


@given(rngs)
def test_frames_grow_along_reductions(rng):
    env = HOPI.gen_env(rng)
    psi = HOPI.gen_assertion(rng, env)
    q = HOPI.gen_process(rng, env, psi, 8)
    bad = []
    explore(psi, q, HOPI, 3, on_step=lambda s: bad.append(s) if not frame_monotone(HOPI, s) else None)
    assert not bad
    assert frame_invariant_eval(HOPI, psi, q)
