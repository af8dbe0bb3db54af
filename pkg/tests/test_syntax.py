from hypothesis import given

from hopsi.hopi import HOPI, Bindings, Drop, ProcTerm, binding
from hopsi.instance import EMPTY_ENV
from hopsi.nominal import NameSupply, fresh, set_supply, supply, support, swap
from hopsi.parser import parse_process
from hopsi.syntax import (
    NIL,
    Input,
    Output,
    Restrict,
    Par,
    Repl,
    alpha_equal,
    canonicalize,
    extrude,
    frame,
    frame_assertion,
    is_assertion_guarded,
    render,
    size,
    struct_eq,
    well_formed,
)

from .conftest import rngs


def p(text):
    return parse_process(text, "hopi")


def same(a, b):
    return struct_eq(p(a), p(b), HOPI.canon_term)


def test_parallel_is_a_commutative_monoid():
    assert same("'a<b>.0 | 0", "'a<b>.0")
    assert same("'a<b>.0 | 'b<a>.0", "'b<a>.0 | 'a<b>.0")
    assert same("('a<b>.0 | 'b<a>.0) | run c", "'a<b>.0 | ('b<a>.0 | run c)")


def test_scope_extrusion():
    assert same("(new x:drop{})('x<a>.0 | run b)", "(new x:drop{})'x<a>.0 | run b")
    assert same("(new x:drop{})(new y:drop{})'x<y>.0", "(new y:drop{})(new x:drop{})'x<y>.0")

def test_unused_restriction_is_not_dropped():
    assert not same("(new x:drop{})0", "0")


def test_extrusion_does_not_capture():
    # the right-hand side has a free x that must stay free
    assert not same("(new x:drop{})('x<a>.0 | run x)", "(new x:drop{})'x<a>.0 | run x")


def test_congruence_under_prefixes():
    assert same("a(\\x:drop{})x.('x<b>.0 | 0)", "a(\\y:drop{})y.'y<b>.0")
    assert same("'a<[0 | run b]>.0", "'a<[run b]>.0")


def test_replication_is_not_unfolded_by_congruence():
    assert not same("!run a", "run a | !run a")


def test_different_processes_are_distinguished():
    assert not same("'a<b>.0", "'b<a>.0")
    assert not same("a(\\x:drop{})x.0", "a(\\x:drop{})a.0")


def test_alpha_equal_on_binders():
    assert alpha_equal(p("a(\\x:drop{})x.run x"), p("a(\\z:drop{})z.run z"))
    assert not alpha_equal(p("a(\\x:drop{})x.run x"), p("a(\\x:drop{})x.run a"))


def test_size_counts_prefixes_and_embedded_processes():
    assert size(p("0")) == 1
    assert size(p("0 | 0")) == 2
    assert size(p("'a<[0 | 0]>.0")) == 4
    assert size(p("a(\\x:drop{})x.run [0]")) == 3
    assert size(p("!(new x:drop{})0")) == 3


def test_well_formedness():
    assert well_formed(p("a(\\x:drop{})x.(| {} |)"))[0]
    ok, msg = well_formed(p("!(| {} |)"))
    assert not ok and "replication" in msg
    ok, msg = well_formed(p("case true : (| {} |)"))
    assert not ok and "case" in msg
    ok, msg = well_formed(p("'a<[(| {} |)]>.0"))
    assert not ok and "term-embedded" in msg
    assert is_assertion_guarded(p("'a<b>.(| {} |)"))
    assert not is_assertion_guarded(p("(new x:drop{})(| {} |)"))


def test_frame_collects_unguarded_assertions_and_restrictions():
    q = p("(| {[0]: drop{}} |) | (new x:drop{})((| {[0 | 0]: drop{}} |) | 'a<b>.(| {[run a]: drop{}} |))")
    expected = Bindings(frozenset({(NIL, Drop(EMPTY_ENV)), (Par(NIL, NIL), Drop(EMPTY_ENV))}))
    assert frame_assertion(q, HOPI.unit, HOPI.compose) == expected
    f = frame(q, HOPI.unit, HOPI.compose)
    assert len(f.binders) == 1 and f.assertion == expected


def test_extrude_freshens_binders():
    q = p("(new x:drop{})run x | (new x:drop{})run x")
    binders, comps = extrude(q)
    assert len({x for x, _ in binders}) == 2
    assert len(comps) == 2


def test_render_matches_surface_syntax():
    a, b = supply().named("a"), supply().named("b")
    assert render(Par(NIL, Repl(NIL))) == "0 | !0"
    assert render(p("'a<[0]>.0 | a(\\x:drop{})x.'x<b>.0")).startswith("'a<[0]>.0 | a(\\x")
    assert str(binding(NIL, Drop(EMPTY_ENV))) == "{[0]: drop{}}"
    assert str(ProcTerm(Par(NIL, NIL))) == "[0 | 0]"
    assert (a, b) == (supply().named("a"), supply().named("b"))


def _sample(rng):
    env = HOPI.gen_env(rng)
    return HOPI.gen_process(rng, env, HOPI.gen_assertion(rng, env), 7)


@given(rngs)
def test_canonicalize_is_idempotent(rng):
    q = _sample(rng)
    c = canonicalize(q, HOPI.canon_term)
    assert canonicalize(c, HOPI.canon_term) == c


@given(rngs)
def test_congruence_ignores_component_order(rng):
    q, r = _sample(rng), _sample(rng)
    assert struct_eq(Par(q, r), Par(r, q), HOPI.canon_term)
    assert struct_eq(Par(q, NIL), q, HOPI.canon_term)


@given(rngs)
def test_congruence_is_equivariant(rng):
    q = _sample(rng)
    names = sorted(support(q), key=lambda n: n.id)
    if not names:
        return
    u = fresh("u")
    r = swap(names[0], u, q)
    assert struct_eq(swap(names[0], u, r), q, HOPI.canon_term)
    assert struct_eq(q, r, HOPI.canon_term) == (canonicalize(q, HOPI.canon_term) == canonicalize(r, HOPI.canon_term))


# -- an independent oracle: congruence axioms applied as rewrites -----------------


def _axiom_rewrites(q):
    """Processes one congruence axiom away from ``q`` at the root."""
    out = [Par(q, NIL), Par(NIL, q)]
    if isinstance(q, Par):
        out.append(Par(q.right, q.left))
        if isinstance(q.left, Par):
            out.append(Par(q.left.left, Par(q.left.right, q.right)))
        if isinstance(q.right, Restrict) and q.right.name not in q.left._support():
            r = q.right
            out.append(Restrict(r.name, r.type, Par(q.left, r.body)))
    if isinstance(q, Restrict):
        if isinstance(q.body, Restrict):
            inner = q.body
            if q.name not in support(inner.type):
                out.append(Restrict(inner.name, inner.type, Restrict(q.name, q.type, inner.body)))
        u = fresh("u")
        out.append(Restrict(u, q.type, swap(q.name, u, q.body)))
    return out


def _children(q):
    match q:
        case Par(l, r):
            return [(l, lambda v: Par(v, r)), (r, lambda v: Par(l, v))]
        case Restrict(x, t, b):
            return [(b, lambda v: Restrict(x, t, v))]
        case Repl(b):
            return [(b, Repl)]
        case Output(s, o, c):
            return [(c, lambda v: Output(s, o, v))]
        case Input(s, bs, n, c):
            return [(c, lambda v: Input(s, bs, n, v))]
    return []


def _random_rewrite(rng, q):
    kids = _children(q)
    if kids and rng.random() < 0.6:
        child, rebuild = rng.choice(kids)
        return rebuild(_random_rewrite(rng, child))
    return rng.choice(_axiom_rewrites(q))


@given(rngs)
def test_canonical_form_is_invariant_under_axiom_rewrites(rng):
    q = _sample(rng)
    r = q
    for _ in range(8):
        r = _random_rewrite(rng, r)
    assert struct_eq(q, r, HOPI.canon_term), (render(q), render(r))


def test_memo_tables_do_not_leak_across_supplies():
    # same ids, different displays: a stale entry would print the old names
    p = parse_process("'a<b>.0")
    assert render(canonicalize(p, HOPI.canon_term)) == "'a<b>.0"
    set_supply(NameSupply())
    q = parse_process("'c<d>.0")
    assert q == p
    assert render(canonicalize(q, HOPI.canon_term)) == "'c<d>.0"
