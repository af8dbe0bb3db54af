"""Generic higher-order psi-calculus processes.

Processes are immutable dataclasses.  Terms, conditions, assertions and
types inside them are opaque instance values; this module only touches
them through the generic nominal operations and :func:`map_embedded`.
"""

from __future__ import annotations

import dataclasses
import functools
import itertools
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Iterator

from .nominal import Name, fresh, level_name, on_supply_change, sigma_support, subst, support, swap


class Process:
    __slots__ = ()

    def __or__(self, other: "Process") -> "Process":
        return Par(self, other)

    def __str__(self) -> str:
        return render(self)


@dataclass(frozen=True, repr=False)
class Nil(Process):
    def _support(self):
        return frozenset()

    def _swap(self, a, b):
        return self

    def _subst(self, sigma):
        return self


@dataclass(frozen=True, repr=False)
class Par(Process):
    left: Process
    right: Process

    def _support(self):
        return support(self.left) | support(self.right)

    def _swap(self, a, b):
        return Par(swap(a, b, self.left), swap(a, b, self.right))

    def _subst(self, sigma):
        return Par(subst(self.left, sigma), subst(self.right, sigma))


@dataclass(frozen=True, repr=False)
class Output(Process):
    subject: Any
    object: Any
    cont: Process

    def _support(self):
        return support(self.subject) | support(self.object) | support(self.cont)

    def _swap(self, a, b):
        return Output(swap(a, b, self.subject), swap(a, b, self.object), swap(a, b, self.cont))

    def _subst(self, sigma):
        return Output(subst(self.subject, sigma), subst(self.object, sigma), subst(self.cont, sigma))


@dataclass(frozen=True, repr=False)
class Input(Process):
    subject: Any
    binders: tuple  # ((Name, Type), ...)
    pattern: Any
    cont: Process

    def __post_init__(self):
        names = [x for x, _ in self.binders]
        if len(set(names)) != len(names):
            raise ValueError(f"input binders must be distinct: {names}")

    @property
    def names(self) -> tuple[Name, ...]:
        return tuple(x for x, _ in self.binders)

    def _support(self):
        inner = (support(self.pattern) | support(self.cont)) - set(self.names)
        return support(self.subject) | support(tuple(t for _, t in self.binders)) | inner

    def _swap(self, a, b):
        return Input(
            swap(a, b, self.subject),
            tuple((swap(a, b, x), swap(a, b, t)) for x, t in self.binders),
            swap(a, b, self.pattern),
            swap(a, b, self.cont),
        )

    def _subst(self, sigma):
        subject = subst(self.subject, sigma)
        p = _freshen_binders(self, sigma_support(sigma))
        inner = {k: v for k, v in sigma.items() if k not in p.names}
        return Input(subject, p.binders, subst(p.pattern, inner), subst(p.cont, inner))


@dataclass(frozen=True, repr=False)
class Run(Process):
    handle: Any

    def _support(self):
        return support(self.handle)

    def _swap(self, a, b):
        return Run(swap(a, b, self.handle))

    def _subst(self, sigma):
        return Run(subst(self.handle, sigma))


@dataclass(frozen=True, repr=False)
class Case(Process):
    branches: tuple  # ((Condition, Process), ...)

    def _support(self):
        return support(self.branches)

    def _swap(self, a, b):
        return Case(tuple((swap(a, b, c), swap(a, b, p)) for c, p in self.branches))

    def _subst(self, sigma):
        return Case(tuple((subst(c, sigma), subst(p, sigma)) for c, p in self.branches))


@dataclass(frozen=True, repr=False)
class Restrict(Process):
    name: Name
    type: Any
    body: Process

    def _support(self):
        return support(self.type) | (support(self.body) - {self.name})

    def _swap(self, a, b):
        return Restrict(swap(a, b, self.name), swap(a, b, self.type), swap(a, b, self.body))

    def _subst(self, sigma):
        p = self
        if self.name in sigma_support(sigma):
            y = fresh(self.name.display)
            p = Restrict(y, self.type, swap(self.name, y, self.body))
        inner = {k: v for k, v in sigma.items() if k != p.name}
        return Restrict(p.name, p.type, subst(p.body, inner))


@dataclass(frozen=True, repr=False)
class Repl(Process):
    body: Process

    def _support(self):
        return support(self.body)

    def _swap(self, a, b):
        return Repl(swap(a, b, self.body))

    def _subst(self, sigma):
        return Repl(subst(self.body, sigma))


@dataclass(frozen=True, repr=False)
class Assert(Process):
    assertion: Any

    def _support(self):
        return support(self.assertion)

    def _swap(self, a, b):
        return Assert(swap(a, b, self.assertion))

    def _subst(self, sigma):
        return Assert(subst(self.assertion, sigma))


NIL = Nil()


def _freshen_binders(p: Input, avoid: frozenset[Name]) -> Input:
    clash = [x for x in p.names if x in avoid]
    if not clash:
        return p
    pattern, cont, binders = p.pattern, p.cont, list(p.binders)
    for x in clash:
        y = fresh(x.display)
        pattern, cont = swap(x, y, pattern), swap(x, y, cont)
        binders = [(y if b == x else b, t) for b, t in binders]
    return Input(p.subject, tuple(binders), pattern, cont)


def par(*ps: Process) -> Process:
    """Right-nested parallel composition; the empty composition is 0."""
    if not ps:
        return NIL
    out = ps[-1]
    for p in reversed(ps[:-1]):
        out = Par(p, out)
    return out


def restrict(binders: Iterable[tuple[Name, Any]], body: Process) -> Process:
    for x, t in reversed(list(binders)):
        body = Restrict(x, t, body)
    return body


def map_embedded(v, f: Callable[[Process], Process]):
    """Apply ``f`` to every process embedded in an instance value."""
    if isinstance(v, Process):
        return f(v)
    if isinstance(v, Name) or v is None or isinstance(v, (str, int, bool)):
        return v
    if hasattr(v, "_map_procs"):
        return v._map_procs(f)
    if isinstance(v, tuple):
        return tuple(map_embedded(x, f) for x in v)
    if isinstance(v, frozenset):
        return frozenset(map_embedded(x, f) for x in v)
    if isinstance(v, list):
        return [map_embedded(x, f) for x in v]
    return v


def embedded_processes(v) -> list[Process]:
    found: list[Process] = []

    def grab(q):
        found.append(q)
        return q

    if isinstance(v, Process):
        return [v]
    map_embedded(v, grab)
    return found


def size(p) -> int:
    match p:
        case Nil():
            return 1
        case Par(l, r):
            return size(l) + size(r)  # composition is n-ary; only components count
        case Output(_, o, c):
            return 1 + sum(size(q) for q in embedded_processes(o)) + size(c)
        case Input(_, _, _, c):
            return 1 + size(c)
        case Run(m):
            return 1 + sum(size(q) for q in embedded_processes(m))
        case Case(bs):
            return 1 + sum(size(q) for _, q in bs)
        case Restrict(_, _, b) | Repl(b):
            return 1 + size(b)
        case Assert(_):
            return 1
    return 1


# -- well-formedness -----------------------------------------------------------


def unguarded_assertions(p: Process, path: tuple = ()) -> Iterator[tuple]:
    match p:
        case Assert(_):
            yield path
        case Par(l, r):
            yield from unguarded_assertions(l, path + (0,))
            yield from unguarded_assertions(r, path + (1,))
        case Restrict(_, _, b) | Repl(b):
            yield from unguarded_assertions(b, path + (0,))
        case Case(bs):
            for i, (_, q) in enumerate(bs):
                yield from unguarded_assertions(q, path + (i,))


def is_assertion_guarded(p: Process) -> bool:
    return next(unguarded_assertions(p), None) is None


def well_formed(p: Process, term_processes: Callable[[Any], list] | None = None) -> tuple[bool, str | None]:
    """No unguarded assertion under case, replication, or in a term-embedded process.

    ``term_processes`` extracts the processes a term may spawn via ``run``; by
    default every process embedded in a term is treated as spawnable.
    """
    term_processes = term_processes or embedded_processes

    def walk(q: Process, path: tuple) -> str | None:
        match q:
            case Repl(b):
                bad = next(unguarded_assertions(b, path + (0,)), None)
                if bad is not None:
                    return f"unguarded assertion under replication at {_fmt(bad)}"
                return walk(b, path + (0,))
            case Case(bs):
                for i, (_, b) in enumerate(bs):
                    bad = next(unguarded_assertions(b, path + (i,)), None)
                    if bad is not None:
                        return f"unguarded assertion in case branch at {_fmt(bad)}"
                    msg = walk(b, path + (i,))
                    if msg:
                        return msg
                return None
            case Par(l, r):
                return walk(l, path + (0,)) or walk(r, path + (1,))
            case Restrict(_, _, b):
                return walk(b, path + (0,))
            case Output(s, o, c):
                return _terms_ok((s, o), path) or walk(c, path + (0,))
            case Input(s, _, n, c):
                return _terms_ok((s, n), path) or walk(c, path + (0,))
            case Run(m):
                return _terms_ok((m,), path)
            case Assert(a):
                return _terms_ok((a,), path)
        return None

    def _terms_ok(terms, path) -> str | None:
        for t in terms:
            for e in term_processes(t):
                if not is_assertion_guarded(e):
                    return f"term-embedded process with unguarded assertion at {_fmt(path)}"
                msg = walk(e, path)
                if msg:
                    return msg
        return None

    msg = walk(p, ())
    return msg is None, msg


def _fmt(path: tuple) -> str:
    return "root" if not path else ".".join(map(str, path))


# -- frames --------------------------------------------------------------------


def frame_assertion(p: Process, unit, compose: Callable[[Any, Any], Any]):
    match p:
        case Par(l, r):
            return compose(frame_assertion(l, unit, compose), frame_assertion(r, unit, compose))
        case Restrict(_, _, b):
            return frame_assertion(b, unit, compose)
        case Assert(a):
            return a
    return unit


def frame_names(p: Process) -> list[tuple[Name, Any]]:
    match p:
        case Par(l, r):
            return frame_names(l) + frame_names(r)
        case Restrict(x, t, b):
            return [(x, t)] + frame_names(b)
    return []


@dataclass(frozen=True)
class Frame:
    binders: tuple
    assertion: Any


def extrude(p: Process, avoid: Iterable[Name] = ()) -> tuple[list[tuple[Name, Any]], list[Process]]:
    """Pull every unguarded restriction to the top.

    Returns the binders (outermost first, each renamed to a fresh name not
    in ``avoid``) and the flattened list of non-nil parallel components.
    """
    binders: list[tuple[Name, Any]] = []
    comps: list[Process] = []
    avoid = set(avoid)

    def walk(q: Process):
        match q:
            case Nil():
                return
            case Par(l, r):
                walk(l)
                walk(r)
            case Restrict(x, t, b):
                y = fresh(x.display) if x.id >= 0 else fresh("n")
                binders.append((y, t))
                walk(swap(x, y, b))
            case _:
                comps.append(q)

    walk(p)
    return binders, comps


def frame(p: Process, unit, compose) -> Frame:
    """Frame of ``p`` with binders alpha-freshened so they never clash."""
    binders, comps = extrude(p)
    psi = unit
    for c in comps:
        if isinstance(c, Assert):
            psi = compose(psi, c.assertion)
    return Frame(tuple(binders), psi)


# -- keys, alpha-normal forms and canonical forms --------------------------------


def skey(v) -> str:
    """Total structural sort key (a string) for any nominal value."""
    if isinstance(v, Name):
        return f"{v.display}/{v.id}" if v.id >= 0 else v.display
    if isinstance(v, (bool, int)):
        return str(v)
    if isinstance(v, str):
        return repr(v)
    if hasattr(v, "_key"):
        return v._key()
    if isinstance(v, (tuple, list)):
        return "(" + ",".join(skey(x) for x in v) + ")"
    if isinstance(v, (frozenset, set)):
        return "{" + ",".join(sorted(skey(x) for x in v)) + "}"
    if dataclasses.is_dataclass(v):
        fields = ",".join(skey(getattr(v, f.name)) for f in dataclasses.fields(v))
        return f"{type(v).__name__}({fields})"
    if v is None:
        return "None"
    return repr(v)


def alpha_normal(v, depth: int = 0):
    """Rename every binder to its de Bruijn level name (order preserved).

    Assumes ``v`` has no free level names of level >= ``depth``.
    """
    if isinstance(v, Process):
        return _alpha_proc(v, depth)
    return map_embedded(v, lambda q: _alpha_proc(q, depth))


@functools.lru_cache(maxsize=200_000)
def _alpha_proc(p: Process, d: int) -> Process:
    term = lambda v, dd=d: alpha_normal(v, dd)  # noqa: E731
    match p:
        case Nil():
            return p
        case Par(l, r):
            return Par(_alpha_proc(l, d), _alpha_proc(r, d))
        case Output(s, o, c):
            return Output(term(s), term(o), _alpha_proc(c, d))
        case Input(s, bs, n, c):
            k = len(bs)
            binders = []
            for i, (x, t) in enumerate(bs):
                lv = level_name(d + i)
                n, c = swap(x, lv, n), swap(x, lv, c)
                binders.append((lv, term(t)))
            return Input(term(s), tuple(binders), term(n, d + k), _alpha_proc(c, d + k))
        case Run(m):
            return Run(term(m))
        case Case(bs):
            return Case(tuple((term(c), _alpha_proc(q, d)) for c, q in bs))
        case Restrict(x, t, b):
            lv = level_name(d)
            return Restrict(lv, term(t), _alpha_proc(swap(x, lv, b), d + 1))
        case Repl(b):
            return Repl(_alpha_proc(b, d))
        case Assert(a):
            return Assert(term(a))
    raise TypeError(f"not a process: {p!r}")


def alpha_equal(x, y) -> bool:
    return alpha_normal(x) == alpha_normal(y)


_PLACEHOLDER = Name(-(10**9), "?")
_MARK = Name(-(10**9) - 1, "!")
_MAX_BRANCH = 5040


def canonicalize(p: Process, canon_term: Callable[[Any, int], Any] | None = None, depth: int = 0) -> Process:
    """Normal form for structural congruence.

    Two processes have syntactically equal canonical forms iff they are related
    by alpha-conversion, the commutative-monoid laws for | and 0, and scope
    extrusion, closed under all process contexts.  ``canon_term`` normalises
    instance values at a given binder depth (default: alpha-normalisation).
    """
    return _Canon(canon_term or alpha_normal).proc(p, depth)


@on_supply_change
def _clear_caches():
    _alpha_proc.cache_clear()
    _Canon._caches.clear()


def struct_eq(p: Process, q: Process, canon_term=None) -> bool:
    return canonicalize(p, canon_term) == canonicalize(q, canon_term)


class _Canon:
    _caches: dict = {}

    def __init__(self, canon_term):
        self.term = canon_term
        self.cache = self._caches.setdefault(canon_term, {})
        if len(self.cache) > 300_000:
            self.cache.clear()

    def proc(self, p: Process, d: int) -> Process:
        k = (p, d)
        hit = self.cache.get(k)
        if hit is None:
            hit = self.cache[k] = self._block(p, d)
        return hit

    def comp(self, c: Process, d: int) -> Process:
        t = self.term
        match c:
            case Output(s, o, cont):
                return Output(t(s, d), t(o, d), self.proc(cont, d))
            case Input(s, bs, n, cont):
                k = len(bs)
                binders = []
                for i, (x, ty) in enumerate(bs):
                    lv = level_name(d + i)
                    n, cont = swap(x, lv, n), swap(x, lv, cont)
                    binders.append((lv, t(ty, d)))
                return Input(t(s, d), tuple(binders), t(n, d + k), self.proc(cont, d + k))
            case Run(m):
                return Run(t(m, d))
            case Case(bs):
                return Case(tuple((t(cnd, d), self.proc(q, d)) for cnd, q in bs))
            case Repl(b):
                return Repl(self.proc(b, d))
            case Assert(a):
                return Assert(t(a, d))
        raise TypeError(f"not a component: {c!r}")

    def _block(self, p: Process, d: int) -> Process:
        binders, comps = extrude(p)
        n = len(binders)
        if n == 0:
            return par(*sorted((self.comp(c, d) for c in comps), key=skey))
        xs = [x for x, _ in binders]
        xset = set(xs)
        comp_names = [support(c) & xset for c in comps]

        # a binder whose type mentions another must come after it
        before: dict[Name, set[Name]] = {x: set() for x in xs}
        for j, (y, ty) in enumerate(binders):
            for i in range(j):
                if xs[i] in support(ty):
                    before[y].add(xs[i])

        sig = {x: self._signature(x, binders, comps, comp_names, d + n) for x in xs}

        best = None
        for order in self._orders(xs, before, sig):
            cand = self._realize(order, binders, comps, d)
            key = skey(cand)
            if best is None or key < best[0]:
                best = (key, cand)
        return best[1]

    def _signature(self, x, binders, comps, comp_names, d):
        others = {y: _placeholder(i) for i, (y, _) in enumerate(binders) if y != x}
        ty = dict(binders)[x]
        parts = [skey(self.term(_rename(ty, others), d))]
        mine = sorted(
            skey(self.comp(_rename(c, {**others, x: _MARK}), d))
            for c, ns in zip(comps, comp_names)
            if x in ns
        )
        return skey((parts, mine))

    def _orders(self, xs, before, sig):
        count = 0

        def rec(placed: list, remaining: list):
            nonlocal count
            if not remaining:
                count += 1
                yield list(placed)
                return
            ready = [x for x in remaining if before[x] <= set(placed)]
            low = min(sig[x] for x in ready)
            for x in [x for x in ready if sig[x] == low]:
                if count >= _MAX_BRANCH:
                    return
                placed.append(x)
                yield from rec(placed, [r for r in remaining if r != x])
                placed.pop()

        yield from rec([], list(xs))

    def _realize(self, order, binders, comps, d):
        types = dict(binders)
        ren = {x: level_name(d + i) for i, x in enumerate(order)}
        n = len(order)
        new_binders = [(ren[x], self.term(_rename(types[x], ren), d + i)) for i, x in enumerate(order)]
        body = sorted((self.comp(_rename(c, ren), d + n) for c in comps), key=skey)
        return restrict(new_binders, par(*body))


def _rename(v, ren: dict):
    """Rename by transpositions, so names inside types move too.

    ``ren`` must be injective with targets disjoint from its sources.
    """
    for x, y in ren.items():
        v = swap(x, y, v)
    return v


def _placeholder(i: int) -> Name:
    # distinct names, identical sort keys
    return Name(_PLACEHOLDER.id - 2 - i, _PLACEHOLDER.display)


# -- rendering -----------------------------------------------------------------


def render(p: Process) -> str:
    """Surface syntax; ``|`` associates to the right, so a composed left operand is parenthesised."""
    if isinstance(p, Par):
        return f"{_unary(p.left)} | {render(p.right)}"
    return _unary(p)


def _unary(p: Process) -> str:
    match p:
        case Nil():
            return "0"
        case Par(_, _):
            return f"({render(p)})"
        case Output(s, o, c):
            return f"'{s}<{o}>.{_unary(c)}"
        case Input(s, bs, n, c):
            binders = ", ".join(str(x) if t is None else f"{x}:{t}" for x, t in bs)
            return f"{s}(\\{binders}){n}.{_unary(c)}"
        case Run(m):
            return f"run {m}"
        case Case(bs):
            inner = " [] ".join(f"{c} : {_unary(q)}" for c, q in bs)
            return f"(case {inner})"
        case Restrict(x, t, b):
            return f"(new {x}:{t}){_unary(b)}"
        case Repl(b):
            return f"!{_unary(b)}"
        case Assert(a):
            return f"(| {a} |)"
    return repr(p)


def _dc_repr(self) -> str:
    return f"{type(self).__name__}<{render(self)}>"


for _cls in (Nil, Par, Output, Input, Run, Case, Restrict, Repl, Assert):
    _cls.__repr__ = _dc_repr
