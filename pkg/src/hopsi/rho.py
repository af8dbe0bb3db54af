"""The reflective ρ-calculus: names are quoted processes.

Bound names are atomic (:class:`~hopsi.nominal.Name`); every free name is a
quote ``@P``.  Name equivalence is decided by normalisation: quotes of drops
collapse (``@*x`` is ``x``) and quoted processes are compared by canonical
forms for structural congruence.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field, fields, is_dataclass
from typing import Any

from .hopi import TOP, Handle, Top
from .instance import EMPTY_ENV, IllTyped, Instance, TypeEnv
from .nominal import Name, fresh, level_name, on_supply_change, subst, support, swap
from .semantics import reduce_steps
from .syntax import (
    NIL,
    Assert,
    Input,
    Nil,
    Output,
    Par,
    Process,
    Run,
    alpha_normal,
    canonicalize,
    map_embedded,
    par,
    render,
    skey,
)

# -- syntax --------------------------------------------------------------------------


class RProc:
    __slots__ = ()

    def __or__(self, other):
        return RPar(self, other)

    def __str__(self) -> str:
        return show(self)

    def __repr__(self) -> str:
        return f"{type(self).__name__}<{show(self)}>"


@dataclass(frozen=True, repr=False)
class RNil(RProc):
    pass


@dataclass(frozen=True, repr=False)
class RPar(RProc):
    left: RProc
    right: RProc


@dataclass(frozen=True, repr=False)
class Lift(RProc):
    """x!(P): quote P and send it on x.  ``ann`` is the payload type (typed variant)."""

    subject: Any
    payload: RProc
    ann: Any = None


@dataclass(frozen=True, repr=False)
class RIn(RProc):
    """x?(y).P; ``ann`` is the type of y (typed variant)."""

    subject: Any
    binder: Name
    body: RProc
    ann: Any = None


@dataclass(frozen=True, repr=False)
class RDrop(RProc):
    name: Any


@dataclass(frozen=True)
class Quote:
    proc: RProc

    def _key(self) -> str:
        return skey_rho(self)

    def __str__(self) -> str:
        if isinstance(self.proc, (RNil, RDrop)):
            return f"@{show(self.proc)}"
        return f"@({show(self.proc)})"


RNIL = RNil()
ZERO = Quote(RNIL)  # the smallest name


def rpar(*ps: RProc) -> RProc:
    ps = [p for p in ps if not isinstance(p, RNil)]
    if not ps:
        return RNIL
    out = ps[-1]
    for p in reversed(ps[:-1]):
        out = RPar(p, out)
    return out


def show(p: RProc) -> str:
    match p:
        case RNil():
            return "0"
        case RPar(l, r):
            return f"{_atom(l)} | {show(r)}"
        case Lift(x, q, t):
            ann = "" if t is None else f" : {t}"
            return f"{_name(x)}!({show(q)}{ann})"
        case RIn(x, y, b, t):
            ann = "" if t is None else f":{t}"
            return f"{_name(x)}?({y}{ann}).{_atom(b)}"
        case RDrop(x):
            return f"*{_name(x)}"
    raise TypeError(p)


def _atom(p: RProc) -> str:
    return f"({show(p)})" if isinstance(p, RPar) else show(p)


def _name(x) -> str:
    return str(x)


# nominal structure: atomic names are the only names


def _rsupport(self):
    match self:
        case RNil():
            return frozenset()
        case RPar(l, r):
            return support(l) | support(r)
        case Lift(x, q, _):
            return name_support(x) | support(q)
        case RIn(x, y, b, _):
            return name_support(x) | (support(b) - {y})
        case RDrop(x):
            return name_support(x)


def name_support(x) -> frozenset:
    return frozenset((x,)) if isinstance(x, Name) else support(x.proc)


def _rswap(self, a, b):
    match self:
        case RNil():
            return self
        case RPar(l, r):
            return RPar(swap(a, b, l), swap(a, b, r))
        case Lift(x, q, t):
            return Lift(_swap_name(a, b, x), swap(a, b, q), t)
        case RIn(x, y, body, t):
            return RIn(_swap_name(a, b, x), swap(a, b, y), swap(a, b, body), t)
        case RDrop(x):
            return RDrop(_swap_name(a, b, x))


def _swap_name(a, b, x):
    return swap(a, b, x) if isinstance(x, Name) else Quote(swap(a, b, x.proc))


def _rsubst(self, sigma):
    out = self
    for y, v in sigma.items():
        out = rho_subst(out, y, v)
    return out


for _cls in (RNil, RPar, Lift, RIn, RDrop):
    _cls._support = _rsupport
    _cls._swap = _rswap
    _cls._subst = _rsubst
    _cls._key = lambda self: "ρ" + skey_rho(self)


def rho_size(p: RProc) -> int:
    match p:
        case RNil():
            return 1
        case RPar(l, r):
            return rho_size(l) + rho_size(r)
        case Lift(x, q, _):
            return 1 + name_size(x) + rho_size(q)
        case RIn(x, _, b, _):
            return 1 + name_size(x) + rho_size(b)
        case RDrop(x):
            return 2 + name_size(x)
    raise TypeError(p)


def name_size(x) -> int:
    """What a name adds to a prefix: atomic names and @0 are free."""
    return 0 if isinstance(x, Name) else rho_size(x.proc) - 1


def components(p: RProc) -> list[RProc]:
    match p:
        case RNil():
            return []
        case RPar(l, r):
            return components(l) + components(r)
    return [p]


# -- canonical forms and name equivalence ---------------------------------------------


@functools.lru_cache(maxsize=200_000)
def rho_canon(p: RProc, depth: int = 0) -> RProc:
    """Canonical representative of the structural-congruence class of ``p``.

    Binders become de Bruijn level names, parallel components are flattened,
    stripped of 0 and sorted, and every name is normalised.
    """
    comps = []
    for c in components(p):
        match c:
            case Lift(x, q, t):
                comps.append(Lift(norm_name(x, depth), rho_canon(q, depth), t))
            case RIn(x, y, b, t):
                lv = level_name(depth)
                comps.append(RIn(norm_name(x, depth), lv, rho_canon(swap(y, lv, b), depth + 1), t))
            case RDrop(x):
                comps.append(RDrop(norm_name(x, depth)))
    return rpar(*sorted(comps, key=skey_rho))


def norm_name(x, depth: int = 0):
    """Rewrite @*x to x until none is left, with quoted processes canonical."""
    if isinstance(x, Name):
        return x
    c = rho_canon(x.proc, depth)
    if isinstance(c, RDrop):
        return c.name
    return Quote(c)


def name_eq(x1, x2) -> bool:
    """x1 ≡_N x2."""
    return norm_name(x1) == norm_name(x2)


def struct_cong(p: RProc, q: RProc) -> bool:
    return rho_canon(p) == rho_canon(q)


def skey_rho(v) -> str:
    match v:
        case RNil():
            return "0"
        case RPar(l, r):
            return f"({skey_rho(l)}|{skey_rho(r)})"
        case Lift(x, q, t):
            return f"L{skey_rho(x)}<{skey_rho(q)}>{'' if t is None else skey(t)}"
        case RIn(x, y, b, t):
            return f"I{skey_rho(x)}({skey(y)}){'' if t is None else skey(t)}.{skey_rho(b)}"
        case RDrop(x):
            return f"D{skey_rho(x)}"
        case Quote(q):
            return f"@{skey_rho(q)}"
        case Name():
            return skey(v)
    raise TypeError(v)


def canon_key(p: RProc) -> str:
    return skey_rho(rho_canon(p))


# -- substitution and reduction --------------------------------------------------------


def rho_subst(p: RProc, y: Name, n) -> RProc:
    """p{n/y}: names equivalent to y become n, and *x with x ≡_N y becomes the process in n.

    Quoted processes are atomic: a name is either replaced whole or left alone.
    """

    def name(x):
        return n if norm_name(x) == y else x

    match p:
        case RNil():
            return p
        case RPar(l, r):
            return RPar(rho_subst(l, y, n), rho_subst(r, y, n))
        case Lift(x, q, t):
            return Lift(name(x), rho_subst(q, y, n), t)
        case RIn(x, z, b, t):
            if z == y:
                return RIn(name(x), z, b, t)
            if z in name_support(n):
                z2 = fresh(z.display)
                z, b = z2, swap(z, z2, b)
            return RIn(name(x), z, rho_subst(b, y, n), t)
        case RDrop(x):
            if norm_name(x) == y:
                return n.proc if isinstance(n, Quote) else RDrop(n)
            return p
    raise TypeError(p)


def rho_step(p: RProc) -> list[RProc]:
    """Every one-step ρ-COM successor, one per structural-congruence class."""
    comps = components(p)
    out: dict[str, RProc] = {}
    for i, o in enumerate(comps):
        if not isinstance(o, Lift):
            continue
        for j, inp in enumerate(comps):
            if not isinstance(inp, RIn) or not name_eq(o.subject, inp.subject):
                continue
            rest = [c for k, c in enumerate(comps) if k not in (i, j)]
            q = rpar(*rest, rho_subst(inp.body, inp.binder, Quote(o.payload)))
            out.setdefault(canon_key(q), q)
    return [out[k] for k in sorted(out)]


@dataclass
class RhoRun:
    states: dict[str, RProc]
    edges: dict[str, list[str]]
    truncated: bool


def rho_explore(p: RProc, max_depth: int, budget: int | None = None) -> RhoRun:
    seen = {canon_key(p): p}
    edges: dict[str, list[str]] = {}
    frontier = [p]
    truncated = False
    for _ in range(max_depth):
        nxt = []
        for q in frontier:
            kq = canon_key(q)
            edges[kq] = []
            for r in rho_step(q):
                kr = canon_key(r)
                edges[kq].append(kr)
                if kr not in seen:
                    if budget is not None and len(seen) >= budget:
                        truncated = True
                        continue
                    seen[kr] = r
                    nxt.append(r)
        frontier = nxt
    if any(rho_step(q) for q in frontier):
        truncated = True
    return RhoRun(seen, edges, truncated)


# -- exhaustive enumeration and the brute-force oracle ---------------------------------


def enumerate_processes(max_size: int, scope: int = 0) -> list[RProc]:
    """Every process of size ≤ ``max_size`` whose free atomic names are among
    the first ``scope`` level names; binders are level names."""
    table = _Enum()
    return [p for n in range(1, max_size + 1) for p in table.procs(n, scope)]


class _Enum:
    def __init__(self):
        self.p_cache: dict = {}
        self.n_cache: dict = {}

    def names(self, n: int, scope: int) -> list:
        key = (n, scope)
        if key not in self.n_cache:
            out = [Quote(q) for q in self.procs(n + 1, scope)]
            if n == 0:
                out += [level_name(i) for i in range(scope)]
            self.n_cache[key] = out
        return self.n_cache[key]

    def procs(self, n: int, scope: int) -> list[RProc]:
        key = (n, scope)
        if key in self.p_cache:
            return self.p_cache[key]
        out: list[RProc] = []
        if n == 1:
            out.append(RNIL)
        for a in range(1, n):
            for l in self.procs(a, scope):
                for r in self.procs(n - a, scope):
                    out.append(RPar(l, r))
        for a in range(0, n - 1):
            for x in self.names(a, scope):
                for q in self.procs(n - 1 - a, scope):
                    out.append(Lift(x, q))
                for b in self.procs(n - 1 - a, scope + 1):
                    out.append(RIn(x, level_name(scope), b))
        if n >= 2:
            out += [RDrop(x) for x in self.names(n - 2, scope)]
        self.p_cache[key] = out
        return out


class _UnionFind:
    def __init__(self):
        self.parent: dict = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[ra] = rb
        return True


def closure_classes(max_size: int) -> _UnionFind:
    """Least relation on every term of size ≤ ``max_size`` closed under the
    monoid laws for |, the rule @*x ≡ x, equivalence and congruence.

    Terms are processes and names (wrapped as ``("N", x)``); α-conversion is
    built in because binders are always level names.
    """
    depth = max_size // 3 + 1
    procs: set[RProc] = set()
    for scope in range(depth + 1):
        procs.update(enumerate_processes(max_size, scope))
    uf = _UnionFind()

    def pnode(p):
        return ("P", p)

    def nnode(x):
        return ("N", x)

    names: set = set()
    for p in procs:
        uf.find(pnode(p))
        match p:
            case Lift(x, _) | RIn(x, _, _) | RDrop(x):
                names.add(x)
    names.update(Quote(p) for p in procs)
    for x in names:
        uf.find(nnode(x))

    # axioms
    for p in procs:
        if isinstance(p, RPar):
            l, r = p.left, p.right
            for q in (l, r):
                if isinstance(q, RNil):
                    other = r if q is l else l
                    uf.union(pnode(p), pnode(other))
            if RPar(r, l) in procs:
                uf.union(pnode(p), pnode(RPar(r, l)))
            if isinstance(l, RPar) and RPar(l.left, RPar(l.right, r)) in procs:
                uf.union(pnode(p), pnode(RPar(l.left, RPar(l.right, r))))
    for x in names:
        if isinstance(x, Quote) and isinstance(x.proc, RDrop) and x.proc.name in names:
            uf.union(nnode(x), nnode(x.proc.name))

    # congruence closure to a fixed point
    def signature(node):
        kind, v = node
        f = uf.find
        if kind == "N":
            return ("Q", f(pnode(v.proc))) if isinstance(v, Quote) else None
        match v:
            case RPar(l, r):
                return ("|", f(pnode(l)), f(pnode(r)))
            case Lift(x, q):
                return ("!", f(nnode(x)), f(pnode(q)))
            case RIn(x, y, b):
                return ("?", f(nnode(x)), y, f(pnode(b)))
            case RDrop(x):
                return ("*", f(nnode(x)))
        return None

    nodes = [pnode(p) for p in procs] + [nnode(x) for x in names]
    changed = True
    while changed:
        changed = False
        seen: dict = {}
        for node in nodes:
            sig = signature(node)
            if sig is None:
                continue
            if sig in seen:
                changed |= uf.union(node, seen[sig])
            else:
                seen[sig] = node
    return uf


@dataclass
class OracleReport:
    names: int
    classes: int
    disagreements: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.disagreements


def name_eq_oracle_check(max_size: int = 4) -> OracleReport:
    """Compare the partition of closed quoted processes induced by ``name_eq``
    with the one computed by brute-force closure."""
    uf = closure_classes(max_size)
    quoted = [Quote(p) for p in enumerate_processes(max_size, 0)]
    by_oracle: dict = {}
    by_norm: dict = {}
    for x in quoted:
        by_oracle.setdefault(uf.find(("N", x)), []).append(x)
        by_norm.setdefault(skey_rho(norm_name(x)), []).append(x)
    bad = []
    # two partitions agree iff each oracle class is exactly one norm class
    for cls in by_oracle.values():
        keys = {skey_rho(norm_name(x)) for x in cls}
        if len(keys) != 1:
            bad.append(("oracle-equal, nameEq-distinct", [str(x) for x in cls]))
        elif len(by_norm[keys.pop()]) != len(cls):
            bad.append(("nameEq-equal, oracle-distinct", [str(x) for x in cls]))
    return OracleReport(len(quoted), len(by_oracle), bad)


# -- the encoding into the higher-order psi-calculus --------------------------------------


@dataclass(frozen=True)
class StaticQuote:
    """@[P]: a statically quoted name.  Never substituted into; it is replaced
    whole only when it is equivalent to the substituted name."""

    proc: Process
    ty: Any = None

    def _support(self):
        return support(self.proc)

    def _swap(self, a, b):
        return StaticQuote(swap(a, b, self.proc), swap(a, b, self.ty))

    def _subst(self, sigma):
        t = term_norm(self)
        if isinstance(t, Name) and t in sigma:
            return sigma[t]
        return self

    def _map_procs(self, f):
        return StaticQuote(f(self.proc), self.ty)

    def _key(self) -> str:
        return f"SQ[{skey(self.proc)}]{skey(self.ty)}"

    def __str__(self) -> str:
        return f"@[{render(self.proc)}]"


@dataclass(frozen=True)
class DynQuote:
    """<P>: the quoted object of a lift.  It keeps the ρ-process so that both
    translations of it stay available after substitution."""

    proc: RProc
    ty: Any = None

    def _support(self):
        return support(self.proc)

    def _swap(self, a, b):
        return DynQuote(swap(a, b, self.proc), swap(a, b, self.ty))

    def _subst(self, sigma):
        q = self.proc
        for y, v in sigma.items():
            if y in support(q):
                q = rho_subst(q, y, decode_name(v))
        return DynQuote(q, self.ty)

    def _key(self) -> str:
        return f"DQ[{skey_rho(self.proc)}]{skey(self.ty)}"

    def __str__(self) -> str:
        return f"<{show(self.proc)}>"


@dataclass(frozen=True)
class Equiv:
    """M <-> N: channel equivalence."""

    left: Any
    right: Any

    def _support(self):
        return support((self.left, self.right))

    def _swap(self, a, b):
        return Equiv(swap(a, b, self.left), swap(a, b, self.right))

    def _subst(self, sigma):
        return Equiv(subst(self.left, sigma), subst(self.right, sigma))

    def _map_procs(self, f):
        return Equiv(map_embedded(self.left, f), map_embedded(self.right, f))

    def __str__(self) -> str:
        return f"{self.left} <-> {self.right}"


@dataclass(frozen=True)
class StructEq:
    """P == Q as a condition."""

    left: Process
    right: Process

    def _support(self):
        return support((self.left, self.right))

    def _swap(self, a, b):
        return StructEq(swap(a, b, self.left), swap(a, b, self.right))

    def _subst(self, sigma):
        return StructEq(subst(self.left, sigma), subst(self.right, sigma))

    def _map_procs(self, f):
        return StructEq(f(self.left), f(self.right))

    def __str__(self) -> str:
        return f"[{render(self.left)}] == [{render(self.right)}]"


@dataclass(frozen=True)
class TermBindings:
    """A finite set of ``M : T`` declarations; ⊗ is union, 1 is empty."""

    entries: frozenset = frozenset()

    def __or__(self, other: "TermBindings") -> "TermBindings":
        return TermBindings(self.entries | other.entries)

    def __le__(self, other: "TermBindings") -> bool:
        return self.entries <= other.entries

    def __iter__(self):
        return iter(sorted(self.entries, key=skey))

    def __len__(self) -> int:
        return len(self.entries)

    def _support(self):
        return support(self.entries)

    def _swap(self, a, b):
        return TermBindings(swap(a, b, self.entries))

    def _subst(self, sigma):
        return TermBindings(frozenset((subst(m, sigma), t) for m, t in self.entries))

    def _map_procs(self, f):
        return TermBindings(frozenset((map_embedded(m, f), t) for m, t in self.entries))

    def _key(self) -> str:
        return "TB" + skey(self.entries)

    def __str__(self) -> str:
        return "{" + ", ".join(f"{m} : {t}" for m, t in self) + "}"


NO_DECLS = TermBindings()


def declare(*pairs) -> TermBindings:
    return TermBindings(frozenset(pairs))


class MissingAnnotation(IllTyped):
    def __init__(self, message: str):
        super().__init__("ANNOT", message)


def encode(p: RProc, nested: bool = False, typed: bool = False) -> Process:
    """⟦p⟧, or N⟦p⟧ with ``nested``.

    A drop of a free quoted name is inert and becomes 0 at top level; inside
    names (``nested``) it becomes ``run @[...]`` so that structure is kept.
    With ``typed``, every lift and input also asserts the declared types of
    its quoted terms.
    """
    match p:
        case RNil():
            return NIL
        case RPar(l, r):
            return Par(encode(l, nested, typed), encode(r, nested, typed))
        case Lift(x, q, t):
            if typed and t is None:
                raise MissingAnnotation(f"lift {show(p)} has no payload type")
            subj = encode_name(x, None if t is None else Pair(t))
            out = Output(subj, DynQuote(q, t), NIL)
            if not typed:
                return out
            decls = {(DynQuote(q, t), t)} | _subject_decl(subj)
            return Par(out, Assert(TermBindings(frozenset(decls))))
        case RIn(x, y, b, t):
            if typed and t is None:
                raise MissingAnnotation(f"input {show(p)} has no binder type")
            subj = encode_name(x, None if t is None else Pair(t))
            inp = Input(subj, ((y, t),), y, encode(b, nested, typed))
            if not typed or isinstance(subj, Name):
                return inp
            return Par(inp, Assert(TermBindings(frozenset(_subject_decl(subj)))))
        case RDrop(x):
            if isinstance(x, Name):
                return Run(x)
            return Run(StaticQuote(encode(x.proc, True))) if nested else NIL
    raise TypeError(p)


def _subject_decl(subj) -> set:
    return {(subj, subj.ty)} if isinstance(subj, StaticQuote) else set()


def encode_name(x, ty=None):
    """⟦x⟧: atomic names are themselves, quotes use the nested translation."""
    if isinstance(x, Name):
        return x
    return StaticQuote(encode(x.proc, True), ty)


def decode(p: Process) -> RProc:
    """Left inverse of both translations (assertions are dropped)."""
    match p:
        case Nil() | Assert():
            return RNIL
        case Par(l, r):
            return rpar(decode(l), decode(r))
        case Output(m, DynQuote(q, t), _):
            return Lift(decode_name(m), q, t)
        case Input(m, ((y, t),), _, b):
            return RIn(decode_name(m), y, decode(b), t)
        case Run(m):
            return RDrop(decode_name(m))
    raise ValueError(f"not in the image of the encoding: {p!r}")


def decode_name(m):
    match m:
        case Name():
            return m
        case StaticQuote(q, _):
            return Quote(decode(q))
        case DynQuote(q, _):
            return Quote(q)
    raise ValueError(f"not a ρ-name: {m!r}")


@on_supply_change
def _clear_caches():
    rho_canon.cache_clear()
    term_norm.cache_clear()
    proc_norm.cache_clear()


@functools.lru_cache(maxsize=200_000)
def term_norm(m, depth: int = 0):
    """Normal form for channel equivalence: @[run M] is M, quoted processes
    are compared up to structural congruence, and <P> is the name @P."""
    match m:
        case StaticQuote(p, t):
            c = proc_norm(p, depth)
            if isinstance(c, Run):
                inner = c.handle
                if t is not None and isinstance(inner, StaticQuote):
                    return StaticQuote(inner.proc, t)
                return inner
            return StaticQuote(c, t)
        case DynQuote(q, t):
            return term_norm(StaticQuote(encode(q, True), t), depth)
    return m


@functools.lru_cache(maxsize=200_000)
def proc_norm(p: Process, depth: int = 0, unfold: bool = False) -> Process:
    """Canonical form for ≡ on encoded processes: α, the monoid laws and the
    congruence rules with channel equivalence on subjects.  With ``unfold``
    also rewrite run <P> and run @[P] to the process inside."""
    comps: list[Process] = []

    def flat(q: Process):
        match q:
            case Nil():
                return
            case Par(l, r):
                flat(l)
                flat(r)
            case Run(DynQuote(r, t)) if unfold:
                flat(proc_norm(encode(r, typed=t is not None), depth, True))
            case Run(StaticQuote(r, _)) if unfold:
                flat(proc_norm(r, depth, True))
            case Run(m):
                comps.append(Run(term_norm(m, depth)))
            case Output(s, o, c):
                comps.append(Output(term_norm(s, depth), _object_norm(o, depth), proc_norm(c, depth, unfold)))
            case Input(s, ((x, t),), pat, body):
                lv = level_name(depth)
                body = proc_norm(swap(x, lv, body), depth + 1, unfold)
                comps.append(Input(term_norm(s, depth), ((lv, t),), swap(x, lv, pat), body))
            case Assert(TermBindings(es)):
                comps.append(Assert(TermBindings(frozenset((term_norm(m, depth), t) for m, t in es))))
            case _:
                comps.append(q)

    flat(p)
    return par(*sorted(comps, key=skey))


def _object_norm(o, depth):
    # a sent object is a process: compare it by ≡, never collapse it to a name
    if isinstance(o, DynQuote):
        return ("obj", proc_norm(encode(o.proc, True), depth), o.ty)
    return term_norm(o, depth)


def behav_eq(p: Process, q: Process) -> bool:
    """The least ≃ containing ≡ and run <P> ≃ ⟦P⟧."""
    return proc_norm(p, 0, True) == proc_norm(q, 0, True)


# -- types for the reflection type system ----------------------------------------------------


@dataclass(frozen=True)
class Base:
    """<B, Γ>: a name whose process runs under Γ and carries nothing."""

    env: TypeEnv = EMPTY_ENV

    def _subst(self, sigma):
        return self

    def __str__(self) -> str:
        return "<B>" if not len(self.env) else f"<B, {self.env}>"


@dataclass(frozen=True)
class Pair:
    """<T, Γ>: a channel carrying names of type T whose own process runs under Γ."""

    carried: Any
    env: TypeEnv = EMPTY_ENV

    def _subst(self, sigma):
        return self

    def __str__(self) -> str:
        return f"<{self.carried}>" if not len(self.env) else f"<{self.carried}, {self.env}>"


# -- the instance ------------------------------------------------------------------------------


class RhoInstance(Instance):
    """The untyped encoding: entailment, handles and substitution."""

    name = "rho"
    unit = NO_DECLS
    typed = False
    empty_handles = "warn"

    def entails(self, psi, cond) -> bool:
        match cond:
            case Top():
                return True
            case Equiv(a, b):
                return term_norm(a) == term_norm(b)
            case StructEq(p, q):
                return proc_norm(p) == proc_norm(q)
            case Handle(m, q):
                return any(proc_norm(h) == proc_norm(q) for h in self.handles(psi, m))
        return False

    def chan_eq(self, m, k):
        return Equiv(m, k)

    def handle_cond(self, m, p):
        return Handle(m, p)

    def handles(self, psi, m):
        match m:
            case DynQuote(q, t):
                return [encode(q, typed=self.typed and t is not None)]
            case StaticQuote(q, _):
                return [q]
        return []

    def canon_term(self, v, depth):
        match v:
            case StaticQuote(p, t):
                return StaticQuote(canonicalize(p, self.canon_term, depth), t)
            case DynQuote(q, t):
                return DynQuote(rho_canon(q, depth), t)
            case TermBindings(es):
                return TermBindings(frozenset((self.canon_term(m, depth), t) for m, t in es))
            case Equiv(a, b):
                return Equiv(self.canon_term(a, depth), self.canon_term(b, depth))
        return alpha_normal(v, depth)

    def specialises(self, a, b) -> bool:
        return a <= b

    def assertion_eq(self, a, b) -> bool:
        return a == b

    def type_names(self, v) -> frozenset:
        if isinstance(v, (Base, Pair, TypeEnv)):
            return frozenset(support(v.env if not isinstance(v, TypeEnv) else v)) | (
                self.type_names(v.carried) if isinstance(v, Pair) else frozenset()
            )
        if isinstance(v, (tuple, list, frozenset)):
            return frozenset().union(*(self.type_names(x) for x in v))
        if isinstance(v, RProc):
            return frozenset()
        if is_dataclass(v):
            return frozenset().union(*(self.type_names(getattr(v, f.name)) for f in fields(v)))
        return frozenset()


RHO = RhoInstance()


# -- operational correspondence -------------------------------------------------------------


@dataclass
class Violation:
    direction: str  # forward or backward
    state: str
    successor: str


@dataclass
class CorrespondenceReport:
    states: int = 0
    steps: int = 0
    violations: list[Violation] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def encoded_successors(p: RProc, inst: RhoInstance = RHO) -> list[Process]:
    return [after for after, _ in reduce_steps(inst.unit, encode(p), inst)]


def correspondence_check(p: RProc, depth: int) -> CorrespondenceReport:
    """P → P' iff ⟦P⟧ → ≃ ⟦P'⟧, at every ρ-state within ``depth`` steps of ``p``."""
    report = CorrespondenceReport()
    seen = {canon_key(p)}
    frontier = [p]
    for _ in range(depth):
        nxt = []
        for q in frontier:
            report.states += 1
            rs = rho_step(q)
            hs = encoded_successors(q)
            targets = [encode(r) for r in rs]
            report.steps += len(rs) + len(hs)
            for r, er in zip(rs, targets):
                if not any(behav_eq(h, er) for h in hs):
                    report.violations.append(Violation("forward", show(q), show(r)))
            for h in hs:
                if not any(behav_eq(h, er) for er in targets):
                    report.violations.append(Violation("backward", show(q), render(h)))
            for r in rs:
                k = canon_key(r)
                if k not in seen:
                    seen.add(k)
                    nxt.append(r)
        frontier = nxt
    return report


def preserves_name_eq(x1, x2) -> bool:
    """x1 ≡_N x2 iff 1 ⊩ ⟦x1⟧ <-> ⟦x2⟧."""
    return name_eq(x1, x2) == RHO.entails(RHO.unit, Equiv(encode_name(x1), encode_name(x2)))


# -- generation ------------------------------------------------------------------------------

CHANNELS = (ZERO, Quote(RDrop(ZERO) | RDrop(ZERO)), Quote(Lift(ZERO, RNIL)))


def gen_rho(rng, size: int, scope: tuple = (), channels=CHANNELS) -> RProc:
    """A random closed ρ-process of size at most ``size`` (free atomic names
    only from ``scope``).  Subjects mostly come from ``channels`` so that
    communication happens; a matching lift/input pair is sometimes forced."""
    if size <= 1:
        return RNIL
    if size >= 4 and rng.random() < 0.5:
        x = _gen_name(rng, scope, channels, (size - 4) // 2)
        room = size - 2 - 2 * name_size(x)
        k = rng.randint(1, max(1, room - 1))
        y = fresh("y")
        payload = gen_rho(rng, k, scope, channels)
        body = gen_rho(rng, max(1, room - rho_size(payload)), scope + (y,), channels)
        return RPar(Lift(x, payload), RIn(x, y, body))
    r = rng.random()
    if r < 0.25:
        k = rng.randint(1, size - 1)
        return RPar(gen_rho(rng, k, scope, channels), gen_rho(rng, size - k, scope, channels))
    if r < 0.55 and size >= 3:
        x = _gen_name(rng, scope, channels, size - 2)
        y = fresh("y")
        return RIn(x, y, gen_rho(rng, max(1, size - 1 - name_size(x)), scope + (y,), channels))
    if r < 0.85 and size >= 3:
        x = _gen_name(rng, scope, channels, size - 2)
        return Lift(x, gen_rho(rng, max(1, size - 1 - name_size(x)), scope, channels))
    return RDrop(_gen_name(rng, scope, channels, size - 1))


def _gen_name(rng, scope, channels, budget: int):
    r = rng.random()
    if scope and r < 0.35:
        return rng.choice(scope)
    fitting = [c for c in channels if name_size(c) <= budget]
    if fitting and r < 0.9:
        return rng.choice(fitting)
    return Quote(gen_rho(rng, max(1, min(budget, 2)), scope, channels))


def gen_corpus(rng, count: int, size: int) -> list[RProc]:
    """``count`` processes of size ≤ ``size``, pairwise not structurally
    congruent and each able to reduce, sampled from the exhaustive enumeration
    (all of them if there are fewer).  Binders are made fresh."""
    classes: dict[str, RProc] = {}
    for p in enumerate_processes(size):
        if rho_step(p):
            classes.setdefault(canon_key(p), p)
    keys = sorted(classes)
    chosen = keys if len(keys) <= count else sorted(rng.sample(keys, count))
    return [freshen_binders(classes[k]) for k in chosen]


def freshen_binders(p: RProc) -> RProc:
    match p:
        case RPar(l, r):
            return RPar(freshen_binders(l), freshen_binders(r))
        case Lift(x, q, t):
            return Lift(_freshen_name(x), freshen_binders(q), t)
        case RIn(x, y, b, t):
            z = fresh("y")
            return RIn(_freshen_name(x), z, freshen_binders(swap(y, z, b)), t)
        case RDrop(x):
            return RDrop(_freshen_name(x))
    return p


def _freshen_name(x):
    return Quote(freshen_binders(x.proc)) if isinstance(x, Quote) else x


# -- the reflection type system ------------------------------------------------------------

CLOSED = Base()  # processes needing no environment
CHAN = Pair(CLOSED)  # channels carrying closed processes
CHAN_CHAN = Pair(CHAN)  # channels carrying channels

# names with a declared type: @0 and @(*@0 | *@0 | *@0) carry processes, @(*@0 | *@0) carries names
TYPED_CHANNELS = (
    (ZERO, CHAN),
    (Quote(rpar(RDrop(ZERO), RDrop(ZERO), RDrop(ZERO))), CHAN),
    (Quote(RDrop(ZERO) | RDrop(ZERO)), CHAN_CHAN),
)
# processes usable as payloads of channel type (their quotes are channels)
CHANNEL_PAYLOADS = tuple((q.proc, t) for q, t in TYPED_CHANNELS)


def channel_declarations(channels=TYPED_CHANNELS) -> TermBindings:
    """The declarations every typed program starts from."""
    return declare(*((StaticQuote(encode(x.proc, True), t), t) for x, t in channels))


def encode_typed(p: RProc, channels=TYPED_CHANNELS) -> Process:
    """⟦p⟧ with type declarations, alongside the channel declarations."""
    return Par(Assert(channel_declarations(channels)), encode(p, typed=True))


class RhoTypedInstance(RhoInstance):
    name = "rho-typed"
    typed = True

    def term_types(self, env, psi, m):
        if isinstance(m, Name):
            return [env.lookup(m)]
        if not isinstance(m, (StaticQuote, DynQuote)):
            raise IllTyped("TERM", f"not a term: {m!r}")
        key = term_norm(m)
        declared = sorted({t for m2, t in psi.entries if term_norm(m2) == key}, key=skey)
        if m.ty is not None:
            declared = [t for t in declared if t == m.ty]
        if not declared:
            raise IllTyped("TERM", f"{m} has no declared type")
        out, last = [], None
        for t in declared:
            try:
                self._check_inside(m, t, psi)
                out.append(t)
            except IllTyped as e:
                last = e
        if not out:
            raise IllTyped("TERM", f"the process in {m} does not check: {last.message}")
        return out

    def _check_inside(self, m, t, psi):
        from .typecheck import Checker, _judgment_names

        inner = encode(decode_name(m).proc, typed=True)
        _judgment_names(t.env, inner)
        Checker(self).check(t.env, psi, inner)

    def handles(self, psi, m):
        # the process inside a quote, in the annotated translation
        if isinstance(m, (StaticQuote, DynQuote)):
            try:
                return [encode(decode_name(m).proc, typed=True)]
            except MissingAnnotation:
                return []
        return []

    def check_condition(self, env, psi, cond):
        match cond:
            case Top():
                return
            case Equiv(a, b):
                self.term_types(env, psi, a)
                self.term_types(env, psi, b)
            case Handle(m, _):
                self.term_types(env, psi, m)
            case StructEq():
                pass
            case _:
                raise IllTyped("T-CON", f"not a condition: {cond!r}")
        if not self.entails(psi, cond):
            raise IllTyped("T-CON", f"condition {cond} is not entailed")

    def check_assertion(self, env, psi, a):
        if not isinstance(a, TermBindings):
            raise IllTyped("T-ASS", f"not an assertion: {a!r}")
        for m, t in a:
            if not isinstance(m, (StaticQuote, DynQuote)):
                raise IllTyped("T-ASS", f"only quotes are declared, not {m}")
            if not isinstance(t, (Base, Pair)):
                raise IllTyped("T-ASS", f"{t} is not a name type")
            if m.ty is not None and m.ty != t:
                raise IllTyped("T-ASS", f"{m} is declared {t} but carries type {m.ty}")
            if not all(env.get(x, u) == u for x, u in t.env.items()):
                raise IllTyped("T-ASS", f"{t} disagrees with the environment {env}")

    def compat(self, t, direction):
        if isinstance(t, Pair):
            return t.carried
        raise IllTyped("T-CHA", f"{t} is not a channel type")

    def extract_env(self, t, env, psi):
        if not isinstance(t, (Base, Pair)):
            raise IllTyped("T-END", f"{t} is not a name type")
        return t.env

    # generators

    types = (CLOSED, CHAN, CHAN_CHAN)

    def gen_env(self, rng):
        return TypeEnv([(fresh("z"), rng.choice(self.types)) for _ in range(rng.randint(0, 2))])

    def gen_type(self, rng, env):
        return rng.choice(self.types)

    def gen_assertion(self, rng, env):
        decls = set(channel_declarations().entries) if rng.random() < 0.8 else set()
        for _ in range(rng.randint(0, 2)):
            t = rng.choice(self.types)
            decls.add((DynQuote(_payload(rng, t, 3), t), t))
        return TermBindings(frozenset(decls))

    def gen_term(self, rng, env, psi):
        r = rng.random()
        if len(env) and r < 0.3:
            return rng.choice(list(env))
        if r < 0.65:
            x, t = rng.choice(TYPED_CHANNELS)
            return StaticQuote(encode(x.proc, True), t)
        t = rng.choice(self.types)
        return DynQuote(_payload(rng, t, 3), t)

    def gen_condition(self, rng, env, psi):
        a = self.gen_term(rng, env, psi)
        b = a if rng.random() < 0.5 else self.gen_term(rng, env, psi)
        return Equiv(a, b)

    def gen_process(self, rng, env, psi, size):
        scope = {x: t for x, t in env.items() if isinstance(t, (Base, Pair))}
        return encode(gen_typed_rho(rng, size, scope), typed=True)


RHO_TYPED = RhoTypedInstance()


def _payload(rng, t, size):
    if t == CLOSED:
        return gen_typed_rho(rng, size, {})
    options = [p for p, u in CHANNEL_PAYLOADS if Pair(u.carried) == t or u == t]
    return rng.choice(options) if options else RNIL


def gen_typed_rho(rng, size: int, scope: dict) -> RProc:
    """A random annotated ρ-process over the typed channels; ``scope`` maps
    atomic names to their types."""
    chans = [(x, t) for x, t in TYPED_CHANNELS] + [(x, t) for x, t in scope.items() if isinstance(t, Pair)]
    if size <= 1:
        return RNIL
    r = rng.random()
    if size >= 4 and r < 0.45:
        x, t = rng.choice(chans)
        y = fresh("y")
        k = rng.randint(1, max(1, size - 3))
        payload = _payload(rng, t.carried, k)
        body = gen_typed_rho(rng, max(1, size - 2 - rho_size(payload)), {**scope, y: t.carried})
        return RPar(Lift(x, payload, t.carried), RIn(x, y, body, t.carried))
    if r < 0.6:
        k = rng.randint(1, size - 1)
        return RPar(gen_typed_rho(rng, k, scope), gen_typed_rho(rng, size - k, scope))
    if r < 0.75:
        x, t = rng.choice(chans)
        y = fresh("y")
        return RIn(x, y, gen_typed_rho(rng, size - 1, {**scope, y: t.carried}), t.carried)
    if r < 0.88:
        x, t = rng.choice(chans)
        return Lift(x, _payload(rng, t.carried, size - 1), t.carried)
    if scope:
        return RDrop(rng.choice(sorted(scope, key=skey)))
    return RDrop(ZERO)
