"""Simplified higher-order π: names and processes as terms, drop/ch types.

Terms are names or embedded processes ``[P]``.  An embedded process is a
handle for itself under every assertion.  Assertions are finite sets of
bindings ``[P]: drop{Γ}`` and double as type environments for the processes
they mention.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, fields, is_dataclass

from .instance import EMPTY_ENV, IllTyped, Instance, Redex, TypeEnv, UnboundName
from .nominal import Name, fresh, subst, support, swap
from .syntax import (
    NIL,
    Case,
    Input,
    Nil,
    Output,
    Par,
    Process,
    Repl,
    Restrict,
    Run,
    alpha_equal,
    alpha_normal,
    canonicalize,
    map_embedded,
    par,
    render,
    skey,
)

# -- types -------------------------------------------------------------------------


@dataclass(frozen=True)
class Ch:
    carried: object

    def _support(self):
        return support(self.carried)

    def _swap(self, a, b):
        return Ch(swap(a, b, self.carried))

    def _subst(self, sigma):
        return self

    def __str__(self) -> str:
        return f"ch({self.carried})"


@dataclass(frozen=True)
class Drop:
    env: TypeEnv

    def _support(self):
        return support(self.env)

    def _swap(self, a, b):
        return Drop(swap(a, b, self.env))

    def _subst(self, sigma):
        return self

    def __str__(self) -> str:
        return f"drop{self.env}"


DROP0 = Drop(EMPTY_ENV)

# -- terms, conditions, assertions --------------------------------------------------


@dataclass(frozen=True)
class ProcTerm:
    proc: Process

    def _support(self):
        return support(self.proc)

    def _swap(self, a, b):
        return ProcTerm(swap(a, b, self.proc))

    def _subst(self, sigma):
        return ProcTerm(subst(self.proc, sigma))

    def _map_procs(self, f):
        return ProcTerm(f(self.proc))

    def _key(self) -> str:
        return f"[{skey(self.proc)}]"

    def __str__(self) -> str:
        return f"[{render(self.proc)}]"


@dataclass(frozen=True)
class Top:
    def _key(self) -> str:
        return "T"

    def __str__(self) -> str:
        return "true"


TOP = Top()


@dataclass(frozen=True)
class ChanEq:
    left: object
    right: object

    def _support(self):
        return support((self.left, self.right))

    def _swap(self, a, b):
        return ChanEq(swap(a, b, self.left), swap(a, b, self.right))

    def _subst(self, sigma):
        return ChanEq(subst(self.left, sigma), subst(self.right, sigma))

    def _map_procs(self, f):
        return ChanEq(map_embedded(self.left, f), map_embedded(self.right, f))

    def __str__(self) -> str:
        return f"{self.left} = {self.right}"


@dataclass(frozen=True)
class Handle:
    """M ⇐ P: term ``handle`` stands for process ``proc``."""

    handle: object
    proc: Process

    def _support(self):
        return support((self.handle, self.proc))

    def _swap(self, a, b):
        return Handle(swap(a, b, self.handle), swap(a, b, self.proc))

    def _subst(self, sigma):
        return Handle(subst(self.handle, sigma), subst(self.proc, sigma))

    def _map_procs(self, f):
        return Handle(map_embedded(self.handle, f), f(self.proc))

    def __str__(self) -> str:
        return f"{self.handle} <= [{render(self.proc)}]"


@dataclass(frozen=True)
class Bindings:
    """A finite set of ``[P]: T`` bindings; ⊗ is union, 1 is empty."""

    entries: frozenset = frozenset()

    def __or__(self, other: "Bindings") -> "Bindings":
        return Bindings(self.entries | other.entries)

    def __le__(self, other: "Bindings") -> bool:
        return self.entries <= other.entries

    def __iter__(self):
        return iter(sorted(self.entries, key=skey))

    def __len__(self) -> int:
        return len(self.entries)

    def _support(self):
        return support(self.entries)

    def _swap(self, a, b):
        return Bindings(swap(a, b, self.entries))

    def _subst(self, sigma):
        return Bindings(subst(self.entries, sigma))

    def _map_procs(self, f):
        return Bindings(frozenset((f(p), t) for p, t in self.entries))

    def _key(self) -> str:
        return "B" + skey(self.entries)

    def __str__(self) -> str:
        return "{" + ", ".join(f"[{render(p)}]: {t}" for p, t in self) + "}"


EMPTY = Bindings()


def binding(p: Process, t) -> Bindings:
    return Bindings(frozenset({(p, t)}))


def consistent(inner: TypeEnv, env: TypeEnv) -> bool:
    """Names typed by both environments get the same type."""
    return all(env.get(x, t) == t for x, t in inner.items())


# -- the instance ---------------------------------------------------------------------


class HopiInstance(Instance):
    name = "hopi"
    unit = EMPTY
    empty_handles = "warn"  # run x on a received variable: deadlock, not a type error

    def __init__(self, max_size: int = 6):
        self.max_size = max_size

    # semantics

    def entails(self, psi, cond) -> bool:
        match cond:
            case Top():
                return True
            case ChanEq(a, b):
                return isinstance(a, Name) and a == b
            case Handle(ProcTerm(p), q):
                return alpha_equal(p, q)
        return False

    def chan_eq(self, m, k):
        return ChanEq(m, k)

    def handle_cond(self, m, p):
        return Handle(m, p)

    def handles(self, psi, m):
        return [m.proc] if isinstance(m, ProcTerm) else []

    def type_names(self, v) -> frozenset:
        if isinstance(v, (Ch, Drop, TypeEnv)):
            return frozenset(support(v))
        if isinstance(v, (tuple, list, frozenset)):
            return frozenset().union(*(self.type_names(x) for x in v))
        if is_dataclass(v):
            return frozenset().union(*(self.type_names(getattr(v, f.name)) for f in fields(v)))
        return frozenset()

    def canon_term(self, v, depth):
        return map_embedded(v, lambda q: canonicalize(q, self.canon_term, depth))

    def wrong(self, psi, p):
        out: list[Redex] = []

        def walk(q, path):
            match q:
                case Par(l, r):
                    walk(l, path + (0,))
                    walk(r, path + (1,))
                case Restrict(_, _, b) | Repl(b):
                    walk(b, path + (0,))
                case Output(ProcTerm(), _, _) | Input(ProcTerm(), _, _, _):
                    out.append(Redex("Wrong", path, "process used as channel"))
                case Run(m) if not self.handles(psi, m):
                    out.append(Redex("Wrong", path, f"run on non-handle {m}"))

        walk(p, ())
        return out

    def render_assertion(self, a) -> str:
        return str(a)

    # typing

    def term_types(self, env, psi, m):
        if isinstance(m, Name):
            return [env.lookup(m)]
        if isinstance(m, ProcTerm):
            found = [t for q, t in psi.entries if isinstance(t, Drop) and alpha_equal(q, m.proc)]
            if not found:
                raise IllTyped("TERM2", f"no drop binding for {m} in the assertion")
            ok, last = [], None
            for t in sorted(found, key=skey):
                try:
                    self._check_inner(t.env, psi, m.proc)
                    ok.append(t)
                except IllTyped as e:
                    last = e
            if not ok:
                raise IllTyped("TERM2", f"{m} is ill-typed under its drop environment: {last}")
            return ok
        raise IllTyped("TERM", f"not a term: {m!r}")

    def synth_term(self, env, psi, m):
        return self.term_types(env, psi, m)[0]

    def _check_inner(self, env, psi, p):
        from .typecheck import Checker, _judgment_names

        _judgment_names(env, p)
        Checker(self).check(env, psi, p)

    def check_condition(self, env, psi, cond):
        match cond:
            case Top():
                return
            case ChanEq(a, b):
                for x in (a, b):
                    if not isinstance(x, Name) or not isinstance(env.lookup(x), Ch):
                        raise IllTyped("T-CON", f"{x} is not a channel")
            case Handle(m, q):
                self.term_types(env, psi, m)
            case _:
                raise IllTyped("T-CON", f"not a condition: {cond!r}")
        if not self.entails(psi, cond):
            raise IllTyped("T-CON", f"condition {cond} is not entailed")

    def check_assertion(self, env, psi, a):
        if not isinstance(a, Bindings):
            raise IllTyped("T-ASS", f"not an assertion: {a!r}")
        seen: dict = {}
        for p, t in a:
            if not isinstance(t, Drop):
                raise IllTyped("T-ASS", f"[{render(p)}] bound to non-drop type {t}")
            k = alpha_normal(p)
            if seen.setdefault(k, t) != t:
                raise IllTyped("T-ASS", f"conflicting types for [{render(p)}]")
            if not consistent(t.env, env):
                raise IllTyped("T-ASS", f"drop environment {t.env} disagrees with {env}")
            self._check_inner(t.env, psi, p)

    def compat(self, t, direction):
        if isinstance(t, Ch):
            return t.carried
        raise IllTyped("T-CHA", f"{t} is not a channel type")

    def extract_env(self, t, env, psi):
        if not isinstance(t, Drop):
            raise IllTyped("T-END", f"{t} is not a drop type")
        if not consistent(t.env, env):
            raise IllTyped("T-END", f"drop environment {t.env} disagrees with {env}")
        return t.env

    # generators

    def gen_env(self, rng: random.Random) -> TypeEnv:
        env = EMPTY_ENV
        for i in range(rng.randint(1, 4)):
            x = fresh("abcd"[i])
            env = env.extend(x, Ch(self._carried(rng, env, 2)))
        return env

    def _sub_env(self, rng, env, bound=()) -> TypeEnv:
        return TypeEnv([(x, t) for x, t in env.items() if x not in bound and rng.random() < 0.4])

    def _carried(self, rng, env, depth, bound=()):
        r = rng.random()
        if depth > 0 and r < 0.3:
            return Ch(self._carried(rng, env, depth - 1, bound))
        if r < 0.55 and len(env):
            return env.lookup(rng.choice(list(env.items()))[0])
        return Drop(self._sub_env(rng, env, bound))

    def gen_type(self, rng, env):
        r = rng.random()
        if r < 0.45:
            return Drop(self._sub_env(rng, env))
        return Ch(self._carried(rng, env, 1))

    def gen_assertion(self, rng, env):
        entries = set()
        for _ in range(rng.choice([0, 1, 1, 2])):
            sub = self._sub_env(rng, env)
            q = self._gen(rng, sub, EMPTY, rng.randint(1, 3), {}, {"top": sub, "new": set()})
            entries.add((q, Drop(sub)))
        a = Bindings(frozenset(entries))
        try:
            self.check_assertion(env, EMPTY, a)
        except IllTyped:
            return EMPTY
        return a

    def gen_term(self, rng, env, psi):
        r = rng.random()
        names = [x for x, _ in env.items()]
        if names and r < 0.5:
            return rng.choice(names)
        if psi.entries and r < 0.85:
            return ProcTerm(rng.choice(sorted(psi.entries, key=skey))[0])
        sub = self._sub_env(rng, env)
        return ProcTerm(self._gen(rng, sub, EMPTY, 2, {}, {"top": sub, "new": set()}))

    def gen_condition(self, rng, env, psi):
        r = rng.random()
        names = [x for x, _ in env.items()]
        if names and r < 0.4:
            a = rng.choice(names)
            return ChanEq(a, a if rng.random() < 0.6 else rng.choice(names))
        if r < 0.7:
            m = self.gen_term(rng, env, psi)
            if isinstance(m, ProcTerm):
                return Handle(m, m.proc)
        return TOP

    def gen_process(self, rng, env, psi, size):
        """A process of at most ``size`` nodes over ``env``, usually well typed under ``psi``."""
        from .syntax import Assert, size as psize

        best = None
        for _ in range(12):
            extra = self.gen_assertion(rng, env) if rng.random() < 0.4 else EMPTY
            budget = rng.randint(max(1, size // 2), size)
            ctx = {"top": env, "new": set(), "pairs": rng.choice([0, 1, 2, 3])}
            body = self._gen(rng, env, psi | extra, budget, {}, ctx)
            extra = extra | Bindings(frozenset(ctx["new"]))
            p = par(Assert(extra), body) if extra.entries else body
            n = psize(p)
            if n <= size:
                return p
            if best is None or n < psize(best):
                best = p
        return best

    def _gen(self, rng, env, psi, size, bound, ctx):
        """Type-directed generation.  ``bound`` maps input-bound names to their
        types; they never occur inside types, since substitution leaves types alone."""
        if size <= 1:
            return self._leaf(rng, env, psi, bound)
        r = rng.random()
        chans = [(x, t) for x, t in env.items() if isinstance(t, Ch)]
        if (r < 0.3 or ctx.get("pairs", 0) > 0) and chans and size >= 3:
            # an output and an input on the same channel, so something can happen
            a, t = rng.choice(chans)
            obj = self._object(rng, env, psi, t.carried, ctx)
            if obj is not None:
                ctx["pairs"] = ctx.get("pairs", 0) - 1
                k = rng.randint(1, size - 2)
                x = fresh("x")
                inp = Input(a, ((x, t.carried),), x, self._gen(rng, env.extend(x, t.carried), psi, size - k - 1, {**bound, x: t.carried}, ctx))
                if rng.random() < 0.2:
                    inp = Repl(inp)
                return Par(Output(a, obj, self._gen(rng, env, psi, k, bound, ctx)), inp)
        if r < 0.45:
            k = rng.randint(1, size - 1)
            return Par(self._gen(rng, env, psi, k, bound, ctx), self._gen(rng, env, psi, size - k, bound, ctx))
        if r < 0.55 and chans:
            a, t = rng.choice(chans)
            obj = self._object(rng, env, psi, t.carried, ctx)
            if obj is not None:
                return Output(a, obj, self._gen(rng, env, psi, size - 1, bound, ctx))
        if r < 0.75 and chans:
            a, t = rng.choice(chans)
            x = fresh("x")
            return Input(a, ((x, t.carried),), x, self._gen(rng, env.extend(x, t.carried), psi, size - 1, {**bound, x: t.carried}, ctx))
        if r < 0.83 and size >= 3:
            k = rng.randint(1, size - 2)
            return Case(((TOP, self._gen(rng, env, psi, k, bound, ctx)), (TOP, self._gen(rng, env, psi, size - k - 1, bound, ctx))))
        if r < 0.92:
            y = fresh("n")
            t = Ch(self._carried(rng, env, 1, bound))
            return Restrict(y, t, self._gen(rng, env.extend(y, t), psi, size - 1, bound, ctx))
        if r < 0.96 and size <= 4:
            return Repl(self._gen(rng, env, psi, size - 1, bound, ctx))
        return self._leaf(rng, env, psi, bound)

    def _leaf(self, rng, env, psi, bound):
        r = rng.random()
        vars_ = [x for x, t in bound.items() if isinstance(t, Drop) and x in env]
        if r < 0.3 and vars_:
            return Run(rng.choice(sorted(vars_, key=lambda n: n.id)))
        handles = [q for q, t in psi.entries if isinstance(t, Drop) and consistent(t.env, env)]
        if r < 0.5 and handles:
            return Run(ProcTerm(rng.choice(sorted(handles, key=skey))))
        return NIL

    def _object(self, rng, env, psi, t, ctx):
        options = [x for x, u in env.items() if u == t]
        if isinstance(t, Drop):
            options += [ProcTerm(q) for q, u in sorted(psi.entries | ctx["new"], key=skey) if u == t]
            if (not options or rng.random() < 0.3) and consistent(t.env, ctx["top"]) and t.env.dom() <= ctx["top"].dom():
                # a fresh process term, bound in the top-level assertion
                q = self._gen(rng, t.env, EMPTY, rng.randint(1, 2), {}, {"top": t.env, "new": set()})
                ctx["new"].add((q, t))
                return ProcTerm(q)
        return rng.choice(options) if options else None


HOPI = HopiInstance()


def unwanted_example():
    """``'a<[P]>.0 | a(λx)x.'x<b>.0`` with P = 0: a process ends up as a channel."""
    from .nominal import supply

    s = supply()
    a, b, x = s.named("a"), s.named("b"), s.named("x")
    return Par(Output(a, ProcTerm(NIL), NIL), Input(a, ((x, DROP0),), x, Output(x, b, NIL)))
