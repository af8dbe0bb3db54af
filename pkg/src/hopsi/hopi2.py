"""Second-order HOπ with level types, for termination.

A process has a level n; a channel of level k only carries processes of
level below k.  The calculus is available directly (``infer_level``) and
embedded in the generic system, where the assertion ``Plain(n)`` stands for
"the process being checked has level at most n".
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .hopi import TOP, ChanEq, Handle, HopiInstance, ProcTerm, Top
from .instance import EMPTY_ENV, IllTyped, TypeEnv
from .nominal import Name, fresh, subst, support, swap
from .semantics import explore
from .syntax import NIL, Input, Output, Par, Process, Restrict, Run, alpha_equal, skey

# -- direct syntax -----------------------------------------------------------------


class H2:
    __slots__ = ()

    def __or__(self, other):
        return HPar(self, other)

    def __str__(self) -> str:
        return show(self)


@dataclass(frozen=True)
class HNil(H2):
    pass


@dataclass(frozen=True)
class HIn(H2):
    chan: Name
    var: Name
    body: H2


@dataclass(frozen=True)
class HOut(H2):
    chan: Name
    payload: H2
    cont: H2


@dataclass(frozen=True)
class HPar(H2):
    left: H2
    right: H2


@dataclass(frozen=True)
class HNew(H2):
    chan: Name
    level: int
    body: H2


@dataclass(frozen=True)
class HVar(H2):
    var: Name


def show(p: H2) -> str:
    match p:
        case HNil():
            return "0"
        case HIn(a, x, b):
            return f"{a}({x}).{_atom(b)}"
        case HOut(a, q, c):
            return f"'{a}<{show(q)}>.{_atom(c)}"
        case HPar(l, r):
            return f"{_atom(l)} | {show(r)}"
        case HNew(a, k, b):
            return f"(new {a}:ch^{k}){_atom(b)}"
        case HVar(x):
            return str(x)
    raise TypeError(p)


def _atom(p: H2) -> str:
    return f"({show(p)})" if isinstance(p, HPar) else show(p)


def h2_size(p: H2) -> int:
    match p:
        case HPar(l, r):
            return h2_size(l) + h2_size(r)
        case HIn(_, _, b) | HNew(_, _, b):
            return 1 + h2_size(b)
        case HOut(_, q, c):
            return 1 + h2_size(q) + h2_size(c)
    return 1


# -- types and assertions ----------------------------------------------------------


@dataclass(frozen=True)
class Level:
    n: int

    def __str__(self) -> str:
        return str(self.n)


@dataclass(frozen=True)
class Ch:
    """ch^k(⋄), the type names have in an environment."""

    k: int

    def __str__(self) -> str:
        return f"ch^{self.k}"


@dataclass(frozen=True)
class ChIn:
    k: int

    def __str__(self) -> str:
        return f"ch-^{self.k}"


@dataclass(frozen=True)
class ChOut:
    k: int

    def __str__(self) -> str:
        return f"ch+^{self.k}"


@dataclass(frozen=True)
class Plain:
    n: int

    def __str__(self) -> str:
        return str(self.n)


@dataclass(frozen=True)
class InTag:
    n: int

    def __str__(self) -> str:
        return f"{self.n}-"


@dataclass(frozen=True)
class OutTag:
    n: int

    def __str__(self) -> str:
        return f"{self.n}+"


UNIT = Plain(0)


def compose(a, b):
    if a == UNIT:
        return b
    if b == UNIT:
        return a
    n = max(a.n, b.n)
    if type(a) is type(b):
        return type(a)(n)
    return Plain(n)


class LevelViolation(IllTyped):
    def __init__(self, message: str, position: tuple = ()):
        super().__init__("LEVEL", message, position)


# -- direct level inference --------------------------------------------------------


def infer_level(env: dict, p: H2) -> int:
    """Γ ⊢ P : n.  ``env`` maps channels to ``Ch`` and process variables to ints."""
    match p:
        case HNil():
            return 0
        case HVar(x):
            t = env.get(x)
            if not isinstance(t, int):
                raise IllTyped("VAR", f"unbound process variable {x}")
            return t
        case HPar(l, r):
            return max(infer_level(env, l), infer_level(env, r))
        case HNew(a, k, b):
            return infer_level({**env, a: Ch(k)}, b)
        case HIn(a, x, b):
            k = _chan(env, a)
            return infer_level({**env, x: k - 1}, b)
        case HOut(a, q, c):
            k = _chan(env, a)
            m = infer_level(env, q)
            if not m < k:
                raise LevelViolation(f"payload {show(q)} has level {m}, channel {a} has level {k}: need {m} < {k}")
            return max(k, infer_level(env, c))
    raise TypeError(p)


def _chan(env, a) -> int:
    t = env.get(a)
    if not isinstance(t, Ch):
        raise IllTyped("CHAN", f"{a} is not a channel in the environment")
    return t.k


# -- embedding -----------------------------------------------------------------------


def embed(env: dict, p: H2) -> Process:
    """The generic process for ``p``: inputs bind a variable of level k-1, X becomes run X."""
    match p:
        case HNil():
            return NIL
        case HVar(x):
            return Run(x)
        case HPar(l, r):
            return Par(embed(env, l), embed(env, r))
        case HNew(a, k, b):
            return Restrict(a, Ch(k), embed({**env, a: Ch(k)}, b))
        case HIn(a, x, b):
            k = _chan(env, a)
            return Input(a, ((x, Level(k - 1)),), x, embed({**env, x: k - 1}, b))
        case HOut(a, q, c):
            return Output(a, ProcTerm(embed(env, q)), embed(env, c))
    raise TypeError(p)


def embed_env(env: dict) -> TypeEnv:
    return TypeEnv({x: (t if isinstance(t, Ch) else Level(t)) for x, t in env.items()})


def embed_judgment(env: dict, p: H2, n: int):
    """The generic query (Γ, Plain(n), P) standing for Γ ⊢ P : n."""
    return embed_env(env), Plain(n), embed(env, p)


class Hopi2Instance(HopiInstance):
    name = "hopi2"
    unit = UNIT
    empty_handles = "warn"
    level_cap = 6

    def compose(self, a, b):
        return compose(a, b)

    def specialises(self, a, b) -> bool:
        return compose(a, b) == b

    def assertion_eq(self, a, b) -> bool:
        return a == b

    def canon_term(self, v, depth):
        return HopiInstance.canon_term(self, v, depth)

    def wrong(self, psi, p):
        return []

    def render_assertion(self, a) -> str:
        return str(a)

    # typing

    def term_types(self, env, psi, m):
        if isinstance(m, Name):
            t = env.lookup(m)
            if not isinstance(t, Ch):
                return [t]
            # tags are carried by composition; typing reads only the level
            if t.k <= psi.n:
                return [Ch(t.k), ChIn(t.k), ChOut(t.k)]
            return [ChIn(t.k)]
        if isinstance(m, ProcTerm):
            return [Level(self.min_level(env, m.proc))]
        raise IllTyped("TERM", f"not a term: {m!r}")

    def min_level(self, env, p) -> int:
        from .typecheck import Checker, _judgment_names

        _judgment_names(env, p)
        last = None
        for n in range(self.level_cap + 1):
            try:
                Checker(self).check(env, Plain(n), p)
                return n
            except IllTyped as e:
                last = e
        raise LevelViolation(f"no level up to {self.level_cap} for [{p}]: {last}")

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
        if not isinstance(a, (Plain, InTag, OutTag)) or a.n < 0:
            raise IllTyped("T-ASS", f"not a level assertion: {a!r}")

    def subtype(self, t1, t2) -> bool:
        if isinstance(t1, Level) and isinstance(t2, Level):
            return t1.n <= t2.n
        return t1 == t2

    def compat(self, t, direction):
        match t:
            case Ch(k):
                return Level(k - 1)
            case ChIn(k) if direction == "-":
                return Level(k - 1)
            case ChOut(k) if direction == "+":
                return Level(k - 1)
        raise IllTyped("T-CHA", f"{t} carries nothing in direction {direction}")

    def extract_env(self, t, env, psi):
        if not isinstance(t, Level):
            raise IllTyped("T-END", f"{t} is not a process level")
        if t.n > psi.n:
            raise LevelViolation(f"running a process of level {t.n} inside level {psi.n}")
        return env

    # generators

    def gen_env(self, rng):
        return TypeEnv([(fresh("abc"[i]), Ch(rng.randint(1, 3))) for i in range(rng.randint(1, 3))])

    def gen_type(self, rng, env):
        r = rng.random()
        if r < 0.5:
            return Level(rng.randint(0, 3))
        return rng.choice([Ch, ChIn, ChOut])(rng.randint(1, 3))

    def gen_assertion(self, rng, env):
        n = rng.randint(0, 4)
        r = rng.random()
        return Plain(n) if r < 0.7 else (InTag(n) if r < 0.85 else OutTag(n))

    def gen_term(self, rng, env, psi):
        chans = [x for x, _ in env.items()]
        if chans and rng.random() < 0.5:
            return rng.choice(chans)
        d = {x: t if isinstance(t, Ch) else t.n for x, t in env.items() if isinstance(t, (Ch, Level))}
        return ProcTerm(embed(d, gen_h2(rng, d, rng.randint(1, 3))))

    def gen_condition(self, rng, env, psi):
        chans = [x for x, _ in env.items()]
        if chans and rng.random() < 0.5:
            a = rng.choice(chans)
            return ChanEq(a, a)
        return TOP

    def gen_process(self, rng, env, psi, size):
        d = {x: t if isinstance(t, Ch) else t.n for x, t in env.items() if isinstance(t, (Ch, Level))}
        return embed(d, gen_h2(rng, d, size))


HOPI2 = Hopi2Instance()


# -- generation of direct processes --------------------------------------------------


def gen_h2(rng: random.Random, env: dict, size: int, well_typed: bool = True) -> H2:
    """A random HOπ₂ process of at most ``size`` nodes over ``env``.

    With ``well_typed`` the payload of an output is kept below the channel level.
    """
    chans = [x for x, t in env.items() if isinstance(t, Ch)]
    vars_ = [x for x, t in env.items() if isinstance(t, int)]
    if size <= 1 or (not chans and not vars_):
        if vars_ and rng.random() < 0.5:
            return HVar(rng.choice(vars_))
        return HNil()
    r = rng.random()
    if chans and size >= 3 and r < 0.5:
        # a sender and a receiver on the same channel
        a = rng.choice(chans)
        x = fresh("X")
        q = _payload(rng, env, env[a].k, rng.choice([1, 1, max(1, (size - 2) // 2)]), well_typed)
        rest = max(1, size - 2 - h2_size(q))
        k = rng.randint(1, rest)
        body = gen_h2(rng, {**env, x: env[a].k - 1}, max(1, rest - k + 1), well_typed)
        return HPar(HOut(a, q, gen_h2(rng, env, max(1, k - 1), well_typed) if k > 1 else HNil()), HIn(a, x, body))
    r = rng.random()
    if r < 0.25:
        k = rng.randint(1, size - 1)
        return HPar(gen_h2(rng, env, k, well_typed), gen_h2(rng, env, size - k, well_typed))
    if r < 0.5 and chans:
        a = rng.choice(chans)
        x = fresh("X")
        return HIn(a, x, gen_h2(rng, {**env, x: env[a].k - 1}, size - 1, well_typed))
    if r < 0.8 and chans and size >= 2:
        a = rng.choice(chans)
        k = rng.randint(0, size - 2)
        q = _payload(rng, env, env[a].k, max(1, k), well_typed)
        used = h2_size(q)
        return HOut(a, q, gen_h2(rng, env, max(1, size - 1 - used), well_typed))
    if r < 0.9:
        a = fresh("n")
        k = rng.randint(1, 3)
        return HNew(a, k, gen_h2(rng, {**env, a: Ch(k)}, size - 1, well_typed))
    if vars_:
        return HVar(rng.choice(vars_))
    return HNil()


def _payload(rng, env, k: int, size: int, well_typed: bool) -> H2:
    q = gen_h2(rng, env, size, well_typed)
    if well_typed:
        try:
            if infer_level(env, q) >= k:
                return HNil()
        except IllTyped:
            return HNil()
    return q


def gen_well_typed(rng: random.Random, size: int, tries: int = 100):
    """(env, process, level) with the process well typed and of size ≤ ``size``."""
    for _ in range(tries):
        env = {fresh("abc"[i]): Ch(rng.randint(1, 3)) for i in range(rng.randint(1, 3))}
        p = gen_h2(rng, env, size)
        if h2_size(p) > size:
            continue
        try:
            return env, p, infer_level(env, p)
        except IllTyped:
            continue
    raise RuntimeError("could not generate a well-typed process")


# -- termination -------------------------------------------------------------------------


@dataclass
class Terminated:
    depth: int
    states: int


@dataclass
class BudgetExceeded:
    states: int


@dataclass
class Diverges:
    """A reachable cycle of states."""

    states: int


def termination_probe(env: dict, p: H2, budget: int = 10_000):
    """Explore every reduction sequence of the embedded process."""
    n = infer_level(env, p)
    q = embed(env, p)
    ex = explore(Plain(n), q, HOPI2, max_depth=budget, budget=budget, eval_depth=budget)
    if ex.budget_exceeded or ex.depth_exceeded:
        return BudgetExceeded(len(ex.nodes))
    longest: dict[str, int] = {}
    on_path: set[str] = set()

    def depth(k: str) -> int:
        if k in longest:
            return longest[k]
        if k in on_path:
            raise _Cycle
        on_path.add(k)
        d = max((1 + depth(c) for c in ex.nodes[k].children), default=0)
        on_path.discard(k)
        longest[k] = d
        return d

    try:
        return Terminated(depth(ex.root), len(ex.nodes))
    except _Cycle:
        return Diverges(len(ex.nodes))


class _Cycle(Exception):
    pass


def omega(k: int = 2):
    """``'a<Q>.0 | Q`` with ``Q = a(X).(X | 'a<X>.0)``: Q would have to be below its own level."""
    from .nominal import supply

    a, x = supply().named("a"), supply().named("X")
    q = HIn(a, x, HPar(HVar(x), HOut(a, HVar(x), HNil())))
    return {a: Ch(k)}, HPar(HOut(a, q, HNil()), q)
