"""Instance parameters: the datatypes, entailment and typing hooks.

An :class:`Instance` bundles everything the generic interpreter and the
generic type checker need from a concrete calculus.  Subclasses override
the hooks; a few have generic defaults that fit instances whose assertions
are finite sets composed by union.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Any, Iterable, Iterator

from .nominal import Name, subst, support, swap
from .syntax import Process, alpha_equal, alpha_normal, embedded_processes, skey


class IllTyped(Exception):
    """A typing rule failed.  ``position`` is a path of child indices."""

    def __init__(self, rule: str, message: str, position: tuple = ()):
        super().__init__(f"[{rule}] {message}")
        self.rule = rule
        self.message = message
        self.position = position

    def at(self, position: tuple) -> "IllTyped":
        return IllTyped(self.rule, self.message, position + self.position)


class UnboundName(IllTyped, KeyError):
    def __init__(self, name: Name):
        IllTyped.__init__(self, "ENV", f"unbound name {name}")
        self.name = name

    def __str__(self) -> str:
        return IllTyped.__str__(self)


class IllFormedJudgment(IllTyped):
    pass


class TypeEnv:
    """Immutable finite map from names to types (Γ)."""

    __slots__ = ("_map", "_hash")

    def __init__(self, items: Iterable[tuple[Name, Any]] | dict = ()):
        self._map = dict(items.items() if isinstance(items, dict) else items)
        self._hash = None

    def lookup(self, x: Name):
        try:
            return self._map[x]
        except KeyError:
            raise UnboundName(x) from None

    def get(self, x: Name, default=None):
        return self._map.get(x, default)

    def extend(self, x: Name, t) -> "TypeEnv":
        if x in self._map:
            raise ValueError(f"{x} already bound; alpha-rename first")
        return TypeEnv({**self._map, x: t})

    def extend_many(self, pairs: Iterable[tuple[Name, Any]]) -> "TypeEnv":
        env = self
        for x, t in pairs:
            env = env.extend(x, t)
        return env

    def override(self, pairs: Iterable[tuple[Name, Any]]) -> "TypeEnv":
        return TypeEnv({**self._map, **dict(pairs)})

    def remove(self, x: Name) -> "TypeEnv":
        return TypeEnv({k: v for k, v in self._map.items() if k != x})

    def dom(self) -> frozenset[Name]:
        return frozenset(self._map)

    def items(self) -> list[tuple[Name, Any]]:
        return sorted(self._map.items(), key=lambda kv: skey(kv[0]))

    def __contains__(self, x) -> bool:
        return x in self._map

    def __len__(self) -> int:
        return len(self._map)

    def __iter__(self) -> Iterator[Name]:
        return iter(self._map)

    def __eq__(self, other) -> bool:
        return isinstance(other, TypeEnv) and self._map == other._map

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._map.items()))
        return self._hash

    def _support(self):
        return frozenset(self._map) | support(tuple(self._map.values()))

    def _swap(self, a, b):
        return TypeEnv({swap(a, b, k): swap(a, b, v) for k, v in self._map.items()})

    def _subst(self, sigma):
        # names inside types are never substituted
        return self

    def _key(self) -> str:
        return "Env{" + ",".join(f"{skey(k)}:{skey(v)}" for k, v in self.items()) + "}"

    def __str__(self) -> str:
        return "{" + ", ".join(f"{k}:{v}" for k, v in self.items()) + "}"

    __repr__ = __str__


EMPTY_ENV = TypeEnv()


@dataclass(frozen=True)
class Redex:
    kind: str  # Com, CaseBranch, RunUnfold, ReplUnfold, StructStep, Wrong
    position: tuple
    payload: Any = None


class Instance:
    """Base class for instance parameters.

    Semantic side: ``unit``, ``compose``, ``entails``, ``chan_eq``,
    ``handles``, ``match``, ``wrong``.  Typing side: ``synth_term``,
    ``check_condition``, ``check_assertion``, ``subtype``, ``compat``,
    ``carries``, ``extract_env``.  Harness side: the ``gen_*`` generators.
    """

    name = "abstract"
    unit: Any = frozenset()
    # T-RUN with no handle: "error" (reject) or "warn" (accept; run M deadlocks)
    empty_handles = "error"

    # -- semantics -----------------------------------------------------------

    def compose(self, a, b):
        return a | b

    def entails(self, psi, cond) -> bool:
        raise NotImplementedError

    def chan_eq(self, m, k):
        raise NotImplementedError

    def handle_cond(self, m, p):
        raise NotImplementedError

    def handles(self, psi, m) -> list[Process]:
        return []

    def match(self, pattern, names: tuple, value) -> dict | None:
        """Solve pattern[names := L~] = value for L~."""
        if len(names) == 1 and pattern == names[0]:
            return {names[0]: value}
        if not names and alpha_equal(pattern, value):
            return {}
        return None

    def wrong(self, psi, p: Process) -> list[Redex]:
        return []

    def subst(self, v, sigma):
        return subst(v, sigma)

    def canon_term(self, v, depth: int):
        return alpha_normal(v, depth)

    def assertion_eq(self, a, b) -> bool:
        return alpha_equal(a, b)

    def specialises(self, a, b) -> bool:
        """a ≤ b: b = a ⊗ c for some c, and n(a) ⊆ n(b)."""
        return a <= b and support(a) <= support(b)

    def type_names(self, v) -> frozenset:
        """Names occurring inside the types of ``v`` (untouched by substitution)."""
        return frozenset()

    def spawnable(self, term) -> list[Process]:
        return embedded_processes(term)

    # -- typing --------------------------------------------------------------

    def synth_term(self, env, psi, m):
        raise NotImplementedError

    def term_types(self, env, psi, m) -> list:
        """Every type ``m`` has without subsumption (most instances: exactly one)."""
        return [self.synth_term(env, psi, m)]

    def check_condition(self, env, psi, cond) -> None:
        raise NotImplementedError

    def check_assertion(self, env, psi, assertion) -> None:
        raise NotImplementedError

    def subtype(self, t1, t2) -> bool:
        return t1 == t2

    def compat(self, t, direction: str):
        raise NotImplementedError

    def carries(self, t, direction: str, u) -> bool:
        """Whether a channel of type ``t`` carries ``u`` in ``direction`` (+ or -)."""
        try:
            c = self.compat(t, direction)
        except IllTyped:
            return False
        return self.subtype(u, c) if direction == "+" else self.subtype(c, u)

    def extract_env(self, t, env, psi):
        raise NotImplementedError

    def has_type(self, env, psi, m, t) -> bool:
        """Γ,Ψ ⊢ M : T, closing synthesis under subsumption."""
        try:
            return any(self.subtype(u, t) for u in self.term_types(env, psi, m))
        except IllTyped:
            return False

    # -- generators for the assumption harness ------------------------------

    def gen_env(self, rng: random.Random) -> TypeEnv:
        raise NotImplementedError

    def gen_assertion(self, rng: random.Random, env: TypeEnv):
        raise NotImplementedError

    def gen_type(self, rng: random.Random, env: TypeEnv):
        raise NotImplementedError

    def gen_term(self, rng: random.Random, env: TypeEnv, psi):
        raise NotImplementedError

    def gen_condition(self, rng: random.Random, env: TypeEnv, psi):
        raise NotImplementedError

    def gen_process(self, rng: random.Random, env: TypeEnv, psi, size: int) -> Process:
        raise NotImplementedError

    def gen_typed_term(self, rng: random.Random, env: TypeEnv, psi, t, tries: int = 12):
        """A term of type ``t`` if one is found quickly, else None."""
        for _ in range(tries):
            m = self.gen_term(rng, env, psi)
            if self.has_type(env, psi, m, t):
                return m
        return None

    def render_assertion(self, a) -> str:
        return str(a)
