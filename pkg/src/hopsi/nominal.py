"""Atomic names, transpositions, support and freshness.

Every datatype that takes part in the calculus (processes, instance terms,
conditions, assertions and types) is a *nominal value*: it supports the
three generic operations below by implementing ``_swap``, ``_support`` and
``_subst``.  Builtin containers (tuples, lists, frozensets, dicts) are
handled structurally.
"""

from __future__ import annotations

import itertools
import random
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping, Sequence


@dataclass(frozen=True)
class Name:
    id: int
    display: str = field(compare=False)

    def __str__(self) -> str:
        return self.display

    def __repr__(self) -> str:
        return f"Name({self.display}#{self.id})"


@dataclass(frozen=True)
class Transposition:
    first: Name
    second: Name

    def apply(self, v):
        return swap(self.first, self.second, v)


class NameSupply:
    """Monotone fresh-name counter.  Not thread safe; use one per thread."""

    def __init__(self, start: int = 1):
        self._counter = itertools.count(start)
        self._by_text: dict[str, Name] = {}

    def fresh(self, hint: str = "x") -> Name:
        n = next(self._counter)
        base = hint.split("'")[0].rstrip("0123456789") or "x"
        return Name(n, f"{base}'{n}")

    def named(self, text: str) -> Name:
        """The name with display ``text``; repeated calls return the same name."""
        name = self._by_text.get(text)
        if name is None:
            name = Name(next(self._counter), text)
            self._by_text[text] = name
        return name


_local = threading.local()


def supply() -> NameSupply:
    s = getattr(_local, "supply", None)
    if s is None:
        s = _local.supply = NameSupply()
    return s


_resets: list = []


def on_supply_change(fn):
    """Register ``fn`` to run whenever the supply is replaced.

    Memo tables keyed on names must be dropped then: names compare by id, and a
    new supply hands out the same ids with different displays.
    """
    _resets.append(fn)
    return fn


def set_supply(s: NameSupply) -> NameSupply:
    old = supply()
    _local.supply = s
    for fn in _resets:
        fn()
    return old


def fresh(hint: str = "x") -> Name:
    return supply().fresh(hint)


def level_name(level: int) -> Name:
    """Canonical bound name for de Bruijn level ``level`` (never produced by a supply)."""
    return Name(-1 - level, f"_{level}")


# -- generic nominal operations ------------------------------------------------


def swap(a: Name, b: Name, v):
    """Apply the transposition (a b) to ``v``."""
    if a == b:
        return v
    if isinstance(v, Name):
        if v == a:
            return b
        if v == b:
            return a
        return v
    if hasattr(v, "_swap"):
        return v._swap(a, b)
    if isinstance(v, tuple):
        return tuple(swap(a, b, x) for x in v)
    if isinstance(v, list):
        return [swap(a, b, x) for x in v]
    if isinstance(v, frozenset):
        return frozenset(swap(a, b, x) for x in v)
    if isinstance(v, dict):
        return {swap(a, b, k): swap(a, b, x) for k, x in v.items()}
    return v


def support(v) -> frozenset[Name]:
    """n(v): the names occurring free in ``v``."""
    if isinstance(v, Name):
        return frozenset((v,))
    if hasattr(v, "_support"):
        return v._support()
    if isinstance(v, (tuple, list, frozenset, set)):
        return frozenset().union(*(support(x) for x in v)) if v else frozenset()
    if isinstance(v, dict):
        return support(tuple(v.keys())) | support(tuple(v.values()))
    return frozenset()


def fresh_for(a: Name | Iterable[Name], *values) -> bool:
    """a # X1, ..., Xn; ``a`` may be a single name or a collection of names."""
    names = {a} if isinstance(a, Name) else set(a)
    return all(names.isdisjoint(support(v)) for v in values)


def subst(v, sigma: Mapping[Name, Any]):
    """Simultaneous substitution v[x~ := L~]."""
    if not sigma:
        return v
    if isinstance(v, Name):
        return sigma.get(v, v)
    if hasattr(v, "_subst"):
        return v._subst(sigma)
    if isinstance(v, tuple):
        return tuple(subst(x, sigma) for x in v)
    if isinstance(v, list):
        return [subst(x, sigma) for x in v]
    if isinstance(v, frozenset):
        return frozenset(subst(x, sigma) for x in v)
    return v


def sigma_support(sigma: Mapping[Name, Any]) -> frozenset[Name]:
    return frozenset(sigma) | support(tuple(sigma.values()))


def swap_many(us: Sequence[Name], vs: Sequence[Name], v):
    """Pointwise transposition (u~, v~) . v, applied left to right."""
    for u, w in zip(us, vs):
        v = swap(u, w, v)
    return v


# -- substitution-law harness --------------------------------------------------


@dataclass
class LawReport:
    passed: bool
    trials: int
    law1_failures: int = 0
    law2_failures: int = 0
    counterexample: Any = None

    def __str__(self) -> str:
        status = "pass" if self.passed else "FAIL"
        s = f"substitution laws: {status} ({self.trials} samples)"
        if self.counterexample is not None:
            s += f"; counterexample: {self.counterexample}"
        return s


def _size(v) -> int:
    return len(repr(v))


def check_substitution_laws(
    subst_fn: Callable[[Any, Mapping[Name, Any]], Any],
    samples: Iterable[tuple[Any, Sequence[Name], Sequence[Any]]],
    eq: Callable[[Any, Any], bool] | None = None,
) -> LawReport:
    """Check both substitution laws on samples ``(X, a~, Y~)``.

    Law 1: if a~ ⊆ n(X) and b ∈ n(Y~) then b ∈ n(X[a~:=Y~]).
    Law 2: if u~ # X, a~ then X[a~:=Y~] = ((u~,a~)·X)[u~:=Y~], with u~ freshly drawn.
    Violations are reported, never raised; the smallest failing sample is kept.
    """
    if eq is None:
        from .syntax import alpha_equal as eq
    failures = []
    n = l1 = l2 = 0
    for x, names, values in samples:
        n += 1
        names = tuple(names)
        sigma = dict(zip(names, values))
        out = subst_fn(x, sigma)
        sx = support(x)
        if set(names) <= sx:
            missing = support(tuple(values)) - support(out)
            if missing:
                l1 += 1
                failures.append(("law1", x, names, values, out))
                continue
        us = tuple(fresh("u") for _ in names)
        swapped = swap_many(us, names, x)
        rhs = subst_fn(swapped, dict(zip(us, values)))
        if not eq(out, rhs):
            l2 += 1
            failures.append(("law2", x, names, values, out))
    cex = min(failures, key=_size) if failures else None
    return LawReport(not failures, n, l1, l2, cex)


def random_names(rng: random.Random, pool: Sequence[Name], k: int) -> tuple[Name, ...]:
    return tuple(rng.sample(list(pool), min(k, len(pool))))
