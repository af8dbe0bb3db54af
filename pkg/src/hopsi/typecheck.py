"""The generic process type system and its instance-assumption harness.

``check_process`` is syntax directed.  Existential premises of the rules
are made algorithmic through the instance hooks: ``term_types`` lists the
types a term has, ``carries`` decides compatibility up to subtyping and
``extract_env`` yields the environment a handle's process is checked in.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any, Callable

from .instance import IllFormedJudgment, IllTyped, Instance, TypeEnv
from .nominal import Name, fresh, support, swap
from .syntax import (
    Assert,
    Case,
    Input,
    Nil,
    Output,
    Par,
    Process,
    Repl,
    Restrict,
    Run,
    frame_assertion,
    frame_names,
    well_formed,
)


class Checker:
    def __init__(self, inst: Instance):
        self.inst = inst
        self.warnings: list[str] = []

    def types(self, rule, env, psi, m, path) -> list:
        try:
            ts = self.inst.term_types(env, psi, m)
        except IllTyped as e:
            raise IllTyped(rule, f"term {m}: {e.message}", path) from None
        if not ts:
            raise IllTyped(rule, f"term {m} has no type", path)
        return ts

    def check(self, env: TypeEnv, psi, p: Process, path: tuple = ()) -> None:
        inst = self.inst
        match p:
            case Nil():
                return
            case Repl(b):
                self.check(env, psi, b, path + (0,))
            case Case(branches):
                for i, (cond, q) in enumerate(branches):
                    try:
                        inst.check_condition(env, psi, cond)
                    except IllTyped as e:
                        raise IllTyped("T-CASE", f"condition {cond}: {e.message}", path + (i,)) from None
                    self.check(env, psi, q, path + (i,))
            case Assert(a):
                try:
                    inst.check_assertion(env, psi, a)
                except IllTyped as e:
                    raise IllTyped("T-ASSERT", e.message, path) from None
            case Restrict(x, t, b):
                if x in env or x in support(psi):
                    y = fresh(x.display)
                    x, b = y, swap(x, y, b)
                self.check(env.extend(x, t), psi, b, path + (0,))
            case Par(l, r):
                self.check_par(env, psi, l, r, path)
            case Output(m, n, cont):
                ts = self.types("T-OUT", env, psi, m, path)
                us = self.types("T-OUT", env, psi, n, path)
                if not any(inst.carries(t, "+", u) for t in ts for u in us):
                    raise IllTyped("T-OUT", f"subject {m} : {_alts(ts)} cannot send {n} : {_alts(us)}", path)
                self.check(env, psi, cont, path + (0,))
            case Input(m, binders, pattern, cont):
                avoid = env.dom() | support(psi)
                if any(x in avoid for x, _ in binders):
                    new = []
                    for x, t in binders:
                        if x in avoid:
                            y = fresh(x.display)
                            pattern, cont = swap(x, y, pattern), swap(x, y, cont)
                            x = y
                        new.append((x, t))
                    binders = tuple(new)
                inner = env.extend_many(binders)
                ts = self.types("T-IN", env, psi, m, path)
                us = self.types("T-IN", inner, psi, pattern, path)
                if not any(inst.carries(t, "-", u) for t in ts for u in us):
                    raise IllTyped("T-IN", f"subject {m} : {_alts(ts)} cannot receive {pattern} : {_alts(us)}", path)
                self.check(inner, psi, cont, path + (0,))
            case Run(m):
                self.check_run(env, psi, m, path)
            case _:
                raise IllTyped("SYNTAX", f"not a process: {p!r}", path)

    def check_par(self, env, psi, l, r, path):
        inst = self.inst
        base = env.dom() | support(psi)
        l = _freshen_frame(l, base | support(r))
        r = _freshen_frame(r, base | support(l) | {x for x, _ in frame_names(l)})
        fl, fr = frame_names(l), frame_names(r)
        al = frame_assertion(l, inst.unit, inst.compose)
        ar = frame_assertion(r, inst.unit, inst.compose)
        self.check(env.extend_many(fr), inst.compose(psi, ar), l, path + (0,))
        self.check(env.extend_many(fl), inst.compose(psi, al), r, path + (1,))

    def check_run(self, env, psi, m, path):
        inst = self.inst
        ts = self.types("T-RUN", env, psi, m, path)
        envs, reasons = [], []
        for t in ts:
            try:
                envs.append(inst.extract_env(t, env, psi))
            except IllTyped as e:
                reasons.append(e.message)
        if not envs:
            raise IllTyped("T-RUN", f"no environment extractable from {m} : {_alts(ts)} ({'; '.join(reasons)})", path)
        handles = inst.handles(psi, m)
        if not handles:
            if inst.empty_handles == "error":
                raise IllTyped("T-RUN", f"{m} is not a handle for any process", path)
            self.warnings.append(f"run {m} at {list(path)} has no handle (deadlock)")
            return
        last = None
        for inner in envs:
            try:
                for q in handles:
                    _judgment_names(inner, q, path)
                    self.check(inner, psi, q, path + (0,))
                return
            except IllTyped as e:
                last = e
        raise IllTyped("T-RUN", f"handled process of {m}: {last}", path)


def _alts(ts) -> str:
    return " | ".join(str(t) for t in ts)


def _freshen_frame(p: Process, avoid) -> Process:
    """Rename unguarded restriction binders that clash with ``avoid`` or each other."""
    used = set(avoid)

    def walk(q):
        match q:
            case Par(l, r):
                return Par(walk(l), walk(r))
            case Restrict(x, t, b):
                if x in used:
                    y = fresh(x.display)
                    x, b = y, swap(x, y, b)
                used.add(x)
                return Restrict(x, t, walk(b))
            case _:
                return q

    return walk(p)


def _judgment_names(env: TypeEnv, p: Process, path=()) -> None:
    missing = support(p) - env.dom()
    if missing:
        names = ", ".join(sorted(str(x) for x in missing))
        raise IllFormedJudgment("JUDGMENT", f"names not in the environment: {names}", path)


def check_process(env: TypeEnv, psi, p: Process, inst: Instance) -> list[str]:
    """Γ, Ψ ⊢ P.  Returns warnings; raises IllTyped (or IllFormedJudgment)."""
    missing = (support(psi) | support(p)) - env.dom()
    if missing:
        names = ", ".join(sorted(str(x) for x in missing))
        raise IllFormedJudgment("JUDGMENT", f"names not in the environment: {names}")
    ok, msg = well_formed(p, inst.spawnable)
    if not ok:
        raise IllFormedJudgment("WELL-FORMED", msg)
    c = Checker(inst)
    c.check(env, psi, p)
    return c.warnings


def is_well_typed(env: TypeEnv, psi, p: Process, inst: Instance) -> bool:
    try:
        check_process(env, psi, p, inst)
        return True
    except IllTyped:
        return False


def check_subsumption(inst: Instance, t1, t2) -> bool:
    return inst.subtype(t1, t2)


def check_report(env: TypeEnv, psi, p: Process, inst: Instance) -> dict:
    try:
        warnings = check_process(env, psi, p, inst)
    except IllTyped as e:
        return {
            "result": "ill-formed" if isinstance(e, IllFormedJudgment) else "ill-typed",
            "errors": [{"rule": e.rule, "position": list(e.position), "message": e.message}],
            "warnings": [],
            "assumptionReport": [],
        }
    return {"result": "ok", "errors": [], "warnings": warnings, "assumptionReport": []}


# -- judgments 𝒥 for the assumption harness -----------------------------------------


def judge(inst: Instance, env: TypeEnv, psi, j: tuple) -> bool:
    """Γ, Ψ ⊢ 𝒥 for term (``("term", M, T)``), condition and assertion judgments."""
    kind = j[0]
    try:
        if kind == "term":
            return inst.has_type(env, psi, j[1], j[2])
        if kind == "cond":
            inst.check_condition(env, psi, j[1])
        elif kind == "assert":
            inst.check_assertion(env, psi, j[1])
        else:
            raise ValueError(kind)
    except IllTyped:
        return False
    return True


def judgment_names(j: tuple):
    return support(j[1:])


def gen_judgment(inst: Instance, rng: random.Random, env: TypeEnv, psi) -> tuple:
    r = rng.random()
    if r < 0.6:
        m = inst.gen_term(rng, env, psi)
        try:
            ts = inst.term_types(env, psi, m)
        except IllTyped:
            ts = []
        t = rng.choice(ts) if ts and rng.random() < 0.85 else inst.gen_type(rng, env)
        return ("term", m, t)
    if r < 0.8:
        return ("cond", inst.gen_condition(rng, env, psi))
    return ("assert", inst.gen_assertion(rng, env))


def subst_judgment(inst: Instance, j: tuple, sigma) -> tuple:
    return (j[0],) + tuple(inst.subst(x, sigma) for x in j[1:])


# -- the instance assumptions, restated as executable implications ---------------------
#
# Each check draws a sample and returns (applicable, counterexample-or-None).  A sample
# is applicable when the implication's premises hold.


def _setup(inst, rng):
    env = inst.gen_env(rng)
    psi = inst.gen_assertion(rng, env)
    return env, psi


def a_env_weak(inst, rng):
    env, psi = _setup(inst, rng)
    j = gen_judgment(inst, rng, env, psi)
    if not judge(inst, env, psi, j):
        return False, None
    x, t = fresh("w"), inst.gen_type(rng, env)
    if judge(inst, env.extend(x, t), psi, j):
        return True, None
    return True, {"env": env, "psi": psi, "judgment": j, "added": (x, t)}


def a_env_strength(inst, rng):
    env, psi = _setup(inst, rng)
    if not len(env):
        return False, None
    j = gen_judgment(inst, rng, env, psi)
    x = rng.choice(sorted(env, key=lambda n: n.id))
    if x in judgment_names(j) or x in support(psi) or not judge(inst, env, psi, j):
        return False, None
    if judge(inst, env.remove(x), psi, j):
        return True, None
    return True, {"env": env, "psi": psi, "judgment": j, "removed": x}


def a_comp_term(inst, rng):
    env, psi = _setup(inst, rng)
    x, tx = fresh("v"), inst.gen_type(rng, env)
    m = inst.gen_term(rng, env.extend(x, tx), psi)
    if x not in support(m):
        return False, None
    l = inst.gen_term(rng, env, psi)
    mm = inst.subst(m, {x: l})
    try:
        if not inst.term_types(env, psi, mm):
            return False, None
    except IllTyped:
        return False, None
    try:
        if inst.term_types(env, psi, l):
            return True, None
    except IllTyped:
        pass
    return True, {"env": env, "psi": psi, "term": m, "sigma": {x: l}}


def a_ass_weak(inst, rng):
    env, psi = _setup(inst, rng)
    j = gen_judgment(inst, rng, env, psi)
    if not judge(inst, env, psi, j):
        return False, None
    ext = inst.gen_assertion(rng, env)
    psi2 = inst.compose(psi, ext)  # Ψ ≤ Ψ ⊗ ext, witnessed by ext
    if not support(psi2) <= env.dom():
        return False, None
    if judge(inst, env, psi2, j):
        return True, None
    return True, {"env": env, "psi": psi, "extension": ext, "judgment": j}


def a_weak_chaneq(inst, rng):
    env, psi = _setup(inst, rng)
    m1 = inst.gen_term(rng, env, psi)
    m2 = m1 if rng.random() < 0.4 else inst.gen_term(rng, env, psi)
    cond = inst.chan_eq(m1, m2)
    if not inst.entails(psi, cond):
        return False, None
    ext = inst.gen_assertion(rng, env)
    if inst.entails(inst.compose(psi, ext), cond):
        return True, None
    return True, {"psi": psi, "extension": ext, "condition": cond}


def a_subs(inst, rng):
    env, psi = _setup(inst, rng)
    x, tx = fresh("v"), inst.gen_type(rng, env)
    l = inst.gen_typed_term(rng, env, psi, tx)
    if l is None:
        return False, None
    inner = env.extend(x, tx)
    if rng.random() < 0.4:
        j = ("term", x, tx)
    else:
        j = gen_judgment(inst, rng, inner, psi)
    if x in inst.type_names(j) or not judge(inst, inner, psi, j):
        return False, None
    jj = subst_judgment(inst, j, {x: l})
    if judge(inst, env, psi, jj):
        return True, None
    return True, {"env": env, "psi": psi, "judgment": j, "sigma": {x: l}}


def a_equal(inst, rng):
    env, psi = _setup(inst, rng)
    m = inst.gen_term(rng, env, psi)
    n = m if rng.random() < 0.3 else inst.gen_term(rng, env, psi)
    try:
        ts = inst.term_types(env, psi, m)
    except IllTyped:
        return False, None
    if not ts or not inst.entails(psi, inst.chan_eq(m, n)):
        return False, None
    bad = [t for t in ts if not inst.has_type(env, psi, n, t)]
    if not bad:
        return True, None
    return True, {"env": env, "psi": psi, "terms": (m, n), "type": bad[0]}


def a_env_claus(inst, rng):
    env, psi = _setup(inst, rng)
    m = inst.gen_term(rng, env, psi)
    if not inst.handles(psi, m):
        return False, None
    try:
        ts = inst.term_types(env, psi, m)
    except IllTyped:
        return False, None
    applicable = False
    for t in ts:
        try:
            inner = inst.extract_env(t, env, psi)
        except IllTyped:
            continue
        applicable = True
        if not support(m) <= inner.dom():
            return True, {"env": env, "psi": psi, "term": m, "type": t, "extracted": inner}
    return applicable, None


def a_weak_ass_claus(inst, rng):
    env, psi = _setup(inst, rng)
    if not support(psi) <= env.dom():
        return False, None
    m = inst.gen_term(rng, env, psi)
    applicable = False
    ext = inst.gen_assertion(rng, env)
    psi2 = inst.compose(psi, ext)
    for p in inst.handles(psi, m):
        cond = inst.handle_cond(m, p)
        if not inst.entails(psi, cond) or not judge(inst, env, psi, ("cond", cond)):
            continue
        applicable = True
        if not inst.entails(psi2, cond):
            return True, {"psi": psi, "extension": ext, "term": m, "process": p}
    return applicable, None


def a_subs_run(inst, rng):
    env, psi = _setup(inst, rng)
    x, tx = fresh("v"), inst.gen_type(rng, env)
    l = inst.gen_typed_term(rng, env, psi, tx)
    if l is None:
        return False, None
    inner = env.extend(x, tx)
    m = x if rng.random() < 0.5 else inst.gen_term(rng, inner, psi)
    try:
        ts = inst.term_types(inner, psi, m)
    except IllTyped:
        return False, None
    mm = inst.subst(m, {x: l})
    handles = inst.handles(psi, mm)
    if not handles:
        return False, None
    applicable = False
    for t in ts:
        try:
            genv = inst.extract_env(t, inner, psi)
        except IllTyped:
            continue
        applicable = True
        for p in handles:
            c = Checker(inst)
            try:
                c.check(genv, psi, p)
            except IllTyped as e:
                return True, {"env": inner, "psi": psi, "term": m, "sigma": {x: l}, "process": p, "error": str(e)}
    return applicable, None


def a_compat_contract(inst, rng):
    env = inst.gen_env(rng)
    t = inst.gen_type(rng, env)
    us = [inst.gen_type(rng, env) for _ in range(4)]
    for d in "+-":
        us_d = list(us)
        try:
            us_d.append(inst.compat(t, d))
        except IllTyped:
            pass
        r = _contract_violation(inst, t, d, us_d)
        if r is not None:
            return True, r
    return True, None


def _contract_violation(inst, t, d, us):
    carried = [u for u in us if inst.carries(t, d, u)]
    for u1 in carried:
        for u2 in carried:
            if u1 != u2 and not (inst.subtype(u1, u2) or inst.subtype(u2, u1)):
                return {"law": "comparable", "type": t, "direction": d, "carried": (u1, u2)}
    for u1 in us:
        for u2 in us:
            if not inst.subtype(u1, u2):
                continue
            if d == "+" and inst.carries(t, "+", u2) and not inst.carries(t, "+", u1):
                return {"law": "contravariance", "type": t, "sub": u1, "super": u2}
            if d == "-" and inst.carries(t, "-", u1) and not inst.carries(t, "-", u2):
                return {"law": "covariance", "type": t, "sub": u1, "super": u2}
    return None


ASSUMPTIONS: dict[str, Callable] = {
    "T-ENV-WEAK": a_env_weak,
    "T-ENV-STRENGTH": a_env_strength,
    "T-COMP-TERM": a_comp_term,
    "T-ASS-WEAK": a_ass_weak,
    "T-WEAK-CHANEQ": a_weak_chaneq,
    "T-SUBS": a_subs,
    "T-EQUAL": a_equal,
    "T-ENV-CLAUS": a_env_claus,
    "T-WEAK-ASS-CLAUS": a_weak_ass_claus,
    "T-SUBS-RUN": a_subs_run,
    "COMPAT-CONTRACT": a_compat_contract,
}


@dataclass
class AssumptionResult:
    name: str
    trials: int
    applicable: int = 0
    failures: int = 0
    counterexample: Any = None

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def as_json(self) -> dict:
        return {
            "assumption": self.name,
            "trials": self.trials,
            "applicable": self.applicable,
            "failures": self.failures,
            "counterexample": None if self.counterexample is None else _show(self.counterexample),
        }


def _show(v) -> Any:
    if isinstance(v, dict):
        return {str(k): _show(x) for k, x in v.items()}
    if isinstance(v, (tuple, list)):
        return [_show(x) for x in v]
    return str(v)


def _cex_size(c) -> int:
    return len(str(_show(c)))


@dataclass
class HarnessReport:
    instance: str
    seed: int
    results: list[AssumptionResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def failing(self) -> list[str]:
        return [r.name for r in self.results if not r.passed]

    def as_json(self) -> dict:
        return {
            "instance": self.instance,
            "seed": self.seed,
            "result": "pass" if self.passed else "counterexample",
            "assumptionReport": [r.as_json() for r in self.results],
        }


def assumption_harness(
    inst: Instance,
    trials: int,
    seed: int = 0,
    max_size: int = 4,
    only: list[str] | None = None,
    stop_on_failure: bool = False,
) -> HarnessReport:
    """Randomised falsification of each instance assumption.

    Every assumption has its own generator stream, seeded from ``seed`` and the
    assumption's name, so reports are reproducible and independent of order.
    """
    from .nominal import NameSupply, set_supply

    report = HarnessReport(inst.name, seed)
    if trials <= 0:
        return report
    prev_size = getattr(inst, "max_size", None)
    inst.max_size = max_size
    try:
        for name, fn in ASSUMPTIONS.items():
            if only is not None and name not in only:
                continue
            old = set_supply(NameSupply())
            try:
                rng = random.Random(f"{seed}:{name}")
                res = AssumptionResult(name, 0)
                for _ in range(trials):
                    res.trials += 1
                    applicable, cex = fn(inst, rng)
                    res.applicable += bool(applicable)
                    if cex is not None:
                        res.failures += 1
                        if res.counterexample is None or _cex_size(cex) < _cex_size(res.counterexample):
                            res.counterexample = cex
                        if stop_on_failure:
                            break
                report.results.append(res)
            finally:
                set_supply(old)
    finally:
        inst.max_size = prev_size
    return report


def check_compatibility_contract(inst: Instance, types: list) -> list[dict]:
    """Check comparability, contravariance of output and covariance of input on ``types``."""
    out = []
    for t in types:
        for d in "+-":
            r = _contract_violation(inst, t, d, types)
            if r is not None:
                out.append(r)
    return out


# -- deliberately broken instances (for testing the harness) ----------------------------


def mutant(inst: Instance, kind: str) -> Instance:
    """A copy of ``inst`` with one parameter broken: compose, subst or compat."""
    base = type(inst)

    if kind == "compose":
        class Broken(base):
            def compose(self, a, b):
                return b
    elif kind == "subst":
        class Broken(base):
            def subst(self, v, sigma):
                return v
    elif kind == "compat":
        class Broken(base):
            def carries(self, t, direction, u):
                if direction == "+":
                    try:
                        return u == self.compat(t, "+")
                    except IllTyped:
                        return False
                return base.carries(self, t, direction, u)
    else:
        raise ValueError(f"unknown mutation {kind!r}")
    m = Broken.__new__(Broken)
    m.__dict__.update(inst.__dict__)
    m.name = f"{inst.name}~{kind}"
    return m


# -- process-level metatheory properties -----------------------------------------------


def lemma_weakening(inst, rng, size=5):
    env, psi = _setup(inst, rng)
    p = inst.gen_process(rng, env, psi, size)
    if not is_well_typed(env, psi, p, inst):
        return False, None
    x, t = fresh("w"), inst.gen_type(rng, env)
    if is_well_typed(env.extend(x, t), psi, p, inst):
        return True, None
    return True, {"env": env, "psi": psi, "process": p, "added": (x, t)}


def lemma_strengthening(inst, rng, size=5):
    env, psi = _setup(inst, rng)
    x, t = fresh("w"), inst.gen_type(rng, env)
    big = env.extend(x, t)
    p = inst.gen_process(rng, big, psi, size)
    if x in support(p) or x in support(psi) or not is_well_typed(big, psi, p, inst):
        return False, None
    if is_well_typed(env, psi, p, inst):
        return True, None
    return True, {"env": big, "psi": psi, "process": p, "removed": x}


def lemma_assertion_weakening(inst, rng, size=5):
    env, psi = _setup(inst, rng)
    p = inst.gen_process(rng, env, psi, size)
    if not is_well_typed(env, psi, p, inst):
        return False, None
    ext = inst.gen_assertion(rng, env)
    psi2 = inst.compose(psi, ext)
    if not support(psi2) <= env.dom():
        return False, None
    if is_well_typed(env, psi2, p, inst):
        return True, None
    return True, {"env": env, "psi": psi, "extension": ext, "process": p}


def lemma_substitution(inst, rng, size=5):
    env, psi = _setup(inst, rng)
    x, tx = fresh("v"), inst.gen_type(rng, env)
    l = inst.gen_typed_term(rng, env, psi, tx)
    if l is None:
        return False, None
    inner = env.extend(x, tx)
    p = inst.gen_process(rng, inner, psi, size)
    # types are never substituted, so x must not occur in one
    if x in inst.type_names(p) or not is_well_typed(inner, psi, p, inst):
        return False, None
    q = inst.subst(p, {x: l})
    if is_well_typed(env, psi, q, inst):
        return True, None
    return True, {"env": inner, "psi": psi, "process": p, "sigma": {x: l}}


LEMMAS = {
    "weakening": lemma_weakening,
    "strengthening": lemma_strengthening,
    "assertion-weakening": lemma_assertion_weakening,
    "substitution": lemma_substitution,
}
