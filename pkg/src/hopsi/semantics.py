"""Evaluation (≫) and reduction (→) relative to an ambient assertion.

Processes are handled in *configuration* form: every unguarded restriction
is extruded to the top (binders are renamed only when they would clash),
leaving a flat list of parallel components.  Scope extrusion and the
monoid laws (E-STRUCT) are thereby folded into the representation, and the
freshness side conditions of E-RES/E-PAR/R-RES/R-PAR hold by construction.
"""

from __future__ import annotations

import json
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

from .instance import Instance, Redex
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
    canonicalize,
    frame_assertion,
    par,
    render,
    restrict,
    skey,
)

DEFAULT_EVAL_DEPTH = 3


def configuration(p: Process, avoid: Iterable[Name] = ()) -> tuple[list, list]:
    """Extrude restrictions; rename a binder only if it clashes."""
    used = set(avoid) | set(support(p))
    binders: list[tuple[Name, Any]] = []
    comps: list[Process] = []

    def walk(q: Process):
        match q:
            case Nil():
                return
            case Par(l, r):
                walk(l)
                walk(r)
            case Restrict(x, t, b):
                if x in used:
                    y = fresh(x.display)
                    b = swap(x, y, b)
                    x = y
                used.add(x)
                binders.append((x, t))
                walk(b)
            case _:
                comps.append(q)

    walk(p)
    return binders, comps


def _rebuild(binders, comps) -> Process:
    return restrict(binders, par(*comps))


def _ambient(inst: Instance, psi, comps, skip: Iterable[int] = ()):
    skip = set(skip)
    amb = psi
    for i, c in enumerate(comps):
        if i not in skip and isinstance(c, Assert):
            amb = inst.compose(amb, c.assertion)
    return amb


def eval_steps(psi, p: Process, inst: Instance) -> list[tuple[Process, str]]:
    """All one-step evaluation successors of ``p`` under ``psi``."""
    binders, comps = configuration(p, support(psi))
    out: list[tuple[Process, str]] = []

    def replaced(i, q):
        return _rebuild(binders, comps[:i] + [q] + comps[i + 1 :])

    for i, c in enumerate(comps):
        match c:
            case Case(branches):
                amb = _ambient(inst, psi, comps, [i])
                for cond, q in branches:
                    if inst.entails(amb, cond):
                        out.append((replaced(i, q), "E-CASE"))
            case Run(m):
                amb = _ambient(inst, psi, comps, [i])
                for q in inst.handles(amb, m):
                    out.append((replaced(i, q), "E-RUN"))
            case Repl(b):
                out.append((replaced(i, Par(b, c)), "E-REP"))
    return out


def com_steps(psi, p: Process, inst: Instance) -> list[Process]:
    """Direct R-COM successors (no preceding evaluation)."""
    binders, comps = configuration(p, support(psi))
    amb = _ambient(inst, psi, comps)
    out = []
    for i, o in enumerate(comps):
        if not isinstance(o, Output):
            continue
        for j, inp in enumerate(comps):
            if not isinstance(inp, Input) or i == j:
                continue
            if not inst.entails(amb, inst.chan_eq(o.subject, inp.subject)):
                continue
            inp = _freshen_input(inp, support(psi) | support(o) | {x for x, _ in binders})
            sigma = inst.match(inp.pattern, inp.names, o.object)
            if sigma is None:
                continue
            new = list(comps)
            new[i] = o.cont
            new[j] = inst.subst(inp.cont, sigma)
            out.append(_rebuild(binders, new))
    return out


def _freshen_input(inp: Input, avoid) -> Input:
    if not any(x in avoid for x in inp.names):
        return inp
    pattern, cont, bs = inp.pattern, inp.cont, []
    for x, t in inp.binders:
        if x in avoid:
            y = fresh(x.display)
            pattern, cont = swap(x, y, pattern), swap(x, y, cont)
            x = y
        bs.append((x, t))
    return Input(inp.subject, tuple(bs), pattern, cont)


@dataclass
class TraceStep:
    index: int
    rule: str
    ambient: Any
    before: Process
    after: Process
    evals: tuple = ()  # intermediate evaluation rules preceding the communication

    def line(self, inst: Instance) -> str:
        return f"{self.index}\t{self.rule}\t{render_ambient(inst, self.ambient)}\t{render(canonicalize(self.after, inst.canon_term))}"

    def as_json(self, inst: Instance) -> dict:
        return {
            "step": self.index,
            "rule": self.rule,
            "ambient": render_ambient(inst, self.ambient),
            "process": render(canonicalize(self.after, inst.canon_term)),
        }


def render_ambient(inst: Instance, psi) -> str:
    return inst.render_assertion(inst.canon_term(psi, 0))


def state_key(inst: Instance, p: Process) -> str:
    return skey(canonicalize(p, inst.canon_term))


def reduce_steps(psi, p: Process, inst: Instance, eval_depth: int = DEFAULT_EVAL_DEPTH) -> list[tuple[Process, TraceStep]]:
    """One-step reductions, each possibly preceded by up to ``eval_depth`` evaluations.

    Successors are deduplicated up to structural congruence.  Replication is
    unfolded lazily: only along evaluation paths explored here.
    """
    binders, comps = configuration(p, support(psi))
    start = _rebuild(binders, comps)
    ambient = inst.compose(psi, frame_assertion(canonicalize(start, inst.canon_term), inst.unit, inst.compose))
    seen_states = {state_key(inst, start)}
    frontier: list[tuple[Process, tuple]] = [(start, ())]
    results: dict[str, tuple[Process, TraceStep]] = {}
    for level in range(eval_depth + 1):
        nxt = []
        for q, rules in frontier:
            for after in com_steps(psi, q, inst):
                k = state_key(inst, after)
                if k not in results:
                    rule = "R-COM" if not rules else "R-EVAL"
                    results[k] = (after, TraceStep(0, rule, ambient, start, after, rules))
            if level == eval_depth:
                continue
            for q2, rule in eval_steps(psi, q, inst):
                k = state_key(inst, q2)
                if k not in seen_states:
                    seen_states.add(k)
                    nxt.append((q2, rules + (rule,)))
        frontier = nxt
    return [results[k] for k in sorted(results)]


def wrong_states(psi, p: Process, inst: Instance) -> list[Redex]:
    return inst.wrong(psi, p)


# -- exploration ------------------------------------------------------------------


@dataclass
class Node:
    key: str
    process: Process
    depth: int
    children: list[str] = field(default_factory=list)
    truncated: bool = False  # DepthExceeded marker
    wrong: list = field(default_factory=list)


@dataclass
class Exploration:
    root: str
    nodes: dict[str, Node]
    budget_exceeded: bool = False
    trace: list[TraceStep] = field(default_factory=list)

    @property
    def depth_exceeded(self) -> bool:
        return any(n.truncated for n in self.nodes.values())

    def normal_forms(self) -> list[Node]:
        return [n for n in self.nodes.values() if not n.children and not n.truncated]

    def max_depth(self) -> int:
        return max(n.depth for n in self.nodes.values())

    def wrong_nodes(self) -> list[Node]:
        return [n for n in self.nodes.values() if n.wrong]


def explore(
    psi,
    p: Process,
    inst: Instance,
    max_depth: int,
    strategy: str = "all",
    seed: int = 0,
    budget: int | None = None,
    detect_wrong: bool = False,
    on_step: Callable[[TraceStep], None] | None = None,
    eval_depth: int = DEFAULT_EVAL_DEPTH,
) -> Exploration:
    """Bounded exploration of the reduction relation.

    ``all`` builds the graph of canonical states reachable within ``max_depth``
    steps; ``random`` and ``first`` follow a single trace.  ``budget`` caps the
    number of distinct states (``budget_exceeded`` is set when hit).
    """
    if max_depth < 0:
        raise ValueError("max_depth must be >= 0")
    if strategy == "all":
        return _explore_all(psi, p, inst, max_depth, budget, detect_wrong, on_step, eval_depth)
    rng = random.Random(seed)
    key = state_key(inst, p)
    nodes = {key: Node(key, p, 0)}
    trace: list[TraceStep] = []
    cur = p
    for depth in range(max_depth):
        if detect_wrong:
            nodes[key].wrong = wrong_states(psi, cur, inst)
        succ = reduce_steps(psi, cur, inst, eval_depth)
        if not succ:
            break
        after, step = succ[0] if strategy == "first" else rng.choice(succ)
        step.index = depth + 1
        if on_step:
            on_step(step)
        trace.append(step)
        nkey = state_key(inst, after)
        nodes[key].children.append(nkey)
        nodes.setdefault(nkey, Node(nkey, after, depth + 1))
        key, cur = nkey, after
    else:
        if reduce_steps(psi, cur, inst, eval_depth):
            nodes[key].truncated = True
    if detect_wrong:
        nodes[key].wrong = wrong_states(psi, cur, inst)
    return Exploration(state_key(inst, p), nodes, trace=trace)


def _explore_all(psi, p, inst, max_depth, budget, detect_wrong, on_step, eval_depth) -> Exploration:
    root = state_key(inst, p)
    nodes = {root: Node(root, p, 0)}
    queue = deque([root])
    exceeded = False
    index = 0
    while queue:
        key = queue.popleft()
        node = nodes[key]
        if detect_wrong:
            node.wrong = wrong_states(psi, node.process, inst)
        succ = reduce_steps(psi, node.process, inst, eval_depth)
        if not succ:
            continue
        if node.depth >= max_depth:
            node.truncated = True
            continue
        for after, step in succ:
            index += 1
            step.index = index
            if on_step:
                on_step(step)
            nkey = state_key(inst, after)
            node.children.append(nkey)
            if nkey not in nodes:
                if budget is not None and len(nodes) >= budget:
                    exceeded = True
                    continue
                nodes[nkey] = Node(nkey, after, node.depth + 1)
                queue.append(nkey)
    return Exploration(root, nodes, budget_exceeded=exceeded)


def trace_lines(inst: Instance, trace: list[TraceStep], fmt: str = "text") -> list[str]:
    if fmt == "json":
        return [json.dumps(s.as_json(inst), sort_keys=True, ensure_ascii=False) for s in trace]
    return [s.line(inst) for s in trace]


# -- frame lemmas, asserted along traces -------------------------------------------


def frame_monotone(inst: Instance, step: TraceStep) -> bool:
    """F(before) ≤ F(after) for a reduction step (names are shared)."""
    f0 = frame_assertion(step.before, inst.unit, inst.compose)
    f1 = frame_assertion(step.after, inst.unit, inst.compose)
    return inst.specialises(f0, f1)


def frame_invariant_eval(inst: Instance, psi, p: Process) -> bool:
    """F(p) = F(p') for every evaluation successor p' (names are shared)."""
    binders, comps = configuration(p, support(psi))
    start = _rebuild(binders, comps)
    f0 = frame_assertion(start, inst.unit, inst.compose)
    return all(
        inst.assertion_eq(f0, frame_assertion(q, inst.unit, inst.compose))
        for q, _ in eval_steps(psi, start, inst)
    )
