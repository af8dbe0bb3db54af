"""``hopsi`` command line: check, run, encode, assumptions, eq.

Exit codes: 0 success, 1 type error (or "not equivalent" for eq),
2 parse error, 3 WRONG reachable, 4 assumption counterexample.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Sequence

from .instance import EMPTY_ENV, IllTyped
from .parser import INSTANCES, ParseError, Source, instance_for_path, parse_source
from .semantics import explore, trace_lines
from .syntax import render, struct_eq
from .typecheck import ASSUMPTIONS, assumption_harness, check_report, mutant

OK, TYPE_ERROR, PARSE_ERROR, WRONG, COUNTEREXAMPLE = 0, 1, 2, 3, 4


class _Exit(Exception):
    def __init__(self, code: int):
        self.code = code


def instance_object(name: str):
    if name == "hopi":
        from .hopi import HOPI

        return HOPI
    if name == "hopi2":
        from .hopi2 import HOPI2

        return HOPI2
    if name == "rho":
        from .rho import RHO

        return RHO
    if name == "rho-typed":
        from .rho import RHO_TYPED

        return RHO_TYPED
    raise ValueError(name)


def load(path: str, instance: str | None, names: dict | None = None) -> Source:
    inst = instance or instance_for_path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        print(f"{path}: {e.strerror}", file=sys.stderr)
        raise _Exit(PARSE_ERROR) from None
    try:
        return parse_source(text, inst, names, path=path)
    except ParseError as e:
        print(f"{path}:{e.line}:{e.col}: {e.message}", file=sys.stderr)
        raise _Exit(PARSE_ERROR) from None


def judgment(src: Source, strict: bool = True):
    """(Γ, Ψ, process, instance) for the generic engine.

    For hopi2 the level is inferred; with ``strict`` a level violation is
    raised, otherwise the largest declared level is used.
    """
    if src.instance == "hopi":
        from .hopi import EMPTY, HOPI

        return src.env, src.assertion if src.assertion is not None else EMPTY, src.body, HOPI
    if src.instance == "hopi2":
        from .hopi2 import HOPI2, LevelViolation, embed_judgment, infer_level

        env = dict(src.declarations)
        try:
            n = infer_level(env, src.body)
        except LevelViolation:
            if strict:
                raise
            n = max((t.k for t in env.values()), default=0)
        g, psi, p = embed_judgment(env, src.body, n)
        return g, psi, p, HOPI2
    from .rho import NO_DECLS, RHO, RHO_TYPED, encode, encode_typed

    if src.instance == "rho-typed":
        return EMPTY_ENV, NO_DECLS, encode_typed(src.body), RHO_TYPED
    return EMPTY_ENV, NO_DECLS, encode(src.body), RHO


def seed_of(args) -> int:
    env = os.environ.get("HOPSI_SEED")
    if env is not None:
        try:
            return int(env, 0)
        except ValueError:
            print(f"HOPSI_SEED is not an integer: {env!r}", file=sys.stderr)
            raise _Exit(PARSE_ERROR) from None
    return args.seed


def _emit_json(obj) -> None:
    print(json.dumps(obj, sort_keys=True, ensure_ascii=False))


# -- check -----------------------------------------------------------------------------


def cmd_check(args) -> int:
    src = load(args.file, args.instance)
    if src.instance == "rho":
        report = {"result": "ok", "errors": [], "warnings": ["untyped instance: nothing to check"], "assumptionReport": []}
    else:
        level = None
        try:
            env, psi, p, inst = judgment(src)
            if src.instance == "hopi2":
                level = psi.n
            report = check_report(env, psi, p, inst)
        except IllTyped as e:
            report = {
                "result": "ill-typed",
                "errors": [{"rule": e.rule, "position": list(e.position), "message": e.message}],
                "warnings": [],
                "assumptionReport": [],
            }
        if level is not None:
            report["level"] = level
    if args.json:
        _emit_json(report)
    else:
        if report["result"] == "ok":
            extra = f" (level {report['level']})" if "level" in report else ""
            print(f"ok{extra}")
        for w in report["warnings"]:
            print(f"warning: {w}")
        for e in report["errors"]:
            pos = ".".join(str(i) for i in e["position"]) or "-"
            print(f"{report['result']}: {e['rule']} at {pos}: {e['message']}")
    return OK if report["result"] == "ok" else TYPE_ERROR


# -- run -------------------------------------------------------------------------------


def cmd_run(args) -> int:
    src = load(args.file, args.instance)
    seed = seed_of(args)
    if src.instance == "rho":
        return _run_rho(src.body, args, seed)
    env, psi, p, inst = judgment(src, strict=False)
    steps = []
    ex = explore(
        psi,
        p,
        inst,
        args.max_steps,
        strategy=args.strategy,
        seed=seed,
        budget=args.budget,
        detect_wrong=args.detect_wrong,
        on_step=steps.append if args.strategy == "all" else None,
    )
    trace = steps if args.strategy == "all" else ex.trace
    for line in trace_lines(inst, trace, args.trace):
        print(line)
    wrong = ex.wrong_nodes()
    summary = {
        "instance": src.instance,
        "strategy": args.strategy,
        "seed": seed,
        "states": len(ex.nodes),
        "normalForms": len(ex.normal_forms()),
        "depthExceeded": ex.depth_exceeded,
        "budgetExceeded": ex.budget_exceeded,
        "wrong": [render(n.process) for n in sorted(wrong, key=lambda n: n.key)],
    }
    _summarise(summary, args)
    return WRONG if args.detect_wrong and wrong else OK


def _run_rho(p, args, seed: int) -> int:
    import random

    from .rho import canon_key, rho_canon, rho_step, show

    def line(i, q):
        if args.trace == "json":
            return json.dumps({"step": i, "rule": "COMM", "process": show(rho_canon(q))}, sort_keys=True)
        return f"{i}\tCOMM\t-\t{show(rho_canon(q))}"

    seen = {canon_key(p)}
    normal = truncated = exceeded = 0
    index = 0
    if args.strategy == "all":
        frontier = [p]
        for depth in range(args.max_steps + 1):
            nxt = []
            for q in frontier:
                succ = rho_step(q)
                if not succ:
                    normal += 1
                    continue
                if depth == args.max_steps:
                    truncated += 1
                    continue
                for r in succ:
                    index += 1
                    print(line(index, r))
                    k = canon_key(r)
                    if k in seen:
                        continue
                    if args.budget is not None and len(seen) >= args.budget:
                        exceeded = 1
                        continue
                    seen.add(k)
                    nxt.append(r)
            frontier = nxt
    else:
        rng = random.Random(seed)
        q = p
        for _ in range(args.max_steps):
            succ = rho_step(q)
            if not succ:
                break
            q = succ[0] if args.strategy == "first" else rng.choice(succ)
            index += 1
            seen.add(canon_key(q))
            print(line(index, q))
        if rho_step(q):
            truncated = 1
        else:
            normal = 1
    summary = {
        "instance": "rho",
        "strategy": args.strategy,
        "seed": seed,
        "states": len(seen),
        "normalForms": normal,
        "depthExceeded": bool(truncated),
        "budgetExceeded": bool(exceeded),
        "wrong": [],
    }
    _summarise(summary, args)
    return OK


def _summarise(summary: dict, args) -> None:
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(summary, fh, sort_keys=True, indent=2, ensure_ascii=False)
            fh.write("\n")
    print(
        f"# {summary['states']} states, {summary['normalForms']} normal forms, "
        f"{len(summary['wrong'])} wrong, depth exceeded: {'yes' if summary['depthExceeded'] else 'no'}",
        file=sys.stderr,
    )


# -- encode ----------------------------------------------------------------------------


def cmd_encode(args) -> int:
    from .rho import MissingAnnotation, encode, encode_typed

    src = load(args.file, "rho-typed" if args.typed else "rho")
    try:
        out = encode_typed(src.body) if args.typed else encode(src.body)
    except MissingAnnotation as e:
        print(f"{args.file}: {e.message}", file=sys.stderr)
        return TYPE_ERROR
    print(render(out))
    return OK


# -- assumptions -----------------------------------------------------------------------


def cmd_assumptions(args) -> int:
    inst = instance_object(args.instance)
    if args.mutant:
        inst = mutant(inst, args.mutant)
    seed = seed_of(args)
    report = assumption_harness(inst, args.trials, seed=seed, max_size=args.max_size, only=args.only)
    if args.json:
        _emit_json(report.as_json())
    else:
        for r in report.results:
            status = "pass" if r.passed else "FAIL"
            print(f"{r.name}\t{r.applicable}/{r.trials} applicable\t{status}")
            if not r.passed:
                print(f"  counterexample: {r.as_json()['counterexample']}")
        print(f"{inst.name}: {'pass' if report.passed else 'counterexample'}")
    return OK if report.passed else COUNTEREXAMPLE


# -- eq --------------------------------------------------------------------------------


def cmd_eq(args) -> int:
    names: dict = {}
    a = load(args.file1, args.instance, names)
    b = load(args.file2, args.instance or a.instance, names)
    if a.instance != b.instance:
        print("both files must use the same instance", file=sys.stderr)
        return PARSE_ERROR
    if a.instance.startswith("rho"):
        from .rho import Quote, name_eq, struct_cong

        same = name_eq(Quote(a.body), Quote(b.body)) if args.relation == "nameeq" else struct_cong(a.body, b.body)
    elif args.relation == "nameeq":
        print("nameeq compares rho processes", file=sys.stderr)
        return PARSE_ERROR
    else:
        inst = instance_object(a.instance)
        if a.instance == "hopi2":
            from .hopi2 import embed

            env = {**dict(a.declarations), **dict(b.declarations)}
            pa, pb = embed(env, a.body), embed(env, b.body)
        else:
            pa, pb = a.body, b.body
        same = struct_eq(pa, pb, inst.canon_term)
    if args.json:
        _emit_json({"relation": args.relation, "equivalent": same})
    else:
        print("equivalent" if same else "not equivalent")
    return OK if same else TYPE_ERROR


# -- argument parsing --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hopsi", description="Higher-order psi-calculus workbench.")
    sub = ap.add_subparsers(dest="command", required=True)

    def instance_flag(p, required=False):
        p.add_argument("--instance", choices=INSTANCES, required=required, help="default: from the file extension")

    c = sub.add_parser("check", help="type-check a source file")
    c.add_argument("file")
    instance_flag(c)
    c.add_argument("--json", action="store_true", help="print a JSON report")
    c.set_defaults(fn=cmd_check)

    r = sub.add_parser("run", help="explore reductions")
    r.add_argument("file")
    instance_flag(r)
    r.add_argument("--max-steps", type=int, default=5)
    r.add_argument("--strategy", choices=("all", "random", "first"), default="all")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--trace", choices=("text", "json"), default="text")
    r.add_argument("--budget", type=int, default=None, help="cap on distinct states")
    r.add_argument("--detect-wrong", action="store_true")
    r.add_argument("--report", metavar="PATH", help="write a JSON summary here")
    r.set_defaults(fn=cmd_run)

    e = sub.add_parser("encode", help="print the encoding of a rho process")
    e.add_argument("file")
    e.add_argument("--typed", action="store_true")
    e.set_defaults(fn=cmd_encode)

    a = sub.add_parser("assumptions", help="randomised check of the instance assumptions")
    instance_flag(a, required=True)
    a.add_argument("--trials", type=int, default=1000)
    a.add_argument("--max-size", type=int, default=4)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--only", action="append", choices=sorted(ASSUMPTIONS))
    a.add_argument("--mutant", choices=("compose", "subst", "compat"))
    a.add_argument("--json", action="store_true")
    a.set_defaults(fn=cmd_assumptions)

    q = sub.add_parser("eq", help="compare two processes")
    q.add_argument("file1")
    q.add_argument("file2")
    q.add_argument("--relation", choices=("nameeq", "structcong"), default="structcong")
    instance_flag(q)
    q.add_argument("--json", action="store_true")
    q.set_defaults(fn=cmd_eq)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return PARSE_ERROR if e.code else OK
    if getattr(args, "max_steps", 0) < 0:
        print("--max-steps must be >= 0", file=sys.stderr)
        return PARSE_ERROR
    try:
        return args.fn(args)
    except _Exit as e:
        return e.code


if __name__ == "__main__":
    sys.exit(main())
