"""Concrete syntax for the three instances.

A source file is an optional list of declarations ``x : T``, an optional
``assume Psi`` line and one process body.  Bound names get fresh names per
binder; free identifiers resolve through a name table (by default the
thread's supply, so the same text always means the same name).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Callable

from .instance import TypeEnv
from .nominal import Name, fresh, supply
from .syntax import NIL, Assert, Case, Input, Output, Par, Process, Repl, Restrict, Run, render

INSTANCES = ("hopi", "hopi2", "rho", "rho-typed")


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


_TOKEN = re.compile(
    r"(?P<ws>\s+|\#[^\n]*)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_']*)"
    r"|(?P<int>\d+)"
    r"|(?P<sym>\(\||\|\)|\[\]|<=|[()\[\]{}<>.,:|!?*@=^'\\+-])"
)


@dataclass
class Token:
    kind: str  # ident, int, sym, eof
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    out, pos, line, start = [], 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - start + 1)
        kind = m.lastgroup
        if kind != "ws":
            out.append(Token(kind, m.group(), line, pos - start + 1))
        for i, ch in enumerate(m.group()):
            if ch == "\n":
                line, start = line + 1, pos + i + 1
        pos = m.end()
    out.append(Token("eof", "", line, pos - start + 1))
    return out


class _Parser:
    def __init__(self, text: str, names: dict[str, Name] | None = None):
        self.toks = tokenize(text)
        self.i = 0
        self.names = names
        self.scope: list[dict[str, Name]] = []

    # -- token plumbing

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        return self.tok.kind in ("sym", "ident", "int") and self.tok.text == text

    def fail(self, msg: str, tok: Token | None = None):
        t = tok or self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        raise ParseError(f"{msg}, found {found}", t.line, t.col)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(f"expected {text!r}")
        return self.advance()

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def ident(self, what: str = "identifier") -> str:
        if self.tok.kind != "ident":
            self.fail(f"expected {what}")
        return self.advance().text

    def integer(self) -> int:
        if self.tok.kind != "int":
            self.fail("expected a number")
        return int(self.advance().text)

    def end(self):
        if self.tok.kind != "eof":
            self.fail("unexpected trailing input")

    # -- names

    def resolve(self, text: str) -> Name:
        for frame in reversed(self.scope):
            if text in frame:
                return frame[text]
        if self.names is not None:
            if text not in self.names:
                self.names[text] = supply().named(text)
            return self.names[text]
        return supply().named(text)

    def bind(self, text: str) -> Name:
        return fresh(text)

    def scoped(self, binders: dict[str, Name], fn: Callable[[], Any]):
        self.scope.append(binders)
        try:
            return fn()
        finally:
            self.scope.pop()


# -- the generic (HOπ) grammar ----------------------------------------------------------

_RESERVED = {"run", "case", "new", "true", "ch", "drop", "assume"}


class HopiParser(_Parser):
    def proc(self) -> Process:
        p = self.unary()
        if self.at("|"):
            self.advance()
            return Par(p, self.proc())
        return p

    def unary(self) -> Process:
        t = self.tok
        if self.at("0"):
            self.advance()
            return NIL
        if self.at("'"):
            self.advance()
            s = self.term()
            self.expect("<")
            o = self.term()
            self.expect(">")
            self.expect(".")
            return Output(s, o, self.unary())
        if self.at("run"):
            self.advance()
            return Run(self.term())
        if self.at("case"):
            return self.case()
        if self.at("!"):
            self.advance()
            return Repl(self.unary())
        if self.at("(|"):
            self.advance()
            a = self.assertion()
            self.expect("|)")
            return Assert(a)
        if self.at("(") and self.peek().text == "new" and self.peek().kind == "ident":
            self.advance()
            self.advance()
            x = self.ident("a restricted name")
            self.expect(":")
            ty = self.type()
            self.expect(")")
            b = self.bind(x)
            return Restrict(b, ty, self.scoped({x: b}, self.unary))
        if self.at("("):
            self.advance()
            p = self.proc()
            self.expect(")")
            return p
        if (t.kind == "ident" and t.text not in _RESERVED) or self.at("["):
            return self.input()
        self.fail("expected a process")

    def case(self) -> Process:
        self.expect("case")
        branches = [self.branch()]
        while self.at("[]"):
            self.advance()
            branches.append(self.branch())
        return Case(tuple(branches))

    def branch(self):
        c = self.condition()
        self.expect(":")
        return (c, self.unary())

    def input(self) -> Process:
        s = self.term()
        self.expect("(")
        self.expect("\\")
        texts, bs = [], []
        while True:
            x = self.ident("a pattern variable")
            ty = None
            if self.at(":"):
                self.advance()
                ty = self.type()
            texts.append(x)
            bs.append((self.bind(x), ty))
            if not self.at(","):
                break
            self.advance()
        self.expect(")")
        frame = {x: b for x, (b, _) in zip(texts, bs)}

        def rest():
            n = self.term()
            self.expect(".")
            return n, self.unary()

        n, c = self.scoped(frame, rest)
        return Input(s, tuple(bs), n, c)

    def term(self):
        from .hopi import ProcTerm

        if self.at("["):
            self.advance()
            p = self.proc()
            self.expect("]")
            return ProcTerm(p)
        t = self.tok
        if t.kind != "ident" or t.text in _RESERVED:
            self.fail("expected a term")
        return self.resolve(self.advance().text)

    def condition(self):
        from .hopi import TOP, ChanEq, Handle

        if self.at("true"):
            self.advance()
            return TOP
        m = self.term()
        if self.at("="):
            self.advance()
            return ChanEq(m, self.term())
        if self.at("<="):
            self.advance()
            self.expect("[")
            p = self.proc()
            self.expect("]")
            return Handle(m, p)
        self.fail("expected '=' or '<=' in a condition")

    def type(self):
        from .hopi import Ch, Drop

        if self.at("ch"):
            self.advance()
            self.expect("(")
            t = self.type()
            self.expect(")")
            return Ch(t)
        if self.at("drop"):
            self.advance()
            return Drop(self.env())
        self.fail("expected a type (ch(..) or drop{..})")

    def env(self) -> TypeEnv:
        self.expect("{")
        items = []
        while not self.at("}"):
            x = self.resolve(self.ident("a name"))
            self.expect(":")
            items.append((x, self.type()))
            if not self.at(","):
                break
            self.advance()
        self.expect("}")
        return TypeEnv(items)

    def assertion(self):
        from .hopi import Bindings

        self.expect("{")
        entries = []
        while not self.at("}"):
            self.expect("[")
            p = self.proc()
            self.expect("]")
            self.expect(":")
            entries.append((p, self.type()))
            if not self.at(","):
                break
            self.advance()
        self.expect("}")
        return Bindings(frozenset(entries))


# -- HOπ₂ direct syntax ---------------------------------------------------------------


class Hopi2Parser(_Parser):
    def proc(self):
        from .hopi2 import HPar

        p = self.unary()
        if self.at("|"):
            self.advance()
            return HPar(p, self.proc())
        return p

    def unary(self):
        from .hopi2 import HIn, HNew, HNil, HOut, HVar

        if self.at("0"):
            self.advance()
            return HNil()
        if self.at("'"):
            self.advance()
            a = self.resolve(self.ident("a channel"))
            self.expect("<")
            q = self.proc()
            self.expect(">")
            self.expect(".")
            return HOut(a, q, self.unary())
        if self.at("(") and self.peek().text == "new":
            self.advance()
            self.advance()
            x = self.ident("a restricted name")
            self.expect(":")
            k = self.level_type()
            self.expect(")")
            b = self.bind(x)
            return HNew(b, k, self.scoped({x: b}, self.unary))
        if self.at("("):
            self.advance()
            p = self.proc()
            self.expect(")")
            return p
        if self.tok.kind == "ident" and self.tok.text not in ("new", "ch"):
            x = self.advance().text
            if self.at("("):
                self.advance()
                v = self.ident("a process variable")
                self.expect(")")
                self.expect(".")
                b = self.bind(v)
                return HIn(self.resolve(x), b, self.scoped({v: b}, self.unary))
            return HVar(self.resolve(x))
        self.fail("expected a process")

    def level_type(self) -> int:
        self.expect("ch")
        self.expect("^")
        return self.integer()

    def type(self):
        from .hopi2 import Ch

        return Ch(self.level_type())


# -- ρ syntax ---------------------------------------------------------------------------


class RhoParser(_Parser):
    def __init__(self, text, names=None, typed: bool = False):
        super().__init__(text, names)
        self.typed = typed

    def proc(self):
        p = self.unary()
        if self.at("|"):
            self.advance()
            return p | self.proc()
        return p

    def unary(self):
        from .rho import RNIL, Lift, RDrop, RIn

        if self.at("0"):
            self.advance()
            return RNIL
        if self.at("*"):
            self.advance()
            return RDrop(self.name())
        if self.at("("):
            self.advance()
            p = self.proc()
            self.expect(")")
            return p
        if self.at("@") or self.tok.kind == "ident":
            x = self.name()
            if self.at("!"):
                self.advance()
                self.expect("(")
                q = self.proc()
                ann = None
                if self.at(":"):
                    self.advance()
                    ann = self.type()
                self.expect(")")
                return Lift(x, q, ann)
            if self.at("?"):
                self.advance()
                self.expect("(")
                y = self.ident("a bound name")
                ann = None
                if self.at(":"):
                    self.advance()
                    ann = self.type()
                self.expect(")")
                self.expect(".")
                b = self.bind(y)
                return RIn(x, b, self.scoped({y: b}, self.unary), ann)
            self.fail("expected '!' or '?' after a name")
        self.fail("expected a process")

    def name(self):
        from .rho import RNIL, Quote, RDrop

        if self.at("@"):
            self.advance()
            if self.at("0"):
                self.advance()
                return Quote(RNIL)
            if self.at("*"):
                self.advance()
                return Quote(RDrop(self.name()))
            if self.at("("):
                self.advance()
                p = self.proc()
                self.expect(")")
                return Quote(p)
            self.fail("expected 0, *x or (P) after '@'")
        return self.resolve(self.ident("a name"))

    def type(self):
        from .rho import Base, Pair

        self.expect("<")
        if self.at("B"):
            self.advance()
            carried = None
        else:
            carried = self.type()
        env = TypeEnv()
        if self.at(","):
            self.advance()
            env = self.env()
        self.expect(">")
        return Base(env) if carried is None else Pair(carried, env)

    def env(self) -> TypeEnv:
        self.expect("{")
        items = []
        while not self.at("}"):
            x = self.resolve(self.ident("a name"))
            self.expect(":")
            items.append((x, self.type()))
            if not self.at(","):
                break
            self.advance()
        self.expect("}")
        return TypeEnv(items)


# -- source files -----------------------------------------------------------------------


@dataclass
class Source:
    instance: str
    declarations: list = field(default_factory=list)  # [(Name, type)]
    assertion: Any = None
    body: Any = None
    path: str | None = None

    @property
    def env(self) -> TypeEnv:
        return TypeEnv(self.declarations)


def _parser(instance: str, text: str, names) -> _Parser:
    if instance == "hopi":
        return HopiParser(text, names)
    if instance == "hopi2":
        return Hopi2Parser(text, names)
    if instance in ("rho", "rho-typed"):
        return RhoParser(text, names, typed=instance == "rho-typed")
    raise ValueError(f"unknown instance {instance!r}")


def parse_source(text: str, instance: str, names: dict[str, Name] | None = None, path: str | None = None) -> Source:
    p = _parser(instance, text, names)
    src = Source(instance, path=path)
    while p.tok.kind == "ident" and p.peek().text == ":" and p.peek().kind == "sym":
        if instance.startswith("rho"):
            p.fail("rho sources take no declarations")
        x = p.resolve(p.advance().text)
        p.advance()
        src.declarations.append((x, p.type()))
    if p.at("assume"):
        if instance != "hopi":
            p.fail(f"{instance} sources take no initial assertion")
        p.advance()
        src.assertion = p.assertion()
    src.body = p.proc()
    p.end()
    return src


def parse_process(text: str, instance: str = "hopi", names: dict[str, Name] | None = None):
    p = _parser(instance, text, names)
    out = p.proc()
    p.end()
    return out


def show_process(p, instance: str = "hopi") -> str:
    if instance == "hopi":
        return render(p)
    if instance == "hopi2":
        from .hopi2 import show

        return show(p)
    from .rho import show

    return show(p)


def show_source(src: Source) -> str:
    lines = [f"{x} : {t}" for x, t in src.declarations]
    if src.assertion is not None:
        lines.append(f"assume {src.assertion}")
    lines.append(show_process(src.body, src.instance))
    return "\n".join(lines) + "\n"


def instance_for_path(path: str) -> str:
    for ext, inst in ((".rhot", "rho-typed"), (".rho", "rho"), (".hopi2", "hopi2")):
        if path.endswith(ext):
            return inst
    return "hopi"
