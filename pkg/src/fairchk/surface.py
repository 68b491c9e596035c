"""Concrete syntax: lexer, parser, renderer, and name resolution.

The grammar (ASCII, comments run from `--` to end of line):

    program   := (typedef | procdef)*
    typedef   := "type" NAME "=" ty
    ty        := "end!" | "end?" | "!{" branches "}" | "?{" branches "}"
              |  "!(" ty ")" "." ty | "?(" ty ")" "." ty | NAME
    branches  := LABEL ":" ty ("," LABEL ":" ty)*
    procdef   := NAME "(" [param ("," param)*] ")" ["@" NAT] "=" proc
    param     := IDENT ":" ty
    proc      := "done" | NAME "(" [IDENT ("," IDENT)*] ")"
              |  "close" IDENT | "wait" IDENT "." proc
              |  IDENT "!" LABEL "." proc | IDENT "!{" pbranches "}"
              |  IDENT "?" LABEL "." proc | IDENT "?{" pbranches "}"
              |  IDENT "!(" IDENT ")" "." proc
              |  IDENT "?(" IDENT ":" ty ")" "." proc
              |  "new" IDENT ":" ty "/" ty "in" "(" proc "|" proc ")"
              |  "[" IDENT ":" ty ["@" NAT] "]" proc
              |  proc "+" ["[" ("1"|"2") "]"] proc | "(" proc ")"
    pbranches := LABEL ":" proc ("," LABEL ":" proc)*

Prefixes bind tighter than choice, choice associates to the left, and a bare
`+` means `+[1]`. Identifiers may contain apostrophes after the first
character, so SB' is a valid type name. The optional `@ NAT` after a procdef
header asserts an upper bound on the definition's rank.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from typing import Optional

from .types import TypeTable

IDENT_START = set(string.ascii_letters + "_")
IDENT_CONT = IDENT_START | set(string.digits) | {"'"}
KEYWORDS = {"type", "done", "close", "wait", "new", "in"}


class SourceError(Exception):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {msg}")
        self.msg = msg
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Span:
    line: int
    col: int


# Type expressions -----------------------------------------------------------

@dataclass
class TEnd:
    pol: str
    span: Span = field(compare=False, repr=False, default=Span(0, 0))


@dataclass
class TTags:
    pol: str
    branches: list[tuple[str, "TypeExpr"]]
    span: Span = field(compare=False, repr=False, default=Span(0, 0))


@dataclass
class TChan:
    pol: str
    payload: "TypeExpr"
    cont: "TypeExpr"
    span: Span = field(compare=False, repr=False, default=Span(0, 0))


@dataclass
class TName:
    name: str
    span: Span = field(compare=False, repr=False, default=Span(0, 0))


TypeExpr = TEnd | TTags | TChan | TName


# Process expressions --------------------------------------------------------

@dataclass
class Done:
    span: Span = field(compare=False, repr=False, default=Span(0, 0))


@dataclass
class Call:
    name: str
    args: list[str]
    span: Span = field(compare=False, repr=False, default=Span(0, 0))


@dataclass
class Close:
    chan: str
    span: Span = field(compare=False, repr=False, default=Span(0, 0))


@dataclass
class Wait:
    chan: str
    cont: "ProcExpr"
    span: Span = field(compare=False, repr=False, default=Span(0, 0))


@dataclass
class TagComm:
    chan: str
    pol: str
    branches: list[tuple[str, "ProcExpr"]]
    span: Span = field(compare=False, repr=False, default=Span(0, 0))


@dataclass
class ChanOut:
    chan: str
    payload: str
    cont: "ProcExpr"
    span: Span = field(compare=False, repr=False, default=Span(0, 0))


@dataclass
class ChanIn:
    chan: str
    var: str
    ann: TypeExpr
    cont: "ProcExpr"
    span: Span = field(compare=False, repr=False, default=Span(0, 0))
    tid: Optional[int] = field(compare=False, default=None)


@dataclass
class Choice:
    k: int
    left: "ProcExpr"
    right: "ProcExpr"
    span: Span = field(compare=False, repr=False, default=Span(0, 0))


@dataclass
class NewSession:
    chan: str
    lty: TypeExpr
    rty: TypeExpr
    left: "ProcExpr"
    right: "ProcExpr"
    span: Span = field(compare=False, repr=False, default=Span(0, 0))
    ltid: Optional[int] = field(compare=False, default=None)
    rtid: Optional[int] = field(compare=False, default=None)


@dataclass
class Cast:
    chan: str
    target: TypeExpr
    weight_ann: Optional[int]
    cont: "ProcExpr"
    span: Span = field(compare=False, repr=False, default=Span(0, 0))
    tid: Optional[int] = field(compare=False, default=None)


ProcExpr = Done | Call | Close | Wait | TagComm | ChanOut | ChanIn | Choice | NewSession | Cast


@dataclass
class ProcDef:
    name: str
    params: list[tuple[str, TypeExpr]]
    rank_ann: Optional[int]
    body: ProcExpr
    span: Span = field(compare=False, repr=False, default=Span(0, 0))
    param_tids: Optional[list[int]] = field(compare=False, default=None)


@dataclass
class SourceProgram:
    typedefs: list[tuple[str, TypeExpr, Span]]
    procdefs: list[ProcDef]


@dataclass
class Program:
    """A resolved program: every annotation interned into one TypeTable."""
    table: TypeTable
    typedefs: dict[str, int]
    procs: dict[str, ProcDef]


# Lexer ----------------------------------------------------------------------

@dataclass(frozen=True)
class Token:
    kind: str   # "ident", "nat", or the punctuation itself
    text: str
    line: int
    col: int


PUNCT = "(){}[]:,./=!?+|@"


def lex(src: str) -> list[Token]:
    toks: list[Token] = []
    line, col, i = 1, 1, 0
    n = len(src)
    while i < n:
        c = src[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
        elif c in " \t\r":
            i += 1
            col += 1
        elif c == "-" and src[i : i + 2] == "--":
            while i < n and src[i] != "\n":
                i += 1
        elif c in IDENT_START:
            j = i
            while j < n and src[j] in IDENT_CONT:
                j += 1
            toks.append(Token("ident", src[i:j], line, col))
            col += j - i
            i = j
        elif c.isdigit():
            j = i
            while j < n and src[j].isdigit():
                j += 1
            toks.append(Token("nat", src[i:j], line, col))
            col += j - i
            i = j
        elif c in PUNCT:
            toks.append(Token(c, c, line, col))
            i += 1
            col += 1
        else:
            raise SourceError(f"unexpected character {c!r}", line, col)
    toks.append(Token("eof", "", line, col))
    return toks


# Parser ---------------------------------------------------------------------

class _Parser:
    def __init__(self, toks: list[Token]):
        self.toks = toks
        self.pos = 0

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, kind: str) -> Token:
        t = self.next()
        if t.kind != kind:
            raise SourceError(f"expected {kind!r}, found {t.text or t.kind!r}", t.line, t.col)
        return t

    def ident(self) -> Token:
        t = self.expect("ident")
        if t.text in KEYWORDS:
            raise SourceError(f"keyword {t.text!r} cannot be used as a name", t.line, t.col)
        return t

    def at_keyword(self, kw: str) -> bool:
        t = self.peek()
        return t.kind == "ident" and t.text == kw

    # -- types ----------------------------------------------------------

    def parse_type(self) -> TypeExpr:
        t = self.peek()
        span = Span(t.line, t.col)
        if t.kind == "ident" and t.text == "end":
            self.next()
            pol = self.next()
            if pol.kind not in ("!", "?"):
                raise SourceError("expected '!' or '?' after 'end'", pol.line, pol.col)
            return TEnd(pol.kind, span)
        if t.kind in ("!", "?"):
            pol = self.next().kind
            opener = self.next()
            if opener.kind == "{":
                branches = self._type_branches()
                self.expect("}")
                return TTags(pol, branches, span)
            if opener.kind == "(":
                payload = self.parse_type()
                self.expect(")")
                self.expect(".")
                cont = self.parse_type()
                return TChan(pol, payload, cont, span)
            raise SourceError("expected '{' or '(' after polarity", opener.line, opener.col)
        if t.kind == "ident":
            self.next()
            if t.text in KEYWORDS:
                raise SourceError(f"keyword {t.text!r} is not a type", t.line, t.col)
            return TName(t.text, span)
        raise SourceError(f"expected a type, found {t.text or t.kind!r}", t.line, t.col)

    def _type_branches(self) -> list[tuple[str, TypeExpr]]:
        branches = [self._type_branch()]
        while self.peek().kind == ",":
            self.next()
            branches.append(self._type_branch())
        seen = set()
        for label, _ in branches:
            if label in seen:
                t = self.peek()
                raise SourceError(f"duplicate label {label!r}", t.line, t.col)
            seen.add(label)
        return branches

    def _type_branch(self) -> tuple[str, TypeExpr]:
        label = self.ident()
        self.expect(":")
        return label.text, self.parse_type()

    # -- processes --------------------------------------------------------

    def parse_proc(self) -> ProcExpr:
        left = self.parse_atom()
        while self.peek().kind == "+":
            plus = self.next()
            k = 1
            if self.peek().kind == "[":
                self.next()
                nat = self.expect("nat")
                k = int(nat.text)
                if k not in (1, 2):
                    raise SourceError("choice branch must be 1 or 2", nat.line, nat.col)
                self.expect("]")
            right = self.parse_atom()
            left = Choice(k, left, right, Span(plus.line, plus.col))
        return left

    def parse_atom(self) -> ProcExpr:
        t = self.peek()
        span = Span(t.line, t.col)
        if t.kind == "(":
            self.next()
            p = self.parse_proc()
            self.expect(")")
            return p
        if t.kind == "[":
            self.next()
            chan = self.ident()
            self.expect(":")
            target = self.parse_type()
            weight = None
            if self.peek().kind == "@":
                self.next()
                weight = int(self.expect("nat").text)
            self.expect("]")
            return Cast(chan.text, target, weight, self.parse_atom(), span)
        if self.at_keyword("done"):
            self.next()
            return Done(span)
        if self.at_keyword("close"):
            self.next()
            return Close(self.ident().text, span)
        if self.at_keyword("wait"):
            self.next()
            chan = self.ident()
            self.expect(".")
            return Wait(chan.text, self.parse_atom(), span)
        if self.at_keyword("new"):
            self.next()
            chan = self.ident()
            self.expect(":")
            lty = self.parse_type()
            self.expect("/")
            rty = self.parse_type()
            t = self.next()
            if not (t.kind == "ident" and t.text == "in"):
                raise SourceError("expected 'in'", t.line, t.col)
            self.expect("(")
            left = self.parse_proc()
            self.expect("|")
            right = self.parse_proc()
            self.expect(")")
            return NewSession(chan.text, lty, rty, left, right, span)
        name = self.ident()
        nxt = self.peek()
        if nxt.kind == "(":
            self.next()
            args = []
            if self.peek().kind != ")":
                args.append(self.ident().text)
                while self.peek().kind == ",":
                    self.next()
                    args.append(self.ident().text)
            self.expect(")")
            return Call(name.text, args, span)
        if nxt.kind in ("!", "?"):
            pol = self.next().kind
            after = self.peek()
            if after.kind == "{":
                self.next()
                branches = self._proc_branches()
                self.expect("}")
                return TagComm(name.text, pol, branches, span)
            if after.kind == "(":
                self.next()
                if pol == "!":
                    payload = self.ident()
                    self.expect(")")
                    self.expect(".")
                    return ChanOut(name.text, payload.text, self.parse_atom(), span)
                var = self.ident()
                self.expect(":")
                ann = self.parse_type()
                self.expect(")")
                self.expect(".")
                return ChanIn(name.text, var.text, ann, self.parse_atom(), span)
            label = self.ident()
            self.expect(".")
            cont = self.parse_atom()
            return TagComm(name.text, pol, [(label.text, cont)], span)
        raise SourceError(f"expected a process, found {nxt.text or nxt.kind!r}", nxt.line, nxt.col)

    def _proc_branches(self) -> list[tuple[str, ProcExpr]]:
        branches = [self._proc_branch()]
        while self.peek().kind == ",":
            self.next()
            branches.append(self._proc_branch())
        seen = set()
        for label, _ in branches:
            if label in seen:
                t = self.peek()
                raise SourceError(f"duplicate label {label!r}", t.line, t.col)
            seen.add(label)
        return branches

    def _proc_branch(self) -> tuple[str, ProcExpr]:
        label = self.ident()
        self.expect(":")
        return label.text, self.parse_proc()

    # -- top level --------------------------------------------------------

    def parse_program(self) -> SourceProgram:
        typedefs: list[tuple[str, TypeExpr, Span]] = []
        procdefs: list[ProcDef] = []
        while self.peek().kind != "eof":
            if self.at_keyword("type"):
                t = self.next()
                name = self.ident()
                self.expect("=")
                typedefs.append((name.text, self.parse_type(), Span(t.line, t.col)))
            else:
                name = self.ident()
                self.expect("(")
                params: list[tuple[str, TypeExpr]] = []
                if self.peek().kind != ")":
                    params.append(self._param())
                    while self.peek().kind == ",":
                        self.next()
                        params.append(self._param())
                self.expect(")")
                rank_ann = None
                if self.peek().kind == "@":
                    self.next()
                    rank_ann = int(self.expect("nat").text)
                self.expect("=")
                body = self.parse_proc()
                procdefs.append(ProcDef(name.text, params, rank_ann, body, Span(name.line, name.col)))
        return SourceProgram(typedefs, procdefs)

    def _param(self) -> tuple[str, TypeExpr]:
        var = self.ident()
        self.expect(":")
        return var.text, self.parse_type()


def parse(text: str) -> SourceProgram:
    return _Parser(lex(text)).parse_program()


# Renderer -------------------------------------------------------------------

def render_type(t: TypeExpr) -> str:
    if isinstance(t, TEnd):
        return f"end{t.pol}"
    if isinstance(t, TName):
        return t.name
    if isinstance(t, TTags):
        inner = ", ".join(f"{l}: {render_type(b)}" for l, b in t.branches)
        return f"{t.pol}{{{inner}}}"
    return f"{t.pol}({render_type(t.payload)}). {render_type(t.cont)}"


def _atom(p: ProcExpr) -> str:
    s = render_proc(p)
    return f"({s})" if isinstance(p, Choice) else s


def render_proc(p: ProcExpr) -> str:
    if isinstance(p, Done):
        return "done"
    if isinstance(p, Call):
        return f"{p.name}({', '.join(p.args)})"
    if isinstance(p, Close):
        return f"close {p.chan}"
    if isinstance(p, Wait):
        return f"wait {p.chan}. {_atom(p.cont)}"
    if isinstance(p, TagComm):
        if len(p.branches) == 1:
            label, cont = p.branches[0]
            return f"{p.chan}{p.pol}{label}. {_atom(cont)}"
        inner = ", ".join(f"{l}: {render_proc(b)}" for l, b in p.branches)
        return f"{p.chan}{p.pol}{{{inner}}}"
    if isinstance(p, ChanOut):
        return f"{p.chan}!({p.payload}). {_atom(p.cont)}"
    if isinstance(p, ChanIn):
        return f"{p.chan}?({p.var}: {render_type(p.ann)}). {_atom(p.cont)}"
    if isinstance(p, Choice):
        # Left operands re-associate correctly on reparse; right ones do not.
        return f"{render_proc(p.left)} +[{p.k}] {_atom(p.right)}"
    if isinstance(p, NewSession):
        head = f"new {p.chan}: {render_type(p.lty)} / {render_type(p.rty)}"
        return f"{head} in ({render_proc(p.left)} | {render_proc(p.right)})"
    if isinstance(p, Cast):
        w = f" @{p.weight_ann}" if p.weight_ann is not None else ""
        return f"[{p.chan}: {render_type(p.target)}{w}] {_atom(p.cont)}"
    raise TypeError(f"not a process node: {p!r}")


def render_program(sp: SourceProgram) -> str:
    lines = []
    for name, body, _ in sp.typedefs:
        lines.append(f"type {name} = {render_type(body)}")
    if sp.typedefs and sp.procdefs:
        lines.append("")
    for d in sp.procdefs:
        params = ", ".join(f"{v}: {render_type(t)}" for v, t in d.params)
        rank = f" @{d.rank_ann}" if d.rank_ann is not None else ""
        lines.append(f"{d.name}({params}){rank} = {render_proc(d.body)}")
    return "\n".join(lines) + "\n"


# Resolution -----------------------------------------------------------------

def resolve(sp: SourceProgram) -> Program:
    """Check names, reject non-contractive typedefs, intern all annotations."""
    by_name: dict[str, TypeExpr] = {}
    for name, body, span in sp.typedefs:
        if name in by_name:
            raise SourceError(f"duplicate type definition {name!r}", span.line, span.col)
        by_name[name] = body

    # A typedef whose body is a bare name is an alias. Follow alias chains
    # now so cycles that never cross a constructor are caught up front.
    def chase(name: str, trail: tuple[str, ...]) -> str:
        body = by_name[name]
        if isinstance(body, TName):
            if body.name not in by_name:
                raise SourceError(f"undefined type name {body.name!r}",
                                  body.span.line, body.span.col)
            if body.name in trail or body.name == name:
                raise SourceError(f"non-contractive type definition {name!r}",
                                  body.span.line, body.span.col)
            return chase(body.name, trail + (name,))
        return name

    table = TypeTable()
    slots: dict[str, int] = {}
    for name, body, _ in sp.typedefs:
        if not isinstance(body, TName):
            slots[name] = table.placeholder(hint=name)

    def intern(t: TypeExpr) -> int:
        if isinstance(t, TName):
            if t.name not in by_name:
                raise SourceError(f"undefined type name {t.name!r}", t.span.line, t.span.col)
            return slots[chase(t.name, ())]
        if isinstance(t, TEnd):
            return table.add(("end", t.pol))
        if isinstance(t, TTags):
            return table.add(("tags", t.pol, tuple((l, intern(b)) for l, b in t.branches)))
        return table.add(("chan", t.pol, intern(t.payload), intern(t.cont)))

    typedefs: dict[str, int] = {}
    for name, body, _ in sp.typedefs:
        if isinstance(body, TName):
            continue
        # fill the slot in place rather than via add(), to keep the name tied
        # to a stable id even when an identical anonymous shape exists
        if isinstance(body, TEnd):
            node = ("end", body.pol)
        elif isinstance(body, TTags):
            node = ("tags", body.pol, tuple((l, intern(b)) for l, b in body.branches))
        else:
            node = ("chan", body.pol, intern(body.payload), intern(body.cont))
        table.fill(slots[name], node)
        typedefs[name] = slots[name]
    for name, body, span in sp.typedefs:
        if isinstance(body, TName):
            typedefs[name] = slots[chase(name, ())]

    procs: dict[str, ProcDef] = {}
    for d in sp.procdefs:
        if d.name in procs:
            raise SourceError(f"duplicate process definition {d.name!r}", d.span.line, d.span.col)
        procs[d.name] = d

    def walk(p: ProcExpr) -> None:
        if isinstance(p, Call):
            if p.name not in procs:
                raise SourceError(f"undefined process name {p.name!r}", p.span.line, p.span.col)
        elif isinstance(p, (Wait,)):
            walk(p.cont)
        elif isinstance(p, TagComm):
            for _, b in p.branches:
                walk(b)
        elif isinstance(p, ChanOut):
            walk(p.cont)
        elif isinstance(p, ChanIn):
            p.tid = intern(p.ann)
            walk(p.cont)
        elif isinstance(p, Choice):
            walk(p.left)
            walk(p.right)
        elif isinstance(p, NewSession):
            p.ltid = intern(p.lty)
            p.rtid = intern(p.rty)
            walk(p.left)
            walk(p.right)
        elif isinstance(p, Cast):
            p.tid = intern(p.target)
            walk(p.cont)

    for d in procs.values():
        seen_params = set()
        for v, _ in d.params:
            if v in seen_params:
                raise SourceError(f"duplicate parameter {v!r} in {d.name}", d.span.line, d.span.col)
            seen_params.add(v)
        d.param_tids = [intern(t) for _, t in d.params]
        walk(d.body)

    return Program(table, typedefs, procs)


def load(text: str) -> Program:
    return resolve(parse(text))
