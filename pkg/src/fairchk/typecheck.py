"""The static pipeline: typing walk, loop safety, ranks, action bounds.

A program passes when five independent obligations all hold:

  1. Every definition body type-checks against an exact linear context
     (communication must match the channel's type to the letter; the only
     place subtyping enters is an explicit cast).
  2. No session creation and no positive-weight cast sits on a loop of the
     termination-path relation. Such a loop lets a run defer termination
     while piling up obligations, so no finite rank exists for it.
  3. Every definition gets a finite minimum rank.
  4. User rank assertions (the `@ n` pragma) are not exceeded.
  5. Every sub-process is action bounded: some branch of every choice
     structure reaches done/close without unfolding any definition twice.

Casts that fail their subtyping obligation are reported, given weight 0,
and the walk continues, so one bad cast does not mask the rest of the
program's diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

from .semantics import compatible
from .subtyping import fair_subtype, render_weight
from .surface import (Call, Cast, ChanIn, ChanOut, Choice, Close, Done,
                      NewSession, ProcDef, ProcExpr, Program, Span, TagComm,
                      Wait)
from .types import INF, TypeTable, equiv


@dataclass
class Diagnostic:
    code: str
    span: Span
    message: str
    details: dict = dc_field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "code": self.code,
            "span": {"line": self.span.line, "col": self.span.col},
            "message": self.message,
            "details": self.details,
        }


class _Abort(Exception):
    """Stops the typing walk of one definition after a hard failure."""


def ast_children(p: ProcExpr) -> list[ProcExpr]:
    if isinstance(p, (Done, Call, Close)):
        return []
    if isinstance(p, (Wait, ChanOut, ChanIn, Cast)):
        return [p.cont]
    if isinstance(p, TagComm):
        return [b for _, b in p.branches]
    if isinstance(p, Choice):
        return [p.left, p.right]
    if isinstance(p, NewSession):
        return [p.left, p.right]
    raise TypeError(f"not a process node: {p!r}")


def free_channels(p: ProcExpr) -> set[str]:
    if isinstance(p, Done):
        return set()
    if isinstance(p, Call):
        return set(p.args)
    if isinstance(p, Close):
        return {p.chan}
    if isinstance(p, Wait):
        return {p.chan} | free_channels(p.cont)
    if isinstance(p, TagComm):
        out = {p.chan}
        for _, b in p.branches:
            out |= free_channels(b)
        return out
    if isinstance(p, ChanOut):
        return {p.chan, p.payload} | free_channels(p.cont)
    if isinstance(p, ChanIn):
        return {p.chan} | (free_channels(p.cont) - {p.var})
    if isinstance(p, Choice):
        return free_channels(p.left) | free_channels(p.right)
    if isinstance(p, NewSession):
        return (free_channels(p.left) | free_channels(p.right)) - {p.chan}
    if isinstance(p, Cast):
        return {p.chan} | free_channels(p.cont)
    raise TypeError(f"not a process node: {p!r}")


class Checker:
    """One full run of the pipeline over a resolved program."""

    def __init__(self, program: Program, infer_branch: bool = False):
        self.program = program
        self.table: TypeTable = program.table
        self.infer_branch = infer_branch
        self.diags: dict[str, list[Diagnostic]] = {n: [] for n in program.procs}
        self.cast_weight: dict[int, int] = {}
        self.occ_def: dict[int, str] = {}
        self.occs: dict[str, list[ProcExpr]] = {}
        self.ranks: dict[str, int | float] = {}
        for name, d in program.procs.items():
            order: list[ProcExpr] = []
            stack = [d.body]
            while stack:
                n = stack.pop()
                order.append(n)
                self.occ_def[id(n)] = name
                stack.extend(reversed(ast_children(n)))
            self.occs[name] = order

    def diag(self, defname: str, code: str, span: Span, message: str, **details) -> Diagnostic:
        d = Diagnostic(code, span, message, details)
        self.diags[defname].append(d)
        return d

    # -- pass 1: typing walk ----------------------------------------------

    def _render(self, tid: int) -> str:
        return self.table.render(tid)

    def check_types(self) -> None:
        for name, d in self.program.procs.items():
            ctx = {v: t for (v, _), t in zip(d.params, d.param_tids or [])}
            try:
                self._tc(name, d.body, ctx)
            except _Abort:
                pass

    def _lookup(self, dn: str, p: ProcExpr, ctx: dict[str, int], var: str) -> int:
        if var not in ctx:
            self.diag(dn, "E-UNBOUND-NAME", p.span, f"channel {var!r} is not in scope")
            raise _Abort
        return ctx[var]

    def _leak(self, dn: str, p: ProcExpr, ctx: dict[str, int], keep: set[str]) -> None:
        extra = sorted(set(ctx) - keep)
        if extra:
            shown = ", ".join(f"{v}: {self._render(ctx[v])}" for v in extra)
            self.diag(dn, "E-CONTEXT-LEAK", p.span, f"unconsumed channels: {shown}")
            raise _Abort

    def _tc(self, dn: str, p: ProcExpr, ctx: dict[str, int]) -> None:
        table = self.table
        if isinstance(p, Done):
            self._leak(dn, p, ctx, set())
            return
        if isinstance(p, Close):
            t = self._lookup(dn, p, ctx, p.chan)
            if table.node(t) != ("end", "!"):
                self.diag(dn, "E-TYPE-MISMATCH", p.span,
                          f"close needs {p.chan}: end!, found {self._render(t)}")
                raise _Abort
            self._leak(dn, p, ctx, {p.chan})
            return
        if isinstance(p, Wait):
            t = self._lookup(dn, p, ctx, p.chan)
            if table.node(t) != ("end", "?"):
                self.diag(dn, "E-TYPE-MISMATCH", p.span,
                          f"wait needs {p.chan}: end?, found {self._render(t)}")
                raise _Abort
            rest = dict(ctx)
            del rest[p.chan]
            self._tc(dn, p.cont, rest)
            return
        if isinstance(p, Call):
            target = self.program.procs[p.name]
            if len(p.args) != len(set(p.args)):
                self.diag(dn, "E-CONTEXT-LEAK", p.span,
                          f"call to {p.name} passes a channel twice")
                raise _Abort
            if len(p.args) != len(target.params):
                self.diag(dn, "E-TYPE-MISMATCH", p.span,
                          f"{p.name} expects {len(target.params)} arguments, got {len(p.args)}")
                raise _Abort
            for arg, want in zip(p.args, target.param_tids or []):
                got = self._lookup(dn, p, ctx, arg)
                if not equiv(table, got, want):
                    self.diag(dn, "E-TYPE-MISMATCH", p.span,
                              f"argument {arg} has type {self._render(got)}, "
                              f"{p.name} expects {self._render(want)}")
                    raise _Abort
            self._leak(dn, p, ctx, set(p.args))
            return
        if isinstance(p, TagComm):
            t = self._lookup(dn, p, ctx, p.chan)
            node = table.node(t)
            if node[0] != "tags" or node[1] != p.pol:
                self.diag(dn, "E-TYPE-MISMATCH", p.span,
                          f"{p.chan}{p.pol} does not match its type {self._render(t)}")
                raise _Abort
            tlabels = set(dict(node[2]))
            plabels = {l for l, _ in p.branches}
            if tlabels != plabels:
                self.diag(dn, "E-TYPE-MISMATCH", p.span,
                          f"labels on {p.chan} are {sorted(plabels)}, "
                          f"type has {sorted(tlabels)}")
                raise _Abort
            children = dict(node[2])
            for label, body in p.branches:
                sub = dict(ctx)
                sub[p.chan] = children[label]
                self._tc(dn, body, sub)
            return
        if isinstance(p, ChanOut):
            t = self._lookup(dn, p, ctx, p.chan)
            node = table.node(t)
            if node[0] != "chan" or node[1] != "!":
                self.diag(dn, "E-TYPE-MISMATCH", p.span,
                          f"{p.chan} cannot send a channel at type {self._render(t)}")
                raise _Abort
            if p.payload == p.chan:
                self.diag(dn, "E-TYPE-MISMATCH", p.span,
                          f"{p.chan} cannot carry itself")
                raise _Abort
            got = self._lookup(dn, p, ctx, p.payload)
            if not equiv(table, got, node[2]):
                self.diag(dn, "E-TYPE-MISMATCH", p.span,
                          f"payload {p.payload} has type {self._render(got)}, "
                          f"carrier expects {self._render(node[2])}")
                raise _Abort
            rest = dict(ctx)
            del rest[p.payload]
            rest[p.chan] = node[3]
            self._tc(dn, p.cont, rest)
            return
        if isinstance(p, ChanIn):
            t = self._lookup(dn, p, ctx, p.chan)
            node = table.node(t)
            if node[0] != "chan" or node[1] != "?":
                self.diag(dn, "E-TYPE-MISMATCH", p.span,
                          f"{p.chan} cannot receive a channel at type {self._render(t)}")
                raise _Abort
            assert p.tid is not None
            if not equiv(table, p.tid, node[2]):
                self.diag(dn, "E-TYPE-MISMATCH", p.span,
                          f"annotation {self._render(p.tid)} differs from "
                          f"payload type {self._render(node[2])}")
                raise _Abort
            if p.var in ctx or p.var == p.chan:
                self.diag(dn, "E-CONTEXT-LEAK", p.span,
                          f"{p.var!r} rebinds a live channel")
                raise _Abort
            rest = dict(ctx)
            rest[p.chan] = node[3]
            rest[p.var] = p.tid
            self._tc(dn, p.cont, rest)
            return
        if isinstance(p, Choice):
            self._tc(dn, p.left, dict(ctx))
            self._tc(dn, p.right, dict(ctx))
            return
        if isinstance(p, NewSession):
            if p.chan in ctx:
                self.diag(dn, "E-CONTEXT-LEAK", p.span,
                          f"{p.chan!r} rebinds a live channel")
                raise _Abort
            assert p.ltid is not None and p.rtid is not None
            if not compatible(self.table, p.ltid, p.rtid):
                self.diag(dn, "E-INCOMPATIBLE", p.span,
                          f"endpoint types of {p.chan} cannot terminate together",
                          left=self._render(p.ltid), right=self._render(p.rtid))
                raise _Abort
            fvl, fvr = free_channels(p.left), free_channels(p.right)
            lctx, rctx = {p.chan: p.ltid}, {p.chan: p.rtid}
            for v, t in ctx.items():
                if v in fvl and v in fvr:
                    self.diag(dn, "E-CONTEXT-LEAK", p.span,
                              f"channel {v!r} is used by both components")
                    raise _Abort
                if v in fvl:
                    lctx[v] = t
                elif v in fvr:
                    rctx[v] = t
                else:
                    self.diag(dn, "E-CONTEXT-LEAK", p.span,
                              f"channel {v!r} is used by neither component")
                    raise _Abort
            self._tc(dn, p.left, lctx)
            self._tc(dn, p.right, rctx)
            return
        if isinstance(p, Cast):
            t = self._lookup(dn, p, ctx, p.chan)
            assert p.tid is not None
            verdict = fair_subtype(self.table, t, p.tid)
            if verdict.holds:
                w = int(verdict.weight)
                if p.weight_ann is not None and w > p.weight_ann:
                    self.diag(dn, "E-WEIGHT-EXCEEDED", p.span,
                              f"cast weight is {w}, annotation allows {p.weight_ann}")
            else:
                kind, (u, v), detail = verdict.failure  # type: ignore[misc]
                self.diag(dn, "E-SUBTYPE", p.span,
                          f"cast target is not a fair supertype of {self._render(t)}",
                          kind=kind, detail=detail,
                          offendingPair=[self._render(u), self._render(v)],
                          source=self._render(t), target=self._render(p.tid))
                w = 0
            self.cast_weight[id(p)] = w
            ctx = dict(ctx)
            ctx[p.chan] = p.tid
            self._tc(dn, p.cont, ctx)
            return
        raise TypeError(f"not a process node: {p!r}")

    # -- termination-path graph and loop safety -----------------------------

    def term_successors(self, p: ProcExpr) -> list[ProcExpr]:
        if isinstance(p, (Done, Close)):
            return []
        if isinstance(p, (Wait, ChanOut, ChanIn, Cast)):
            return [p.cont]
        if isinstance(p, TagComm):
            return [b for _, b in p.branches]
        if isinstance(p, Choice):
            return [p.left if p.k == 1 else p.right]
        if isinstance(p, NewSession):
            return [p.left, p.right]
        if isinstance(p, Call):
            return [self.program.procs[p.name].body]
        raise TypeError(f"not a process node: {p!r}")

    def _loop_occurrences(self) -> set[int]:
        """Ids of occurrences lying on a termination-path cycle."""
        nodes: list[ProcExpr] = []
        for order in self.occs.values():
            nodes.extend(order)
        succ = {id(n): [id(m) for m in self.term_successors(n)] for n in nodes}
        on_cycle: set[int] = set()
        for scc in _tarjan([id(n) for n in nodes], succ):
            if len(scc) > 1 or scc[0] in succ[scc[0]]:
                on_cycle.update(scc)
        return on_cycle

    def check_safe(self) -> set[int]:
        """Flag sessions and positive casts on loops; return their ids."""
        on_cycle = self._loop_occurrences()
        unsafe: set[int] = set()
        for name, order in self.occs.items():
            for n in order:
                if id(n) not in on_cycle:
                    continue
                if isinstance(n, NewSession):
                    unsafe.add(id(n))
                    self.diag(name, "E-UNSAFE-LOOP", n.span,
                              "session created inside a termination-path loop")
                elif isinstance(n, Cast) and self.cast_weight.get(id(n), 0) > 0:
                    unsafe.add(id(n))
                    self.diag(name, "E-UNSAFE-LOOP", n.span,
                              "positive-weight cast inside a termination-path loop",
                              weight=self.cast_weight[id(n)])
        return unsafe

    # -- ranks --------------------------------------------------------------

    def min_rank(self, p: ProcExpr, visited: frozenset[str],
                 memo: dict | None = None) -> int:
        """The cutoff rank equations; calls unfold at most once per name."""
        if memo is None:
            memo = {}
        key = (id(p), visited)
        if key in memo:
            return memo[key]
        if isinstance(p, (Done, Close)):
            r = 0
        elif isinstance(p, (Wait, ChanOut, ChanIn)):
            r = self.min_rank(p.cont, visited, memo)
        elif isinstance(p, Cast):
            r = self.cast_weight.get(id(p), 0) + self.min_rank(p.cont, visited, memo)
        elif isinstance(p, TagComm):
            r = max(self.min_rank(b, visited, memo) for _, b in p.branches)
        elif isinstance(p, Choice):
            r = self.min_rank(p.left if p.k == 1 else p.right, visited, memo)
        elif isinstance(p, NewSession):
            r = 1 + self.min_rank(p.left, visited, memo) + self.min_rank(p.right, visited, memo)
        elif isinstance(p, Call):
            if p.name in visited:
                r = 0
            else:
                r = self.min_rank(self.program.procs[p.name].body,
                                  visited | {p.name}, memo)
        else:
            raise TypeError(f"not a process node: {p!r}")
        memo[key] = r
        return r

    def compute_ranks(self, unsafe: set[int]) -> None:
        """Finite ranks via the cutoff equations; ∞ when the body's
        termination paths cross an unsafe loop, in which case the true
        least solution of the rank equations diverges."""
        for name, d in self.program.procs.items():
            if self._reaches(d.body, unsafe):
                self.ranks[name] = INF
                self.diag(name, "E-INFINITE-RANK", d.span,
                          f"{name} admits no finite rank: its termination "
                          "paths cross an unsafe loop")
            else:
                self.ranks[name] = self.min_rank(d.body, frozenset())
            if d.rank_ann is not None and self.ranks[name] > d.rank_ann:
                self.diag(name, "E-RANK-EXCEEDED", d.span,
                          f"rank of {name} is {render_weight(self.ranks[name])}, "
                          f"annotation allows {d.rank_ann}")

    def _reaches(self, body: ProcExpr, targets: set[int]) -> bool:
        seen = {id(body)}
        stack = [body]
        while stack:
            n = stack.pop()
            if id(n) in targets:
                return True
            for m in self.term_successors(n):
                if id(m) not in seen:
                    seen.add(id(m))
                    stack.append(m)
        return False

    # -- action boundedness ---------------------------------------------------

    def action_bounded(self, p: ProcExpr, visiting: frozenset[str],
                       memo: dict | None = None) -> bool:
        if memo is None:
            memo = {}
        key = (id(p), visiting)
        if key in memo:
            return memo[key]
        if isinstance(p, (Done, Close)):
            r = True
        elif isinstance(p, (Wait, ChanOut, ChanIn, Cast)):
            r = self.action_bounded(p.cont, visiting, memo)
        elif isinstance(p, TagComm):
            r = any(self.action_bounded(b, visiting, memo) for _, b in p.branches)
        elif isinstance(p, Choice):
            r = self.action_bounded(p.left if p.k == 1 else p.right, visiting, memo)
        elif isinstance(p, NewSession):
            r = (self.action_bounded(p.left, visiting, memo)
                 and self.action_bounded(p.right, visiting, memo))
        elif isinstance(p, Call):
            if p.name in visiting:
                r = False
            else:
                r = self.action_bounded(self.program.procs[p.name].body,
                                        visiting | {p.name}, memo)
        else:
            raise TypeError(f"not a process node: {p!r}")
        memo[key] = r
        return r

    def check_action_bounds(self) -> None:
        # every sub-occurrence must be bounded on its own; report only the
        # outermost failures to keep the noise down
        for name, d in self.program.procs.items():
            self._scan_bounds(name, d.body)

    def _scan_bounds(self, name: str, p: ProcExpr) -> None:
        if not self.action_bounded(p, frozenset()):
            self.diag(name, "E-UNBOUNDED-ACTION", p.span,
                      "no branch of this process reaches done or close "
                      "without unfolding a definition twice")
            return
        for c in ast_children(p):
            self._scan_bounds(name, c)

    # -- branch inference ------------------------------------------------------

    def infer_branches(self) -> None:
        """Flip choice markers where the other branch checks out better.

        Each choice is treated independently: better means action bounded
        first, then a finite and smaller rank, then the branch as written.
        """
        for name, d in self.program.procs.items():
            choices = [n for n in self.occs[name] if isinstance(n, Choice)]
            for c in choices:
                written = c.k
                scores = {}
                for k in (1, 2):
                    c.k = k
                    unsafe = self._probe_unsafe()
                    if self._reaches(d.body, unsafe):
                        rank: int | float = INF
                    else:
                        rank = self.min_rank(d.body, frozenset(), memo={})
                    bounded = self.action_bounded(d.body, frozenset(), memo={})
                    scores[k] = (not bounded, rank == INF, rank, k != written)
                c.k = min((1, 2), key=lambda k: scores[k])

    def _probe_unsafe(self) -> set[int]:
        on_cycle = self._loop_occurrences()
        out = set()
        for order in self.occs.values():
            for n in order:
                if id(n) not in on_cycle:
                    continue
                if isinstance(n, NewSession):
                    out.add(id(n))
                elif isinstance(n, Cast) and self.cast_weight.get(id(n), 0) > 0:
                    out.add(id(n))
        return out

    # -- driver -----------------------------------------------------------------

    def run(self) -> dict:
        self.check_types()
        if self.infer_branch:
            self.infer_branches()
        unsafe = self.check_safe()
        self.compute_ranks(unsafe)
        self.check_action_bounds()
        definitions = []
        for name in self.program.procs:
            ds = self.diags[name]
            definitions.append({
                "name": name,
                "rank": render_weight(self.ranks[name]),
                "status": "rejected" if ds else "accepted",
                "diagnostics": [d.to_json() for d in ds],
            })
        verdict = "accepted" if all(not self.diags[n] for n in self.program.procs) else "rejected"
        return {"verdict": verdict, "definitions": definitions}


def _tarjan(nodes: list[int], succ: dict[int, list[int]]) -> list[list[int]]:
    """Iterative strongly-connected components, deterministic order."""
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    sccs: list[list[int]] = []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        work: list[tuple[int, int]] = [(root, 0)]
        while work:
            v, pi = work[-1]
            if pi == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack.add(v)
            advanced = False
            for j in range(pi, len(succ[v])):
                w = succ[v][j]
                if w not in index:
                    work[-1] = (v, j + 1)
                    work.append((w, 0))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                sccs.append(comp)
    return sccs


def check_program(program: Program, infer_branch: bool = False) -> dict:
    """Run the whole pipeline and return the report as plain data."""
    return Checker(program, infer_branch=infer_branch).run()
