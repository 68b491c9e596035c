"""Random generators shared by the property tests.

Regular types are built as "specs": plain lists of node tuples whose child
references are list indices. A spec can be interned into any TypeTable and
mutated structurally, which is how the subtyping chains are produced.
"""

import random

from fairchk.subtyping import fair_subtype, simulate
from fairchk.surface import (Call, Cast, ChanIn, ChanOut, Choice, Close, Done,
                             NewSession, ProcDef, Program, SourceProgram, Span,
                             TagComm, TChan, TEnd, TName, TTags, Wait)
from fairchk.types import TypeTable

LABELS = ["a", "b", "c", "d"]
IDENTS = ["x", "y", "z", "w"]
DEFS = ["P0", "P1", "P2"]


# -- regular types as index specs ---------------------------------------------

def random_spec(rnd: random.Random, max_nodes: int = 8) -> list:
    n = rnd.randint(1, max_nodes)
    spec = []
    for _ in range(n):
        roll = rnd.random()
        if roll < 0.35 or n == 1:
            spec.append(("end", rnd.choice("!?")))
        elif roll < 0.9:
            k = rnd.randint(1, 3)
            labels = sorted(rnd.sample(LABELS, k))
            spec.append(("tags", rnd.choice("!?"),
                         tuple((l, rnd.randrange(n)) for l in labels)))
        else:
            spec.append(("chan", rnd.choice("!?"),
                         rnd.randrange(n), rnd.randrange(n)))
    return spec


def intern_spec(table: TypeTable, spec: list, root: int = 0) -> int:
    ids = [table.placeholder() for _ in spec]
    for i, node in enumerate(spec):
        if node[0] == "end":
            table.fill(ids[i], node)
        elif node[0] == "tags":
            table.fill(ids[i], ("tags", node[1],
                                tuple((l, ids[j]) for l, j in node[2])))
        else:
            table.fill(ids[i], ("chan", node[1], ids[node[2]], ids[node[3]]))
    return ids[root]


def spec_children(node: tuple) -> list[int]:
    if node[0] == "tags":
        return [j for _, j in node[2]]
    if node[0] == "chan":
        return [node[2], node[3]]
    return []


def spec_reachable(spec: list, root: int = 0) -> set[int]:
    seen = {root}
    todo = [root]
    while todo:
        for j in spec_children(spec[todo.pop()]):
            if j not in seen:
                seen.add(j)
                todo.append(j)
    return seen


# -- supertype-preserving mutations -------------------------------------------

def widen_input(spec: list, rnd: random.Random):
    """Add a fresh branch to some reachable external choice."""
    targets = [i for i in spec_reachable(spec)
               if spec[i][0] == "tags" and spec[i][1] == "?"
               and len(spec[i][2]) < len(LABELS)]
    if not targets:
        return None
    i = rnd.choice(targets)
    used = {l for l, _ in spec[i][2]}
    label = rnd.choice([l for l in LABELS if l not in used])
    out = list(spec)
    out.append(("end", rnd.choice("!?")))
    out[i] = ("tags", "?", tuple(sorted(spec[i][2] + ((label, len(spec)),))))
    return out


def narrow_output(spec: list, rnd: random.Random):
    """Drop one branch of some reachable internal choice."""
    targets = [i for i in spec_reachable(spec)
               if spec[i][0] == "tags" and spec[i][1] == "!"
               and len(spec[i][2]) >= 2]
    if not targets:
        return None
    i = rnd.choice(targets)
    drop = rnd.randrange(len(spec[i][2]))
    out = list(spec)
    out[i] = ("tags", "!", spec[i][2][:drop] + spec[i][2][drop + 1:])
    return out


def unfold_root(spec: list) -> list:
    """Duplicate the root node; same tree, different graph."""
    def shift(node):
        if node[0] == "end":
            return node
        if node[0] == "tags":
            return ("tags", node[1], tuple((l, j + 1) for l, j in node[2]))
        return ("chan", node[1], node[2] + 1, node[3] + 1)

    return [shift(spec[0])] + [shift(n) for n in spec]


def supertype_of(spec: list, rnd: random.Random, tries: int = 6) -> list:
    """A mutated spec verified to be a fair supertype of `spec`.

    Dropping an output branch can cut off the only terminating path, so
    each candidate is checked and the unfolded root (weight 0) is the
    fallback when no checked mutation comes through.
    """
    for _ in range(tries):
        op = rnd.choice((widen_input, narrow_output))
        cand = op(spec, rnd)
        if cand is None:
            continue
        table = TypeTable()
        if fair_subtype(table, intern_spec(table, spec),
                        intern_spec(table, cand)).holds:
            return cand
    return unfold_root(spec)


def mutated_pair(rnd: random.Random, max_nodes: int = 5):
    """(sub, sup) specs where sup simulates sub but may diverge.

    Mutations are not checked for fairness, so the weight-oracle tests see
    diverging pairs too. They can break the plain simulation though, when
    the edited node doubles as a channel payload, so candidates are
    retried until the simulation itself holds.
    """
    for _ in range(20):
        sub = random_spec(rnd, max_nodes)
        sup = sub
        for _ in range(rnd.randint(1, 2)):
            op = rnd.choice((widen_input, narrow_output,
                             lambda s, _r: unfold_root(s)))
            cand = op(sup, rnd)
            if cand is not None:
                sup = cand
        table = TypeTable()
        if simulate(table, intern_spec(table, sub),
                    intern_spec(table, sup)).holds:
            return sub, sup
    sub = random_spec(rnd, max_nodes)
    return sub, unfold_root(sub)


# -- syntax-level program generator (for parse/render round trips) ------------

def random_type_expr(rnd: random.Random, depth: int = 2, names: tuple = ()):
    roll = rnd.random()
    if depth == 0 or roll < 0.4:
        if names and roll < 0.1:
            return TName(rnd.choice(names))
        return TEnd(rnd.choice("!?"))
    if roll < 0.85:
        labels = rnd.sample(LABELS, rnd.randint(1, 3))
        return TTags(rnd.choice("!?"),
                     [(l, random_type_expr(rnd, depth - 1, names)) for l in labels])
    return TChan(rnd.choice("!?"),
                 random_type_expr(rnd, depth - 1, names),
                 random_type_expr(rnd, depth - 1, names))


def random_proc_expr(rnd: random.Random, depth: int = 3):
    roll = rnd.random()
    if depth == 0 or roll < 0.25:
        leaf = rnd.randrange(3)
        if leaf == 0:
            return Done()
        if leaf == 1:
            return Close(rnd.choice(IDENTS))
        return Call(rnd.choice(DEFS), rnd.sample(IDENTS, rnd.randint(0, 2)))
    d = depth - 1
    kind = rnd.randrange(7)
    if kind == 0:
        return Wait(rnd.choice(IDENTS), random_proc_expr(rnd, d))
    if kind == 1:
        labels = rnd.sample(LABELS, rnd.randint(1, 3))
        return TagComm(rnd.choice(IDENTS), rnd.choice("!?"),
                       [(l, random_proc_expr(rnd, d)) for l in labels])
    if kind == 2:
        chan = rnd.choice(IDENTS)
        other = rnd.choice([v for v in IDENTS if v != chan])
        return ChanOut(chan, other, random_proc_expr(rnd, d))
    if kind == 3:
        chan = rnd.choice(IDENTS)
        var = rnd.choice([v for v in IDENTS if v != chan])
        return ChanIn(chan, var, random_type_expr(rnd, 1), random_proc_expr(rnd, d))
    if kind == 4:
        return Choice(rnd.randint(1, 2),
                      random_proc_expr(rnd, d), random_proc_expr(rnd, d))
    if kind == 5:
        return NewSession(rnd.choice(IDENTS), random_type_expr(rnd, 1),
                          random_type_expr(rnd, 1),
                          random_proc_expr(rnd, d), random_proc_expr(rnd, d))
    ann = rnd.choice([None, rnd.randint(0, 3)])
    return Cast(rnd.choice(IDENTS), random_type_expr(rnd, 1), ann,
                random_proc_expr(rnd, d))


def random_source_program(rnd: random.Random) -> SourceProgram:
    typedefs = []
    names: list[str] = []
    for i in range(rnd.randint(0, 2)):
        typedefs.append((f"T{i}", random_type_expr(rnd, 2, tuple(names)), Span(0, 0)))
        names.append(f"T{i}")
    procdefs = []
    for name in DEFS[: rnd.randint(1, 3)]:
        params = [(v, random_type_expr(rnd, 1, tuple(names)))
                  for v in rnd.sample(IDENTS, rnd.randint(0, 2))]
        rank = rnd.choice([None, None, None, rnd.randint(0, 4)])
        procdefs.append(ProcDef(name, params, rank, random_proc_expr(rnd, 3)))
    return SourceProgram(typedefs, procdefs)


# -- structural programs for the rank equations --------------------------------

RANK_DEFS = ["A0", "A1", "A2"]


def random_rank_program(rnd: random.Random) -> Program:
    """A resolved-enough Program for minRank and action-bounds tests.

    The bodies are never type-checked, so channel names and annotations
    are placeholders; only the tree structure and call graph matter.
    """
    def body(depth: int):
        roll = rnd.random()
        if depth == 0 or roll < 0.3:
            leaf = rnd.randrange(3)
            if leaf == 0:
                return Done()
            if leaf == 1:
                return Close("x")
            return Call(rnd.choice(RANK_DEFS), [])
        d = depth - 1
        kind = rnd.randrange(5)
        if kind == 0:
            return Wait("x", body(d))
        if kind == 1:
            labels = rnd.sample(LABELS, rnd.randint(1, 3))
            return TagComm("x", rnd.choice("!?"), [(l, body(d)) for l in labels])
        if kind == 2:
            return Choice(rnd.randint(1, 2), body(d), body(d))
        if kind == 3:
            return NewSession("y", TEnd("!"), TEnd("?"), body(d), body(d))
        return Cast("x", TEnd("!"), None, body(d))

    procs = {n: ProcDef(n, [], None, body(3)) for n in RANK_DEFS}
    return Program(TypeTable(), {}, procs)
