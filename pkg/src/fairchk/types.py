"""Regular session-type trees: interning, duality, equivalence, boundedness.

A session type is a possibly infinite but regular tree. We keep every tree as
a rooted subgraph of a TypeTable, where each node is one of

    ("end", pol)                     terminated endpoint, pol in {"!", "?"}
    ("tags", pol, ((label, id), …))  internal (!) or external (?) label choice
    ("chan", pol, payload, cont)     channel delegation prefix

Ids are plain ints into the table. Equal ids always denote equal trees; the
converse is not guaranteed, so semantic comparisons go through `equiv`.
"""

from __future__ import annotations

from typing import Iterable, Optional

OUT = "!"
IN = "?"

INF = float("inf")


def co(pol: str) -> str:
    """Dual polarity."""
    return IN if pol == OUT else OUT


class TypeTable:
    """Append-only store of session-type nodes.

    Construction happens in two ways: `add` hash-conses a complete node,
    while `placeholder`/`fill` support cyclic definitions (allocate first,
    fill once the children exist). After resolution the table is treated as
    immutable except for `add`, which later phases use to materialize
    singleton output nodes; hash-consing keeps that bounded.
    """

    def __init__(self) -> None:
        self.nodes: list[Optional[tuple]] = []
        self.name_hint: dict[int, str] = {}
        self._cons: dict[tuple, int] = {}

    def placeholder(self, hint: str | None = None) -> int:
        self.nodes.append(None)
        i = len(self.nodes) - 1
        if hint:
            self.name_hint[i] = hint
        return i

    def fill(self, i: int, node: tuple) -> None:
        if self.nodes[i] is not None:
            raise ValueError(f"node {i} already filled")
        self.nodes[i] = node

    def add(self, node: tuple) -> int:
        got = self._cons.get(node)
        if got is not None:
            return got
        self.nodes.append(node)
        i = len(self.nodes) - 1
        self._cons[node] = i
        return i

    def node(self, i: int) -> tuple:
        n = self.nodes[i]
        if n is None:
            raise ValueError(f"node {i} never filled")
        return n

    def kind(self, i: int) -> str:
        return self.node(i)[0]

    def pol(self, i: int) -> str:
        return self.node(i)[1]

    def branches(self, i: int) -> dict[str, int]:
        """Label → child id of a tags node, insertion order preserved."""
        n = self.node(i)
        assert n[0] == "tags"
        return dict(n[2])

    def labels(self, i: int) -> list[str]:
        """Sorted labels of a tags node; semantic iteration order."""
        return sorted(self.branches(i))

    def children(self, i: int) -> list[int]:
        n = self.node(i)
        if n[0] == "end":
            return []
        if n[0] == "tags":
            return [c for _, c in n[2]]
        return [n[2], n[3]]

    def reachable(self, i: int) -> set[int]:
        seen = {i}
        todo = [i]
        while todo:
            for c in self.children(todo.pop()):
                if c not in seen:
                    seen.add(c)
                    todo.append(c)
        return seen

    def singleton(self, i: int, label: str) -> int:
        """The output node !{label: S} obtained by picking one branch of i."""
        n = self.node(i)
        assert n[0] == "tags" and n[1] == OUT
        child = dict(n[2])[label]
        return self.add(("tags", OUT, ((label, child),)))

    # Rendering is for diagnostics and the table dump. Cycles are cut by
    # emitting the name hint (or a generated one) at the second visit.

    def render(self, i: int, under: frozenset[int] = frozenset()) -> str:
        if i in under:
            return self._name(i)
        n = self.node(i)
        if n[0] == "end":
            return f"end{n[1]}"
        under = under | {i}
        if n[0] == "tags":
            inner = ", ".join(f"{l}: {self.render(c, under)}" for l, c in n[2])
            return f"{n[1]}{{{inner}}}"
        return f"{n[1]}({self.render(n[2], under)}).{self.render(n[3], under)}"

    def _name(self, i: int) -> str:
        return self.name_hint.get(i, f"t{i}")

    def dump(self) -> str:
        """Every filled node as a `type` equation in the surface grammar."""
        lines = []
        for i, n in enumerate(self.nodes):
            if n is None:
                continue
            body = self._render_shallow(n)
            lines.append(f"type {self._name(i)} = {body}")
        return "\n".join(lines)

    def _render_shallow(self, n: tuple) -> str:
        if n[0] == "end":
            return f"end{n[1]}"
        if n[0] == "tags":
            inner = ", ".join(f"{l}: {self._name(c)}" for l, c in n[2])
            return f"{n[1]}{{{inner}}}"
        return f"{n[1]}({self._name(n[2])}).{self._name(n[3])}"


def dual(table: TypeTable, i: int) -> int:
    """Flip every polarity along the carrier; payloads stay as they are.

    The exchanged channel in a delegation is the same object at both ends,
    so only the spine of the protocol is dualized.
    """
    memo: dict[int, int] = {}

    def go(j: int) -> int:
        if j in memo:
            return memo[j]
        n = table.node(j)
        out = table.placeholder(hint="co_" + table._name(j))
        memo[j] = out
        if n[0] == "end":
            filled = ("end", co(n[1]))
        elif n[0] == "tags":
            filled = ("tags", co(n[1]), tuple((l, go(c)) for l, c in n[2]))
        else:
            filled = ("chan", co(n[1]), n[2], go(n[3]))
        table.fill(out, filled)
        return out

    return go(i)


def plus(table: TypeTable, a: int, b: int) -> Optional[int]:
    """Label-union of two same-polarity choices with disjoint labels.

    Returns None when the merge is undefined (polarity mismatch, a non-tags
    operand, or overlapping labels).
    """
    na, nb = table.node(a), table.node(b)
    if na[0] != "tags" or nb[0] != "tags" or na[1] != nb[1]:
        return None
    la = {l for l, _ in na[2]}
    if la & {l for l, _ in nb[2]}:
        return None
    return table.add(("tags", na[1], na[2] + nb[2]))


def equiv(table: TypeTable, a: int, b: int) -> bool:
    """Tree equality, decided as a bisimulation over the reachable product."""
    seen: set[tuple[int, int]] = set()
    todo = [(a, b)]
    while todo:
        i, j = todo.pop()
        if i == j or (i, j) in seen:
            continue
        seen.add((i, j))
        ni, nj = table.node(i), table.node(j)
        if ni[0] != nj[0] or ni[1] != nj[1]:
            return False
        if ni[0] == "end":
            continue
        if ni[0] == "tags":
            bi, bj = dict(ni[2]), dict(nj[2])
            if set(bi) != set(bj):
                return False
            todo.extend((bi[l], bj[l]) for l in bi)
        else:
            todo.append((ni[2], nj[2]))
            todo.append((ni[3], nj[3]))
    return True


def is_bounded(table: TypeTable, i: int) -> bool:
    """True when every subtree can still reach a terminated endpoint."""
    reach = table.reachable(i)
    good = {j for j in reach if table.kind(j) == "end"}
    grew = True
    while grew:
        grew = False
        for j in reach - good:
            if any(c in good for c in table.children(j)):
                good.add(j)
                grew = True
    return reach <= good


def reachable_pairs(table: TypeTable, a: int, b: int) -> set[tuple[int, int]]:
    """Product closure under matched descent.

    Tags nodes descend through shared labels, chan nodes through both the
    payload pair and the continuation pair. This is the carrier on which
    subtyping simulations and weight systems are solved.
    """
    seen = {(a, b)}
    todo = [(a, b)]
    while todo:
        i, j = todo.pop()
        ni, nj = table.node(i), table.node(j)
        nxt: list[tuple[int, int]] = []
        if ni[0] == "tags" and nj[0] == "tags":
            bi, bj = dict(ni[2]), dict(nj[2])
            nxt = [(bi[l], bj[l]) for l in sorted(set(bi) & set(bj))]
        elif ni[0] == "chan" and nj[0] == "chan":
            nxt = [(ni[2], nj[2]), (ni[3], nj[3])]
        for p in nxt:
            if p not in seen:
                seen.add(p)
                todo.append(p)
    return seen
