"""Type-level transition system: configurations, compatibility, session rank.

Two endpoint types running against each other form a configuration. The
left or right side may internally commit to one branch of an output choice
(a pick, silent), and the two sides synchronize on complementary visible
actions: matching tag labels, matching signals, or channel payloads equal
up to unfolding. Compatibility asks that every reachable configuration can
still reach a terminated pair; the session rank measures how many
synchronizations the shortest terminating schedule needs.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .types import INF, OUT, TypeTable, co, equiv

Config = tuple[int, int]

TAU = ("tau",)


def type_transitions(table: TypeTable, i: int) -> list[tuple[tuple, int]]:
    """Raw transitions of one endpoint type.

    Output choices first commit silently to a singleton and only then expose
    the tag action, so a multi-branch output has no visible transitions.
    """
    n = table.node(i)
    if n[0] == "end":
        return []
    if n[0] == "chan":
        return [(("chan", n[1], n[2]), n[3])]
    out: list[tuple[tuple, int]] = []
    if n[1] == OUT:
        for label, _ in n[2]:
            out.append((TAU, table.singleton(i, label)))
        if len(n[2]) == 1:
            label, child = n[2][0]
            out.append((("tag", OUT, label), child))
    else:
        for label, child in n[2]:
            out.append((("tag", "?", label), child))
    return out


def _picks(table: TypeTable, i: int) -> list[int]:
    """Silent pick successors, with the singleton self-loop contracted."""
    n = table.node(i)
    if n[0] == "tags" and n[1] == OUT and len(n[2]) > 1:
        return [table.singleton(i, label) for label in table.labels(i)]
    return []


def _visible(table: TypeTable, i: int) -> list[tuple[tuple, int]]:
    n = table.node(i)
    if n[0] == "chan":
        return [(("chan", n[1], n[2]), n[3])]
    if n[0] == "tags":
        if n[1] == OUT and len(n[2]) == 1:
            label, child = n[2][0]
            return [(("tag", OUT, label), child)]
        if n[1] == "?":
            return [(("tag", "?", label), child) for label, child in n[2]]
    return []


@dataclass
class ConfigGraph:
    root: Config
    nodes: list[Config]
    tau: dict[Config, list[Config]]
    sync: dict[Config, list[tuple[str, Config]]]
    success: set[Config] = field(default_factory=set)

    def successors(self, c: Config) -> list[Config]:
        return self.tau[c] + [d for _, d in self.sync[c]]


def build_config_graph(table: TypeTable, s: int, t: int) -> ConfigGraph:
    root = (s, t)
    nodes: list[Config] = [root]
    seen = {root}
    tau: dict[Config, list[Config]] = {}
    sync: dict[Config, list[tuple[str, Config]]] = {}
    success: set[Config] = set()
    queue = deque([root])
    while queue:
        cfg = queue.popleft()
        a, b = cfg
        tau[cfg] = []
        sync[cfg] = []
        na, nb = table.node(a), table.node(b)
        if na[0] == "end" and nb[0] == "end" and na[1] == co(nb[1]):
            success.add(cfg)
        for a2 in _picks(table, a):
            tau[cfg].append((a2, b))
        for b2 in _picks(table, b):
            tau[cfg].append((a, b2))
        for (la, a2) in _visible(table, a):
            for (lb, b2) in _visible(table, b):
                if la[0] != lb[0] or la[1] != co(lb[1]):
                    continue
                if la[0] == "tag" and la[2] == lb[2]:
                    sync[cfg].append((la[2], (a2, b2)))
                elif la[0] == "chan" and equiv(table, la[2], lb[2]):
                    detail = "(" + table.render(la[2]) + ")"
                    sync[cfg].append((detail, (a2, b2)))
        for nxt in tau[cfg] + [d for _, d in sync[cfg]]:
            if nxt not in seen:
                seen.add(nxt)
                nodes.append(nxt)
                queue.append(nxt)
    return ConfigGraph(root, nodes, tau, sync, success)


def compatible(table: TypeTable, s: int, t: int) -> bool:
    """Every reachable configuration must still be able to terminate."""
    g = build_config_graph(table, s, t)
    return _all_reach_success(g)


def _all_reach_success(g: ConfigGraph) -> bool:
    rev: dict[Config, list[Config]] = {c: [] for c in g.nodes}
    for c in g.nodes:
        for d in g.successors(c):
            rev[d].append(c)
    good = set(g.success)
    queue = deque(good)
    while queue:
        c = queue.popleft()
        for p in rev[c]:
            if p not in good:
                good.add(p)
                queue.append(p)
    return len(good) == len(g.nodes)


def session_rank(table: TypeTable, s: int, t: int) -> int | float:
    """One plus the synchronization length of the shortest terminating run.

    Picks are free, synchronizations cost one; a 0-1 BFS over the config
    graph finds the cheapest path into the success set.
    """
    g = build_config_graph(table, s, t)
    dist = {g.root: 0}
    queue: deque[Config] = deque([g.root])
    settled: set[Config] = set()
    while queue:
        c = queue.popleft()
        if c in settled:
            continue
        settled.add(c)
        if c in g.success:
            return 1 + dist[c]
        for d in g.tau[c]:
            if dist[c] < dist.get(d, INF):
                dist[d] = dist[c]
                queue.appendleft(d)
        for _, d in g.sync[c]:
            if dist[c] + 1 < dist.get(d, INF):
                dist[d] = dist[c] + 1
                queue.append(d)
    return INF


def rank_compatibility_agreement(table: TypeTable, s: int, t: int) -> dict:
    """Diagnostic cross-check: a compatible pair must have a finite rank."""
    comp = compatible(table, s, t)
    rank = session_rank(table, s, t)
    return {
        "compatible": comp,
        "rank": rank,
        "consistent": (not comp) or rank < INF,
    }


def to_dot(table: TypeTable, g: ConfigGraph) -> str:
    """GraphViz rendering; success configurations are double-circled."""
    ids = {c: f"n{i}" for i, c in enumerate(g.nodes)}

    def esc(s: str) -> str:
        return s.replace("\\", "\\\\").replace('"', '\\"')

    lines = ["digraph config {", "  rankdir=LR;"]
    for c in g.nodes:
        label = esc(f"{table.render(c[0])} # {table.render(c[1])}")
        shape = "doublecircle" if c in g.success else "ellipse"
        lines.append(f'  {ids[c]} [label="{label}", shape={shape}];')
    for c in g.nodes:
        for d in g.tau[c]:
            lines.append(f'  {ids[c]} -> {ids[d]} [label="pick", style=dashed];')
        for detail, d in g.sync[c]:
            lines.append(f'  {ids[c]} -> {ids[d]} [label="{esc(detail)}"];')
    lines.append("}")
    return "\n".join(lines)
