"""Subtyping: the safety-preserving simulation and the liveness refinement.

`unfair_subtype` decides the classic simulation (inputs covariant, outputs
contravariant, channel payloads invariant). It preserves safety but lets a
supertype drop the very branches a peer needs to terminate, so on top of it
we solve a weight system: each simulation pair gets the least value rk
satisfying

    end pairs                      rk = 0
    input pairs                    rk = max over shared branches
    output pairs, strict subset    rk = 1 + min over supertype branches
    output pairs, equal labels     rk = min(1 + min over branches,
                                            max over branches)
    channel pairs                  rk = rk of the continuations

A finite rk bounds how many strict narrowings the supertype can force on
the way to termination; rk = ∞ on any pair means the refinement diverges
and fair subtyping fails.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .types import INF, OUT, TypeTable, equiv, reachable_pairs

Pair = tuple[int, int]


def _violation(table: TypeTable, u: int, v: int) -> Optional[str]:
    """Reason this pair breaks the simulation shape rules, or None."""
    nu, nv = table.node(u), table.node(v)
    if nu[0] != nv[0]:
        return "shape mismatch"
    if nu[1] != nv[1]:
        return "polarity mismatch"
    if nu[0] == "tags":
        lu, lv = set(dict(nu[2])), set(dict(nv[2]))
        if nu[1] == OUT:
            if not lv <= lu:
                return "supertype outputs a label the subtype lacks"
        elif not lu <= lv:
            return "supertype misses an input branch of the subtype"
    elif nu[0] == "chan" and not equiv(table, nu[2], nv[2]):
        return "channel payload types differ"
    return None


def _premises(table: TypeTable, u: int, v: int) -> list[Pair]:
    """Premise pairs of a shape-valid simulation pair, in a fixed order."""
    nu, nv = table.node(u), table.node(v)
    if nu[0] == "tags":
        bu, bv = dict(nu[2]), dict(nv[2])
        return [(bu[l], bv[l]) for l in sorted(set(bu) & set(bv))]
    if nu[0] == "chan":
        return [(nu[3], nv[3])]
    return []


@dataclass
class Simulation:
    holds: bool
    # pairs of the witness derivation, root first, deterministic order
    witness: list[Pair]
    # shape-violating pair that undermines the root, with its reason
    failure: Optional[tuple[Pair, str]]


def simulate(table: TypeTable, s: int, t: int) -> Simulation:
    """Greatest fixpoint of the simulation rules over reachable pairs."""
    carrier = reachable_pairs(table, s, t)
    reason = {p: _violation(table, *p) for p in carrier}
    alive = {p for p in carrier if reason[p] is None}

    changed = True
    while changed:
        changed = False
        for p in list(alive):
            if any(q not in alive for q in _premises(table, *p)):
                alive.discard(p)
                changed = True

    root = (s, t)
    if root in alive:
        witness = _closure(table, root, alive)
        return Simulation(True, witness, None)

    # Walk premise edges from the root through shape-valid pairs; the first
    # shape violation found is the root cause of the removal cascade.
    seen = {root}
    queue = [root]
    while queue:
        p = queue.pop(0)
        if reason[p] is not None:
            return Simulation(False, [], (p, reason[p]))
        for q in _premises(table, *p):
            if q not in seen:
                seen.add(q)
                queue.append(q)
    raise AssertionError("root removed without a shape violation")


def _closure(table: TypeTable, root: Pair, alive: set[Pair]) -> list[Pair]:
    order = [root]
    seen = {root}
    i = 0
    while i < len(order):
        p = order[i]
        i += 1
        for q in _premises(table, *p):
            if q in alive and q not in seen:
                seen.add(q)
                order.append(q)
    return order


def unfair_subtype(table: TypeTable, s: int, t: int) -> bool:
    return simulate(table, s, t).holds


def solve_weights(table: TypeTable, witness: list[Pair]) -> dict[Pair, int | float]:
    """Least solution of the weight system, restricted to the witness.

    Kleene iteration from the all-zero assignment. Finite components of the
    least solution stay within K = number of pairs, so anything that climbs
    past K is clamped to ∞ and the iteration continues to a fixpoint.
    """
    pairs = set(witness)
    rk: dict[Pair, int | float] = {p: 0 for p in witness}
    cutoff = len(witness)

    def evaluate(p: Pair) -> int | float:
        u, v = p
        nu, nv = table.node(u), table.node(v)
        if nu[0] == "end":
            return 0
        if nu[0] == "chan":
            return rk[(nu[3], nv[3])]
        prem = [rk[q] for q in _premises(table, u, v) if q in pairs]
        if nu[1] != OUT:
            return max(prem)
        if set(dict(nv[2])) < set(dict(nu[2])):
            return 1 + min(prem)
        return min(1 + min(prem), max(prem))

    while True:
        nxt = {}
        for p in witness:
            w = evaluate(p)
            nxt[p] = INF if w > cutoff else w
        if nxt == rk:
            return rk
        rk = nxt


def subtype_weight(table: TypeTable, s: int, t: int) -> int | float:
    sim = simulate(table, s, t)
    if not sim.holds:
        raise ValueError("subtype_weight requires the simulation to hold")
    return solve_weights(table, sim.witness)[(s, t)]


@dataclass
class SubtypeVerdict:
    holds: bool
    weight: int | float
    failure: Optional[tuple[str, Pair, str]]  # (kind, pair, detail)
    simulation_size: int

    def to_json(self, table: TypeTable) -> dict:
        out: dict = {
            "holds": self.holds,
            "weight": render_weight(self.weight),
            "simulationSize": self.simulation_size,
        }
        if self.failure is not None:
            kind, (u, v), detail = self.failure
            out["offendingPair"] = [table.render(u), table.render(v)]
            out["failure"] = kind
            out["detail"] = detail
        return out


def render_weight(w: int | float) -> int | str:
    return "inf" if w == INF else int(w)


def fair_subtype(table: TypeTable, s: int, t: int) -> SubtypeVerdict:
    """The liveness-preserving refinement: simulation plus finite weights.

    Every pair of the witness must carry a finite weight; an infinite one
    elsewhere in the derivation sinks the root even when the root's own
    equation would come out finite through a min.
    """
    sim = simulate(table, s, t)
    if not sim.holds:
        pair, why = sim.failure  # type: ignore[misc]
        return SubtypeVerdict(False, INF, ("not-simulated", pair, why), 0)
    rk = solve_weights(table, sim.witness)
    for p in sim.witness:
        if rk[p] == INF:
            return SubtypeVerdict(False, INF, ("diverges", p, "weight is infinite"),
                                  len(sim.witness))
    return SubtypeVerdict(True, rk[(s, t)], None, len(sim.witness))


def diverges(table: TypeTable, s: int, t: int) -> bool:
    """Simulation holds but the refinement can be postponed forever."""
    sim = simulate(table, s, t)
    return sim.holds and solve_weights(table, sim.witness)[(s, t)] == INF
