"""Unfair simulation, the weight system, and fair subtyping."""

import random

import pytest

from fairchk import schema
from fairchk.subtyping import (diverges, fair_subtype, render_weight, simulate,
                               solve_weights, subtype_weight, unfair_subtype)
from fairchk.surface import load
from fairchk.types import INF, TypeTable

from conftest import load_corpus
from gen import intern_spec, mutated_pair, random_spec, supertype_of, unfold_root
from oracles import weight_agrees_with_search


def test_unfair_examples(bsc):
    table = bsc.table
    assert unfair_subtype(table, bsc.typedefs["SB"], bsc.typedefs["SBi"])
    e = table.add(("end", "!"))
    d = table.add(("end", "?"))
    assert not unfair_subtype(table, e, d)


def test_unfair_allows_wider_input():
    program = load("type SS = ?{add: SS, pay: end?}\n"
                   "type SS2 = ?{add: SS2, pay: end?, search: end?}\n"
                   "Main() = done")
    assert unfair_subtype(program.table, program.typedefs["SS"], program.typedefs["SS2"])


def test_unfair_rejects_missing_input_branch():
    program = load("type A = ?{add: end?, pay: end?}\n"
                   "type B = ?{add: end?}\n"
                   "Main() = done")
    sim = simulate(program.table, program.typedefs["A"], program.typedefs["B"])
    assert not sim.holds
    assert sim.failure[1] == "supertype misses an input branch of the subtype"


def test_unfair_rejects_extra_output_branch():
    program = load("type A = !{add: end!}\n"
                   "type B = !{add: end!, pay: end!}\n"
                   "Main() = done")
    sim = simulate(program.table, program.typedefs["A"], program.typedefs["B"])
    assert not sim.holds
    assert sim.failure[1] == "supertype outputs a label the subtype lacks"


def test_weight_pinned_values(bsc):
    table = bsc.table
    assert subtype_weight(table, bsc.typedefs["SB"], bsc.typedefs["SB'"]) == 1
    assert subtype_weight(table, bsc.typedefs["SB"], bsc.typedefs["SB"]) == 0
    assert subtype_weight(table, bsc.typedefs["SB"], bsc.typedefs["SBi"]) == INF


def test_weight_requires_simulation():
    table = TypeTable()
    e = table.add(("end", "!"))
    d = table.add(("end", "?"))
    with pytest.raises(ValueError):
        subtype_weight(table, e, d)


def test_fair_verdicts(bsc, slot):
    good = fair_subtype(bsc.table, bsc.typedefs["SB"], bsc.typedefs["SB'"])
    assert good.holds and good.weight == 1 and good.failure is None

    bad = fair_subtype(bsc.table, bsc.typedefs["SB"], bsc.typedefs["SBi"])
    assert not bad.holds and bad.failure[0] == "diverges"

    slot_bad = fair_subtype(slot.table, slot.typedefs["S"], slot.typedefs["T"])
    assert not slot_bad.holds and slot_bad.failure[0] == "diverges"
    assert unfair_subtype(slot.table, slot.typedefs["S"], slot.typedefs["T"])


def test_diverges_examples(bsc):
    assert diverges(bsc.table, bsc.typedefs["SB"], bsc.typedefs["SBi"])
    assert not diverges(bsc.table, bsc.typedefs["SB"], bsc.typedefs["SB"])


def test_failure_kind_not_simulated():
    table = TypeTable()
    e = table.add(("end", "!"))
    d = table.add(("end", "?"))
    v = fair_subtype(table, e, d)
    assert not v.holds and v.failure[0] == "not-simulated"
    assert v.failure[2] == "polarity mismatch"


def test_witness_starts_at_root_and_is_premise_closed(bsc):
    sim = simulate(bsc.table, bsc.typedefs["SB"], bsc.typedefs["SB'"])
    assert sim.holds
    assert sim.witness[0] == (bsc.typedefs["SB"], bsc.typedefs["SB'"])
    assert len(sim.witness) == len(set(sim.witness))


def test_deep_divergence_sinks_the_root():
    # the root weight alone would be finite through the pay branch; the
    # diverging add pair must still disqualify the refinement
    program = load("type A = !{add: L, pay: end!}\n"
                   "type L = !{add: L, pay: end!}\n"
                   "type B = !{add: Li, pay: end!}\n"
                   "type Li = !{add: Li}\n"
                   "Main() = done")
    table = program.table
    v = fair_subtype(table, program.typedefs["A"], program.typedefs["B"])
    assert not v.holds and v.failure[0] == "diverges"
    assert v.failure[1] == (program.typedefs["L"], program.typedefs["Li"])


def test_reflexivity_random():
    rnd = random.Random(41)
    for _ in range(100):
        table = TypeTable()
        t = intern_spec(table, random_spec(rnd))
        v = fair_subtype(table, t, t)
        assert v.holds and v.weight == 0


def test_unfolding_has_weight_zero():
    rnd = random.Random(42)
    for _ in range(50):
        table = TypeTable()
        spec = random_spec(rnd)
        a = intern_spec(table, spec)
        b = intern_spec(table, unfold_root(spec))
        v = fair_subtype(table, a, b)
        assert v.holds and v.weight == 0


def test_fair_implies_unfair():
    rnd = random.Random(43)
    for _ in range(150):
        table = TypeTable()
        sub, sup = mutated_pair(rnd)
        a, b = intern_spec(table, sub), intern_spec(table, sup)
        if fair_subtype(table, a, b).holds:
            assert unfair_subtype(table, a, b)


def test_weights_stay_under_cutoff():
    # every finite component of the least solution is at most K
    rnd = random.Random(44)
    holding = 0
    for _ in range(150):
        table = TypeTable()
        sub, sup = mutated_pair(rnd)
        a, b = intern_spec(table, sub), intern_spec(table, sup)
        sim = simulate(table, a, b)
        if not sim.holds:
            continue
        rk = solve_weights(table, sim.witness)
        for w in rk.values():
            assert w == INF or w <= len(sim.witness)
        holding += 1
    assert holding > 20


def test_transitivity_small():
    rnd = random.Random(45)
    for _ in range(60):
        spec0 = random_spec(rnd, 5)
        spec1 = supertype_of(spec0, rnd)
        spec2 = supertype_of(spec1, rnd)
        table = TypeTable()
        t0 = intern_spec(table, spec0)
        t1 = intern_spec(table, spec1)
        t2 = intern_spec(table, spec2)
        assert fair_subtype(table, t0, t1).holds
        assert fair_subtype(table, t1, t2).holds
        assert fair_subtype(table, t0, t2).holds


def test_weight_search_oracle_small():
    rnd = random.Random(46)
    checked = 0
    while checked < 25:
        table = TypeTable()
        sub, sup = mutated_pair(rnd)
        a, b = intern_spec(table, sub), intern_spec(table, sup)
        if not simulate(table, a, b).holds:
            continue
        assert weight_agrees_with_search(table, a, b)
        checked += 1


def test_render_weight():
    assert render_weight(0) == 0
    assert render_weight(3) == 3
    assert render_weight(INF) == "inf"


def test_verdict_json_matches_schema(bsc):
    table = bsc.table
    for pair in [("SB", "SB'"), ("SB", "SBi")]:
        v = fair_subtype(table, bsc.typedefs[pair[0]], bsc.typedefs[pair[1]])
        schema.validate(v.to_json(table), schema.SUBTYPE)
    good = fair_subtype(table, bsc.typedefs["SB"], bsc.typedefs["SB'"]).to_json(table)
    assert good == {"holds": True, "weight": 1, "simulationSize": 3}
