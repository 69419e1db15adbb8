"""One hand-executed case per transition rule and per future-function case."""

import pytest

from helpers import rand_process, seeded
from ttcc import engine, fd
from ttcc.dsl import parse, parse_process
from ttcc.engine import (
    DEFERRED, EAGER, QUIESCENT, Configuration, EngineOptions, PersistentVarPolicy,
    micro_step, observable_step, run, run_to_quiescence,
)
from ttcc.errors import InconsistentStore, StepBudgetExceeded, UnguardedRecursion
from ttcc.process import (
    NULL, Ask, Call, DefinitionTable, Local, Next, Par, Rep, Tell, future, next_,
)

P = fd.parse_constraint
PP = parse_process


def cfg(process, store="true"):
    if isinstance(process, str):
        process = PP(process)
    return Configuration(process, engine.DEFAULT_OPTIONS.store(P(store)))


def told_sets(trace):
    return [[str(c) for c in r.told] for r in trace]


# -- internal rules --------------------------------------------------------------


def test_r_tell():
    out = micro_step(cfg("tell(c = 1)", "d = 2"))
    assert out.process == NULL
    assert out.store.content == P("c = 1 & d = 2")


def test_r_ask_1():
    out = micro_step(cfg("when c = 1 do tell(e = 3)", "c = 1"))
    assert out.process == PP("tell(e = 3)")
    assert out.store.content == P("c = 1")


def test_r_ask_2():
    out = micro_step(cfg("when c = 1 do tell(e = 3)", "d = 2"))
    assert out.process == NULL
    assert out.store.content == P("d = 2")


def test_r_par_snapshot_and_conjunction():
    out = micro_step(cfg("tell(a = 1) || tell(b = 2) || next tell(z = 0)"))
    assert out.process == Par((NULL, NULL, PP("next tell(z = 0)")))
    assert out.store.content == P("a = 1 & b = 2")


def test_r_par_ask_races_tell_under_each_policy():
    prog = "tell(a = 1) || when a = 1 do tell(b = 1)"
    final, told = run_to_quiescence(cfg(prog), ask_policy=EAGER)
    assert final.store.content == P("a = 1")
    final, told = run_to_quiescence(cfg(prog), ask_policy=DEFERRED)
    assert final.store.content == P("a = 1 & b = 1")
    assert [str(t) for t in told] == ["a = 1", "b = 1"]


def test_r_loc():
    out = micro_step(cfg("local x, x = 1 in tell(y = x)"))
    assert out.process == Local(("x~1",), P("x~1 = 1 & y = x~1"), NULL)
    assert out.store.content == P("x~1 = 1 & y = x~1")
    assert micro_step(out) is QUIESCENT
    assert engine.hide_locals(out.store.content, out.store.domain) == P("y = 1")


def test_r_loc_hides_from_outside():
    # an outer x is untouched by the local one
    out = micro_step(cfg("local x in tell(x = 5) || tell(x = 6)"))
    assert out.store.consistent
    assert out.store.value_of("x") == 6


def test_r_per():
    out = micro_step(cfg("rep[3] tell(a = 1)"))
    assert out.process == Par((PP("tell(a = 1)"), Next(3, PP("rep[3] tell(a = 1)"))))
    assert out.store.content == fd.TRUE


def test_r_def():
    defs = DefinitionTable()
    defs.add("A", ("n",), PP("tell(x = n) || next A(4)"))
    out = micro_step(cfg(Call("A", (3,))), defs)
    assert out.process == Par((NULL, Next(1, Call("A", (4,)))))
    assert out.store.content == P("x = 3")


def test_r_obs():
    c0 = cfg("tell(a = 1) || next tell(b = 2)")
    nxt, rec = observable_step(c0, P("i = 7"))
    assert rec.quiescent_store == P("a = 1 & i = 7")
    assert rec.input == P("i = 7")
    assert [str(t) for t in rec.told] == ["a = 1"]
    assert rec.residual == Par((NULL, PP("tell(b = 2)")))
    assert nxt.process == PP("tell(b = 2)")
    assert nxt.store.content == fd.TRUE


def test_quiescent_cases():
    final, told = run_to_quiescence(cfg("0", "d = 1"))
    assert told == [] and final.store.content == P("d = 1")
    assert micro_step(cfg("next tell(a = 1)")) is QUIESCENT


# -- future function ---------------------------------------------------------------


def test_future_cases():
    p = PP("tell(a = 1)")
    assert future(Next(1, p)) == p
    assert future(Next(3, p)) == Next(2, p)
    assert future(Par((Next(1, p), Tell(P("c = 1"))))) == Par((p, NULL))
    assert future(Local(("x",), P("x = 1"), Next(1, p))) == Local(("x",), P("x = 1"), p)
    assert future(Ask(P("a = 1"), p)) == NULL
    assert future(Rep(2, p)) == NULL
    assert future(NULL) == NULL
    defs = DefinitionTable()
    defs.add("A", (), Next(1, p))
    assert future(Call("A"), defs) == p


def test_future_homomorphism_random():
    rng = seeded(5)
    for _ in range(200):
        a = rand_process(rng, ["x", "y"])
        b = rand_process(rng, ["x", "y"])
        assert future(Par((a, b))) == Par((future(a), future(b)))
        assert future(Local(("h",), fd.TRUE, a)) == Local(("h",), fd.TRUE, future(a))


def test_next_zero_normalizes():
    p = PP("tell(a = 1)")
    assert next_(0, p) is p
    assert PP("next^0 tell(a = 1)") == p
    with pytest.raises(ValueError):
        Next(0, p)


# -- runs -------------------------------------------------------------------------


def test_replication_two():
    tr = run(PP("rep[2] tell(a = 1)"), 5)
    assert told_sets(tr) == [["a = 1"], [], ["a = 1"], [], ["a = 1"]]


def test_null_program_with_input():
    tr = run(NULL, 5, {0: P("c = 1")})
    assert len(tr) == 5 and all(r.told == () for r in tr)
    assert tr[0].quiescent_store == P("c = 1") and tr[0].residual == NULL
    assert tr[1].quiescent_store == fd.TRUE


def test_null_tick_idempotent():
    nxt, rec = observable_step(cfg(NULL), fd.TRUE)
    assert rec.residual == NULL and rec.quiescent_store == fd.TRUE
    assert nxt.process == NULL


def test_ku_partition_increments_at_25():
    prog = parse("rep[50] when pReq = 1 do next^25 tell(wpId = wpId + 1)")
    policy = PersistentVarPolicy(frozenset({"wpId"}), {})
    tr = run(prog.entry, 60, {0: P("pReq = 1")}, policy, initial={"wpId": 0})
    assert [str(c) for c in tr[25].told] == ["wpId#1 = 1"]
    assert tr[25].quiescent_store == P("wpId#0 = 0 & wpId#1 = 1")
    assert all(not r.told for i, r in enumerate(tr) if i != 25)
    assert tr[59].quiescent_store == P("wpId#1 = 1")


def test_stream_reads_latest_version():
    prog = parse("tell(x = 1) || next tell(x = x + 1)")
    tr = run(prog.entry, 3, policy=PersistentVarPolicy(prog.streams, {}))
    assert told_sets(tr) == [["x#0 = 1"], ["x#1 = 2"], []]


def test_par_locality_disjoint_variables():
    p, q = PP("rep[2] tell(a = 1)"), PP("rep[3] tell(b = 2)")
    both = told_sets(run(Par((p, q)), 7))
    left, right = told_sets(run(p, 7)), told_sets(run(q, 7))
    assert [sorted(x) for x in both] == [sorted(l + r) for l, r in zip(left, right)]


def test_inconsistent_store_halts_or_continues():
    with pytest.raises(InconsistentStore) as e:
        run(PP("tell(a = 1) || tell(a = 2)"), 3)
    assert e.value.tick == 0 and len(e.value.trace) == 1
    tr = run(PP("tell(a = 1) || tell(a = 2)"), 3, options=EngineOptions(keep_going=True))
    assert [r.inconsistent for r in tr] == [True, False, False]


def test_unguarded_recursion_at_runtime():
    defs = DefinitionTable()
    defs.add("A", (), Call("A"))
    with pytest.raises(UnguardedRecursion):
        run(Call("A"), 1, defs=defs)


def test_step_budget():
    with pytest.raises(StepBudgetExceeded):
        run(PP("tell(a = 1) || next tell(b = 1)"), 1, options=EngineOptions(step_budget=0))


def test_monotonicity_is_checked():
    before = engine.MONOTONE_CHECKS
    run(PP("tell(a = 1) || rep[2] when a = 1 do tell(b = 1)"), 4)
    assert engine.MONOTONE_CHECKS > before


def test_trace_json_fields():
    rec = run(PP("tell(x = 1)"), 1)[0]
    assert rec.to_json() == ('{"tick": 0, "input": "true", "told": ["x = 1"], "store": "x = 1", '
                             '"events": [], "inconsistent": false}')


def test_determinism_small():
    rng = seeded(11)
    opts = EngineOptions(keep_going=True, domain=fd.Domain(16))
    for _ in range(10):
        p = rand_process(rng, ["x", "y"])
        policy = PersistentVarPolicy(frozenset({"x", "y"}), {})
        a = run(p, 20, policy=policy, options=opts, initial={"x": 0, "y": 0}).to_jsonl()
        b = run(p, 20, policy=policy, options=opts, initial={"x": 0, "y": 0}).to_jsonl()
        assert a == b
