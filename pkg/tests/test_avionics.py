import pytest

from ttcc import avionics as av
from ttcc import fd, validators
from ttcc.dsl import parse, pretty
from ttcc.errors import ChainNotExercised, InconsistentVirtualLink, ModelError, UnknownLink
from ttcc.process import Ask, Local, Par, Rep

P = fd.parse_constraint
S = av.ScheduleTriple


def ku1(schedule=(0, 25, 50), queuing=False):
    return av.PartitionSpec("KU1", S(*schedule), P("pReq = 1"), P("wpId = wpId + 1"), queuing)


def test_compile_partition_ku1():
    assert pretty(av.compile_partition(ku1())) == \
        "rep[50] when pReq = 1 do next^25 tell(wpId = wpId + 1)"
    # non-zero offset keeps its next
    assert pretty(av.compile_partition(ku1((7, 30, 60)))) == \
        "rep[60] next^7 when pReq = 1 do next^30 tell(wpId = wpId + 1)"


def test_compile_partition_queuing_wraps_local():
    p = av.compile_partition(ku1(queuing=True))
    assert isinstance(p, Rep) and isinstance(p.body, Local)
    assert p.body.vars == ("wpId",)
    assert pretty(p) == "rep[50] local wpId in when pReq = 1 do next^25 tell(wpId = wpId + 1)"


def test_schedule_triple_checks():
    with pytest.raises(ModelError):
        S(0, 0, 10).check("p")
    with pytest.raises(ModelError):
        S(0, 11, 10).check("p")
    assert S(50, 2, 10).check("f") == (50, 2, 10)


def test_compile_module_shape():
    mfd1 = av.PartitionSpec("MFD1", S(25, 25, 50), P("m1_disp1 > 0"), P("display1 = m1_disp1"))
    m = av.compile_module(av.ModuleSpec("M1", (ku1(), mfd1)))
    assert m == Ask(fd.TRUE, Par((av.compile_partition(ku1()), av.compile_partition(mfd1))))
    single = av.compile_module(av.ModuleSpec("M", (ku1(),)))
    assert single == Ask(fd.TRUE, av.compile_partition(ku1()))
    bad = av.compile_module(av.ModuleSpec("M", (ku1(), ku1((10, 25, 50)).__class__(
        "X", S(10, 25, 50), fd.TRUE, P("y = 1")))))
    assert bad.guard == fd.FALSE


def test_cf_violating_module_never_acts():
    a = av.PartitionSpec("A", S(0, 25, 50), fd.TRUE, P("a = 1"))
    b = av.PartitionSpec("B", S(10, 25, 50), fd.TRUE, P("b = 1"))
    m = av.compile_module(av.ModuleSpec("M", (a, b)))
    from ttcc.engine import run

    tr = run(m, 150)
    assert all(r.told == () for r in tr)


def test_partition_schedule_preserved():
    from ttcc.engine import PersistentVarPolicy, run

    p = av.PartitionSpec("P", S(7, 30, 60), fd.TRUE, P("n = n + 1"))
    tr = run(av.compile_partition(p), 300, policy=PersistentVarPolicy(frozenset({"n"}), {}),
             initial={"n": 0})
    assert [r.tick for r in tr if r.told] == [37, 97, 157, 217, 277]


@pytest.fixture(scope="module")
def fms():
    from importlib import resources

    return av.load_system((resources.files("ttcc") / "data" / "fms.sys").read_text())


def test_fms_tables(fms):
    table1 = {p.name: tuple(p.schedule) for m in fms.modules for p in m.partitions}
    assert table1 == {
        "KU1": (0, 25, 50), "MFD1": (25, 25, 50), "KU2": (0, 25, 50), "MFD2": (25, 25, 50),
        "FM1": (7, 30, 60), "FM2": (27, 30, 60), "NDB": (77, 20, 100),
    }
    offs = {f.name: {validators.link_name(l): o for l, o in f.offsets.items()} for f in fms.frames}
    assert offs["wpId1"] == {"M1->SW1": 50, "SW1->M3": 55, "SW1->M4": 55}
    assert offs["wpId2"] == {"M2->SW1": 50, "SW1->M3": 53, "SW1->M4": 53}
    assert offs["query1"] == {"M3->SW2": 40, "SW2->M5": 44}
    assert offs["query2"] == {"M4->SW2": 60, "SW2->M5": 41}
    assert fms.max_hopdelay == 3


def test_wpid1_frame_term(fms):
    f = fms.frame("wpId1")
    assert pretty(av.compile_frame(f, ("M1", "SW1"))) == \
        "rep[10] next^50 when wpId1 > 0 do next^2 tell(sw11 = wpId1)"
    with pytest.raises(UnknownLink):
        av.compile_frame(f, ("M5", "SW2"))


def test_datalink_sw1_m3(fms):
    entries = fms.datalinks()[("SW1", "M3")]
    assert [f.name for f, _ in entries] == ["wpId1", "wpId2"]
    assert pretty(av.compile_datalink(("SW1", "M3"), entries)) == (
        "when true do (rep[10] next^55 when sw11 > 0 do next^2 tell(m3_wpId1 = sw11)"
        " || rep[10] next^53 when sw12 > 0 do next^2 tell(m3_wpId2 = sw12))")


def test_compile_system_deterministic(fms):
    a = av.compile_system(fms)
    b = av.compile_system(av.load_system_file(
        str(__import__("importlib").resources.files("ttcc") / "data" / "fms.sys")))
    assert a == b
    assert a.guard == fd.TRUE


def test_to_program_round_trips(fms):
    from ttcc.dsl import pretty_program

    prog = av.to_program(fms)
    again = parse(pretty_program(prog))
    assert again.entry == prog.entry and again.definitions == prog.definitions


def test_fms_display_tick(fms):
    trace = av.simulate(fms, av.compile_system(fms), 600, {0: P("pReq1 = 1")})
    ends = [r.tick for r in trace for e in r.events
            if e["kind"] == "partition_end" and e["name"] == "MFD1"]
    # KU1 25, wpId1 52/57, FM1 97, query1 103/107, NDB 197, resp1 223/227,
    # FM1 277, disp1 287/290, MFD1 325..350
    assert ends[0] == 350
    (res, value), = av.latency_results(fms)
    assert res.passed and value == 350


def test_deadline_zero_violated(fms):
    c = fms.latency[0]
    tight = av.LatencyConstraint(c.name, c.kind, c.chain, 0, c.stimulus_tick, c.stimulus)
    trace = av.simulate(fms, av.compile_system(fms), 400, {0: c.stimulus})
    res, value = validators.latency_ok(av.trace_events(trace), tight, fms)
    assert not res.passed and value == 350


def test_chain_not_exercised(fms):
    trace = av.simulate(fms, av.compile_system(fms), 200)  # no pilot request
    with pytest.raises(ChainNotExercised):
        validators.measure_latency(av.trace_events(trace), fms.latency[0], fms)
    res, value = validators.latency_ok(av.trace_events(trace), fms.latency[0], fms)
    assert not res.passed and value is None


TOY = """
topology:
  end_systems: [M1, M2]
  switches: []
  links: [[M1, M2]]
modules:
  M1:
    P1: {schedule: [0, 10, 50], guard: "true", result: "v = 1"}
  M2:
    P2: {schedule: [20, 10, 50], guard: "m2_f > 0", result: "out = m2_f"}
frames:
  f:
    length: 2
    period: 50
    source: v
    paths: [[M1, M2]]
    offsets: {M1->M2: 12}
variables:
  streams: {v: 0, m2_f: 0, out: 0}
latency:
  - {name: toy, kind: elementary, chain: [P1, f, P2], deadline: 40}
"""


def test_elementary_latency_toy():
    sys = av.load_system(TOY)
    (res, value), = av.latency_results(sys)
    # back-to-back windows: o_recv + tau_recv - o_send
    assert value == 20 + 10 - 0
    assert res.passed


def test_loader_errors():
    base = av.load_system(TOY)
    assert base.hyperperiod == 50
    bad_link = TOY.replace("offsets: {M1->M2: 12}", "offsets: {M1->M2: 12, M2->M1: 3}")
    with pytest.raises(InconsistentVirtualLink):
        av.load_system(bad_link)
    with pytest.raises(UnknownLink):
        av.load_system(TOY.replace("paths: [[M1, M2]]", "paths: [[M1, M3]]"))
    with pytest.raises(InconsistentVirtualLink):
        av.load_system(TOY.replace("offsets: {M1->M2: 12}", "offsets: {}"))
    with pytest.raises(ModelError):
        av.load_system(TOY.replace("chain: [P1, f, P2]", "chain: [P1, g]"))
    with pytest.raises(ModelError):
        av.load_system(TOY.replace("[0, 10, 50]", "[0, 60, 50]"))


def test_validate_system_mutations(fms):
    assert av.validate_system(fms).passed
    strict = av.validate_system(fms, validators.STRICT)
    assert [(x.scope, x.items) for x in strict.violations()] == \
        [("query2", ("M4->SW2", "SW2->M5"))]
