import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from ttcc import fd
from ttcc.dsl import parse, parse_process, pretty, pretty_program
from ttcc.errors import ArityMismatch, ParseError, SourceError, UnguardedRecursion, UnknownIdentifier
from ttcc.process import NULL, Ask, Call, Local, Next, Par, Rep, Tell

P = fd.parse_constraint

KU1 = "rep[50] when pReq = 1 do next^25 tell(wpId = wpId + 1)"


def test_ku1_term():
    p = parse(KU1).entry
    assert p == Rep(50, Ask(P("pReq = 1"), Next(25, Tell(P("wpId = wpId + 1")))))
    assert pretty(p) == KU1


def test_trivial_forms():
    assert parse("0").entry == NULL
    assert pretty(NULL) == "0"
    assert parse("next^0 tell(a = 1)").entry == Tell(P("a = 1"))
    assert pretty(Par((Tell(P("a = 1")), Next(1, NULL)))) == "tell(a = 1) || next 0"


def test_precedence():
    p = parse_process("next tell(a = 1) || tell(b = 1)")
    assert p == Par((Next(1, Tell(P("a = 1"))), Tell(P("b = 1"))))
    q = parse_process("next (tell(a = 1) || tell(b = 1))")
    assert q == Next(1, Par((Tell(P("a = 1")), Tell(P("b = 1")))))
    assert pretty(q) == "next (tell(a = 1) || tell(b = 1))"


def test_local_forms():
    assert parse_process("local x in tell(x = 1)") == Local(("x",), fd.TRUE, Tell(P("x = 1")))
    p = parse_process("local x, y, x < y in 0")
    assert p == Local(("x", "y"), P("x < y"), NULL)
    assert pretty(p) == "local x, y, x < y in 0"


def test_program_with_declarations_and_definitions():
    src = """
    // a counter that ticks every 10 units
    var n persistent = 0;
    var go;
    def Tick(k) = when go = k do tell(n = n + 1) || next^10 Tick(1);
    Tick(1)
    """
    prog = parse(src)
    assert prog.streams == {"n"} and prog.initial == {"n": 0}
    assert prog.variables == {"n", "go"}
    assert prog.definitions["Tick"].params == ("k",)
    again = parse(pretty_program(prog))
    assert again.entry == prog.entry
    assert again.definitions == prog.definitions
    assert again.declarations == prog.declarations


@pytest.mark.parametrize("src,kind,where", [
    ("", ParseError, (1, 1)),
    ("tell(a = )", ParseError, (1, 10)),
    ("when a = 1 tell(b = 1)", ParseError, (1, 12)),
    ("rep[0] 0", ParseError, (1, 5)),
    ("tell(a#1 = 1)", ParseError, (1, 13)),
    ("B()", UnknownIdentifier, (1, 1)),
    ("def A(x) = 0;\nA()", ArityMismatch, (2, 1)),
    ("var a;\ntell(b = 1)", UnknownIdentifier, (2, 1)),
    ("def A() = A();\nA()", UnguardedRecursion, (1, 1)),
    ("def A() = B();\ndef B() = when a = 1 do A();\nnext A()", UnguardedRecursion, (1, 1)),
])
def test_located_errors(src, kind, where):
    with pytest.raises(kind) as e:
        parse(src)
    assert (e.value.line, e.value.column) == where


def test_guarded_recursion_accepted():
    prog = parse("def A() = tell(a = 1) || next A();\nA()")
    assert "A" in prog.definitions


GOLDEN = [
    ("0", "0"),
    ("tell(x=1)", "tell(x = 1)"),
    ("tell( x = y+1 )", "tell(x = y + 1)"),
    ("tell(a=1&b=2)", "tell(a = 1 & b = 2)"),
    ("tell(x = y - 3)", "tell(x = y - 3)"),
    ("when true do 0", "when true do 0"),
    ("when pReq = true do tell(a = 1)", "when pReq = 1 do tell(a = 1)"),
    ("next next tell(a = 1)", "next^2 tell(a = 1)"),
    ("next^1 0", "next 0"),
    ("next^0 0", "0"),
    ("(tell(a = 1))", "tell(a = 1)"),
    ("tell(a = 1) || (tell(b = 1) || 0)", "tell(a = 1) || tell(b = 1) || 0"),
    ("rep[5] (tell(a = 1) || next 0)", "rep[5] (tell(a = 1) || next 0)"),
    ("local x in tell(x != 2)", "local x in tell(x != 2)"),
    ("local x, y, x <= y in 0", "local x, y, x <= y in 0"),
    ("when exists z. (z > a) do 0", "when exists z. (z > a) do 0"),
    ("tell((a = 1 & b = 1) & c = 1)", "tell(a = 1 & b = 1 & c = 1)"),
    ("when a >= 2 do when b < 1 do tell(c = 0)", "when a >= 2 do when b < 1 do tell(c = 0)"),
    ("next^3 (next^2 0)", "next^5 0"),
    (KU1, KU1),
]


@pytest.mark.parametrize("src,canonical", GOLDEN)
def test_golden_corpus(src, canonical):
    p = parse_process(src)
    assert pretty(p) == canonical
    assert parse_process(canonical) == p


# -- property tests ------------------------------------------------------------

names = st.sampled_from(["a", "b", "x", "wpId", "m3_wpId1"])
terms = st.one_of(
    st.integers(0, 99).map(fd.Const),
    names.map(fd.Var),
    st.tuples(names, st.integers(-5, 5).filter(bool)).map(lambda t: fd.Add(fd.Var(t[0]), t[1])),
)
atoms = st.builds(fd.Atom, terms, st.sampled_from(["=", "!=", "<", "<=", ">", ">="]), terms)


def _constraints():
    base = st.one_of(atoms, st.sampled_from([fd.TRUE, fd.FALSE]))

    def extend(inner):
        non_conj = inner.filter(lambda c: not isinstance(c, fd.Conj))
        return st.one_of(
            st.lists(non_conj, min_size=2, max_size=3).map(lambda xs: fd.Conj(tuple(xs))),
            st.builds(fd.Exists, names, inner),
        )

    return st.recursive(base, extend, max_leaves=4)


constraints = _constraints()


def _processes():
    leaf = st.one_of(st.just(NULL), st.builds(Tell, constraints),
                     st.builds(Call, st.sampled_from(["A", "Loop"]),
                               st.lists(st.integers(0, 9), max_size=2).map(tuple)))

    def extend(inner):
        return st.one_of(
            st.builds(Ask, constraints, inner),
            st.lists(inner, min_size=2, max_size=3).map(lambda xs: Par(tuple(xs))),
            st.builds(Next, st.integers(1, 4), inner),
            st.builds(Rep, st.integers(1, 60), inner),
            st.builds(Local, st.lists(names, min_size=1, max_size=2, unique=True).map(tuple),
                      st.one_of(st.just(fd.TRUE), atoms), inner),
        )

    return st.recursive(leaf, extend, max_leaves=8)


processes = _processes()


@settings(max_examples=300, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(processes)
def test_round_trip(p):
    assert parse_process(pretty(p)) == p


@settings(max_examples=300, deadline=None)
@given(st.text(alphabet="tel(ab=1)|&nx^0w do;#", max_size=30))
def test_parser_totality(text):
    try:
        parse(text)
    except SourceError as e:
        assert e.line is not None and e.column is not None
    except UnguardedRecursion:
        pass
