"""The FD[max] constraint system.

Constraints are conjunctions of atoms ``t1 rel t2`` (rel in ``= != < <= > >=``)
over integer variables ranging over ``0..max-1``, possibly under ``exists``.
A term is a constant, a variable, or ``x + k``; a term whose value leaves the
domain makes its atom false for that valuation.

Three decision procedures are available:

``enumerate``
    exact and complete.  Each atom is compiled to difference constraints
    (``v - u <= w``) and disequalities (``v - u != k``); the store is split into
    connected components, each solved with Bellman-Ford plus case splits on
    violated disequalities.  The split count is budgeted.
``bounds``
    interval propagation only: sound for entailment, may miss some.
``entails_oracle``
    brute-force enumeration of every valuation (numpy, budgeted), kept
    independent of the two procedures above and used to cross-check them.
"""

import functools
import itertools
import re
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from .errors import DomainTooLarge, UnknownVariable, ValueOutOfDomain
from .lexer import TokenStream, describe, tokenize

DEFAULT_MAX = 65536
RELATIONS = ("=", "!=", "<", "<=", ">", ">=")
NEGATED = {"=": "!=", "!=": "=", "<": ">=", "<=": ">", ">": "<=", ">=": "<"}
FLIPPED = {"=": "=", "!=": "!=", "<": ">", "<=": ">=", ">": "<", ">=": "<="}


@dataclass(frozen=True)
class Domain:
    max: int = DEFAULT_MAX

    def __post_init__(self):
        if self.max < 2:
            raise ValueError("domain max must be >= 2, got %r" % (self.max,))

    def __contains__(self, value):
        return 0 <= value < self.max


# -- terms -------------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: int

    def __str__(self):
        return str(self.value)


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Add:
    var: Var
    offset: int

    def __str__(self):
        if self.offset < 0:
            return "%s - %d" % (self.var.name, -self.offset)
        return "%s + %d" % (self.var.name, self.offset)


Term = Union[Const, Var, Add]


def add(var, offset):
    """``var + offset`` with the zero offset collapsed to the variable."""
    if isinstance(var, str):
        var = Var(var)
    return var if offset == 0 else Add(var, offset)


def term_var(t):
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Add):
        return t.var.name
    return None


# -- constraints -------------------------------------------------------------


@dataclass(frozen=True)
class Bool:
    value: bool

    def __str__(self):
        return "true" if self.value else "false"


TRUE = Bool(True)
FALSE = Bool(False)


@dataclass(frozen=True)
class Atom:
    lhs: Term
    rel: str
    rhs: Term

    def __post_init__(self):
        if self.rel not in RELATIONS:
            raise ValueError("unknown relation %r" % self.rel)

    def __str__(self):
        return "%s %s %s" % (self.lhs, self.rel, self.rhs)


@dataclass(frozen=True)
class Conj:
    items: Tuple["Constraint", ...]

    def __str__(self):
        return " & ".join(str(c) for c in self.items)


@dataclass(frozen=True)
class Exists:
    var: str
    body: "Constraint"

    def __str__(self):
        return "exists %s. (%s)" % (self.var, self.body)


Constraint = Union[Bool, Atom, Conj, Exists]


def atom(lhs, rel, rhs):
    return Atom(_as_term(lhs), rel, _as_term(rhs))


def _as_term(x):
    if isinstance(x, (Const, Var, Add)):
        return x
    if isinstance(x, bool):
        return Const(int(x))
    if isinstance(x, int):
        return Const(x)
    if isinstance(x, str):
        return Var(x)
    raise TypeError("not a term: %r" % (x,))


def conj(*cs):
    """Canonical conjunction of the given constraints."""
    return canonical(Conj(tuple(cs)))


def to_text(c):
    return str(c)


def canonical(c):
    """Flatten, drop ``true`` and duplicates, sort conjuncts by printed text.

    Ground atoms are folded to ``true``/``false``; an existential whose
    variable does not occur is dropped.
    """
    if isinstance(c, Bool):
        return c
    if isinstance(c, Atom):
        return _fold_ground(c)
    if isinstance(c, Exists):
        body = canonical(c.body)
        if c.var not in free_vars(body):
            return body
        return Exists(c.var, body)
    items = {}
    stack = list(c.items)
    while stack:
        x = canonical(stack.pop())
        if isinstance(x, Conj):
            stack.extend(x.items)
        elif x == FALSE:
            return FALSE
        elif x != TRUE:
            items[str(x)] = x
    if not items:
        return TRUE
    if len(items) == 1:
        return next(iter(items.values()))
    return Conj(tuple(items[k] for k in sorted(items)))


def _fold_ground(a):
    if isinstance(a.lhs, Const) and isinstance(a.rhs, Const):
        l, r = a.lhs.value, a.rhs.value
        if l < 0 or r < 0:
            return FALSE
        return TRUE if _compare(l, a.rel, r) else FALSE
    return a


def _compare(l, rel, r):
    if rel == "=":
        return l == r
    if rel == "!=":
        return l != r
    if rel == "<":
        return l < r
    if rel == "<=":
        return l <= r
    if rel == ">":
        return l > r
    return l >= r


def conjuncts(c):
    c = canonical(c)
    if c == TRUE:
        return ()
    if isinstance(c, Conj):
        return c.items
    return (c,)


def free_vars(c):
    if isinstance(c, Bool):
        return frozenset()
    if isinstance(c, Atom):
        return frozenset(v for v in (term_var(c.lhs), term_var(c.rhs)) if v)
    if isinstance(c, Conj):
        out = frozenset()
        for x in c.items:
            out |= free_vars(x)
        return out
    return free_vars(c.body) - {c.var}


def constants(c):
    if isinstance(c, Atom):
        return [t.value for t in (c.lhs, c.rhs) if isinstance(t, Const)]
    if isinstance(c, Conj):
        return [v for x in c.items for v in constants(x)]
    if isinstance(c, Exists):
        return constants(c.body)
    return []


def substitute(c, mapping):
    """Replace free variables by terms (``Var``/``Const``/``Add``).

    ``Add(x, k)`` with ``x`` mapped to a constant ``v`` becomes ``Const(v + k)``
    which may leave the domain; its atom then evaluates as false.
    """
    if not mapping:
        return c
    if isinstance(c, Bool):
        return c
    if isinstance(c, Atom):
        return Atom(_subst_term(c.lhs, mapping), c.rel, _subst_term(c.rhs, mapping))
    if isinstance(c, Conj):
        return Conj(tuple(substitute(x, mapping) for x in c.items))
    inner = {k: v for k, v in mapping.items() if k != c.var}
    captured = {term_var(t) for t in inner.values()}
    if c.var in captured:
        fresh = _fresh_like(c.var, free_vars(c.body) | captured | set(inner))
        body = substitute(c.body, {c.var: Var(fresh)})
        return Exists(fresh, substitute(body, inner))
    return Exists(c.var, substitute(c.body, inner))


def _subst_term(t, mapping):
    name = term_var(t)
    if name is None or name not in mapping:
        return t
    new = _as_term(mapping[name])
    k = t.offset if isinstance(t, Add) else 0
    if k == 0:
        return new
    if isinstance(new, Const):
        return Const(new.value + k)
    if isinstance(new, Var):
        return Add(new, k)
    return add(new.var, new.offset + k)


def rename(c, mapping):
    return substitute(c, {k: Var(v) for k, v in mapping.items()})


def _fresh_like(name, taken):
    base = name.split("?")[0]
    for i in itertools.count(1):
        cand = "%s?%d" % (base, i)
        if cand not in taken:
            return cand


def hide(x, c, domain=None):
    """``exists x. c``, simplified when that is exact.

    Returns ``c`` unchanged when ``x`` is not free, and eliminates ``x`` by
    substitution when ``c`` pins it with an atom ``x = k``.  Substitution into
    offset terms ``x + j`` needs ``domain`` to fold the result; without it such
    cases stay as an explicit existential.
    """
    c = canonical(c)
    if x not in free_vars(c):
        return c
    parts = conjuncts(c)
    for part in parts:
        if isinstance(part, Atom) and part.rel == "=":
            value = None
            if part.lhs == Var(x) and isinstance(part.rhs, Const):
                value = part.rhs.value
            elif part.rhs == Var(x) and isinstance(part.lhs, Const):
                value = part.lhs.value
            if value is None:
                continue
            rest = [p for p in parts if p is not part]
            if domain is None and any(_has_offset_on(p, x) for p in rest):
                break
            out = substitute(Conj(tuple(rest)), {x: Const(value)})
            return canonical(_fold_domain(out, domain)) if domain else canonical(out)
    return Exists(x, c)


def _has_offset_on(c, x):
    if isinstance(c, Atom):
        return any(isinstance(t, Add) and t.var.name == x for t in (c.lhs, c.rhs))
    if isinstance(c, Conj):
        return any(_has_offset_on(p, x) for p in c.items)
    if isinstance(c, Exists):
        return c.var != x and _has_offset_on(c.body, x)
    return False


def _fold_domain(c, domain):
    if isinstance(c, Atom):
        for t in (c.lhs, c.rhs):
            if isinstance(t, Const) and t.value not in domain:
                return FALSE
        return _fold_ground(c)
    if isinstance(c, Conj):
        return Conj(tuple(_fold_domain(x, domain) for x in c.items))
    if isinstance(c, Exists):
        return Exists(c.var, _fold_domain(c.body, domain))
    return c


def holds(c, valuation, domain):
    """Evaluate ``c`` at a point; existentials are expanded over the domain."""
    if isinstance(c, Bool):
        return c.value
    if isinstance(c, Atom):
        l = _term_value(c.lhs, valuation)
        r = _term_value(c.rhs, valuation)
        if l not in domain or r not in domain:
            return False
        return _compare(l, c.rel, r)
    if isinstance(c, Conj):
        return all(holds(x, valuation, domain) for x in c.items)
    inner = dict(valuation)
    for v in range(domain.max):
        inner[c.var] = v
        if holds(c.body, inner, domain):
            return True
    return False


def _term_value(t, valuation):
    if isinstance(t, Const):
        return t.value
    if isinstance(t, Var):
        return valuation[t.name]
    return valuation[t.var.name] + t.offset


# -- textual syntax ----------------------------------------------------------


def parse_constraint(text):
    ts = TokenStream(tokenize(text))
    c = read_constraint(ts)
    if ts.peek().kind != "eof":
        ts.fail("unexpected %s after constraint" % describe(ts.peek()))
    return c


def read_constraint(ts):
    """Read a conjunction from a token stream; stops at the first foreign token."""
    items = [_read_primary(ts)]
    while ts.accept("&"):
        items.append(_read_primary(ts))
    return items[0] if len(items) == 1 else Conj(tuple(items))


def _read_primary(ts):
    tok = ts.peek()
    if ts.at("exists"):
        ts.next()
        name = ts.expect_kind("ident", "variable name").text
        ts.expect(".")
        ts.expect("(")
        body = read_constraint(ts)
        ts.expect(")")
        return Exists(name, body)
    if ts.at("("):
        ts.next()
        c = read_constraint(ts)
        ts.expect(")")
        return c
    if tok.kind == "kw" and tok.text in ("true", "false") and not _is_rel(ts.peek(1)):
        ts.next()
        return TRUE if tok.text == "true" else FALSE
    lhs = _read_term(ts)
    rel = ts.peek()
    if not _is_rel(rel):
        ts.fail("expected a relation, found %s" % describe(rel), rel)
    ts.next()
    rhs = _read_term(ts)
    return Atom(lhs, rel.text, rhs)


def _is_rel(tok):
    return tok.kind == "op" and tok.text in RELATIONS


def _read_term(ts):
    tok = ts.peek()
    if tok.kind == "int":
        ts.next()
        return Const(int(tok.text))
    if tok.kind == "kw" and tok.text in ("true", "false"):
        ts.next()
        return Const(1 if tok.text == "true" else 0)
    if tok.kind != "ident":
        ts.fail("expected a term, found %s" % describe(tok), tok)
    ts.next()
    var = Var(tok.text)
    if ts.at("+") or ts.at("-"):
        sign = 1 if ts.next().text == "+" else -1
        k = int(ts.expect_kind("int", "integer offset").text)
        return add(var, sign * k)
    return var


# -- stores ------------------------------------------------------------------


@dataclass(frozen=True)
class SolverConfig:
    procedure: str = "enumerate"  # or "bounds"
    budget: int = 100_000  # case splits per decision (enumerate)
    oracle_budget: int = 1 << 24  # valuations (oracle)

    def __post_init__(self):
        if self.procedure not in ("enumerate", "bounds"):
            raise ValueError("unknown decision procedure %r" % self.procedure)


DEFAULT_CONFIG = SolverConfig()


class Store:
    """Immutable canonical conjunction plus its consistency flag.

    ``variables`` is the registry of admissible base names (``None`` accepts
    anything).  Version suffixes ``x#3`` resolve to ``x``; engine-internal
    names containing ``~`` or ``?`` are always admitted.
    """

    __slots__ = ("domain", "content", "variables", "config", "_system",
                 "_consistent", "_values")

    def __init__(self, content=TRUE, domain=None, variables=None, config=None,
                 _checked=False):
        self.domain = domain or Domain()
        self.config = config or DEFAULT_CONFIG
        self.variables = None if variables is None else frozenset(variables)
        if not _checked:
            _check_constraint(content, self.domain, self.variables)
        self.content = canonical(content)
        self._system = None
        self._consistent = None
        self._values = {}

    @property
    def consistent(self):
        if self._consistent is None:
            self._consistent = _system_sat(self._sys(), self.config)
        return self._consistent

    def _sys(self):
        if self._system is None:
            self._system = _System.build(self.content, self.domain.max)
        return self._system

    def with_content(self, content):
        return Store(content, self.domain, self.variables, self.config, _checked=True)

    def value_of(self, name):
        """The value the store forces on ``name``, or ``None``."""
        if name not in self._values:
            self._values[name] = _fixed_value(self, name)
        return self._values[name]

    def __eq__(self, other):
        return (isinstance(other, Store) and self.content == other.content
                and self.domain == other.domain)

    def __hash__(self):
        return hash((self.content, self.domain))

    def __repr__(self):
        return "Store<%s>" % self.content


def _check_constraint(c, domain, variables, bound=frozenset()):
    if isinstance(c, Atom):
        for t in (c.lhs, c.rhs):
            if isinstance(t, Const) and t.value not in domain:
                raise ValueOutOfDomain(t.value, domain.max)
            name = term_var(t)
            if name and variables is not None and name not in bound:
                if not _registered(name, variables):
                    raise UnknownVariable(name)
    elif isinstance(c, Conj):
        for x in c.items:
            _check_constraint(x, domain, variables, bound)
    elif isinstance(c, Exists):
        _check_constraint(c.body, domain, variables, bound | {c.var})


def _registered(name, variables):
    if "~" in name or "?" in name:
        return True
    return name.split("#")[0] in variables


def empty_store(domain=None, variables=None, config=None):
    return Store(TRUE, domain, variables, config)


def conjoin(s, c):
    """``s.content & c`` as a new store; consistency recomputed lazily."""
    _check_constraint(c, s.domain, s.variables)
    c = canonical(c)
    if c == TRUE:
        return s
    return s.with_content(Conj((s.content, c)))


def satisfiable(s):
    return s.consistent


def entails(s, c):
    """``s |- c`` under the store's configured decision procedure."""
    if not s.consistent:
        return True
    c = canonical(c)
    _check_constraint(c, s.domain, None)
    return _entails(s, c)


def _entails(s, c):
    if c == TRUE:
        return True
    if c == FALSE:
        return False
    if isinstance(c, Conj):
        return all(_entails(s, x) for x in c.items)
    if isinstance(c, Atom):
        return _entails_atom(s, c)
    return _entails_exists(s, c)


# -- difference-constraint compilation --------------------------------------

ZERO = ""  # the constant node


def _node(t, max_):
    """(node, offset, in_range) for a term; ``in_range`` only concerns constants."""
    if isinstance(t, Const):
        return ZERO, t.value, 0 <= t.value < max_
    if isinstance(t, Var):
        return t.name, 0, True
    return t.var.name, t.offset, True


@functools.lru_cache(maxsize=1 << 16)
def _atom_parts(a, max_):
    """Compile an atom to ``(range_edges, core)``, or ``None`` if always false.

    Edges are ``(u, v, w)`` meaning ``v - u <= w``.  ``core`` is either a bool
    (the relation is decided) or ``(rel, u, v, d)`` meaning ``v - u rel d``.
    """
    n1, k1, ok1 = _node(a.lhs, max_)
    n2, k2, ok2 = _node(a.rhs, max_)
    if not (ok1 and ok2):
        return None
    ranges = []
    for t in (a.lhs, a.rhs):
        if isinstance(t, Add):
            if t.offset > 0:
                ranges.append((ZERO, t.var.name, max_ - 1 - t.offset))
            else:
                ranges.append((t.var.name, ZERO, t.offset))
    # n1 + k1 rel n2 + k2  <=>  n1 - n2 rel k2 - k1
    d = k2 - k1
    if n1 == n2:
        core = _compare(0, a.rel, d)
    else:
        core = (a.rel, n2, n1, d)
    return tuple(ranges), core


def _core_constraints(core):
    """Edges and disequalities for ``v - u rel d``."""
    rel, u, v, d = core
    if rel == "=":
        return [(u, v, d), (v, u, -d)], []
    if rel == "<=":
        return [(u, v, d)], []
    if rel == "<":
        return [(u, v, d - 1)], []
    if rel == ">=":
        return [(v, u, -d)], []
    if rel == ">":
        return [(v, u, -d - 1)], []
    return [], [(u, v, d)]


def _negate_edge(e):
    u, v, w = e
    return (v, u, -w - 1)


class _System:
    """A store compiled to components of difference constraints."""

    __slots__ = ("false", "components", "owner", "max")

    @classmethod
    def build(cls, content, max_):
        self = cls()
        self.max = max_
        self.false = False
        edges, nes = [], []
        counter = itertools.count()
        for part in _prenex_atoms(content, counter):
            if part == FALSE:
                self.false = True
                continue
            if part == TRUE:
                continue
            parts = _atom_parts(part, max_)
            if parts is None:
                self.false = True
                continue
            ranges, core = parts
            edges.extend(ranges)
            if core is False:
                self.false = True
            elif core is not True:
                e, n = _core_constraints(core)
                edges.extend(e)
                nes.extend(n)
        self.components, self.owner = _split_components(edges, nes)
        return self

    def slice(self, nodes):
        """Edges and disequalities of every component touching ``nodes``."""
        ids = sorted({self.owner[n] for n in nodes if n in self.owner})
        edges, nes = [], []
        for i in ids:
            e, n = self.components[i]
            edges.extend(e)
            nes.extend(n)
        return edges, nes


def _prenex_atoms(c, counter):
    """Atoms of ``c`` with existential variables renamed apart."""
    if isinstance(c, (Bool, Atom)):
        return [c]
    if isinstance(c, Conj):
        return [a for x in c.items for a in _prenex_atoms(x, counter)]
    fresh = "%s?%d" % (c.var.split("?")[0], next(counter))
    return _prenex_atoms(rename(c.body, {c.var: fresh}), counter)


def _split_components(edges, nes):
    parent = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        if a == ZERO or b == ZERO:
            if a != ZERO:
                find(a)
            if b != ZERO:
                find(b)
            return
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    for u, v, _ in edges:
        union(u, v)
    for u, v, _ in nes:
        union(u, v)
    roots = sorted({find(x) for x in parent})
    index = {r: i for i, r in enumerate(roots)}
    comps = [([], []) for _ in roots]
    for e in edges:
        n = e[0] if e[0] != ZERO else e[1]
        comps[index[find(n)]][0].append(e)
    for e in nes:
        n = e[0] if e[0] != ZERO else e[1]
        comps[index[find(n)]][1].append(e)
    owner = {x: index[find(x)] for x in parent}
    comps = [(tuple(sorted(set(e))), tuple(sorted(set(n)))) for e, n in comps]
    return comps, owner


def _system_sat(system, config):
    if system.false:
        return False
    for edges, nes in system.components:
        if not _decide(edges, nes, system.max, config):
            return False
    return True


def _decide(edges, nes, max_, config):
    if config.procedure == "bounds":
        return _bounds_sat(edges, nes, max_)
    return _exact_sat(tuple(sorted(set(edges))), tuple(sorted(set(nes))), max_,
                      config.budget)


class _Budget:
    def __init__(self, limit):
        self.left = limit

    def spend(self):
        self.left -= 1
        if self.left < 0:
            raise DomainTooLarge("case-split budget exhausted")


@functools.lru_cache(maxsize=1 << 15)
def _exact_sat(edges, nes, max_, budget):
    return _search(list(edges), list(nes), max_, _Budget(budget))


def _search(edges, nes, max_, budget):
    sol = _shortest_paths(edges, nes, max_)
    if sol is None:
        return False
    for u, v, k in nes:
        if sol[v] - sol[u] == k:
            budget.spend()
            # v - u <= k - 1  or  v - u >= k + 1
            return (_search(edges + [(u, v, k - 1)], nes, max_, budget)
                    or _search(edges + [(v, u, -k - 1)], nes, max_, budget))
    return True


def _shortest_paths(edges, nes, max_):
    """Bellman-Ford from the constant node; ``None`` on a negative cycle.

    The returned distances are the largest solution of the difference system
    (each variable at its tightest upper bound).
    """
    nodes = {ZERO}
    for u, v, _ in edges:
        nodes.add(u)
        nodes.add(v)
    for u, v, _ in nes:
        nodes.add(u)
        nodes.add(v)
    all_edges = list(edges)
    for n in nodes:
        if n != ZERO:
            all_edges.append((ZERO, n, max_ - 1))
            all_edges.append((n, ZERO, 0))
    dist = {n: 0 if n == ZERO else max_ - 1 for n in nodes}
    for _ in range(len(nodes)):
        changed = False
        for u, v, w in all_edges:
            if dist[u] + w < dist[v]:
                dist[v] = dist[u] + w
                changed = True
        if not changed:
            break
    else:
        return None
    if dist[ZERO] != 0:
        return None
    return dist


def _bounds_sat(edges, nes, max_):
    lo, hi = {ZERO: 0}, {ZERO: 0}
    for u, v, _ in list(edges) + list(nes):
        for n in (u, v):
            if n not in lo:
                lo[n], hi[n] = 0, max_ - 1
    rounds = 4 * (len(lo) + 1) + 64
    for _ in range(rounds):
        changed = False
        for u, v, w in edges:
            if hi[u] + w < hi[v]:
                hi[v] = hi[u] + w
                changed = True
            if lo[v] - w > lo[u]:
                lo[u] = lo[v] - w
                changed = True
        for u, v, k in nes:
            if lo[u] == hi[u]:
                changed |= _exclude(lo, hi, v, lo[u] + k)
            if lo[v] == hi[v]:
                changed |= _exclude(lo, hi, u, lo[v] - k)
        if any(lo[n] > hi[n] for n in lo):
            return False
        if not changed:
            break
    return True


def _exclude(lo, hi, n, value):
    if lo[n] == value:
        lo[n] += 1
        return True
    if hi[n] == value:
        hi[n] -= 1
        return True
    return False


def _with_query(s, q_edges, q_nes):
    nodes = {n for e in q_edges for n in e[:2]} | {n for e in q_nes for n in e[:2]}
    edges, nes = s._sys().slice(nodes - {ZERO})
    return edges + list(q_edges), nes + list(q_nes)


def _sat_with(s, q_edges, q_nes=()):
    edges, nes = _with_query(s, q_edges, q_nes)
    return _decide(edges, nes, s.domain.max, s.config)


def _entails_atom(s, a):
    parts = _atom_parts(a, s.domain.max)
    if parts is None:
        return False
    ranges, core = parts
    for e in ranges:
        if _sat_with(s, [_negate_edge(e)]):
            return False
    if core is True:
        return True
    if core is False:
        return False
    rel, u, v, d = core
    e, n = _core_constraints((NEGATED[rel], u, v, d))
    return not _sat_with(s, e, n)


def _entails_exists(s, c):
    counter = itertools.count()
    atoms = _prenex_atoms(c, counter)
    bound = _bound_names(c, itertools.count())
    if FALSE in atoms:
        return False
    edges, nes = [], []
    for a in atoms:
        if a == TRUE:
            continue
        parts = _atom_parts(a, s.domain.max)
        if parts is None:
            return False
        ranges, core = parts
        edges.extend(ranges)
        if core is False:
            return False
        if core is not True:
            e, n = _core_constraints(core)
            edges.extend(e)
            nes.extend(n)
    if any(u in bound or v in bound for u, v, _ in nes):
        return _entails_by_enumeration(s, c)
    projected = _project(edges, bound, s.domain.max)
    if projected is None:
        return False
    for e in projected:
        if _sat_with(s, [_negate_edge(e)]):
            return False
    for u, v, k in nes:
        if _sat_with(s, [(u, v, k), (v, u, -k)]):
            return False
    return True


def _bound_names(c, counter):
    # must mirror _prenex_atoms' renaming order
    if isinstance(c, (Bool, Atom)):
        return set()
    if isinstance(c, Conj):
        out = set()
        for x in c.items:
            out |= _bound_names(x, counter)
        return out
    fresh = "%s?%d" % (c.var.split("?")[0], next(counter))
    return {fresh} | _bound_names(rename(c.body, {c.var: fresh}), counter)


def _project(edges, bound, max_):
    """Exact elimination of ``bound`` nodes from a difference system.

    Floyd-Warshall closure, then keep the bounds between remaining nodes.
    Returns ``None`` when the system itself is unsatisfiable.
    """
    nodes = sorted({ZERO} | {n for e in edges for n in e[:2]})
    inf = float("inf")
    dist = {a: {b: (0 if a == b else inf) for b in nodes} for a in nodes}
    for n in nodes:
        if n != ZERO:
            dist[ZERO][n] = min(dist[ZERO][n], max_ - 1)
            dist[n][ZERO] = min(dist[n][ZERO], 0)
    for u, v, w in edges:
        dist[u][v] = min(dist[u][v], w)
    for k in nodes:
        dk = dist[k]
        for i in nodes:
            dik = dist[i][k]
            if dik == inf:
                continue
            di = dist[i]
            for j in nodes:
                if dik + dk[j] < di[j]:
                    di[j] = dik + dk[j]
    if any(dist[n][n] < 0 for n in nodes):
        return None
    keep = [n for n in nodes if n not in bound]
    out = []
    for u in keep:
        for v in keep:
            if u != v and dist[u][v] != inf:
                out.append((u, v, dist[u][v]))
    return out


def _entails_by_enumeration(s, c):
    sliced = _slice_constraint(s, free_vars(c))
    return _oracle(sliced, c, s.domain, s.config.oracle_budget)


def _fixed_value(s, name):
    if not s.consistent or name not in s._sys().owner:
        return None
    edges, nes = s._sys().slice({name})
    try:
        model = _model(list(edges), list(nes), s.domain.max, _Budget(s.config.budget))
    except DomainTooLarge:
        return None
    if model is None:
        return None
    value = model[name]
    if _sat_with(s, [], [(ZERO, name, value)]):
        return None
    return value


def _model(edges, nes, max_, budget):
    sol = _shortest_paths(edges, nes, max_)
    if sol is None:
        return None
    for u, v, k in nes:
        if sol[v] - sol[u] == k:
            budget.spend()
            return (_model(edges + [(u, v, k - 1)], nes, max_, budget)
                    or _model(edges + [(v, u, -k - 1)], nes, max_, budget))
    return sol


def relevant_slice(s, names):
    """The part of ``s.content`` connected to ``names`` (as a constraint)."""
    return _slice_constraint(s, set(names))


def _slice_constraint(s, names):
    wanted = set(names)
    parts = conjuncts(s.content)
    # iterate to a fixpoint over shared free variables
    chosen = []
    changed = True
    remaining = list(parts)
    while changed:
        changed = False
        for p in list(remaining):
            fv = free_vars(p)
            if fv & wanted or not fv:
                chosen.append(p)
                remaining.remove(p)
                wanted |= fv
                changed = True
    return canonical(Conj(tuple(chosen)))


# -- brute-force oracle ------------------------------------------------------


def entails_oracle(s, c, budget=None):
    """Ground-truth ``s |- c`` by enumerating every valuation.

    Raises ``DomainTooLarge`` when ``max ** (number of variables)`` exceeds
    the budget.
    """
    budget = s.config.oracle_budget if budget is None else budget
    return _oracle(s.content, canonical(c), s.domain, budget)


def satisfiable_oracle(s, budget=None):
    budget = s.config.oracle_budget if budget is None else budget
    return not _oracle(s.content, FALSE, s.domain, budget)


def _oracle(d, c, domain, budget):
    d = _unique_bound(canonical(d), itertools.count(), "d")
    c = _unique_bound(canonical(c), itertools.count(), "c")
    names = sorted(free_vars(d) | free_vars(c))
    names += sorted(_all_bound(d)) + sorted(_all_bound(c))
    size = domain.max ** len(names)
    if size > budget:
        raise DomainTooLarge(
            "%d valuations exceed the oracle budget %d" % (size, budget)
        )
    axes = {n: i for i, n in enumerate(names)}
    ndim = len(names)
    lhs = _grid_eval(d, axes, ndim, domain.max)
    rhs = _grid_eval(c, axes, ndim, domain.max)
    return not np.any(lhs & ~rhs)


def _unique_bound(c, counter, tag):
    if isinstance(c, Conj):
        return Conj(tuple(_unique_bound(x, counter, tag) for x in c.items))
    if isinstance(c, Exists):
        fresh = "%s?%s%d" % (c.var, tag, next(counter))
        return Exists(fresh, _unique_bound(rename(c.body, {c.var: fresh}), counter, tag))
    return c


def _all_bound(c):
    if isinstance(c, Conj):
        return set().union(*(_all_bound(x) for x in c.items))
    if isinstance(c, Exists):
        return {c.var} | _all_bound(c.body)
    return set()


def _grid_eval(c, axes, ndim, max_):
    if isinstance(c, Bool):
        return np.full((1,) * ndim, c.value)
    if isinstance(c, Atom):
        lv, lok = _grid_term(c.lhs, axes, ndim, max_)
        rv, rok = _grid_term(c.rhs, axes, ndim, max_)
        rel = {
            "=": np.equal, "!=": np.not_equal, "<": np.less,
            "<=": np.less_equal, ">": np.greater, ">=": np.greater_equal,
        }[c.rel]
        return lok & rok & rel(lv, rv)
    if isinstance(c, Conj):
        out = np.full((1,) * ndim, True)
        for x in c.items:
            out = out & _grid_eval(x, axes, ndim, max_)
        return out
    body = _grid_eval(c.body, axes, ndim, max_)
    return np.any(body, axis=axes[c.var], keepdims=True)


def _grid_term(t, axes, ndim, max_):
    if isinstance(t, Const):
        ok = 0 <= t.value < max_
        return np.full((1,) * ndim, t.value), np.full((1,) * ndim, ok)
    name = t.name if isinstance(t, Var) else t.var.name
    shape = [1] * ndim
    shape[axes[name]] = max_
    values = np.arange(max_, dtype=np.int64).reshape(shape)
    if isinstance(t, Add):
        values = values + t.offset
        return values, (values >= 0) & (values < max_)
    return values, np.full((1,) * ndim, True)


_VERSION_RE = re.compile(r"^(.*)#(\d+)$")


def split_version(name) -> Tuple[str, Optional[int]]:
    """``"x#3"`` -> ``("x", 3)``; unversioned names give ``(name, None)``."""
    m = _VERSION_RE.match(name)
    if not m:
        return name, None
    return m.group(1), int(m.group(2))
