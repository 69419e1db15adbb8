"""Process terms of the calculus, the future function, and static checks."""

from dataclasses import dataclass, field
from typing import Dict, Tuple

from . import fd
from .errors import UnguardedRecursion


class Process:
    __slots__ = ()


@dataclass(frozen=True)
class Null(Process):
    pass


NULL = Null()


@dataclass(frozen=True)
class Tell(Process):
    constraint: fd.Constraint


@dataclass(frozen=True)
class Ask(Process):
    guard: fd.Constraint
    body: Process


@dataclass(frozen=True)
class Par(Process):
    items: Tuple[Process, ...]

    def __post_init__(self):
        flat = []
        for p in self.items:
            if isinstance(p, Par):
                flat.extend(p.items)
            else:
                flat.append(p)
        object.__setattr__(self, "items", tuple(flat))


@dataclass(frozen=True)
class Local(Process):
    """``(local x1..xn; store) in body``; ``store`` grows as the body tells."""

    vars: Tuple[str, ...]
    store: fd.Constraint
    body: Process


@dataclass(frozen=True)
class Next(Process):
    count: int
    body: Process

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("next count must be >= 1 (use next_() for 0)")
        if isinstance(self.body, Next):
            object.__setattr__(self, "count", self.count + self.body.count)
            object.__setattr__(self, "body", self.body.body)


@dataclass(frozen=True)
class Rep(Process):
    period: int
    body: Process

    def __post_init__(self):
        if self.period < 1:
            raise ValueError("replication period must be >= 1")


@dataclass(frozen=True)
class Call(Process):
    name: str
    args: Tuple[int, ...] = ()


@dataclass(frozen=True)
class Definition:
    params: Tuple[str, ...]
    body: Process


@dataclass
class DefinitionTable:
    defs: Dict[str, Definition] = field(default_factory=dict)

    def __contains__(self, name):
        return name in self.defs

    def __getitem__(self, name):
        return self.defs[name]

    def __iter__(self):
        return iter(self.defs)

    def __len__(self):
        return len(self.defs)

    def add(self, name, params, body):
        self.defs[name] = Definition(tuple(params), body)

    def instantiate(self, call):
        d = self.defs[call.name]
        return subst_process(d.body, dict(zip(d.params, (fd.Const(a) for a in call.args))))


EMPTY_DEFS = DefinitionTable()


def par(*ps):
    ps = [p for p in ps]
    if not ps:
        return NULL
    if len(ps) == 1:
        return ps[0]
    return Par(tuple(ps))


def next_(count, body):
    """``next^count body``; ``next^0 P`` is ``P``."""
    if count == 0:
        return body
    return Next(count, body)


def local(names, body, store=fd.TRUE):
    if isinstance(names, str):
        names = (names,)
    return Local(tuple(names), store, body)


def future(p, defs=EMPTY_DEFS):
    """The residual of a quiescent process for the next time unit."""
    if isinstance(p, Next):
        return p.body if p.count == 1 else Next(p.count - 1, p.body)
    if isinstance(p, Par):
        return Par(tuple(future(q, defs) for q in p.items))
    if isinstance(p, Local):
        return Local(p.vars, p.store, future(p.body, defs))
    if isinstance(p, Call):
        return future(defs.instantiate(p), defs)
    return NULL


def prune(p):
    """Drop ``0`` components of parallel compositions (``P || 0 = P``)."""
    if isinstance(p, Par):
        items = [q for q in (prune(x) for x in p.items) if not isinstance(q, Null)]
        return par(*items)
    if isinstance(p, Local):
        body = prune(p.body)
        # an exhausted local block can never tell again
        return NULL if isinstance(body, Null) else Local(p.vars, p.store, body)
    if isinstance(p, Next):
        return Next(p.count, prune(p.body))
    return p


def subst_process(p, mapping):
    """Substitute terms for free constraint variables inside a process."""
    if not mapping:
        return p
    if isinstance(p, Tell):
        return Tell(fd.substitute(p.constraint, mapping))
    if isinstance(p, Ask):
        return Ask(fd.substitute(p.guard, mapping), subst_process(p.body, mapping))
    if isinstance(p, Par):
        return Par(tuple(subst_process(q, mapping) for q in p.items))
    if isinstance(p, Local):
        inner = {k: v for k, v in mapping.items() if k not in p.vars}
        return Local(p.vars, fd.substitute(p.store, inner), subst_process(p.body, inner))
    if isinstance(p, Next):
        return Next(p.count, subst_process(p.body, mapping))
    if isinstance(p, Rep):
        return Rep(p.period, subst_process(p.body, mapping))
    return p


def constraint_vars(p, bound=frozenset()):
    """Free constraint variables of a process (local binders excluded)."""
    if isinstance(p, Tell):
        return fd.free_vars(p.constraint) - bound
    if isinstance(p, Ask):
        return (fd.free_vars(p.guard) - bound) | constraint_vars(p.body, bound)
    if isinstance(p, Par):
        out = frozenset()
        for q in p.items:
            out |= constraint_vars(q, bound)
        return out
    if isinstance(p, Local):
        inner = bound | set(p.vars)
        return (fd.free_vars(p.store) - inner) | constraint_vars(p.body, inner)
    if isinstance(p, (Next, Rep)):
        return constraint_vars(p.body, bound)
    return frozenset()


def calls(p, guarded=False):
    """``(name, arity, under_next)`` for every identifier occurrence."""
    if isinstance(p, Call):
        return [(p.name, len(p.args), guarded)]
    if isinstance(p, Ask):
        return calls(p.body, guarded)
    if isinstance(p, Par):
        return [c for q in p.items for c in calls(q, guarded)]
    if isinstance(p, Local):
        return calls(p.body, guarded)
    if isinstance(p, Next):
        return calls(p.body, True)
    if isinstance(p, Rep):
        return calls(p.body, guarded)
    return []


def check_guarded(defs):
    """Raise ``UnguardedRecursion`` if a call cycle avoids every ``next``."""
    graph = {
        name: sorted({n for n, _, g in calls(d.body) if not g and n in defs})
        for name, d in defs.defs.items()
    }
    state = {}

    def visit(name, path):
        state[name] = "active"
        for succ in graph.get(name, ()):
            if state.get(succ) == "active":
                cycle = path[path.index(succ):] + [succ]
                raise UnguardedRecursion(cycle)
            if succ not in state:
                visit(succ, path + [succ])
        state[name] = "done"

    for name in sorted(graph):
        if name not in state:
            visit(name, [name])


def walk(p):
    yield p
    if isinstance(p, Par):
        for q in p.items:
            yield from walk(q)
    elif isinstance(p, (Ask, Local, Next, Rep)):
        yield from walk(p.body)
