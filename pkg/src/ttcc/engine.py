"""Two-level transition engine.

Internal transitions run in synchronous rounds: every parallel component
reduces once against the store snapshot taken at the start of the round, and
the new store is the conjunction of all contributions.  When no component can
reduce the configuration is quiescent; the future function then yields the
process for the next time unit.

Persistent variables are encoded as streams ``x#0, x#1, ...``: a read of
``x`` means its latest version, a tell of ``x = e`` binds the next version to
``e`` evaluated on the snapshot.  Only the latest binding crosses the tick
boundary; everything else in the store is dropped.
"""

import json
import os
from dataclasses import dataclass, field, replace
from typing import FrozenSet, Mapping, Optional, Tuple

from . import fd
from .errors import InconsistentStore, StepBudgetExceeded, UnguardedRecursion
from .process import (
    EMPTY_DEFS, NULL, Ask, Call, Local, Next, Null, Par, Process, Rep, Tell,
    future, prune, subst_process,
)

EAGER = "eager"
DEFERRED = "deferred"
MAX_CALL_DEPTH = 500

# Set by the test suite: assert that every round's store entails the previous.
CHECK_MONOTONE = os.environ.get("TTCC_CHECK_MONOTONE") == "1"
MONOTONE_CHECKS = 0  # assertions performed so far


@dataclass(frozen=True)
class PersistentVarPolicy:
    """Stream variables and the latest version bound for each."""

    streams: FrozenSet[str] = frozenset()
    versions: Mapping[str, int] = field(default_factory=dict)

    def is_stream(self, name):
        return name in self.streams

    def read_name(self, name):
        return "%s#%d" % (name, max(self.versions.get(name, -1), 0))

    def write_name(self, name):
        return "%s#%d" % (name, self.versions.get(name, -1) + 1)

    def bump(self, updates):
        if not updates:
            return self
        versions = dict(self.versions)
        for name, v in updates.items():
            if v <= versions.get(name, -1):
                raise AssertionError("stream version must increase: %s#%d" % (name, v))
            versions[name] = v
        return replace(self, versions=versions)


@dataclass(frozen=True)
class EngineOptions:
    ask_policy: str = EAGER
    step_budget: int = 10 ** 6
    keep_going: bool = False
    domain: fd.Domain = fd.Domain()
    solver: fd.SolverConfig = fd.DEFAULT_CONFIG
    variables: Optional[FrozenSet[str]] = None
    tick_ms: int = 1

    def __post_init__(self):
        if self.ask_policy not in (EAGER, DEFERRED):
            raise ValueError("ask policy must be 'eager' or 'deferred'")

    def store(self, content=fd.TRUE):
        return fd.Store(content, self.domain, self.variables, self.solver)


DEFAULT_OPTIONS = EngineOptions()


@dataclass(frozen=True)
class Configuration:
    process: Process
    store: fd.Store
    policy: PersistentVarPolicy = PersistentVarPolicy()
    fresh: int = 0  # counter for renaming local variables apart


class _Quiescent:
    def __repr__(self):
        return "Quiescent"


QUIESCENT = _Quiescent()


@dataclass(frozen=True)
class TickRecord:
    tick: int
    input: fd.Constraint
    quiescent_store: fd.Constraint
    told: Tuple[fd.Constraint, ...]
    residual: Process
    inconsistent: bool = False
    events: Tuple[dict, ...] = ()

    def to_json(self):
        return json.dumps({
            "tick": self.tick,
            "input": str(self.input),
            "told": [str(c) for c in self.told],
            "store": str(self.quiescent_store),
            "events": list(self.events),
            "inconsistent": self.inconsistent,
        }, sort_keys=False)


class Trace(list):
    """List of ``TickRecord`` with a JSON-lines rendering."""

    def to_jsonl(self):
        return "".join(r.to_json() + "\n" for r in self)


# -- one round ---------------------------------------------------------------


class _Round:
    def __init__(self, store, policy, defs, asks, fresh, contrib=None, shared=None):
        self.store = store
        self.policy = policy
        self.defs = defs
        self.asks = asks
        self.contrib = [] if contrib is None else contrib
        if shared is None:
            shared = {"told": [], "bumps": {}, "fresh": fresh}
        self.shared = shared

    def nested(self, store):
        return _Round(store, self.policy, self.defs, self.asks, None, [], self.shared)

    def fresh_name(self, name):
        self.shared["fresh"] += 1
        return "%s~%d" % (name.split("~")[0], self.shared["fresh"])

    def tell(self, c):
        resolved, bumps = resolve_tell(c, self.store, self.policy)
        for k, v in bumps.items():
            self.shared["bumps"][k] = max(v, self.shared["bumps"].get(k, -1))
        self.shared["told"].append(resolved)
        self.contrib.append(resolved)

    def entails(self, guard):
        return fd.entails(self.store, resolve_read(guard, self.policy))


def _idle(p, defs, asks, depth=0):
    if isinstance(p, (Null, Next)):
        return True
    if isinstance(p, (Tell, Rep)):
        return False
    if isinstance(p, Ask):
        return not asks
    if isinstance(p, Par):
        return all(_idle(q, defs, asks, depth) for q in p.items)
    if isinstance(p, Local):
        return _idle(p.body, defs, asks, depth)
    if isinstance(p, Call):
        if depth > MAX_CALL_DEPTH:
            raise UnguardedRecursion([p.name])
        return _idle(defs.instantiate(p), defs, asks, depth + 1)
    raise TypeError("not a process: %r" % (p,))


def _step(p, rnd, depth=0):
    """One reduction of ``p`` against ``rnd.store``; returns ``(p', active)``."""
    if isinstance(p, (Null, Next)):
        return p, False
    if isinstance(p, Tell):
        rnd.tell(p.constraint)
        return NULL, True
    if isinstance(p, Ask):
        if not rnd.asks:
            return p, False
        return (p.body if rnd.entails(p.guard) else NULL), True
    if isinstance(p, Par):
        out, active = [], False
        for q in p.items:
            q2, a = _step(q, rnd, depth)
            out.append(q2)
            active |= a
        return (Par(tuple(out)) if active else p), active
    if isinstance(p, Rep):
        return Par((p.body, Next(p.period, p))), True
    if isinstance(p, Local):
        if _idle(p.body, rnd.defs, rnd.asks):
            return p, False
        if not all("~" in v for v in p.vars):
            mapping = {v: rnd.fresh_name(v) for v in p.vars}
            p = Local(tuple(mapping[v] for v in p.vars), fd.rename(p.store, mapping),
                      _rename_process(p.body, mapping))
        inner = rnd.store if p.store == fd.TRUE else fd.conjoin(rnd.store, p.store)
        sub = rnd.nested(inner)
        body, _ = _step(p.body, sub, depth)
        local_store = fd.conj(p.store, *sub.contrib)
        rnd.contrib.append(local_store)
        return Local(p.vars, local_store, body), True
    if isinstance(p, Call):
        if depth > MAX_CALL_DEPTH:
            raise UnguardedRecursion([p.name])
        body = rnd.defs.instantiate(p)
        if _idle(body, rnd.defs, rnd.asks, depth):
            return p, False
        return _step(body, rnd, depth + 1)
    raise TypeError("not a process: %r" % (p,))


def _rename_process(p, mapping):
    return subst_process(p, {k: fd.Var(v) for k, v in mapping.items()})


def _round(cfg, defs, ask_policy):
    """Returns ``(cfg', told, active)`` for one synchronous round."""
    passes = (True,) if ask_policy == EAGER else (False, True)
    for asks in passes:
        rnd = _Round(cfg.store, cfg.policy, defs, asks, cfg.fresh)
        p2, active = _step(cfg.process, rnd)
        if active:
            store = cfg.store
            if rnd.contrib:
                store = fd.conjoin(store, fd.conj(*rnd.contrib))
            new = Configuration(p2, store, cfg.policy.bump(rnd.shared["bumps"]),
                                rnd.shared["fresh"])
            return new, rnd.shared["told"], True
    return cfg, [], False


def micro_step(cfg, defs=EMPTY_DEFS, ask_policy=EAGER):
    """One internal transition, or ``QUIESCENT`` if none applies."""
    new, _, active = _round(cfg, defs, ask_policy)
    if not active:
        return QUIESCENT
    if CHECK_MONOTONE:
        _assert_monotone(cfg.store, new.store)
    return new


def run_to_quiescence(cfg, defs=EMPTY_DEFS, ask_policy=EAGER, step_budget=10 ** 6):
    """Iterate rounds until quiescence; returns ``(cfg, told)``."""
    told = []
    for _ in range(step_budget):
        new, t, active = _round(cfg, defs, ask_policy)
        if not active:
            return cfg, told
        if CHECK_MONOTONE:
            _assert_monotone(cfg.store, new.store)
        told.extend(t)
        cfg = new
    raise StepBudgetExceeded("no quiescence after %d micro-steps" % step_budget)


def _assert_monotone(old, new):
    global MONOTONE_CHECKS
    MONOTONE_CHECKS += 1
    old_parts = set(fd.conjuncts(old.content))
    if old_parts <= set(fd.conjuncts(new.content)):
        return
    if not fd.entails(new, old.content):
        raise AssertionError("store lost information: %s -> %s" % (old.content, new.content))


# -- streams -----------------------------------------------------------------


def resolve_read(c, policy, bound=frozenset()):
    """Map stream variables to their latest version."""
    if not policy.streams:
        return c
    names = {n for n in fd.free_vars(c) if n not in bound and policy.is_stream(n)}
    if not names:
        return c
    return fd.rename(c, {n: policy.read_name(n) for n in names})


def resolve_tell(c, store, policy):
    """Resolve a told constraint; returns ``(constraint, {stream: new_version})``."""
    if not policy.streams:
        return c, {}
    bumps = {}
    out = _resolve_tell(c, store, policy, frozenset(), bumps)
    return out, bumps


def _resolve_tell(c, store, policy, bound, bumps):
    if isinstance(c, fd.Conj):
        return fd.Conj(tuple(_resolve_tell(x, store, policy, bound, bumps) for x in c.items))
    if isinstance(c, fd.Exists):
        return fd.Exists(c.var, _resolve_tell(c.body, store, policy, bound | {c.var}, bumps))
    if isinstance(c, fd.Atom) and c.rel == "=" and isinstance(c.lhs, fd.Var):
        name = c.lhs.name
        if name not in bound and policy.is_stream(name):
            target = policy.write_name(name)
            bumps[name] = int(target.rsplit("#", 1)[1])
            rhs = _evaluate(_read_term(c.rhs, policy, bound), store)
            return fd.Atom(fd.Var(target), "=", rhs)
    return resolve_read(c, policy, bound)


def _read_term(t, policy, bound):
    name = fd.term_var(t)
    if name is None or name in bound or not policy.is_stream(name):
        return t
    return fd.add(policy.read_name(name), t.offset if isinstance(t, fd.Add) else 0)


def _evaluate(t, store):
    """Fold a term to a constant when the snapshot fixes its variable."""
    name = fd.term_var(t)
    if name is None:
        return t
    value = store.value_of(name)
    if value is None:
        return t
    value += t.offset if isinstance(t, fd.Add) else 0
    if value not in store.domain:
        return t
    return fd.Const(value)


def carried(store, policy):
    """Latest stream bindings fixed by ``store`` as the next tick's seed."""
    atoms = []
    for name in sorted(policy.streams):
        v = policy.versions.get(name, -1)
        if v < 0:
            continue
        versioned = "%s#%d" % (name, v)
        value = store.value_of(versioned)
        if value is not None:
            atoms.append(fd.Atom(fd.Var(versioned), "=", fd.Const(value)))
    return fd.conj(*atoms)


def hide_locals(c, domain):
    """Existentially project engine-fresh names (``x~n``) out of ``c``."""
    for name in sorted(n for n in fd.free_vars(c) if "~" in n):
        c = fd.hide(name, c, domain)
    return fd.canonical(c)


# -- observable steps --------------------------------------------------------


def observable_step(cfg, input=fd.TRUE, policy=None, defs=EMPTY_DEFS,
                    options=DEFAULT_OPTIONS, tick=0):
    """One time unit: seed, run to quiescence, apply the future function."""
    if policy is not None:
        cfg = replace(cfg, policy=policy)
    resolved, bumps = resolve_tell(fd.canonical(input), cfg.store, cfg.policy)
    seeded = Configuration(cfg.process, fd.conjoin(cfg.store, resolved),
                           cfg.policy.bump(bumps), cfg.fresh)
    final, told = run_to_quiescence(seeded, defs, options.ask_policy, options.step_budget)
    residual = future(final.process, defs)
    store = final.store
    record = TickRecord(
        tick=tick,
        input=resolved,
        quiescent_store=hide_locals(store.content, store.domain),
        told=tuple(hide_locals(fd.canonical(t), store.domain) for t in told),
        residual=residual,
        inconsistent=not store.consistent,
    )
    seed = options.store(carried(store, final.policy)) if store.consistent \
        else options.store()
    nxt = Configuration(prune(residual), seed, final.policy, final.fresh)
    return nxt, record


def initial_configuration(p, options=DEFAULT_OPTIONS, streams=(), initial=None):
    """Starting configuration; ``initial`` maps streams to their value at tick 0."""
    initial = dict(initial or {})
    policy = PersistentVarPolicy(frozenset(streams) | frozenset(initial),
                                 {name: 0 for name in initial})
    atoms = [fd.Atom(fd.Var("%s#0" % n), "=", fd.Const(v)) for n, v in sorted(initial.items())]
    return Configuration(p, options.store(fd.conj(*atoms)), policy)


def run(p, ticks, inputs=None, policy=None, defs=EMPTY_DEFS, options=DEFAULT_OPTIONS,
        initial=None):
    """Simulate ``ticks`` time units; ``inputs`` maps tick -> constraint."""
    if ticks < 1:
        raise ValueError("ticks must be >= 1")
    inputs = inputs or {}
    streams = policy.streams if policy is not None else ()
    cfg = initial_configuration(p, options, streams, initial)
    if policy is not None and policy.versions:
        cfg = replace(cfg, policy=cfg.policy.bump(
            {k: v for k, v in policy.versions.items() if v > cfg.policy.versions.get(k, -1)}))
    trace = Trace()
    for t in range(ticks):
        cfg, record = observable_step(cfg, inputs.get(t, fd.TRUE), None, defs, options, t)
        trace.append(record)
        if record.inconsistent and not options.keep_going:
            err = InconsistentStore(t, record)
            err.trace = trace
            raise err
    return trace
