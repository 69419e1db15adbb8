"""IMA partitions/modules and TTEthernet frames/links, compiled to processes.

A partition ``(o, tau, pi)`` with guard ``c`` and result ``x = r`` becomes::

    rep[pi] next^o when c do next^tau tell(x = r)

wrapped in ``local x in ...`` when it runs in queuing mode. Frames on a
datalink have the same shape. Modules and datalinks guard their products
with the CF verdict, the network with WF and SR, and the whole system with
the latency verdict; each verdict is computed here and embedded as the
constant ``true`` or ``false``.
"""

from dataclasses import dataclass, field, replace
from typing import Dict, List, NamedTuple, Tuple

import yaml

from . import fd, validators
from .dsl import Declaration, Program
from .engine import EngineOptions, PersistentVarPolicy, run
from .errors import InconsistentVirtualLink, ModelError, UnknownLink
from .process import Ask, Call, DefinitionTable, Local, Rep, Tell, next_, par

Link = Tuple[str, str]


class ScheduleTriple(NamedTuple):
    offset: int
    duration: int
    period: int

    def check(self, what):
        if self.period < 1 or self.duration < 1 or self.duration > self.period:
            raise ModelError("%s: schedule %s needs 1 <= duration <= period" % (what, tuple(self)))
        if self.offset < 0:
            raise ModelError("%s: negative offset" % what)
        return self


@dataclass(frozen=True)
class PartitionSpec:
    name: str
    schedule: ScheduleTriple
    guard: fd.Constraint
    result: fd.Constraint
    queuing: bool = False
    local_store: fd.Constraint = fd.TRUE


@dataclass(frozen=True)
class ModuleSpec:
    name: str
    partitions: Tuple[PartitionSpec, ...]

    def __post_init__(self):
        if not self.partitions:
            raise ModelError("module %s has no partitions" % self.name)


@dataclass(frozen=True)
class Topology:
    end_systems: Tuple[str, ...]
    switches: Tuple[str, ...]
    links: frozenset  # directed (src, dst) pairs

    @classmethod
    def from_edges(cls, end_systems, switches, edges):
        links = set()
        for a, b in edges:
            links.add((a, b))
            links.add((b, a))
        known = set(end_systems) | set(switches)
        for a, b in links:
            if a not in known or b not in known:
                raise UnknownLink("link %s->%s uses an unknown vertex" % (a, b))
        return cls(tuple(end_systems), tuple(switches), frozenset(links))

    @property
    def vertices(self):
        return self.end_systems + self.switches

    def check_path(self, path):
        """``path`` is a vertex list; returns its links."""
        if len(path) < 2:
            raise InconsistentVirtualLink("path %s is too short" % (path,))
        unknown = [v for v in path if v not in self.vertices]
        if unknown:
            raise UnknownLink("path %s: unknown vertex %s" % (path, unknown[0]))
        if path[0] not in self.end_systems or path[-1] not in self.end_systems:
            raise InconsistentVirtualLink("path %s must join two end systems" % (path,))
        links = list(zip(path, path[1:]))
        for link in links:
            if link not in self.links:
                raise UnknownLink("no dataflow link %s" % validators.link_name(link))
        return links


@dataclass(frozen=True)
class FrameHop:
    schedule: ScheduleTriple
    guard: fd.Constraint
    result: fd.Constraint


@dataclass(frozen=True)
class FrameSpec:
    name: str
    length: int
    period: int
    paths: Tuple[Tuple[Link, ...], ...]  # the virtual link, as link lists
    hops: Dict[Link, FrameHop]
    queuing: bool = False

    @property
    def offsets(self):
        return {link: hop.schedule.offset for link, hop in self.hops.items()}

    @property
    def links(self):
        return sorted(self.hops)


@dataclass(frozen=True)
class LatencyConstraint:
    name: str
    kind: str  # "elementary" | "end-to-end"
    chain: Tuple[str, ...]
    deadline: int
    stimulus_tick: int = 0
    stimulus: fd.Constraint = fd.TRUE


@dataclass
class SystemSpec:
    modules: List[ModuleSpec]
    topology: Topology
    frames: List[FrameSpec]
    max_hopdelay: int = 0
    latency: List[LatencyConstraint] = field(default_factory=list)
    streams: Dict[str, int] = field(default_factory=dict)  # name -> initial value
    inputs: Tuple[str, ...] = ()

    def __post_init__(self):
        seen = set()
        for m in self.modules:
            if m.name not in self.topology.end_systems:
                raise UnknownLink("module %s is not an end system" % m.name)
            for p in m.partitions:
                if p.name in seen:
                    raise ModelError("duplicate partition %s" % p.name)
                seen.add(p.name)
        for f in self.frames:
            if f.name in seen:
                raise ModelError("frame %s clashes with another name" % f.name)
            seen.add(f.name)
        for c in self.latency:
            for element in c.chain:
                if element not in seen:
                    raise ModelError("latency chain %s: unknown element %s" % (c.name, element))

    # lookups used by the latency walk and event metadata
    def is_partition(self, name):
        return any(p.name == name for m in self.modules for p in m.partitions)

    def partition_module(self, name):
        for m in self.modules:
            for p in m.partitions:
                if p.name == name:
                    return m.name
        raise KeyError(name)

    def frame(self, name):
        for f in self.frames:
            if f.name == name:
                return f
        raise KeyError(name)

    def frame_route(self, name, src, dst):
        """Links of the frame's path from module ``src`` to module ``dst``."""
        f = self.frame(name)
        for path in f.paths:
            if (src is None or path[0][0] == src) and (dst is None or path[-1][1] == dst):
                return list(path)
        raise ModelError("frame %s has no path %s -> %s" % (name, src, dst))

    def datalinks(self):
        """link -> [(frame, hop)] in frame declaration order."""
        out = {}
        for f in self.frames:
            for link in f.links:
                out.setdefault(link, []).append((f, f.hops[link]))
        return dict(sorted(out.items()))

    @property
    def variables(self):
        return frozenset(self.streams) | frozenset(self.inputs)

    @property
    def hyperperiod(self):
        scheds = [p.schedule for m in self.modules for p in m.partitions]
        scheds += [h.schedule for f in self.frames for h in f.hops.values()]
        return validators.maf(scheds)


# -- loading --------------------------------------------------------------------


def _constraint(text, where):
    try:
        return fd.parse_constraint(str(text))
    except Exception as e:
        raise ModelError("%s: %s" % (where, e)) from None


def _triple(value, where):
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ModelError("%s: schedule must be [offset, duration, period]" % where)
    return ScheduleTriple(*(int(v) for v in value)).check(where)


def _parse_link(text):
    a, sep, b = str(text).partition("->")
    if not sep:
        raise ModelError("link %r must read SRC->DST" % text)
    return a.strip(), b.strip()


def load_system(source):
    """Build a SystemSpec from YAML text or an already-loaded mapping."""
    data = yaml.safe_load(source) if isinstance(source, str) else source
    if not isinstance(data, dict):
        raise ModelError("system file must be a mapping")
    topo = data.get("topology") or {}
    topology = Topology.from_edges(
        topo.get("end_systems", []), topo.get("switches", []),
        [tuple(e) for e in topo.get("links", [])],
    )

    modules = []
    for mname, parts in (data.get("modules") or {}).items():
        specs = []
        for pname, p in parts.items():
            where = "partition %s" % pname
            specs.append(PartitionSpec(
                pname, _triple(p.get("schedule"), where),
                _constraint(p.get("guard", "true"), where),
                _constraint(p.get("result", "true"), where),
                bool(p.get("queuing", False)),
                _constraint(p.get("local_store", "true"), where),
            ))
        modules.append(ModuleSpec(mname, tuple(specs)))

    frames = []
    for fname, f in (data.get("frames") or {}).items():
        frames.append(_load_frame(fname, f, topology))

    network = data.get("network") or {}
    latency = []
    for c in data.get("latency") or []:
        stim = c.get("stimulus") or {}
        latency.append(LatencyConstraint(
            c["name"], c.get("kind", "end-to-end"), tuple(c["chain"]), int(c["deadline"]),
            int(stim.get("tick", 0)), _constraint(stim.get("input", "true"), c["name"]),
        ))
        if latency[-1].kind not in ("elementary", "end-to-end"):
            raise ModelError("latency %s: unknown kind %r" % (c["name"], latency[-1].kind))

    variables = data.get("variables") or {}
    streams = {str(k): int(v) for k, v in (variables.get("streams") or {}).items()}
    inputs = tuple(variables.get("inputs") or ())
    return SystemSpec(modules, topology, frames, int(network.get("max_hopdelay", 0)),
                      latency, streams, inputs)


def _load_frame(fname, f, topology):
    where = "frame %s" % fname
    length, period = int(f["length"]), int(f["period"])
    source = f.get("source", fname)
    receive = f.get("receive") or {}
    paths = []
    for vertices in f["paths"]:
        links = topology.check_path(list(vertices))
        paths.append(tuple(links))
    if len({p[0][0] for p in paths}) != 1:
        raise InconsistentVirtualLink("%s: paths do not share one sender" % where)
    offsets = {_parse_link(k): int(v) for k, v in (f.get("offsets") or {}).items()}
    on_paths = {l for p in paths for l in p}
    for link in offsets:
        if link not in topology.links:
            raise UnknownLink("%s: no dataflow link %s" % (where, validators.link_name(link)))
        if link not in on_paths:
            raise InconsistentVirtualLink(
                "%s: link %s is not on its virtual link" % (where, validators.link_name(link)))
    missing = sorted(on_paths - set(offsets))
    if missing:
        raise InconsistentVirtualLink(
            "%s: no offset for %s" % (where, validators.link_name(missing[0])))

    def recv(vertex):
        return receive.get(vertex, "%s_%s" % (vertex.lower(), fname))

    hops = {}
    for path in paths:
        for link in path:
            src = source if link[0] == path[0][0] else recv(link[0])
            dst = recv(link[1])
            sched = ScheduleTriple(offsets[link], length, period).check(where)
            hop = FrameHop(
                sched,
                fd.atom(fd.Var(src), ">", fd.Const(0)),
                fd.atom(fd.Var(dst), "=", fd.Var(src)),
            )
            if link in hops and hops[link] != hop:
                raise InconsistentVirtualLink("%s: conflicting hop on %s" % (where, link))
            hops[link] = hop
    return FrameSpec(fname, length, period, tuple(paths), dict(sorted(hops.items())),
                     bool(f.get("queuing", False)))


def load_system_file(path):
    with open(path) as fh:
        return load_system(fh.read())


# -- compilation ----------------------------------------------------------------


def result_vars(result):
    """Left-hand variables of the ``x = r`` conjuncts of a result."""
    out = []
    for a in fd.conjuncts(result):
        if isinstance(a, fd.Atom) and a.rel == "=" and isinstance(a.lhs, fd.Var):
            out.append(a.lhs.name)
    return out


def _periodic(schedule, guard, result, queuing, store=fd.TRUE):
    o, tau, pi = schedule
    body = next_(o, Ask(guard, next_(tau, Tell(result))))
    if queuing:
        body = Local(tuple(result_vars(result)), store, body)
    return Rep(pi, body)


def compile_partition(p):
    return _periodic(p.schedule, p.guard, p.result, p.queuing, p.local_store)


def _verdict(ok):
    return fd.TRUE if ok else fd.FALSE


def cf_module(m):
    return validators.contention_free(
        [p.schedule for p in m.partitions], [p.name for p in m.partitions], m.name)


def compile_module(m):
    return Ask(_verdict(cf_module(m).passed), par(*(compile_partition(p) for p in m.partitions)))


def compile_ima(sys):
    return par(*(compile_module(m) for m in sys.modules))


def compile_frame(f, link):
    hop = f.hops.get(link)
    if hop is None:
        raise UnknownLink("frame %s is not sent on %s" % (f.name, validators.link_name(link)))
    return _periodic(hop.schedule, hop.guard, hop.result, f.queuing)


def cf_datalink(link, entries):
    return validators.contention_free(
        [hop.schedule for _, hop in entries], [f.name for f, _ in entries],
        validators.link_name(link))


def compile_datalink(link, entries):
    """``entries`` is a list of ``(frame, hop)`` on ``link``."""
    return Ask(_verdict(cf_datalink(link, entries).passed),
               par(*(compile_frame(f, link) for f, _ in entries)))


def network_ok(sys, wf_mode=validators.MODULAR):
    wf = validators.well_formed(sys.frames, sys.max_hopdelay, wf_mode)
    sr = validators.simultaneous_relay(sys.frames)
    return wf.passed and sr.passed


def compile_network(sys, wf_mode=validators.MODULAR):
    links = sys.datalinks()
    return Ask(_verdict(network_ok(sys, wf_mode)),
               par(*(compile_datalink(l, e) for l, e in links.items())))


def engine_options(sys, **kw):
    return EngineOptions(variables=sys.variables or None, **kw)


def stream_policy(sys):
    return PersistentVarPolicy(frozenset(sys.streams), {})


def simulate(sys, process, ticks, inputs=None, options=None):
    """Run a compiled process and attach partition/frame events to the trace."""
    options = options or engine_options(sys)
    trace = run(process, ticks, inputs or {}, stream_policy(sys), options=options,
                initial=sys.streams)
    return attach_events(trace, sys)


def event_sources(sys):
    """variable -> event metadata for every designated result variable."""
    out = {}
    for m in sys.modules:
        for p in m.partitions:
            for v in result_vars(p.result):
                out[v] = ("partition", p.name, m.name, p.schedule.duration)
    for f in sys.frames:
        for link, hop in f.hops.items():
            for v in result_vars(hop.result):
                out[v] = ("frame", f.name, validators.link_name(link), f.length)
    return out


def attach_events(trace, sys):
    sources = event_sources(sys)
    found = {}
    for rec in trace:
        seen = set()
        for c in rec.told:
            for name in sorted(fd.free_vars(c)):
                base = fd.split_version(name)[0]
                meta = sources.get(base)
                if meta is None or not _binds(c, name) or meta[:3] in seen:
                    continue
                seen.add(meta[:3])
                kind, elem, scope, dur = meta
                start_kind, end_kind = (("partition_start", "partition_end") if kind == "partition"
                                        else ("frame_dispatch", "frame_arrival"))
                ev = {"kind": end_kind, "name": elem, "scope": scope, "duration": dur}
                found.setdefault(rec.tick, []).append(ev)
                if rec.tick - dur >= trace[0].tick:
                    found.setdefault(rec.tick - dur, []).append(
                        {"kind": start_kind, "name": elem, "scope": scope, "duration": dur})
    for i, rec in enumerate(trace):
        evs = found.get(rec.tick)
        if evs:
            evs = sorted(evs, key=lambda e: (e["kind"], e["name"], e["scope"]))
            trace[i] = replace(rec, events=tuple(rec.events) + tuple(evs))
    return trace


def _binds(c, name):
    """True when ``c`` has an atom with ``name`` alone on the left of ``=``."""
    for a in fd.conjuncts(c):
        if isinstance(a, fd.Atom) and a.rel == "=" and a.lhs == fd.Var(name):
            return True
    return False


def trace_events(trace):
    return [dict(ev, tick=rec.tick) for rec in trace for ev in rec.events]


def latency_results(sys, wf_mode=validators.MODULAR, options=None):
    """Simulate the ungated IMA || TTE from each stimulus and measure latency."""
    out = []
    ungated = par(_ungated_ima(sys), _ungated_network(sys))
    horizon_base = sys.hyperperiod
    for c in sys.latency:
        ticks = c.stimulus_tick + max(c.deadline, horizon_base) + 1
        trace = simulate(sys, ungated, ticks, {c.stimulus_tick: c.stimulus}, options)
        res, value = validators.latency_ok(trace_events(trace), c, sys)
        out.append((res, value))
    return out


def _ungated_ima(sys):
    return par(*(compile_partition(p) for m in sys.modules for p in m.partitions))


def _ungated_network(sys):
    return par(*(compile_frame(f, l) for l, e in sys.datalinks().items() for f, _ in e))


def compile_system(sys, wf_mode=validators.MODULAR, options=None):
    lt = all(r.passed for r, _ in latency_results(sys, wf_mode, options))
    return Ask(_verdict(lt), par(compile_ima(sys), compile_network(sys, wf_mode)))


def validate_system(sys, wf_mode=validators.MODULAR, latency=False, options=None):
    report = validators.Report()
    for m in sys.modules:
        report.results.append(cf_module(m))
    for link, entries in sys.datalinks().items():
        report.results.append(cf_datalink(link, entries))
    report.results.append(validators.well_formed(sys.frames, sys.max_hopdelay, wf_mode))
    report.results.append(validators.simultaneous_relay(sys.frames))
    if latency:
        report.results.extend(r for r, _ in latency_results(sys, wf_mode, options))
    return report


# -- program text ---------------------------------------------------------------


def _ident(*parts):
    return "_".join(p.replace("-", "_") for p in parts)


def to_program(sys, wf_mode=validators.MODULAR, options=None):
    """The compiled system as a program with one definition per component."""
    defs = DefinitionTable()
    module_calls = []
    for m in sys.modules:
        for p in m.partitions:
            defs.add(p.name, (), compile_partition(p))
        defs.add(m.name, (), Ask(_verdict(cf_module(m).passed),
                                 par(*(Call(p.name) for p in m.partitions))))
        module_calls.append(Call(m.name))
    defs.add("IMA", (), par(*module_calls))
    link_calls = []
    for link, entries in sys.datalinks().items():
        lname = _ident("L", *link)
        for f, _ in entries:
            defs.add(_ident("F", f.name, *link), (), compile_frame(f, link))
        defs.add(lname, (), Ask(_verdict(cf_datalink(link, entries).passed),
                                par(*(Call(_ident("F", f.name, *link)) for f, _ in entries))))
        link_calls.append(Call(lname))
    defs.add("TTE", (), Ask(_verdict(network_ok(sys, wf_mode)), par(*link_calls)))
    lt = all(r.passed for r, _ in latency_results(sys, wf_mode, options))
    defs.add("AVIO", (), Ask(_verdict(lt), par(Call("IMA"), Call("TTE"))))
    decls = {}
    for name in sorted(sys.streams):
        decls[name] = Declaration(name, True, sys.streams[name])
    for name in sys.inputs:
        decls[name] = Declaration(name, False, None)
    return Program(decls, defs, Call("AVIO"))
