"""Schedule predicates (CF, WF, SR) and trace-measured latency.

Schedules are ``(offset, duration, period)`` triples. Execution windows are
half-open and repeat every period; the phase of a window is its offset
modulo the period, so a vector is judged on its steady-state cycle.
"""

import json
from dataclasses import asdict, dataclass, field
from functools import reduce
from math import gcd
from typing import List, Optional, Tuple

import numpy as np

from .errors import ChainNotExercised

STRICT = "strict"
MODULAR = "modular"


@dataclass(frozen=True)
class Violation:
    predicate: str
    scope: str
    items: Tuple[str, ...]
    detail: str
    instant: Optional[int] = None


@dataclass
class PredicateResult:
    predicate: str
    scope: str
    passed: bool
    violations: List[Violation] = field(default_factory=list)

    def as_dict(self):
        return {
            "predicate": self.predicate,
            "scope": self.scope,
            "pass": self.passed,
            "violations": [asdict(v) for v in self.violations],
        }


@dataclass
class Report:
    results: List[PredicateResult] = field(default_factory=list)

    @property
    def passed(self):
        return all(r.passed for r in self.results)

    def violations(self, predicate=None):
        return [v for r in self.results for v in r.violations
                if predicate is None or v.predicate == predicate]

    def to_json(self):
        return json.dumps([r.as_dict() for r in self.results], indent=2)

    def summary(self):
        lines = []
        for r in self.results:
            lines.append("%-4s %-3s %s" % ("ok" if r.passed else "FAIL", r.predicate, r.scope))
            for v in r.violations:
                lines.append("       %s: %s" % (", ".join(v.items), v.detail))
        return "\n".join(lines)


def _lcm(a, b):
    return a * b // gcd(a, b)


def maf(schedules):
    """Major frame: LCM of all periods."""
    return reduce(_lcm, (s[2] for s in schedules), 1)


def _pair_conflict(a, b):
    """First shared instant of two periodic windows, or None.

    Over the pairwise hyperperiod the start differences of ``b`` relative to
    ``a`` sweep exactly the residues ``(ob - oa) mod g + n*g``, g = gcd of the
    periods, so the smallest forward and backward gaps decide overlap.
    """
    oa, ta, pa = a
    ob, tb, pb = b
    g = gcd(pa, pb)
    r = (ob - oa) % g
    if r >= ta and (g - r) >= tb:
        return None
    span = _lcm(pa, pb)
    # witness: earliest instant in [0, span) covered by both
    for k in range(span // pb):
        start = (ob % pb) + k * pb
        if (start - oa) % pa < ta:
            return start % span
    for k in range(span // pa):
        start = (oa % pa) + k * pa
        if (start - ob) % pb < tb:
            return start % span
    raise AssertionError("unreachable: gcd test and witness search disagree")


def contention_free(schedules, names=None, scope="", predicate="CF"):
    """Pairwise mutual exclusion of execution windows."""
    schedules = [tuple(s) for s in schedules]
    names = list(names) if names is not None else [str(i) for i in range(len(schedules))]
    result = PredicateResult(predicate, scope, True)
    for i in range(len(schedules)):
        for j in range(i + 1, len(schedules)):
            instant = _pair_conflict(schedules[i], schedules[j])
            if instant is not None:
                result.passed = False
                result.violations.append(Violation(
                    predicate, scope, (names[i], names[j]),
                    "windows %s and %s overlap at instant %d (mod %d)" % (
                        schedules[i], schedules[j], instant,
                        _lcm(schedules[i][2], schedules[j][2])),
                    instant,
                ))
    return result


def contention_free_all_pairs(schedules):
    """Every ordered pair, windows unfolded instance by instance over the MAF."""
    schedules = [tuple(s) for s in schedules]
    m = maf(schedules)
    for i, (oi, ti, pi) in enumerate(schedules):
        for j, (oj, tj, pj) in enumerate(schedules):
            if i == j:
                continue
            for ki in range(m // pi):
                si = (oi % pi) + ki * pi
                for kj in range(m // pj):
                    sj = (oj % pj) + kj * pj
                    # arcs on a circle of length m
                    if (sj - si) % m < ti or (si - sj) % m < tj:
                        return False
    return True


def occupancy(schedules, horizon=None):
    """Per-unit count of active windows over ``[0, horizon)`` (default MAF)."""
    schedules = [tuple(s) for s in schedules]
    horizon = maf(schedules) if horizon is None else horizon
    u = np.arange(horizon, dtype=np.int64)
    counts = np.zeros(horizon, dtype=np.int64)
    for o, t, p in schedules:
        counts += ((u - o) % p) < t
    return counts


def contention_free_oracle(schedules):
    return bool(len(schedules) < 2 or occupancy(schedules).max() <= 1)


def _hop_pairs(path):
    return list(zip(path, path[1:]))


def well_formed(frames, max_hopdelay, mode=MODULAR):
    """Successive dispatch offsets along each path are at least one hop apart.

    ``frames`` is an iterable of objects with ``name``, ``period``, ``paths``
    (lists of ``(src, dst)`` links) and ``offsets`` (link -> offset).
    """
    if mode not in (STRICT, MODULAR):
        raise ValueError("unknown WF mode %r" % mode)
    result = PredicateResult("WF", mode, True)
    for f in frames:
        seen = set()
        for path in f.paths:
            for prev, nxt in _hop_pairs(path):
                if (prev, nxt) in seen:
                    continue
                seen.add((prev, nxt))
                diff = f.offsets[nxt] - f.offsets[prev]
                gap = diff if mode == STRICT else diff % f.period
                if gap < max_hopdelay or (mode == MODULAR and gap == 0):
                    result.passed = False
                    result.violations.append(Violation(
                        "WF", f.name, (link_name(prev), link_name(nxt)),
                        "offset %d -> %d gives gap %d < hopdelay %d" % (
                            f.offsets[prev], f.offsets[nxt], gap, max_hopdelay),
                    ))
    return result


def simultaneous_relay(frames):
    """A relaying vertex dispatches a frame on all outgoing links at once."""
    result = PredicateResult("SR", "", True)
    for f in frames:
        by_source = {}
        for link in f.offsets:
            by_source.setdefault(link[0], []).append(link)
        for src in sorted(by_source):
            links = sorted(by_source[src])
            offs = {f.offsets[l] for l in links}
            if len(offs) > 1:
                result.passed = False
                result.violations.append(Violation(
                    "SR", f.name, tuple(link_name(l) for l in links),
                    "%s relays at different offsets %s" % (src, sorted(offs)),
                ))
    return result


def link_name(link):
    return "%s->%s" % link


# -- latency ------------------------------------------------------------------


def _intervals(events):
    """(kind, name, scope) -> sorted [(start, end)] from completion events."""
    out = {}
    for ev in events:
        kind = ev["kind"]
        if kind in ("partition_end", "frame_arrival"):
            base = "partition" if kind == "partition_end" else "frame"
            key = (base, ev["name"], ev["scope"])
            out.setdefault(key, []).append((ev["tick"] - ev["duration"], ev["tick"]))
    for key in out:
        out[key].sort()
    return out


def _first_after(intervals, cursor, inclusive):
    for start, end in intervals:
        if start > cursor or (inclusive and start == cursor):
            return start, end
    return None


def measure_latency(events, constraint, system):
    """Walk the chain through the trace events; returns the measured latency.

    ``system`` must offer ``partition_module(name)``, ``is_partition(name)``
    and ``frame_route(name, src_module, dst_module)``.
    """
    spans = _intervals(events)
    cursor = constraint.stimulus_tick
    first_start = None
    last_end = None
    chain = list(constraint.chain)
    inclusive = True
    for idx, element in enumerate(chain):
        if system.is_partition(element):
            module = system.partition_module(element)
            hit = _first_after(spans.get(("partition", element, module), []), cursor, inclusive)
            if hit is None:
                raise ChainNotExercised("no execution of %s after tick %d" % (element, cursor))
            if first_start is None:
                first_start = hit[0]
            cursor = last_end = hit[1]
        else:
            prev = _neighbour_module(system, chain, idx, -1)
            nxt = _neighbour_module(system, chain, idx, +1)
            for link in system.frame_route(element, prev, nxt):
                hit = _first_after(spans.get(("frame", element, link_name(link)), []),
                                   cursor, inclusive)
                if hit is None:
                    raise ChainNotExercised("no dispatch of %s on %s after tick %d"
                                            % (element, link_name(link), cursor))
                if first_start is None:
                    first_start = hit[0]
                cursor = last_end = hit[1]
                inclusive = False
        inclusive = False
    if last_end is None:
        raise ChainNotExercised("empty chain")
    if constraint.kind == "elementary":
        return last_end - first_start
    return last_end - constraint.stimulus_tick


def _neighbour_module(system, chain, idx, step):
    j = idx + step
    while 0 <= j < len(chain):
        if system.is_partition(chain[j]):
            return system.partition_module(chain[j])
        j += step
    return None


def latency_ok(events, constraint, system):
    """PredicateResult for one latency constraint, measured on ``events``."""
    result = PredicateResult("LT", constraint.name, True)
    try:
        value = measure_latency(events, constraint, system)
    except ChainNotExercised as e:
        result.passed = False
        result.violations.append(Violation("LT", constraint.name, tuple(constraint.chain), str(e)))
        return result, None
    if value > constraint.deadline:
        result.passed = False
        result.violations.append(Violation(
            "LT", constraint.name, tuple(constraint.chain),
            "%s latency %d exceeds deadline %d" % (constraint.kind, value, constraint.deadline),
        ))
    return result, value


def well_formed_paths(system, mode=MODULAR):
    return well_formed(system.frames, system.max_hopdelay, mode)


def simultaneous_relay_system(system):
    return simultaneous_relay(system.frames)
