"""Command-line entry point: ``ttcc check|validate|run|replay|compile``."""

import argparse
import json
import os
import sys
from dataclasses import dataclass
from typing import Optional

from . import avionics, dsl, fd, validators
from .engine import DEFERRED, EAGER, EngineOptions, PersistentVarPolicy, run
from .errors import DomainTooLarge, InconsistentStore, SourceError, TTCCError, UnguardedRecursion


@dataclass
class RunConfig:
    ticks: int = 1
    env: Optional[str] = None
    ask_policy: str = EAGER
    wf: str = validators.MODULAR
    max: int = fd.DEFAULT_MAX
    step_budget: int = 10 ** 6
    out: Optional[str] = None
    keep_going: bool = False

    def __post_init__(self):
        if self.ticks < 1:
            raise ValueError("--ticks must be >= 1")
        if self.env is not None and not os.path.exists(self.env):
            raise FileNotFoundError(self.env)

    def options(self, variables=None):
        return EngineOptions(
            ask_policy=self.ask_policy, step_budget=self.step_budget,
            keep_going=self.keep_going, domain=fd.Domain(self.max), variables=variables,
        )


def is_system_file(path):
    return path.endswith((".sys", ".yaml", ".yml"))


def read_env(path):
    """``tick: constraint`` lines; repeated ticks are conjoined."""
    inputs = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("//")[0].strip()
            if not text or text.startswith("#"):
                continue
            tick, sep, rest = text.partition(":")
            if not sep or not tick.strip().isdigit():
                raise SourceError("expected 'tick: constraint'", lineno, 1)
            try:
                c = fd.parse_constraint(rest)
            except SourceError as e:
                raise type(e)(e.message, lineno, len(tick) + 1 + (e.column or 0)) from None
            t = int(tick)
            inputs[t] = fd.conj(inputs[t], c) if t in inputs else c
    return inputs


def _diag(path, err):
    if isinstance(err, (SourceError, UnguardedRecursion)) and err.line is not None:
        return "%s:%s" % (path, err)  # the error text already starts with line:col
    return "%s: %s: %s" % (path, type(err).__name__, err)


def _read(path):
    with open(path) as fh:
        return fh.read()


def _emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_check(path, out=None):
    out = out or sys.stdout
    try:
        if is_system_file(path):
            avionics.load_system_file(path)
        else:
            dsl.parse(_read(path))
    except (TTCCError, OSError) as e:
        print(_diag(path, e), file=out)
        return 1
    print("%s: ok" % path, file=out)
    return 0


def cmd_validate(path, wf=validators.MODULAR, out=None, config=None):
    config = config or RunConfig(wf=wf)
    try:
        system = avionics.load_system_file(path)
        report = avionics.validate_system(system, wf, latency=bool(system.latency),
                                          options=avionics.engine_options(
                                              system, domain=fd.Domain(config.max)))
    except (TTCCError, OSError) as e:
        print(_diag(path, e), file=sys.stderr)
        return 1
    print(report.summary(), file=sys.stderr)
    _emit(report.to_json() + "\n", out)
    return 0 if report.passed else 1


def cmd_run(path, config):
    try:
        inputs = read_env(config.env) if config.env else {}
        if is_system_file(path):
            system = avionics.load_system_file(path)
            options = avionics.engine_options(
                system, ask_policy=config.ask_policy, step_budget=config.step_budget,
                keep_going=config.keep_going, domain=fd.Domain(config.max))
            process = avionics.compile_system(system, config.wf, options)
            trace = _simulate(lambda: avionics.simulate(system, process, config.ticks,
                                                        inputs, options))
        else:
            prog = dsl.parse(_read(path))
            system = None
            trace = _simulate(lambda: run(
                prog.entry, config.ticks, inputs, PersistentVarPolicy(prog.streams, {}),
                prog.definitions, config.options(prog.variables), prog.initial))
    except (TTCCError, OSError) as e:
        print(_diag(path, e), file=sys.stderr)
        return 1
    _emit(trace.to_jsonl(), config.out)
    status = 0
    if any(r.inconsistent for r in trace):
        bad = next(r.tick for r in trace if r.inconsistent)
        print("%s: inconsistent store at tick %d" % (path, bad), file=sys.stderr)
        status = 1
    if getattr(trace, "aborted", False):
        status = 1
    if system is not None and system.latency:
        events = avionics.trace_events(trace)
        for c in system.latency:
            res, value = validators.latency_ok(events, c, system)
            shown = "-" if value is None else str(value)
            print("%-4s LT  %s: %s latency %s, deadline %d"
                  % ("ok" if res.passed else "FAIL", c.name, c.kind, shown, c.deadline),
                  file=sys.stderr)
            if not res.passed:
                status = 1
    return status


def _simulate(thunk):
    try:
        return thunk()
    except InconsistentStore as e:
        trace = e.trace
        trace.aborted = True
        return trace


def replay_trace(lines, max_value=fd.DEFAULT_MAX, budget=None):
    """Re-check ``store |- told`` for each record; returns (failures, stats)."""
    domain = fd.Domain(max_value)
    failures = []
    stats = {"records": 0, "checks": 0, "oracle": 0, "exact": 0}
    for line in lines:
        if not line.strip():
            continue
        rec = json.loads(line)
        stats["records"] += 1
        store = fd.Store(fd.parse_constraint(rec["store"]), domain)
        if rec.get("inconsistent"):
            continue
        for text in rec["told"]:
            c = fd.parse_constraint(text)
            stats["checks"] += 1
            sliced = fd.Store(fd.relevant_slice(store, fd.free_vars(c)), domain)
            try:
                ok = fd.entails_oracle(sliced, c, budget)
                stats["oracle"] += 1
            except DomainTooLarge:
                ok = fd.entails(store, c)
                stats["exact"] += 1
            if not ok:
                failures.append((rec["tick"], text))
    return failures, stats


def cmd_replay(path, max_value=fd.DEFAULT_MAX):
    try:
        with open(path) as fh:
            failures, stats = replay_trace(fh, max_value)
    except (TTCCError, OSError, ValueError, KeyError) as e:
        print("%s: %s: %s" % (path, type(e).__name__, e), file=sys.stderr)
        return 1
    for tick, text in failures:
        print("%s: tick %d: store does not entail %s" % (path, tick, text), file=sys.stderr)
    print("%s: %d records, %d checks (%d by enumeration, %d by exact search), %d failures"
          % (path, stats["records"], stats["checks"], stats["oracle"], stats["exact"],
             len(failures)), file=sys.stderr)
    return 0 if not failures else 1


def cmd_compile(path, wf=validators.MODULAR, out=None):
    try:
        system = avionics.load_system_file(path)
        prog = avionics.to_program(system, wf)
    except (TTCCError, OSError) as e:
        print(_diag(path, e), file=sys.stderr)
        return 1
    _emit(dsl.pretty_program(prog), out)
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="ttcc", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="parse and check a program or system file")
    p.add_argument("file")

    p = sub.add_parser("validate", help="run the schedule predicates of a system file")
    p.add_argument("file")
    p.add_argument("--wf", choices=[validators.MODULAR, validators.STRICT], default=validators.MODULAR)
    p.add_argument("--max", type=int, default=fd.DEFAULT_MAX)
    p.add_argument("--out")

    p = sub.add_parser("run", help="simulate a program or compiled system")
    p.add_argument("file")
    p.add_argument("--ticks", type=int, default=1)
    p.add_argument("--env")
    p.add_argument("--ask-policy", choices=[EAGER, DEFERRED], default=EAGER)
    p.add_argument("--wf", choices=[validators.MODULAR, validators.STRICT], default=validators.MODULAR)
    p.add_argument("--max", type=int, default=fd.DEFAULT_MAX)
    p.add_argument("--step-budget", type=int, default=10 ** 6)
    p.add_argument("--out")
    p.add_argument("--keep-going", action="store_true")

    p = sub.add_parser("replay", help="re-check a trace's stores against its told lists")
    p.add_argument("file")
    p.add_argument("--max", type=int, default=fd.DEFAULT_MAX)

    p = sub.add_parser("compile", help="print a system file as a program")
    p.add_argument("file")
    p.add_argument("--wf", choices=[validators.MODULAR, validators.STRICT], default=validators.MODULAR)
    p.add_argument("--out")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "check":
        return cmd_check(args.file)
    if args.command == "validate":
        return cmd_validate(args.file, args.wf, args.out, RunConfig(wf=args.wf, max=args.max))
    if args.command == "run":
        try:
            config = RunConfig(args.ticks, args.env, args.ask_policy, args.wf, args.max,
                               args.step_budget, args.out, args.keep_going)
        except (ValueError, OSError) as e:
            print("ttcc run: %s" % e, file=sys.stderr)
            return 2
        return cmd_run(args.file, config)
    if args.command == "replay":
        return cmd_replay(args.file, args.max)
    if args.command == "compile":
        return cmd_compile(args.file, args.wf, args.out)
    return 2


if __name__ == "__main__":
    sys.exit(main())
