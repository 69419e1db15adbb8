"""Concrete syntax for programs: parser, checks and pretty-printer.

Grammar (EBNF)::

    program    = { decl | def } process ;
    decl       = "var" IDENT [ "persistent" [ "=" INT ] ] ";" ;
    def        = "def" IDENT "(" [ IDENT { "," IDENT } ] ")" "=" process ";" ;
    process    = prefix { "||" prefix } ;
    prefix     = "0"
               | "tell" "(" constraint ")"
               | "when" constraint "do" prefix
               | "local" IDENT { "," IDENT } [ "," constraint ] "in" prefix
               | "next" [ "^" INT ] prefix
               | "rep" "[" INT "]" prefix
               | IDENT "(" [ INT { "," INT } ] ")"
               | "(" process ")" ;
    constraint = primary { "&" primary } ;
    primary    = "true" | "false" | term REL term
               | "exists" IDENT "." "(" constraint ")" | "(" constraint ")" ;
    term       = INT | IDENT [ ("+" | "-") INT ] ;
    REL        = "=" | "!=" | "<" | "<=" | ">" | ">=" ;

``||`` binds loosest; ``//`` starts a comment.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional

from . import fd
from .errors import ArityMismatch, ParseError, UnguardedRecursion, UnknownIdentifier
from .lexer import TokenStream, describe, tokenize
from .process import (
    NULL, Ask, Call, DefinitionTable, Local, Next, Null, Par, Rep, Tell,
    check_guarded, constraint_vars, next_,
)


@dataclass(frozen=True)
class Declaration:
    name: str
    persistent: bool = False
    initial: Optional[int] = None


@dataclass
class Program:
    declarations: Dict[str, Declaration] = field(default_factory=dict)
    definitions: DefinitionTable = field(default_factory=DefinitionTable)
    entry: object = NULL

    @property
    def implicit(self):
        """No declarations: every free variable is an implicit stream."""
        return not self.declarations

    @property
    def variables(self):
        if self.implicit:
            return None
        return frozenset(self.declarations)

    @property
    def streams(self):
        if self.implicit:
            out = constraint_vars(self.entry)
            for d in self.definitions.defs.values():
                out |= constraint_vars(d.body) - set(d.params)
            return frozenset(out)
        return frozenset(n for n, d in self.declarations.items() if d.persistent)

    @property
    def initial(self):
        return {n: d.initial for n, d in self.declarations.items() if d.initial is not None}


class _Parser:
    def __init__(self, text):
        self.ts = TokenStream(tokenize(text))
        self.calls = []  # (name, arity, token)

    def program(self):
        prog = Program()
        def_tokens = {}
        var_uses = []  # (vars, token, params)
        while True:
            if self.ts.at("var"):
                tok = self.ts.next()
                name = self._ident("variable name")
                persistent = bool(self.ts.accept("persistent"))
                initial = None
                if persistent and self.ts.accept("="):
                    initial = int(self.ts.expect_kind("int", "initial value").text)
                self.ts.expect(";")
                if name in prog.declarations:
                    raise ParseError("duplicate declaration of %r" % name, tok.line, tok.column)
                prog.declarations[name] = Declaration(name, persistent, initial)
            elif self.ts.at("def"):
                tok = self.ts.next()
                name = self._ident("definition name")
                self.ts.expect("(")
                params = []
                if not self.ts.at(")"):
                    params.append(self._ident("parameter"))
                    while self.ts.accept(","):
                        params.append(self._ident("parameter"))
                self.ts.expect(")")
                self.ts.expect("=")
                body = self.process()
                self.ts.expect(";")
                if name in prog.definitions:
                    raise ParseError("duplicate definition of %r" % name, tok.line, tok.column)
                if len(set(params)) != len(params):
                    raise ParseError("repeated parameter in %r" % name, tok.line, tok.column)
                prog.definitions.add(name, params, body)
                def_tokens[name] = tok
                var_uses.append((constraint_vars(body) - set(params), tok))
            else:
                break
        tok = self.ts.peek()
        prog.entry = self.process()
        var_uses.append((constraint_vars(prog.entry), tok))
        if self.ts.peek().kind != "eof":
            self.ts.fail("unexpected %s after the entry process" % describe(self.ts.peek()))
        self._check(prog, def_tokens, var_uses)
        return prog

    def _check(self, prog, def_tokens, var_uses):
        for name, arity, tok in self.calls:
            if name not in prog.definitions:
                raise UnknownIdentifier("undefined process %r" % name, tok.line, tok.column)
            expected = len(prog.definitions[name].params)
            if expected != arity:
                raise ArityMismatch(
                    "%s expects %d argument(s), got %d" % (name, expected, arity),
                    tok.line, tok.column,
                )
        if prog.declarations:
            for names, tok in var_uses:
                missing = sorted(n for n in names if n not in prog.declarations)
                if missing:
                    raise UnknownIdentifier("undeclared variable %r" % missing[0],
                                            tok.line, tok.column)
        try:
            check_guarded(prog.definitions)
        except UnguardedRecursion as e:
            tok = def_tokens[e.names[0]]
            raise UnguardedRecursion(e.names, tok.line, tok.column) from None

    def process(self):
        items = [self.prefix()]
        while self.ts.accept("||"):
            items.append(self.prefix())
        return items[0] if len(items) == 1 else Par(tuple(items))

    def prefix(self):
        ts = self.ts
        tok = ts.peek()
        if tok.kind == "int":
            if tok.text != "0":
                ts.fail("expected a process, found %s" % describe(tok), tok)
            ts.next()
            return NULL
        if ts.accept("tell"):
            ts.expect("(")
            c = self.constraint()
            ts.expect(")")
            return Tell(c)
        if ts.accept("when"):
            guard = self.constraint()
            ts.expect("do")
            return Ask(guard, self.prefix())
        if ts.accept("local"):
            names = [self._ident("local variable")]
            store = fd.TRUE
            while ts.accept(","):
                nxt = ts.peek(1)
                if ts.peek().kind == "ident" and (nxt.text in (",", "in") and nxt.kind in ("op", "kw")):
                    names.append(self._ident("local variable"))
                else:
                    store = self.constraint()
                    break
            ts.expect("in")
            return Local(tuple(names), store, self.prefix())
        if ts.accept("next"):
            count = 1
            if ts.accept("^"):
                count = int(ts.expect_kind("int", "next exponent").text)
            return next_(count, self.prefix())
        if ts.accept("rep"):
            ts.expect("[")
            ptok = ts.expect_kind("int", "replication period")
            ts.expect("]")
            if int(ptok.text) < 1:
                raise ParseError("replication period must be >= 1", ptok.line, ptok.column)
            return Rep(int(ptok.text), self.prefix())
        if tok.kind == "ident":
            name = self._ident("process name")
            ts.expect("(")
            args = []
            if not ts.at(")"):
                args.append(int(ts.expect_kind("int", "integer argument").text))
                while ts.accept(","):
                    args.append(int(ts.expect_kind("int", "integer argument").text))
            ts.expect(")")
            self.calls.append((name, len(args), tok))
            return Call(name, tuple(args))
        if ts.accept("("):
            p = self.process()
            ts.expect(")")
            return p
        ts.fail("expected a process, found %s" % describe(tok), tok)

    def constraint(self):
        c = fd.read_constraint(self.ts)
        _reject_reserved(c, self.ts)
        return _flatten(c)

    def _ident(self, what):
        tok = self.ts.expect_kind("ident", what)
        if any(ch in tok.text for ch in "#~?"):
            raise ParseError("reserved name %r" % tok.text, tok.line, tok.column)
        return tok.text


def _reject_reserved(c, ts):
    bad = sorted(n for n in fd.free_vars(c) | _bound(c) if any(ch in n for ch in "#~?"))
    if bad:
        ts.fail("reserved name %r" % bad[0])


def _bound(c):
    if isinstance(c, fd.Exists):
        return {c.var} | _bound(c.body)
    if isinstance(c, fd.Conj):
        return set().union(*(_bound(x) for x in c.items))
    return set()


def _flatten(c):
    if isinstance(c, fd.Conj):
        items = []
        for x in c.items:
            x = _flatten(x)
            items.extend(x.items if isinstance(x, fd.Conj) else [x])
        return fd.Conj(tuple(items))
    if isinstance(c, fd.Exists):
        return fd.Exists(c.var, _flatten(c.body))
    return c


def parse(text):
    """Parse a whole program (declarations, definitions, entry process)."""
    return _Parser(text).program()


def parse_process(text):
    """Parse a bare process; identifiers are left unresolved."""
    p = _Parser(text)
    proc = p.process()
    if p.ts.peek().kind != "eof":
        p.ts.fail("unexpected %s" % describe(p.ts.peek()))
    return proc


# -- pretty-printing ---------------------------------------------------------


def pretty(p):
    """Canonical one-line text of a process."""
    if isinstance(p, Par):
        return " || ".join(_prefix(q) for q in p.items)
    return _prefix(p)


def _prefix(p):
    if isinstance(p, Null):
        return "0"
    if isinstance(p, Tell):
        return "tell(%s)" % p.constraint
    if isinstance(p, Ask):
        return "when %s do %s" % (p.guard, _body(p.body))
    if isinstance(p, Local):
        head = ", ".join(p.vars)
        if p.store != fd.TRUE:
            head += ", %s" % p.store
        return "local %s in %s" % (head, _body(p.body))
    if isinstance(p, Next):
        op = "next" if p.count == 1 else "next^%d" % p.count
        return "%s %s" % (op, _body(p.body))
    if isinstance(p, Rep):
        return "rep[%d] %s" % (p.period, _body(p.body))
    if isinstance(p, Call):
        return "%s(%s)" % (p.name, ", ".join(str(a) for a in p.args))
    if isinstance(p, Par):
        return "(%s)" % pretty(p)
    raise TypeError("not a process: %r" % (p,))


def _body(p):
    return "(%s)" % pretty(p) if isinstance(p, Par) else _prefix(p)


def pretty_program(prog, multiline_defs=False):
    lines = []
    for d in prog.declarations.values():
        text = "var %s" % d.name
        if d.persistent:
            text += " persistent"
            if d.initial is not None:
                text += " = %d" % d.initial
        lines.append(text + ";")
    for name, d in prog.definitions.defs.items():
        lines.append("def %s(%s) = %s;" % (name, ", ".join(d.params), pretty(d.body)))
    lines.append(pretty(prog.entry))
    return "\n".join(lines) + "\n"
