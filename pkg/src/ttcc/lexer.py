"""Tokenizer shared by the constraint and process parsers."""

import re
from dataclasses import dataclass

from .errors import ParseError

KEYWORDS = frozenset(
    ["true", "false", "exists", "tell", "when", "do", "local", "in", "next",
     "rep", "def", "var", "persistent"]
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<int>[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*(?:[#~?][0-9]+)?)
  | (?P<op>\|\||!=|<=|>=|[=<>&()\[\]^,;.+\-])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # "int", "ident", "kw", "op", "eof"
    text: str
    line: int
    column: int


def tokenize(text):
    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(
                "unexpected character %r" % text[pos], line, pos - line_start + 1
            )
        kind = m.lastgroup
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "int":
            tokens.append(Token("int", m.group(), line, col))
        elif kind == "ident":
            word = m.group()
            tokens.append(Token("kw" if word in KEYWORDS else "ident", word, line, col))
        elif kind == "op":
            tokens.append(Token("op", m.group(), line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class TokenStream:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self, offset=0):
        i = min(self.pos + offset, len(self.tokens) - 1)
        return self.tokens[i]

    def next(self):
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at(self, text, kind=None, offset=0):
        tok = self.peek(offset)
        if kind is not None and tok.kind != kind:
            return False
        return tok.text == text and tok.kind in ("op", "kw")

    def accept(self, text):
        if self.at(text):
            return self.next()
        return None

    def expect(self, text):
        tok = self.peek()
        if not self.at(text):
            self.fail("expected %r, found %s" % (text, describe(tok)), tok)
        return self.next()

    def expect_kind(self, kind, what):
        tok = self.peek()
        if tok.kind != kind:
            self.fail("expected %s, found %s" % (what, describe(tok)), tok)
        return self.next()

    def fail(self, message, tok=None):
        tok = tok or self.peek()
        raise ParseError(message, tok.line, tok.column)


def describe(tok):
    if tok.kind == "eof":
        return "end of input"
    return repr(tok.text)
