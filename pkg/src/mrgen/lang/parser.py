"""Lexer and recursive-descent parser for muLang.

Grammar (informal)::

    program  := 'fn' NAME '(' param (',' param)* ')' '->' type block
    param    := NAME ':' type
    type     := 'num' | 'bool' | 'seq'
    block    := '{' stmt* '}'
    stmt     := 'let' NAME '=' expr ';' | NAME '=' expr ';'
              | 'if' '(' expr ')' block ['else' (block | if)]
              | 'while' '(' expr ')' block
              | 'return' expr ';' | 'throw' NAME ';' | block

Binary precedence, loosest first: ``||``, ``&&``, ``== !=``,
``< <= > >=``, ``&``, ``>>``, ``+ -``, ``* / %``. A minus sign directly in
front of a numeric literal is folded into the literal.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from ..values import TypeTag
from . import ast


class DiagnosticError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.message = message
        self.line = line
        self.col = col
        super().__init__(f"{line}:{col}: {message}")


class ParseError(DiagnosticError):
    pass


KEYWORDS = {"fn", "let", "if", "else", "while", "return", "throw", "true", "false",
            "num", "bool", "seq"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<num>0[xX][0-9a-fA-F]+|\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>->|==|!=|<=|>=|&&|\|\||>>|[-+*/%<>=!&(){}\[\],;:])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # 'num', 'name', 'kw', 'op', 'eof'
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    line, line_start, i = 1, 0, 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if not m:
            raise ParseError(f"unexpected character {text[i]!r}", line, i - line_start + 1)
        kind = m.lastgroup
        col = i - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "name":
            word = m.group()
            tokens.append(Token("kw" if word in KEYWORDS else "name", word, line, col))
        elif kind in ("num", "op"):
            tokens.append(Token(kind, m.group(), line, col))
        i = m.end()
    tokens.append(Token("eof", "", line, i - line_start + 1))
    return tokens


_LEVELS = [
    {"||"},
    {"&&"},
    {"==", "!="},
    {"<", "<=", ">", ">="},
    {"&"},
    {">>"},
    {"+", "-"},
    {"*", "/", "%"},
]

_TYPES = {"num": TypeTag.NUM, "bool": TypeTag.BOOL, "seq": TypeTag.SEQ}


class Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0
        self.next_id = 0

    # -- helpers ---------------------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def _id(self) -> int:
        nid = self.next_id
        self.next_id += 1
        return nid

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("op", "kw")

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(f"expected {text!r}")
        tok = self.tok
        self.i += 1
        return tok

    def expect_name(self) -> Token:
        if self.tok.kind != "name":
            self.fail("expected an identifier")
        tok = self.tok
        self.i += 1
        return tok

    def fail(self, message: str):
        tok = self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise ParseError(f"{message}, found {found}", tok.line, tok.col)

    # -- top level ------------------------------------------------------------
    def program(self) -> ast.Function:
        start = self.expect("fn")
        nid = self._id()
        name = self.expect_name().text
        self.expect("(")
        params = [self.param()]
        while self.at(","):
            self.i += 1
            params.append(self.param())
        self.expect(")")
        self.expect("->")
        output = self.type_()
        body = self.block()
        if self.tok.kind != "eof":
            self.fail("trailing input after function body")
        return ast.Function(nid, name, tuple(params), output, body, (start.line, start.col))

    def param(self) -> tuple[str, TypeTag]:
        name = self.expect_name().text
        self.expect(":")
        return name, self.type_()

    def type_(self) -> TypeTag:
        tok = self.tok
        if tok.kind == "kw" and tok.text in _TYPES:
            self.i += 1
            return _TYPES[tok.text]
        self.fail("expected a type (num, bool, seq)")

    # -- statements -----------------------------------------------------------
    def block(self) -> ast.Block:
        start = self.expect("{")
        nid = self._id()
        body = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                self.fail("expected '}'")
            body.append(self.statement())
        self.i += 1
        return ast.Block(nid, tuple(body), (start.line, start.col))

    def statement(self):
        tok = self.tok
        pos = (tok.line, tok.col)
        if self.at("{"):
            return self.block()
        if self.at("let"):
            self.i += 1
            nid = self._id()
            name = self.expect_name().text
            self.expect("=")
            value = self.expr()
            self.expect(";")
            return ast.Let(nid, name, value, pos)
        if self.at("if"):
            return self.if_statement()
        if self.at("while"):
            self.i += 1
            nid = self._id()
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            body = self.block()
            return ast.While(nid, cond, body, pos)
        if self.at("return"):
            self.i += 1
            nid = self._id()
            value = self.expr()
            self.expect(";")
            return ast.Return(nid, value, pos)
        if self.at("throw"):
            self.i += 1
            nid = self._id()
            kind = self.expect_name().text
            self.expect(";")
            return ast.Throw(nid, kind, pos)
        if tok.kind == "name":
            self.i += 1
            nid = self._id()
            self.expect("=")
            value = self.expr()
            self.expect(";")
            return ast.Assign(nid, tok.text, value, pos)
        self.fail("expected a statement")

    def if_statement(self) -> ast.If:
        tok = self.expect("if")
        nid = self._id()
        self.expect("(")
        cond = self.expr()
        self.expect(")")
        then = self.block()
        orelse = None
        if self.at("else"):
            self.i += 1
            orelse = self.if_statement() if self.at("if") else self.block()
        return ast.If(nid, cond, then, orelse, (tok.line, tok.col))

    # -- expressions ----------------------------------------------------------
    def expr(self):
        """Parse one expression and number its nodes in preorder."""
        return self.build(self.raw_expr())

    def raw_expr(self, level: int = 0):
        if level == len(_LEVELS):
            return self.unary()
        tok = self.tok
        left = self.raw_expr(level + 1)
        while self.tok.kind == "op" and self.tok.text in _LEVELS[level]:
            op = self.tok.text
            self.i += 1
            right = self.raw_expr(level + 1)
            left = ("bin", op, left, right, (tok.line, tok.col))
        return left

    def unary(self):
        tok = self.tok
        if self.at("-"):
            self.i += 1
            if self.tok.kind == "num":
                return ("num", -_number(self.next_token()), (tok.line, tok.col))
            return ("un", "-", self.unary(), (tok.line, tok.col))
        if self.at("!"):
            self.i += 1
            return ("un", "!", self.unary(), (tok.line, tok.col))
        return self.postfix()

    def next_token(self) -> Token:
        tok = self.tok
        self.i += 1
        return tok

    def postfix(self):
        node = self.primary()
        while self.at("["):
            tok = self.next_token()
            lo = self.raw_expr()
            if self.at(":"):
                self.i += 1
                hi = self.raw_expr()
                self.expect("]")
                node = ("slice", node, lo, hi, (tok.line, tok.col))
            else:
                self.expect("]")
                node = ("index", node, lo, (tok.line, tok.col))
        return node

    def primary(self):
        tok = self.tok
        pos = (tok.line, tok.col)
        if tok.kind == "num":
            self.i += 1
            return ("num", _number(tok), pos)
        if self.at("true") or self.at("false"):
            self.i += 1
            return ("bool", tok.text == "true", pos)
        if tok.kind == "name":
            self.i += 1
            if self.at("("):
                self.i += 1
                args = []
                if not self.at(")"):
                    args.append(self.raw_expr())
                    while self.at(","):
                        self.i += 1
                        args.append(self.raw_expr())
                self.expect(")")
                return ("call", tok.text, args, pos)
            return ("var", tok.text, pos)
        if self.at("("):
            self.i += 1
            inner = self.raw_expr()
            self.expect(")")
            return inner
        if self.at("["):
            self.i += 1
            items = []
            if not self.at("]"):
                items.append(self.raw_expr())
                while self.at(","):
                    self.i += 1
                    items.append(self.raw_expr())
            self.expect("]")
            return ("seq", items, pos)
        self.fail("expected an expression")

    # expressions are parsed into tuples first so node ids come out in preorder
    def build(self, raw):
        kind = raw[0]
        nid = self._id()
        if kind == "num":
            return ast.Num(nid, raw[1], raw[2])
        if kind == "bool":
            return ast.BoolLit(nid, raw[1], raw[2])
        if kind == "var":
            return ast.Var(nid, raw[1], raw[2])
        if kind == "un":
            return ast.Unary(nid, raw[1], self.build(raw[2]), raw[3])
        if kind == "bin":
            left = self.build(raw[2])
            return ast.Binary(nid, raw[1], left, self.build(raw[3]), raw[4])
        if kind == "call":
            return ast.Call(nid, raw[1], tuple(self.build(a) for a in raw[2]), raw[3])
        if kind == "index":
            target = self.build(raw[1])
            return ast.Index(nid, target, self.build(raw[2]), raw[3])
        if kind == "slice":
            target = self.build(raw[1])
            lo = self.build(raw[2])
            return ast.Slice(nid, target, lo, self.build(raw[3]), raw[4])
        if kind == "seq":
            return ast.SeqLit(nid, tuple(self.build(a) for a in raw[1]), raw[2])
        raise AssertionError(kind)


def _number(tok: Token) -> float:
    text = tok.text
    if text[:2].lower() == "0x":
        return float(int(text, 16))
    return float(text)


def parse_function(text: str) -> ast.Function:
    if not text.strip():
        raise ParseError("empty program", 1, 1)
    return Parser(text).program()
