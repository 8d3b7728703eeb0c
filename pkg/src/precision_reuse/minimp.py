"""Lexer and parser for MiniImp, a small C-like language over unbounded integers.

Grammar (one program per ``.mi`` file)::

    program   := { global | function }
    global    := 'int' declarator { ',' declarator } ';'
    function  := [ 'void' | 'int' ] IDENT '(' ')' block
    block     := '{' { stmt } '}'
    stmt      := 'int' declarator { ',' declarator } ';'
               | IDENT '=' 'input' '(' ')' ';'
               | IDENT ( '=' | '+=' | '-=' ) expr ';'
               | IDENT ( '++' | '--' ) ';'
               | IDENT '(' ')' ';'                      -- call
               | 'if' '(' guard ')' stmt [ 'else' stmt ]
               | 'while' '(' guard ')' stmt
               | 'assume' '(' cond ')' ';'
               | 'assert' '(' cond ')' ';'
               | 'error' '(' ')' ';'
               | ';' | block
    declarator:= IDENT [ '=' ( expr | 'input' '(' ')' ) ]
    guard     := '*' | cond                            -- '*' branches nondeterministically
    cond      := conj { '||' conj }
    conj      := unary { '&&' unary }
    unary     := '!' unary | 'true' | 'false' | expr cmp expr | '(' cond ')'
    expr      := term { ('+' | '-') term }
    term      := factor { '*' factor }                 -- at most one non-constant factor
    factor    := INT | IDENT | '-' factor | '(' expr ')'

Variables live in one program-wide namespace.  Globals start at 0; locals
declared without an initializer start unknown.  Calls take no arguments and
must not be recursive.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Union

from .formula import FALSE, TRUE, Formula, LinExpr, NonlinearError, compare, conj, disj, neg


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"{line}:{column}: {message}" if line else message)
        self.message = message
        self.line = line
        self.column = column


@dataclass(frozen=True)
class SourceProgram:
    text: str
    name: str = "program"
    revision_id: str = ""


# ---------------------------------------------------------------- AST nodes


@dataclass(frozen=True)
class Nondet:
    """The ``*`` guard."""


NONDET = Nondet()
Guard = Union[Formula, Nondet]


@dataclass
class Declare:
    name: str
    init: LinExpr | None = None
    havoc: bool = False
    line: int = 0


@dataclass
class Assign:
    var: str
    expr: LinExpr
    line: int = 0


@dataclass
class Input:
    var: str
    line: int = 0


@dataclass
class Call:
    name: str
    line: int = 0


@dataclass
class If:
    cond: Guard
    then: "Stmt"
    orelse: "Stmt | None" = None
    line: int = 0


@dataclass
class While:
    cond: Guard
    body: "Stmt"
    line: int = 0


@dataclass
class Assume:
    cond: Formula
    line: int = 0


@dataclass
class Assert:
    cond: Formula
    line: int = 0


@dataclass
class Error:
    line: int = 0


@dataclass
class Block:
    stmts: list["Stmt"] = field(default_factory=list)
    line: int = 0


Stmt = Union[Declare, Assign, Input, Call, If, While, Assume, Assert, Error, Block]


@dataclass
class Function:
    name: str
    body: Block
    line: int = 0


@dataclass
class Ast:
    globals: list[Declare]
    functions: list[Function]
    name: str = "program"

    def function(self, name: str) -> Function:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)


# ------------------------------------------------------------------- lexer

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*|/\*.*?\*/)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>==|!=|<=|>=|&&|\|\||\+\+|--|\+=|-=|[-+*<>=!(){};,])
    """,
    re.VERBOSE | re.DOTALL,
)

KEYWORDS = {"int", "void", "if", "else", "while", "assume", "assert", "error", "input", "true", "false"}


@dataclass(frozen=True)
class Token:
    kind: str  # 'int', 'ident', 'kw', 'op', 'eof'
    text: str
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        lexeme = m.group()
        if kind not in ("ws", "comment"):
            if kind == "ident" and lexeme in KEYWORDS:
                kind = "kw"
            tokens.append(Token(kind, lexeme, line, pos - line_start + 1))
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            line_start = pos + lexeme.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# ------------------------------------------------------------------ parser


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.pos + k, len(self.tokens) - 1)]

    def error(self, message: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.tok
        return ParseError(message, tok.line, tok.column)

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("op", "kw")

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.pos += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        tok = self.tok
        self.pos += 1
        return tok

    def ident(self) -> Token:
        if self.tok.kind != "ident":
            raise self.error(f"expected identifier, found {self.tok.text or 'end of input'!r}")
        tok = self.tok
        self.pos += 1
        return tok

    # program structure

    def program(self) -> tuple[list[Declare], list[Function]]:
        globals_: list[Declare] = []
        functions: list[Function] = []
        if self.tok.kind == "eof":
            raise self.error("empty program")
        while self.tok.kind != "eof":
            is_function = (
                (self.tok.kind == "ident" and self.peek().text == "(")
                or (self.at("void") or self.at("int")) and self.peek().kind == "ident" and self.peek(2).text == "("
            )
            if is_function:
                functions.append(self.function())
            elif self.at("int"):
                globals_.extend(self.declaration())
            else:
                raise self.error(f"expected declaration or function, found {self.tok.text!r}")
        return globals_, functions

    def function(self) -> Function:
        if self.at("void") or self.at("int"):
            self.pos += 1
        name = self.ident()
        self.expect("(")
        self.expect(")")
        if not self.at("{"):
            raise self.error("expected function body")
        return Function(name.text, self.block(), name.line)

    def declaration(self) -> list[Declare]:
        start = self.expect("int")
        decls = []
        while True:
            name = self.ident()
            if self.accept("="):
                if self.at("input"):
                    self.input_call()
                    decls.append(Declare(name.text, havoc=True, line=name.line))
                else:
                    decls.append(Declare(name.text, self.expr(), line=name.line))
            else:
                decls.append(Declare(name.text, line=name.line))
            if not self.accept(","):
                break
        self.expect(";")
        assert start
        return decls

    def input_call(self) -> None:
        self.expect("input")
        self.expect("(")
        self.expect(")")

    def block(self) -> Block:
        start = self.expect("{")
        stmts: list[Stmt] = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                raise self.error("unterminated block")
            stmts.extend(self.statement())
        self.expect("}")
        return Block(stmts, start.line)

    def statement(self) -> list[Stmt]:
        tok = self.tok
        if self.at("{"):
            return [self.block()]
        if self.accept(";"):
            return []
        if self.at("int"):
            return list(self.declaration())
        if self.accept("if"):
            self.expect("(")
            cond = self.guard()
            self.expect(")")
            then = self.single()
            orelse = self.single() if self.accept("else") else None
            return [If(cond, then, orelse, tok.line)]
        if self.accept("while"):
            self.expect("(")
            cond = self.guard()
            self.expect(")")
            return [While(cond, self.single(), tok.line)]
        if self.accept("assume") or self.accept("assert"):
            self.expect("(")
            cond = self.cond()
            self.expect(")")
            self.expect(";")
            return [Assume(cond, tok.line) if tok.text == "assume" else Assert(cond, tok.line)]
        if self.accept("error"):
            self.expect("(")
            self.expect(")")
            self.expect(";")
            return [Error(tok.line)]
        if tok.kind == "ident":
            name = self.ident().text
            if self.accept("("):
                self.expect(")")
                self.expect(";")
                return [Call(name, tok.line)]
            if self.accept("++") or self.accept("--"):
                delta = 1 if self.tokens[self.pos - 1].text == "++" else -1
                self.expect(";")
                return [Assign(name, LinExpr.var(name) + delta, tok.line)]
            if self.accept("+=") or self.accept("-="):
                sign = 1 if self.tokens[self.pos - 1].text == "+=" else -1
                rhs = self.expr()
                self.expect(";")
                return [Assign(name, LinExpr.var(name) + rhs.scale(sign), tok.line)]
            self.expect("=")
            if self.at("input"):
                self.input_call()
                self.expect(";")
                return [Input(name, tok.line)]
            rhs = self.expr()
            self.expect(";")
            return [Assign(name, rhs, tok.line)]
        raise self.error(f"unexpected {tok.text or 'end of input'!r}")

    def single(self) -> Stmt:
        stmts = self.statement()
        if len(stmts) == 1:
            return stmts[0]
        return Block(stmts, self.tok.line)

    # conditions

    def guard(self) -> Guard:
        if self.at("*") and self.peek().text == ")":
            self.pos += 1
            return NONDET
        return self.cond()

    def cond(self) -> Formula:
        parts = [self.conj()]
        while self.accept("||"):
            parts.append(self.conj())
        return disj(*parts)

    def conj(self) -> Formula:
        parts = [self.unary()]
        while self.accept("&&"):
            parts.append(self.unary())
        return conj(*parts)

    def unary(self) -> Formula:
        if self.accept("!"):
            return neg(self.unary())
        if self.accept("true"):
            return TRUE
        if self.accept("false"):
            return FALSE
        if self.at("("):
            # either a parenthesized condition or an arithmetic comparison
            mark = self.pos
            try:
                return self.comparison()
            except ParseError:
                self.pos = mark
            self.expect("(")
            inner = self.cond()
            self.expect(")")
            return inner
        return self.comparison()

    def comparison(self) -> Formula:
        lhs = self.expr()
        tok = self.tok
        if tok.text not in ("==", "!=", "<=", ">=", "<", ">"):
            raise self.error(f"expected comparison operator, found {tok.text or 'end of input'!r}")
        self.pos += 1
        rhs = self.expr()
        return compare(lhs, tok.text, rhs)

    # arithmetic

    def expr(self) -> LinExpr:
        value = self.term()
        while self.at("+") or self.at("-"):
            op = self.tok.text
            self.pos += 1
            rhs = self.term()
            value = value + rhs if op == "+" else value - rhs
        return value

    def term(self) -> LinExpr:
        value = self.factor()
        while self.at("*"):
            tok = self.tok
            self.pos += 1
            rhs = self.factor()
            try:
                value = value * rhs
            except NonlinearError as exc:
                raise self.error(str(exc), tok) from None
        return value

    def factor(self) -> LinExpr:
        tok = self.tok
        if tok.kind == "int":
            self.pos += 1
            return LinExpr.constant(int(tok.text))
        if tok.kind == "ident":
            self.pos += 1
            if self.at("("):
                raise self.error("calls are statements, not expressions", tok)
            return LinExpr.var(tok.text)
        if self.accept("-"):
            return -self.factor()
        if self.accept("("):
            inner = self.expr()
            self.expect(")")
            return inner
        if self.at("input"):
            raise self.error("input() may only appear as the whole right-hand side of an assignment")
        raise self.error(f"expected expression, found {tok.text or 'end of input'!r}")


def _walk(stmt: Stmt):
    yield stmt
    if isinstance(stmt, Block):
        for s in stmt.stmts:
            yield from _walk(s)
    elif isinstance(stmt, If):
        yield from _walk(stmt.then)
        if stmt.orelse is not None:
            yield from _walk(stmt.orelse)
    elif isinstance(stmt, While):
        yield from _walk(stmt.body)


def _used_variables(stmt: Stmt) -> set[str]:
    from .formula import variables

    used: set[str] = set()
    for s in _walk(stmt):
        if isinstance(s, Assign):
            used |= {s.var} | s.expr.variables
        elif isinstance(s, Input):
            used.add(s.var)
        elif isinstance(s, Declare) and s.init is not None:
            used |= s.init.variables
        elif isinstance(s, (If, While)) and not isinstance(s.cond, Nondet):
            used |= variables(s.cond)
        elif isinstance(s, (Assume, Assert)):
            used |= variables(s.cond)
    return used


def call_graph(ast: Ast) -> dict[str, list[str]]:
    return {f.name: [s.name for s in _walk(f.body) if isinstance(s, Call)] for f in ast.functions}


def check_acyclic(ast: Ast) -> None:
    graph = call_graph(ast)
    state: dict[str, int] = {}

    def visit(name: str, stack: list[str]) -> None:
        state[name] = 1
        for callee in graph.get(name, []):
            if state.get(callee) == 1:
                cycle = " -> ".join(stack[stack.index(callee):] + [callee])
                raise ParseError(f"recursion detected: {cycle}")
            if callee not in state:
                visit(callee, stack + [callee])
        state[name] = 2

    for f in ast.functions:
        if f.name not in state:
            visit(f.name, [f.name])


def declared_variables(ast: Ast) -> set[str]:
    names = {d.name for d in ast.globals}
    for f in ast.functions:
        names |= {s.name for s in _walk(f.body) if isinstance(s, Declare)}
    return names


def parse_program(src: SourceProgram | str) -> Ast:
    """Parse MiniImp source text into an :class:`Ast`.

    Raises :class:`ParseError` on syntax errors, undeclared variables, unknown
    or duplicate functions, a missing ``main``, and recursive calls.
    """
    if isinstance(src, str):
        src = SourceProgram(src)
    globals_, functions = _Parser(tokenize(src.text)).program()
    ast = Ast(globals_, functions, src.name)
    seen: set[str] = set()
    for f in functions:
        if f.name in seen:
            raise ParseError(f"duplicate function {f.name!r}", f.line)
        seen.add(f.name)
    if "main" not in seen:
        raise ParseError("no main function")
    for f in functions:
        for s in _walk(f.body):
            if isinstance(s, Call) and s.name not in seen:
                raise ParseError(f"call to undefined function {s.name!r}", s.line)
    check_acyclic(ast)
    declared = declared_variables(ast)
    for f in functions:
        missing = _used_variables(f.body) - declared
        if missing:
            raise ParseError(f"undeclared variable(s) in {f.name}: {', '.join(sorted(missing))}", f.line)
    return ast
