"""Small expression language for causal mechanisms.

Grammar (EBNF):

    expr   := ['-'] term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := number | ident | 'u' | '(' expr ')' | func | '-' factor
    func   := ('clip'|'min'|'max') '(' expr (',' expr)* ')'
            | 'case' cond ':' expr ('case' cond ':' expr)* 'default' ':' expr
    cond   := expr ('=='|'!='|'<'|'<='|'>'|'>=') expr

Identifiers name parent nodes; ``u`` refers to the owning node's own
exogenous noise.  Division by zero is guarded: it surfaces as an
:class:`EvaluationError` instead of producing infinities.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

_KEYWORDS = {"case", "default", "clip", "min", "max"}
_CMP_OPS = ("==", "!=", "<=", ">=", "<", ">")


class MechanismSyntaxError(ValueError):
    """Raised when mechanism source text does not match the grammar."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


class EvaluationError(ValueError):
    """Raised when a mechanism cannot be evaluated (e.g. division by zero)."""


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Ref:
    """Reference to a parent node, or to the node's own noise when name == 'u'."""

    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Compare:
    op: str  # one of == != < <= > >=
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    fn: str  # clip, min or max
    args: tuple["Expr", ...]


@dataclass(frozen=True)
class Case:
    arms: tuple[tuple[Compare, "Expr"], ...]
    default: "Expr"


Expr = Num | Ref | Neg | BinOp | Compare | Call | Case


# ---------------------------------------------------------------------------
# Lexer


@dataclass(frozen=True)
class _Token:
    kind: str  # number, ident, op, punct, end
    text: str
    line: int
    col: int


def _tokenize(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    i = 0
    n = len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        start_col = col
        if ch.isdigit() or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            seen_dot = False
            while j < n and (source[j].isdigit() or (source[j] == "." and not seen_dot)):
                seen_dot = seen_dot or source[j] == "."
                j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            tokens.append(_Token("number", source[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(_Token("ident", source[i:j], line, start_col))
            col += j - i
            i = j
            continue
        two = source[i : i + 2]
        if two in ("==", "!=", "<=", ">="):
            tokens.append(_Token("op", two, line, start_col))
            i += 2
            col += 2
            continue
        if ch in "+-*/<>()[],:":
            kind = "punct" if ch in "(),:[]" else "op"
            tokens.append(_Token(kind, ch, line, start_col))
            i += 1
            col += 1
            continue
        raise MechanismSyntaxError(f"unexpected character {ch!r}", line, col)
    tokens.append(_Token("end", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.peek()
        if tok.text != text:
            raise MechanismSyntaxError(
                f"expected {text!r}, found {tok.text or 'end of input'!r}", tok.line, tok.col
            )
        return self.advance()

    def parse_expr(self) -> Expr:
        if self.peek().text == "-":
            self.advance()
            node: Expr = Neg(self.parse_term())
        else:
            node = self.parse_term()
        while self.peek().text in ("+", "-"):
            op = self.advance().text
            node = BinOp(op, node, self.parse_term())
        return node

    def parse_term(self) -> Expr:
        node = self.parse_factor()
        while self.peek().text in ("*", "/"):
            op = self.advance().text
            node = BinOp(op, node, self.parse_factor())
        return node

    def parse_factor(self) -> Expr:
        tok = self.peek()
        if tok.text == "-":
            self.advance()
            return Neg(self.parse_factor())
        if tok.kind == "number":
            self.advance()
            return Num(float(tok.text))
        if tok.text == "(":
            self.advance()
            node = self.parse_expr()
            self.expect(")")
            return node
        if tok.kind == "ident":
            if tok.text in ("clip", "min", "max"):
                return self.parse_call()
            if tok.text == "case":
                return self.parse_case()
            if tok.text == "default":
                raise MechanismSyntaxError("'default' outside a case expression", tok.line, tok.col)
            self.advance()
            return Ref(tok.text)
        raise MechanismSyntaxError(
            f"expected a value, found {tok.text or 'end of input'!r}", tok.line, tok.col
        )

    def parse_call(self) -> Expr:
        fn = self.advance().text
        self.expect("(")
        args = [self.parse_expr()]
        while self.peek().text == ",":
            self.advance()
            args.append(self.parse_expr())
        tok = self.peek()
        self.expect(")")
        if fn == "clip" and len(args) != 3:
            raise MechanismSyntaxError("clip takes exactly 3 arguments", tok.line, tok.col)
        if fn in ("min", "max") and len(args) < 2:
            raise MechanismSyntaxError(f"{fn} takes at least 2 arguments", tok.line, tok.col)
        return Call(fn, tuple(args))

    def parse_cond(self) -> Compare:
        left = self.parse_expr()
        tok = self.peek()
        if tok.text not in _CMP_OPS:
            raise MechanismSyntaxError(
                f"expected a comparison operator, found {tok.text or 'end of input'!r}",
                tok.line,
                tok.col,
            )
        op = self.advance().text
        right = self.parse_expr()
        return Compare(op, left, right)

    def parse_case(self) -> Expr:
        arms: list[tuple[Compare, Expr]] = []
        while self.peek().text == "case":
            self.advance()
            cond = self.parse_cond()
            self.expect(":")
            arms.append((cond, self.parse_expr()))
        self.expect("default")
        self.expect(":")
        default = self.parse_expr()
        return Case(tuple(arms), default)


def parse(source: str) -> Expr:
    """Parse mechanism source text into an expression tree."""
    parser = _Parser(_tokenize(source))
    node = parser.parse_expr()
    tok = parser.peek()
    if tok.kind != "end":
        raise MechanismSyntaxError(f"unexpected trailing input {tok.text!r}", tok.line, tok.col)
    return node


# ---------------------------------------------------------------------------
# Pretty printer


def to_source(expr: Expr) -> str:
    """Render an expression tree back to source text.

    Parenthesizes conservatively so that parse(to_source(e)) is equivalent to e.
    """
    if isinstance(expr, Num):
        v = expr.value
        return repr(int(v)) if float(v).is_integer() and abs(v) < 1e15 else repr(v)
    if isinstance(expr, Ref):
        return expr.name
    if isinstance(expr, Neg):
        return f"(-{to_source(expr.operand)})"
    if isinstance(expr, BinOp):
        return f"({to_source(expr.left)} {expr.op} {to_source(expr.right)})"
    if isinstance(expr, Compare):
        return f"{to_source(expr.left)} {expr.op} {to_source(expr.right)}"
    if isinstance(expr, Call):
        return f"{expr.fn}({', '.join(to_source(a) for a in expr.args)})"
    if isinstance(expr, Case):
        parts = [f"case {to_source(c)}: {to_source(e)}" for c, e in expr.arms]
        parts.append(f"default: {to_source(expr.default)}")
        return "(" + " ".join(parts) + ")"
    raise TypeError(f"not an expression: {expr!r}")


# Wrapping case/neg in parens requires the factor rule to accept them after '(';
# the grammar above already does.


def references(expr: Expr) -> set[str]:
    """All identifiers referenced by the expression, including 'u'."""
    out: set[str] = set()
    for sub in walk(expr):
        if isinstance(sub, Ref):
            out.add(sub.name)
    return out


def walk(expr: Expr) -> Iterator[Expr]:
    yield expr
    if isinstance(expr, Neg):
        yield from walk(expr.operand)
    elif isinstance(expr, (BinOp, Compare)):
        yield from walk(expr.left)
        yield from walk(expr.right)
    elif isinstance(expr, Call):
        for a in expr.args:
            yield from walk(a)
    elif isinstance(expr, Case):
        for cond, arm in expr.arms:
            yield from walk(cond)
            yield from walk(arm)
        yield from walk(expr.default)


# ---------------------------------------------------------------------------
# Evaluation


def evaluate(expr: Expr, env: dict[str, np.ndarray | float]) -> np.ndarray:
    """Evaluate ``expr`` elementwise over numpy arrays (or scalars) in ``env``.

    Division by zero yields NaN internally; NaNs that survive case selection
    raise :class:`EvaluationError` at the caller's discretion via
    :func:`check_finite`.  NaN in a case condition raises immediately, since
    arm selection would otherwise be silently wrong.
    """
    value = _eval(expr, env)
    return np.asarray(value, dtype=float)


def check_finite(values: np.ndarray, node: str) -> None:
    if np.isnan(values).any():
        raise EvaluationError(f"guarded division by zero while evaluating node {node!r}")


def _eval(expr: Expr, env: dict[str, np.ndarray | float]) -> np.ndarray:
    if isinstance(expr, Num):
        return np.asarray(expr.value, dtype=float)
    if isinstance(expr, Ref):
        try:
            return np.asarray(env[expr.name], dtype=float)
        except KeyError:
            raise EvaluationError(f"unknown reference {expr.name!r}") from None
    if isinstance(expr, Neg):
        return -_eval(expr.operand, env)
    if isinstance(expr, BinOp):
        left = _eval(expr.left, env)
        right = _eval(expr.right, env)
        if expr.op == "+":
            return left + right
        if expr.op == "-":
            return left - right
        if expr.op == "*":
            return left * right
        # guarded division: mark zero denominators with NaN
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(right == 0, np.nan, left / np.where(right == 0, 1.0, right))
        return out
    if isinstance(expr, Compare):
        left = _eval(expr.left, env)
        right = _eval(expr.right, env)
        if np.isnan(left).any() or np.isnan(right).any():
            raise EvaluationError("guarded division by zero inside a case condition")
        op = expr.op
        if op == "==":
            result = left == right
        elif op == "!=":
            result = left != right
        elif op == "<":
            result = left < right
        elif op == "<=":
            result = left <= right
        elif op == ">":
            result = left > right
        else:
            result = left >= right
        return result.astype(float) if isinstance(result, np.ndarray) else np.asarray(float(result))
    if isinstance(expr, Call):
        args = [_eval(a, env) for a in expr.args]
        if expr.fn == "clip":
            return np.clip(args[0], args[1], args[2])
        stacked = np.broadcast_arrays(*args)
        if expr.fn == "min":
            return np.minimum.reduce(stacked)
        return np.maximum.reduce(stacked)
    if isinstance(expr, Case):
        result = _eval(expr.default, env)
        # apply arms in reverse so the first matching arm wins
        for cond, arm in reversed(expr.arms):
            mask = _eval(cond, env) != 0
            result = np.where(mask, _eval(arm, env), result)
        return result
    raise TypeError(f"not an expression: {expr!r}")
