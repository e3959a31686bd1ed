"""Recursive-descent parser and evaluators for arithmetic expressions.

One grammar backs three consumers: coefficient arithmetic inside backend
Hamiltonian strings, analytic time expressions for waveform synthesis and
control functions, and the small linear phase expressions allowed in
parametric command definitions.

Grammar (whitespace insensitive)::

    expr   : term (('+' | '-') term)*
    term   : factor (('*' | '/') factor)*
    factor : unary ('^' factor)?          # right associative power
    unary  : ('+' | '-') unary | atom
    atom   : NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Errors carry the character offset into the source text.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


class ExpressionError(ValueError):
    """Parse or evaluation failure, annotated with a source position."""

    def __init__(self, message: str, position: int = -1):
        self.position = position
        if position >= 0:
            message = f"{message} (at offset {position})"
        super().__init__(message)


# AST nodes ---------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float
    pos: int = -1


@dataclass(frozen=True)
class Name:
    ident: str
    pos: int = -1


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Node"
    pos: int = -1


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Node"
    right: "Node"
    pos: int = -1


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple["Node", ...]
    pos: int = -1


Node = Num | Name | Unary | Binary | Call

CONSTANTS = {"pi": math.pi, "e": math.e}

FUNCTIONS = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "tanh": math.tanh,
    "sqrt": math.sqrt,
    "abs": abs,
}


# Tokenizer ---------------------------------------------------------------

_OPERATOR_CHARS = set("+-*/^(),")


@dataclass
class _Token:
    kind: str  # "num" | "name" | one of the operator characters | "end"
    text: str
    pos: int
    value: float = 0.0


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c in _OPERATOR_CHARS:
            tokens.append(_Token(c, c, i))
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            lit = text[i:j]
            try:
                val = float(lit)
            except ValueError:
                raise ExpressionError(f"bad numeric literal '{lit}'", i) from None
            tokens.append(_Token("num", lit, i, val))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(_Token("name", text[i:j], i))
            i = j
            continue
        raise ExpressionError(f"unexpected character {c!r}", i)
    tokens.append(_Token("end", "", n))
    return tokens


# Parser ------------------------------------------------------------------

class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.idx = 0

    def peek(self) -> _Token:
        return self.tokens[self.idx]

    def advance(self) -> _Token:
        tok = self.tokens[self.idx]
        self.idx += 1
        return tok

    def expect(self, kind: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            raise ExpressionError(f"expected {kind!r}, found {tok.text or 'end of input'!r}", tok.pos)
        return self.advance()

    def parse_expr(self) -> Node:
        node = self.parse_term()
        while self.peek().kind in ("+", "-"):
            op = self.advance()
            rhs = self.parse_term()
            node = Binary(op.kind, node, rhs, op.pos)
        return node

    def parse_term(self) -> Node:
        node = self.parse_factor()
        while self.peek().kind in ("*", "/"):
            op = self.advance()
            rhs = self.parse_factor()
            node = Binary(op.kind, node, rhs, op.pos)
        return node

    def parse_factor(self) -> Node:
        base = self.parse_unary()
        if self.peek().kind == "^":
            op = self.advance()
            exponent = self.parse_factor()
            return Binary("^", base, exponent, op.pos)
        return base

    def parse_unary(self) -> Node:
        tok = self.peek()
        if tok.kind in ("+", "-"):
            self.advance()
            operand = self.parse_unary()
            if tok.kind == "+":
                return operand
            return Unary("-", operand, tok.pos)
        return self.parse_atom()

    def parse_atom(self) -> Node:
        tok = self.advance()
        if tok.kind == "num":
            return Num(tok.value, tok.pos)
        if tok.kind == "name":
            if self.peek().kind == "(":
                self.advance()
                args = [self.parse_expr()]
                while self.peek().kind == ",":
                    self.advance()
                    args.append(self.parse_expr())
                self.expect(")")
                return Call(tok.text, tuple(args), tok.pos)
            return Name(tok.text, tok.pos)
        if tok.kind == "(":
            node = self.parse_expr()
            self.expect(")")
            return node
        raise ExpressionError(f"unexpected token {tok.text or 'end of input'!r}", tok.pos)


def parse(text: str) -> Node:
    """Parse ``text`` into an AST, raising :class:`ExpressionError` on bad input."""
    parser = _Parser(_tokenize(text))
    node = parser.parse_expr()
    trailing = parser.peek()
    if trailing.kind != "end":
        raise ExpressionError(f"unexpected trailing input {trailing.text!r}", trailing.pos)
    return node


# Evaluation --------------------------------------------------------------

def evaluate(node: Node, env: dict[str, float] | None = None, *,
             allow_functions: bool = True, allow_power: bool = True) -> float:
    """Numerically evaluate an AST against variable bindings in ``env``.

    ``pi`` and ``e`` resolve as constants unless shadowed by ``env``.
    """
    env = env or {}

    def rec(n: Node) -> float:
        if isinstance(n, Num):
            return n.value
        if isinstance(n, Name):
            if n.ident in env:
                return float(env[n.ident])
            if n.ident in CONSTANTS:
                return CONSTANTS[n.ident]
            raise ExpressionError(f"unknown symbol '{n.ident}'", n.pos)
        if isinstance(n, Unary):
            return -rec(n.operand)
        if isinstance(n, Binary):
            if n.op == "^" and not allow_power:
                raise ExpressionError("'^' is not allowed in this context", n.pos)
            a, b = rec(n.left), rec(n.right)
            if n.op == "+":
                return a + b
            if n.op == "-":
                return a - b
            if n.op == "*":
                return a * b
            if n.op == "/":
                if b == 0.0:
                    raise ExpressionError("division by zero", n.pos)
                return a / b
            return a ** b
        if isinstance(n, Call):
            if not allow_functions:
                raise ExpressionError(f"function calls are not allowed in this context", n.pos)
            fn = FUNCTIONS.get(n.func)
            if fn is None:
                raise ExpressionError(f"unknown function '{n.func}'", n.pos)
            if len(n.args) != 1:
                raise ExpressionError(f"'{n.func}' takes one argument", n.pos)
            try:
                out = fn(rec(n.args[0]))
            except (ValueError, OverflowError) as exc:
                raise ExpressionError(f"domain error in '{n.func}': {exc}", n.pos) from None
            return out
        raise TypeError(f"unknown node {n!r}")

    result = rec(node)
    if not math.isfinite(result):
        raise ExpressionError("expression evaluated to a non-finite value")
    return result


def to_source(node: Node) -> str:
    """Render an AST back to parseable text (fully parenthesized)."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Name):
        return node.ident
    if isinstance(node, Unary):
        return f"(-{to_source(node.operand)})"
    if isinstance(node, Binary):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    if isinstance(node, Call):
        args = ", ".join(to_source(a) for a in node.args)
        return f"{node.func}({args})"
    raise TypeError(f"unknown node {node!r}")


def free_names(node: Node) -> set[str]:
    """All identifiers the expression reads (constants included)."""
    out: set[str] = set()

    def rec(n: Node) -> None:
        if isinstance(n, Name):
            out.add(n.ident)
        elif isinstance(n, Unary):
            rec(n.operand)
        elif isinstance(n, Binary):
            rec(n.left)
            rec(n.right)
        elif isinstance(n, Call):
            for a in n.args:
                rec(a)

    rec(node)
    return out


def compile_callable(node: Node, arg_names: tuple[str, ...]):
    """Compile an AST into a fast positional-argument callable.

    Unknown names (not an argument, not a constant, not a function) fail here
    rather than at call time.
    """
    for ident in free_names(node):
        if ident not in arg_names and ident not in CONSTANTS:
            raise ExpressionError(f"unknown symbol '{ident}'")

    def render(n: Node) -> str:
        if isinstance(n, Num):
            return repr(n.value)
        if isinstance(n, Name):
            if n.ident in arg_names:
                return n.ident
            return repr(CONSTANTS[n.ident])
        if isinstance(n, Unary):
            return f"(-{render(n.operand)})"
        if isinstance(n, Binary):
            op = "**" if n.op == "^" else n.op
            return f"({render(n.left)} {op} {render(n.right)})"
        if isinstance(n, Call):
            args = ", ".join(render(a) for a in n.args)
            return f"{n.func}({args})"
        raise TypeError(f"unknown node {n!r}")

    source = f"lambda {', '.join(arg_names)}: {render(node)}"
    return eval(source, dict(FUNCTIONS))  # noqa: S307 - source generated from validated AST


# Linear forms ------------------------------------------------------------

@dataclass(frozen=True)
class LinearForm:
    """``constant + sum(coeffs[name] * value(name))`` over named parameters."""

    constant: float = 0.0
    coeffs: tuple[tuple[str, float], ...] = field(default_factory=tuple)

    def __call__(self, bindings: dict[str, float]) -> float:
        total = self.constant
        for name, c in self.coeffs:
            if name not in bindings:
                raise ExpressionError(f"unbound parameter '{name}'")
            total += c * bindings[name]
        return total

    @property
    def parameter_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.coeffs)


def linear_form(node: Node) -> LinearForm:
    """Reduce an AST to a linear form over its named parameters.

    Only ``+``, ``-``, multiplication/division by constants, numeric literals,
    ``pi``/``e`` and bare parameter names are allowed.
    """

    def rec(n: Node) -> tuple[float, dict[str, float]]:
        if isinstance(n, Num):
            return n.value, {}
        if isinstance(n, Name):
            if n.ident in CONSTANTS:
                return CONSTANTS[n.ident], {}
            return 0.0, {n.ident: 1.0}
        if isinstance(n, Unary):
            c, m = rec(n.operand)
            return -c, {k: -v for k, v in m.items()}
        if isinstance(n, Binary):
            ca, ma = rec(n.left)
            cb, mb = rec(n.right)
            if n.op in ("+", "-"):
                sign = 1.0 if n.op == "+" else -1.0
                merged = dict(ma)
                for k, v in mb.items():
                    merged[k] = merged.get(k, 0.0) + sign * v
                return ca + sign * cb, merged
            if n.op == "*":
                if not ma:
                    return ca * cb, {k: ca * v for k, v in mb.items()}
                if not mb:
                    return ca * cb, {k: cb * v for k, v in ma.items()}
                raise ExpressionError("product of two parameters is not linear", n.pos)
            if n.op == "/":
                if mb:
                    raise ExpressionError("division by a parameter is not linear", n.pos)
                if cb == 0.0:
                    raise ExpressionError("division by zero", n.pos)
                return ca / cb, {k: v / cb for k, v in ma.items()}
            raise ExpressionError(f"operator '{n.op}' is not allowed in a linear phase", n.pos)
        raise ExpressionError("function calls are not allowed in a linear phase",
                              getattr(n, "pos", -1))

    const, coeffs = rec(node)
    items = tuple(sorted((k, v) for k, v in coeffs.items() if v != 0.0))
    return LinearForm(const, items)


def parse_linear(text: str) -> LinearForm:
    return linear_form(parse(text))
