"""Small closed expression language for time-dependent coefficients.

Grammar (infix, case-sensitive):

    expr  := term (('+' | '-') term)*
    term  := unary (('*' | '/') unary)*
    unary := '-' unary | power
    power := atom ('^' unary)?          # right-associative
    atom  := NUMBER | 't' | 'pi' | 'e'
           | func '(' expr (',' expr)* ')'
           | '(' expr ')'

Functions: sin, cos, abs, exp, log, sqrt (unary), min, max (binary).
Precedence: ^  >  unary -  >  * /  >  + -.

Parsing produces an AST plus a flat RPN program executed by the active
numeric backend, so a delay expression evaluated inside the integration
kernel and the same expression evaluated from Python give identical bits.
"""

from dataclasses import dataclass
import math

import numpy as np

from . import _ops
from ._backend import eval_value, eval_values
from .errors import ExprSyntaxError

CONSTANTS = {"pi": math.pi, "e": math.e}

_PREC_ADD = 1
_PREC_MUL = 2
_PREC_NEG = 3
_PREC_POW = 4
_PREC_ATOM = 5


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class TVar:
    pass


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Neg:
    child: object


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: object
    right: object


@dataclass(frozen=True)
class Func:
    name: str
    args: tuple


@dataclass(frozen=True)
class Program:
    """Compiled RPN form: parallel op/arg arrays plus a constant pool."""

    ops: np.ndarray
    args: np.ndarray
    consts: np.ndarray
    stack_need: int


@dataclass(frozen=True)
class TimeExpr:
    """A parsed scalar function of t."""

    source: str
    root: object
    program: Program

    def __call__(self, t):
        return eval_value(self.program, float(t), self.source)

    def eval(self, t):
        return self(t)

    def eval_array(self, ts):
        """Evaluate on a 1-D array of times."""
        ts = np.ascontiguousarray(ts, dtype=np.float64)
        return eval_values(self.program, ts, self.source)

    def to_source(self):
        return to_source(self.root)

    def __repr__(self):
        return f"TimeExpr({self.source!r})"


# ---------------------------------------------------------------------------
# Lexer

_BINOP_CHARS = "+-*/^"


class _Token:
    __slots__ = ("kind", "text", "pos", "value")

    def __init__(self, kind, text, pos, value=None):
        self.kind = kind  # num | ident | op | lparen | rparen | comma | end
        self.text = text
        self.pos = pos
        self.value = value


def _tokenize(source):
    tokens = []
    i = 0
    n = len(source)
    while i < n:
        c = source[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            while j < n and source[j].isdigit():
                j += 1
            if j < n and source[j] == ".":
                j += 1
                while j < n and source[j].isdigit():
                    j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            text = source[i:j]
            try:
                value = float(text)
            except ValueError:
                raise ExprSyntaxError(f"bad number {text!r}", i, source)
            tokens.append(_Token("num", text, i, value))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(_Token("ident", source[i:j], i))
            i = j
            continue
        if c in _BINOP_CHARS:
            tokens.append(_Token("op", c, i))
            i += 1
            continue
        if c == "(":
            tokens.append(_Token("lparen", c, i))
            i += 1
            continue
        if c == ")":
            tokens.append(_Token("rparen", c, i))
            i += 1
            continue
        if c == ",":
            tokens.append(_Token("comma", c, i))
            i += 1
            continue
        raise ExprSyntaxError(f"unexpected character {c!r}", i, source)
    tokens.append(_Token("end", "", n))
    return tokens


# ---------------------------------------------------------------------------
# Parser (recursive descent)


class _Parser:
    def __init__(self, source):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message, tok=None):
        tok = tok or self.peek()
        raise ExprSyntaxError(message, tok.pos, self.source)

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            self.fail(f"unexpected {tok.text!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        node = self.atom()
        tok = self.peek()
        if tok.kind == "op" and tok.text == "^":
            self.advance()
            # exponent may carry a unary minus: 2^-3
            node = BinOp("^", node, self.unary())
        return node

    def atom(self):
        tok = self.advance()
        if tok.kind == "num":
            return Num(tok.value)
        if tok.kind == "ident":
            name = tok.text
            if self.peek().kind == "lparen":
                if name not in _ops.FUNCTION_OPS:
                    self.fail(f"unknown function {name!r}", tok)
                self.advance()
                args = [self.expr()]
                while self.peek().kind == "comma":
                    self.advance()
                    args.append(self.expr())
                closing = self.advance()
                if closing.kind != "rparen":
                    self.fail("expected ')'", closing)
                arity = _ops.FUNCTION_OPS[name][1]
                if len(args) != arity:
                    plural = "argument" if arity == 1 else "arguments"
                    self.fail(f"{name} expects {arity} {plural}", tok)
                return Func(name, tuple(args))
            if name == "t":
                return TVar()
            if name in CONSTANTS:
                return Const(name)
            self.fail(f"unknown identifier {name!r}", tok)
        if tok.kind == "lparen":
            node = self.expr()
            closing = self.advance()
            if closing.kind != "rparen":
                self.fail("expected ')'", closing)
            return node
        if tok.kind == "end":
            self.fail("unexpected end of input", tok)
        self.fail(f"unexpected {tok.text!r}", tok)


# ---------------------------------------------------------------------------
# Compilation to RPN


def _emit(node, ops, args, consts):
    if isinstance(node, Num):
        ops.append(_ops.OP_CONST)
        args.append(len(consts))
        consts.append(node.value)
    elif isinstance(node, Const):
        ops.append(_ops.OP_CONST)
        args.append(len(consts))
        consts.append(CONSTANTS[node.name])
    elif isinstance(node, TVar):
        ops.append(_ops.OP_T)
        args.append(0)
    elif isinstance(node, Neg):
        _emit(node.child, ops, args, consts)
        ops.append(_ops.OP_NEG)
        args.append(0)
    elif isinstance(node, BinOp):
        _emit(node.left, ops, args, consts)
        _emit(node.right, ops, args, consts)
        opcode = {
            "+": _ops.OP_ADD,
            "-": _ops.OP_SUB,
            "*": _ops.OP_MUL,
            "/": _ops.OP_DIV,
            "^": _ops.OP_POW,
        }[node.op]
        ops.append(opcode)
        args.append(0)
    elif isinstance(node, Func):
        for a in node.args:
            _emit(a, ops, args, consts)
        ops.append(_ops.FUNCTION_OPS[node.name][0])
        args.append(0)
    else:  # pragma: no cover
        raise TypeError(f"unknown AST node {node!r}")


def compile_program(root):
    ops, args, consts = [], [], []
    _emit(root, ops, args, consts)
    depth = 0
    peak = 0
    for op in ops:
        if op in (_ops.OP_CONST, _ops.OP_T):
            depth += 1
        elif op in _ops.BINARY_OPS:
            depth -= 1
        peak = max(peak, depth)
    if peak > _ops.MAX_STACK:
        raise ExprSyntaxError("expression too deeply nested", 0)
    return Program(
        ops=np.asarray(ops, dtype=np.int32),
        args=np.asarray(args, dtype=np.int32),
        consts=np.asarray(consts, dtype=np.float64),
        stack_need=peak,
    )


def parse(source):
    """Parse ``source`` into a TimeExpr.

    Raises ExprSyntaxError (with character index) on malformed input,
    unknown identifiers, or wrong function arity.
    """
    if not isinstance(source, str):
        raise TypeError("expression source must be a string")
    try:
        root = _Parser(source).parse()
    except RecursionError:
        raise ExprSyntaxError("expression too deeply nested", 0, source) from None
    return TimeExpr(source=source, root=root, program=compile_program(root))


# ---------------------------------------------------------------------------
# Pretty printer


def _prec(node):
    if isinstance(node, BinOp):
        if node.op in "+-":
            return _PREC_ADD
        if node.op in "*/":
            return _PREC_MUL
        return _PREC_POW
    if isinstance(node, Neg):
        return _PREC_NEG
    return _PREC_ATOM


def _wrap(text, need):
    return f"({text})" if need else text


def to_source(node):
    """Render an AST back to a string that reparses to the identical tree."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, TVar):
        return "t"
    if isinstance(node, Const):
        return node.name
    if isinstance(node, Neg):
        child = to_source(node.child)
        return "-" + _wrap(child, _prec(node.child) < _PREC_NEG)
    if isinstance(node, Func):
        return f"{node.name}({', '.join(to_source(a) for a in node.args)})"
    if isinstance(node, BinOp):
        p = _prec(node)
        left = to_source(node.left)
        right = to_source(node.right)
        if node.op == "^":
            # right-associative
            left = _wrap(left, _prec(node.left) <= p)
            right = _wrap(right, _prec(node.right) < p)
        else:
            left = _wrap(left, _prec(node.left) < p)
            right = _wrap(right, _prec(node.right) <= p)
        return f"{left}{node.op}{right}"
    raise TypeError(f"unknown AST node {node!r}")


# ---------------------------------------------------------------------------
# Program packing: several expressions in one flat buffer for the kernels


@dataclass(frozen=True)
class PackedPrograms:
    """Multiple programs concatenated, indexed by slot via ``offsets``."""

    ops: np.ndarray
    args: np.ndarray
    consts: np.ndarray
    offsets: np.ndarray
    stack_need: int


def pack_programs(exprs):
    """Concatenate the programs of several TimeExprs into one buffer.

    Constant-pool indices are rebased so all programs share one pool.
    Slot i covers instructions offsets[i]:offsets[i+1].
    """
    ops_parts, args_parts, consts_parts = [], [], []
    offsets = [0]
    const_base = 0
    stack_need = 1
    for expr in exprs:
        prog = expr.program
        args = prog.args.copy()
        mask = prog.ops == _ops.OP_CONST
        args[mask] += const_base
        ops_parts.append(prog.ops)
        args_parts.append(args)
        consts_parts.append(prog.consts)
        const_base += len(prog.consts)
        offsets.append(offsets[-1] + len(prog.ops))
        stack_need = max(stack_need, prog.stack_need)
    return PackedPrograms(
        ops=np.ascontiguousarray(np.concatenate(ops_parts), dtype=np.int32),
        args=np.ascontiguousarray(np.concatenate(args_parts), dtype=np.int32),
        consts=np.ascontiguousarray(
            np.concatenate(consts_parts)
            if const_base
            else np.empty(0, dtype=np.float64),
            dtype=np.float64,
        ),
        offsets=np.asarray(offsets, dtype=np.int32),
        stack_need=stack_need,
    )


# ---------------------------------------------------------------------------
# Sampling helpers


def sample_bounds(expr, t_lo, t_hi, n=20001):
    """Sampled (min, max) of ``expr`` over [t_lo, t_hi] on a uniform grid.

    These are estimates: the true extrema may fall between grid points.
    Domain errors during sampling propagate as ExprDomainError.
    """
    if n < 2:
        raise ValueError("need at least two sample points")
    if t_hi < t_lo:
        raise ValueError("t_hi must be >= t_lo")
    ts = np.linspace(t_lo, t_hi, int(n))
    vals = expr.eval_array(ts)
    return float(vals.min()), float(vals.max())
