"""Small arithmetic grammar for user-supplied potentials and metric components.

Accepted: numbers, ``pi``, ``e``, coordinates ``z1..zm`` (or ``z_1``),
``conj(zk)``, the operators ``+ - * /`` and ``^`` or ``**`` for powers, and
the functions ``log``, ``exp``, ``pow``, ``sqrt``.  Parsing goes through the
standard library tokenizer so syntax errors carry a line and column.

Coordinates and their conjugates become independent sympy symbols, which
is exactly the bookkeeping Wirtinger differentiation needs.
"""

from __future__ import annotations

import ast
import re

import sympy as sp


class ExpressionError(ValueError):
    """Parse failure with a 1-based line/column location."""

    def __init__(self, message: str, line: int = 1, col: int = 1):
        super().__init__(f"line {line}, column {col}: {message}")
        self.message = message
        self.line = line
        self.col = col


_COORD = re.compile(r"^z_?(\d+)$")
_FUNCS = {"log": sp.log, "exp": sp.exp, "sqrt": sp.sqrt}
_CONSTS = {"pi": sp.pi, "e": sp.E}


def coordinate_symbols(m: int):
    z = sp.symbols(f"z1:{m + 1}")
    zb = sp.symbols(f"zb1:{m + 1}")
    return z, zb


def parse_expression(text: str, m: int):
    """Parse ``text`` into a sympy expression over ``z1..zm, zb1..zbm``."""
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("empty expression")
    z, zb = coordinate_symbols(m)
    source = text.strip()
    # "^" is accepted for powers; Python would read it as a low-precedence xor
    lines = source.split("\n")

    def locate(line, col):
        # map a column in the rewritten text back to the original line
        orig = lines[line - 1] if 1 <= line <= len(lines) else ""
        shifted = 0
        for i, ch in enumerate(orig):
            width = 2 if ch == "^" else 1
            if shifted + width >= col:
                return line, i + 1
            shifted += width
        return line, col

    def _fail(node, msg):
        line, col = locate(getattr(node, "lineno", 1), getattr(node, "col_offset", 0) + 1)
        raise ExpressionError(msg, line, col)

    try:
        tree = ast.parse(source.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(exc.msg, *locate(exc.lineno or 1, exc.offset or 1)) from None

    def coord(node):
        if isinstance(node, ast.Name):
            match = _COORD.match(node.id)
            if match:
                k = int(match.group(1))
                if not 1 <= k <= m:
                    _fail(node, f"coordinate {node.id} out of range for m={m}")
                return k - 1
        return None

    def walk(node):
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
                _fail(node, f"unsupported literal {node.value!r}")
            return sp.nsimplify(node.value) if isinstance(node.value, float) else sp.Integer(node.value)
        if isinstance(node, ast.Name):
            k = coord(node)
            if k is not None:
                return z[k]
            if node.id in _CONSTS:
                return _CONSTS[node.id]
            _fail(node, f"unknown name {node.id!r}")
        if isinstance(node, ast.UnaryOp):
            if isinstance(node.op, ast.USub):
                return -walk(node.operand)
            if isinstance(node.op, ast.UAdd):
                return walk(node.operand)
            _fail(node, "unsupported unary operator")
        if isinstance(node, ast.BinOp):
            left, right = walk(node.left), walk(node.right)
            op = node.op
            if isinstance(op, ast.Add):
                return left + right
            if isinstance(op, ast.Sub):
                return left - right
            if isinstance(op, ast.Mult):
                return left * right
            if isinstance(op, ast.Div):
                return left / right
            if isinstance(op, ast.Pow):
                return left ** right
            _fail(node, "unsupported binary operator")
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.keywords:
                _fail(node, "unsupported call")
            name = node.func.id
            args = node.args
            if name == "conj":
                if len(args) != 1 or coord(args[0]) is None:
                    _fail(node, "conj() takes a single coordinate such as z1")
                return zb[coord(args[0])]
            if name == "pow":
                if len(args) != 2:
                    _fail(node, "pow() takes two arguments")
                return walk(args[0]) ** walk(args[1])
            if name in _FUNCS:
                if len(args) != 1:
                    _fail(node, f"{name}() takes one argument")
                return _FUNCS[name](walk(args[0]))
            _fail(node, f"unknown function {name!r}")
        _fail(node, f"unsupported syntax ({type(node).__name__})")

    return walk(tree)
