"""Static checks for muLang: scoping, expression tags, and return coverage."""
from __future__ import annotations

from ..values import TypeTag
from . import ast
from .parser import DiagnosticError

N, B, S = TypeTag.NUM, TypeTag.BOOL, TypeTag.SEQ

# builtin name -> (argument tags, result tag)
BUILTINS = {
    "len": ((S,), N),
    "append": ((S, N), S),
    "concat": ((S, S), S),
}

_ARITH = {"+", "-", "*", "/", "%", "&", ">>"}
_ORDER = {"<", "<=", ">", ">="}
_EQUALITY = {"==", "!="}
_LOGIC = {"&&", "||"}


class TypeCheckError(DiagnosticError):
    pass


class Checker:
    def __init__(self, function: ast.Function):
        self.function = function
        self.types: dict[int, TypeTag] = {}
        self.scopes: list[dict[str, TypeTag]] = [dict(function.params)]

    def error(self, node, message):
        line, col = getattr(node, "pos", (0, 0))
        raise TypeCheckError(message, line, col)

    def lookup(self, node, name):
        for scope in reversed(self.scopes):
            if name in scope:
                return scope[name]
        self.error(node, f"undeclared variable {name!r}")

    def check(self) -> dict[int, TypeTag]:
        if not self.block(self.function.body):
            self.error(self.function, f"function {self.function.name!r} may finish without return or throw")
        return self.types

    # statements return True when every path through them returns or throws
    def block(self, block: ast.Block) -> bool:
        self.scopes.append({})
        try:
            terminated = False
            for stmt in block.body:
                if self.statement(stmt):
                    terminated = True
            return terminated
        finally:
            self.scopes.pop()

    def statement(self, stmt) -> bool:
        if isinstance(stmt, ast.Let):
            for scope in self.scopes:
                if stmt.name in scope:
                    self.error(stmt, f"variable {stmt.name!r} is already declared")
            self.scopes[-1][stmt.name] = self.expr(stmt.value)
            return False
        if isinstance(stmt, ast.Assign):
            want = self.lookup(stmt, stmt.name)
            got = self.expr(stmt.value)
            if got is not want:
                self.error(stmt, f"cannot assign {got} to {stmt.name!r} of type {want}")
            return False
        if isinstance(stmt, ast.If):
            self.want(stmt.cond, B)
            then = self.block(stmt.then)
            if stmt.orelse is None:
                return False
            other = self.block(stmt.orelse) if isinstance(stmt.orelse, ast.Block) else self.statement(stmt.orelse)
            return then and other
        if isinstance(stmt, ast.While):
            self.want(stmt.cond, B)
            self.block(stmt.body)
            return False
        if isinstance(stmt, ast.Return):
            got = self.expr(stmt.value)
            if got is not self.function.output:
                self.error(stmt, f"return type {got} does not match declared {self.function.output}")
            return True
        if isinstance(stmt, ast.Throw):
            return True
        if isinstance(stmt, ast.Block):
            return self.block(stmt)
        self.error(stmt, f"unknown statement {type(stmt).__name__}")

    # -- expressions ------------------------------------------------------------
    def want(self, node, tag):
        got = self.expr(node)
        if got is not tag:
            self.error(node, f"expected {tag} expression, got {got}")

    def expr(self, node) -> TypeTag:
        tag = self._expr(node)
        self.types[node.nid] = tag
        return tag

    def _expr(self, node) -> TypeTag:
        if isinstance(node, ast.Num):
            return N
        if isinstance(node, ast.BoolLit):
            return B
        if isinstance(node, ast.Var):
            return self.lookup(node, node.name)
        if isinstance(node, ast.SeqLit):
            for item in node.items:
                self.want(item, N)
            return S
        if isinstance(node, ast.Unary):
            tag = N if node.op == "-" else B
            self.want(node.operand, tag)
            return tag
        if isinstance(node, ast.Binary):
            op = node.op
            if op in _ARITH:
                self.want(node.left, N)
                self.want(node.right, N)
                return N
            if op in _ORDER:
                self.want(node.left, N)
                self.want(node.right, N)
                return B
            if op in _LOGIC:
                self.want(node.left, B)
                self.want(node.right, B)
                return B
            if op in _EQUALITY:
                left = self.expr(node.left)
                right = self.expr(node.right)
                if left is not right or left is S:
                    self.error(node, f"cannot compare {left} {op} {right}")
                return B
            self.error(node, f"unknown operator {op!r}")
        if isinstance(node, ast.Call):
            if node.name not in BUILTINS:
                self.error(node, f"unknown function {node.name!r}")
            params, result = BUILTINS[node.name]
            if len(params) != len(node.args):
                self.error(node, f"{node.name} takes {len(params)} arguments")
            for arg, tag in zip(node.args, params):
                self.want(arg, tag)
            return result
        if isinstance(node, ast.Index):
            self.want(node.target, S)
            self.want(node.index, N)
            return N
        if isinstance(node, ast.Slice):
            self.want(node.target, S)
            self.want(node.lo, N)
            self.want(node.hi, N)
            return S
        self.error(node, f"unknown expression {type(node).__name__}")


def check_function(function: ast.Function) -> dict[int, TypeTag]:
    """Type check ``function``; returns expression node id -> tag."""
    return Checker(function).check()
