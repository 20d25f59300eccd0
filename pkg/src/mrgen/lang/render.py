"""Source printer; ``parse(render(f))`` reproduces ``f`` node for node."""
from __future__ import annotations

from ..values import format_number
from . import ast

INDENT = "    "


def render_expr(node) -> str:
    if isinstance(node, ast.Num):
        return format_number(node.value)
    if isinstance(node, ast.BoolLit):
        return "true" if node.value else "false"
    if isinstance(node, ast.Var):
        return node.name
    if isinstance(node, ast.SeqLit):
        return "[" + ", ".join(render_expr(i) for i in node.items) + "]"
    if isinstance(node, ast.Unary):
        inner = render_expr(node.operand)
        if not _atomic(node.operand) or isinstance(node.operand, ast.Num):
            inner = f"({inner})"
        return f"{node.op}{inner}"
    if isinstance(node, ast.Binary):
        return f"({render_expr(node.left)} {node.op} {render_expr(node.right)})"
    if isinstance(node, ast.Call):
        return f"{node.name}(" + ", ".join(render_expr(a) for a in node.args) + ")"
    if isinstance(node, ast.Index):
        return f"{_postfix_target(node.target)}[{render_expr(node.index)}]"
    if isinstance(node, ast.Slice):
        return f"{_postfix_target(node.target)}[{render_expr(node.lo)}:{render_expr(node.hi)}]"
    raise TypeError(f"cannot render {node!r}")


def _atomic(node) -> bool:
    return isinstance(node, (ast.Num, ast.BoolLit, ast.Var, ast.SeqLit, ast.Call, ast.Index, ast.Slice))


def _postfix_target(node) -> str:
    text = render_expr(node)
    if isinstance(node, (ast.Var, ast.Call, ast.SeqLit, ast.Index, ast.Slice)):
        return text
    return f"({text})"


def _strip_parens(text: str) -> str:
    # top-level conditions and right-hand sides read better without the outer pair
    if text.startswith("(") and text.endswith(")"):
        depth = 0
        for i, ch in enumerate(text):
            depth += ch == "("
            depth -= ch == ")"
            if depth == 0 and i < len(text) - 1:
                return text
        return text[1:-1]
    return text


def _lines(stmt, depth: int) -> list[str]:
    pad = INDENT * depth
    if isinstance(stmt, ast.Let):
        return [f"{pad}let {stmt.name} = {_strip_parens(render_expr(stmt.value))};"]
    if isinstance(stmt, ast.Assign):
        return [f"{pad}{stmt.name} = {_strip_parens(render_expr(stmt.value))};"]
    if isinstance(stmt, ast.Return):
        return [f"{pad}return {_strip_parens(render_expr(stmt.value))};"]
    if isinstance(stmt, ast.Throw):
        return [f"{pad}throw {stmt.kind};"]
    if isinstance(stmt, ast.Block):
        return [f"{pad}{{"] + _body(stmt, depth + 1) + [f"{pad}}}"]
    if isinstance(stmt, ast.While):
        head = f"{pad}while ({_strip_parens(render_expr(stmt.cond))}) {{"
        return [head] + _body(stmt.body, depth + 1) + [f"{pad}}}"]
    if isinstance(stmt, ast.If):
        return _if_lines(stmt, depth, pad)
    raise TypeError(f"cannot render {stmt!r}")


def _if_lines(stmt: ast.If, depth: int, prefix: str) -> list[str]:
    pad = INDENT * depth
    out = [f"{prefix}if ({_strip_parens(render_expr(stmt.cond))}) {{"]
    out += _body(stmt.then, depth + 1)
    if stmt.orelse is None:
        out.append(f"{pad}}}")
    elif isinstance(stmt.orelse, ast.If):
        out += _if_lines(stmt.orelse, depth, f"{pad}}} else ")
    else:
        out.append(f"{pad}}} else {{")
        out += _body(stmt.orelse, depth + 1)
        out.append(f"{pad}}}")
    return out


def _body(block: ast.Block, depth: int) -> list[str]:
    out = []
    for stmt in block.body:
        out += _lines(stmt, depth)
    return out


def render_function(fn: ast.Function) -> str:
    params = ", ".join(f"{name}: {tag}" for name, tag in fn.params)
    lines = [f"fn {fn.name}({params}) -> {fn.output} {{"]
    lines += _body(fn.body, 1)
    lines.append("}")
    return "\n".join(lines) + "\n"
