"""Typed output-relation trees.

A tree is built from :class:`Node` values: operator nodes (names from
``values.OPERATORS``), constants, and variable references. Variables are
named ``<slot>_s`` / ``<slot>_f`` for the source and follow-up run, where
the slot is a parameter name or ``return``.

Canonical serialization is a prefix s-expression, e.g.
``(eq return_f (div return_s k_s))``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Optional

from ..values import OPERATORS, Signature, TypeTag, format_number

MIN_CONSTANT = -100.0
MAX_CONSTANT = 100.0
RETURN = "return"


@dataclass(frozen=True, slots=True)
class Node:
    op: str  # operator name, "const" or "var"
    tag: TypeTag
    children: tuple = ()
    value: object = None  # constant value or variable name

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def is_const(self) -> bool:
        return self.op == "const"

    @property
    def is_var(self) -> bool:
        return self.op == "var"


def const(value) -> Node:
    if isinstance(value, bool):
        return Node("const", TypeTag.BOOL, (), value)
    return Node("const", TypeTag.NUM, (), clamp(float(value)))


def var(name: str, tag: TypeTag) -> Node:
    return Node("var", tag, (), name)


def op(name: str, *children: Node) -> Node:
    spec = OPERATORS[name]
    if len(children) != spec.arity:
        raise TypeError(f"{name} takes {spec.arity} operands, got {len(children)}")
    for want, child in zip(spec.args, children):
        if child.tag is not want:
            raise TypeError(f"{name} expects {want} operand, got {child.tag}")
    return Node(name, spec.out, tuple(children))


def clamp(x: float) -> float:
    return min(max(x, MIN_CONSTANT), MAX_CONSTANT)


# -- scope ----------------------------------------------------------------------

@dataclass(frozen=True)
class Scope:
    """Variables an output relation may reference for a given signature."""

    signature: Signature

    @property
    def variables(self) -> tuple[tuple[str, TypeTag], ...]:
        out = []
        for name, tag in self.signature.params + ((RETURN, self.signature.output),):
            out.append((f"{name}_s", tag))
            out.append((f"{name}_f", tag))
        return tuple(out)

    def tag(self, name: str) -> TypeTag:
        for v, tag in self.variables:
            if v == name:
                return tag
        raise KeyError(name)

    def of_tag(self, tag: TypeTag) -> tuple[str, ...]:
        return tuple(v for v, t in self.variables if t is tag)


# -- structure ---------------------------------------------------------------

def size(node: Node) -> int:
    return 1 + sum(size(c) for c in node.children)


def depth(node: Node) -> int:
    return 1 + max((depth(c) for c in node.children), default=0)


def paths(node: Node, prefix: tuple = ()) -> Iterator[tuple[tuple, Node]]:
    """Preorder (path, subtree) pairs; a path is a tuple of child indices."""
    yield prefix, node
    for i, child in enumerate(node.children):
        yield from paths(child, prefix + (i,))


def subtree_at(node: Node, path: tuple) -> Node:
    for i in path:
        node = node.children[i]
    return node


def replace_at(node: Node, path: tuple, new: Node) -> Node:
    if not path:
        return new
    i = path[0]
    kids = list(node.children)
    kids[i] = replace_at(kids[i], path[1:], new)
    return Node(node.op, node.tag, tuple(kids), node.value)


def variables_used(node: Node) -> set[str]:
    return {n.value for _, n in paths(node) if n.is_var}


def check_well_typed(node: Node, scope: Optional[Scope] = None) -> None:
    """Raise ``TypeError`` unless every node agrees with the operator table."""
    if node.is_const:
        if node.children:
            raise TypeError("constant with children")
        if node.tag is TypeTag.NUM:
            if isinstance(node.value, bool) or not isinstance(node.value, float):
                raise TypeError(f"numeric constant holds {node.value!r}")
            if not MIN_CONSTANT <= node.value <= MAX_CONSTANT:
                raise TypeError(f"constant {node.value} outside [-100, 100]")
        elif node.tag is TypeTag.BOOL:
            if not isinstance(node.value, bool):
                raise TypeError(f"boolean constant holds {node.value!r}")
        else:
            raise TypeError("sequence constants are not allowed")
        return
    if node.is_var:
        if node.children:
            raise TypeError("variable with children")
        if scope is not None and scope.tag(node.value) is not node.tag:
            raise TypeError(f"variable {node.value} is not {node.tag}")
        return
    spec = OPERATORS.get(node.op)
    if spec is None:
        raise TypeError(f"unknown operator {node.op!r}")
    if spec.out is not node.tag or len(node.children) != spec.arity:
        raise TypeError(f"malformed {node.op} node")
    for want, child in zip(spec.args, node.children):
        if child.tag is not want:
            raise TypeError(f"{node.op} expects {want} operand, got {child.tag}")
        check_well_typed(child, scope)


def is_well_typed(node: Node, scope: Optional[Scope] = None) -> bool:
    try:
        check_well_typed(node, scope)
    except (TypeError, KeyError):
        return False
    return True


def satisfies_soft_constraint(node: Node) -> bool:
    used = variables_used(node)
    return f"{RETURN}_s" in used and f"{RETURN}_f" in used


# -- prefix form ---------------------------------------------------------------

def to_prefix(node: Node) -> str:
    if node.is_const:
        if node.tag is TypeTag.BOOL:
            return "true" if node.value else "false"
        return format_number(node.value)
    if node.is_var:
        return node.value
    return "(" + " ".join([node.op] + [to_prefix(c) for c in node.children]) + ")"


_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def parse_prefix(text: str, scope: Scope) -> Node:
    tokens = _TOKEN.findall(text)
    pos = 0

    def parse() -> Node:
        nonlocal pos
        if pos >= len(tokens):
            raise ValueError("unexpected end of relation")
        tok = tokens[pos]
        pos += 1
        if tok == "(":
            if pos >= len(tokens):
                raise ValueError("unexpected end of relation")
            name = tokens[pos]
            pos += 1
            if name not in OPERATORS:
                raise ValueError(f"unknown operator {name!r}")
            kids = []
            while pos < len(tokens) and tokens[pos] != ")":
                kids.append(parse())
            if pos >= len(tokens):
                raise ValueError("missing ')'")
            pos += 1
            try:
                return op(name, *kids)
            except TypeError as exc:
                raise ValueError(str(exc)) from None
        if tok == ")":
            raise ValueError("unexpected ')'")
        if tok in ("true", "false"):
            return const(tok == "true")
        try:
            return const(float(tok))
        except ValueError:
            pass
        try:
            return var(tok, scope.tag(tok))
        except KeyError:
            raise ValueError(f"unknown variable {tok!r}") from None

    node = parse()
    if pos != len(tokens):
        raise ValueError("trailing tokens after relation")
    return node


# -- infix form -----------------------------------------------------------------

_INFIX = {"add": "+", "sub": "-", "mul": "*", "div": "/", "eq": "==", "ne": "!=", "lt": "<", "gt": ">",
          "le": "<=", "ge": ">=", "and": "&&", "or": "||", "xor": "^", "iff": "<=>", "implies": "=>",
          "seq_eq": "==", "seq_ne": "!="}
_PRECEDENCE = {"implies": 1, "iff": 1, "or": 2, "xor": 3, "and": 4, "eq": 5, "ne": 5, "seq_eq": 5, "seq_ne": 5,
               "lt": 6, "gt": 6, "le": 6, "ge": 6, "add": 7, "sub": 7, "mul": 8, "div": 8}
_FUNCTIONS = {"abs": "abs", "tostring": "toString", "length": "length", "sum": "sum", "flip": "flip",
              "remove": "remove", "truncate": "truncate"}


def to_infix(node: Node, signature: Optional[Signature] = None, function_name: Optional[str] = None) -> str:
    """Readable rendering. With a signature and name, ``return_s`` prints as ``f(k_s, e_s)``."""

    def var_text(name: str) -> str:
        if signature is not None and function_name and name in (f"{RETURN}_s", f"{RETURN}_f"):
            role = name[-1]
            return f"{function_name}(" + ", ".join(f"{p}_{role}" for p in signature.names) + ")"
        return name

    def go(n: Node, parent_prec: int, right: bool) -> str:
        if n.is_const:
            return to_prefix(n)
        if n.is_var:
            return var_text(n.value)
        if n.op == "not":
            return "!" + go(n.children[0], 99, False)
        if n.op in _FUNCTIONS:
            return _FUNCTIONS[n.op] + "(" + ", ".join(go(c, 0, False) for c in n.children) + ")"
        prec = _PRECEDENCE[n.op]
        text = f"{go(n.children[0], prec, False)} {_INFIX[n.op]} {go(n.children[1], prec, True)}"
        chained = prec == parent_prec and (right or prec in (5, 6))
        if prec < parent_prec or chained:
            return f"({text})"
        return text

    return go(node, 0, False)
