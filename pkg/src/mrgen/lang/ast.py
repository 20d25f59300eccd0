"""AST node classes for muLang.

Every node carries ``nid``, a preorder id assigned by the parser. Ids are
stable under mutation: a mutant keeps the ids of all untouched nodes, so two
programs can be diffed node by node. Source positions do not take part in
equality.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

from ..values import Signature, TypeTag

Pos = tuple[int, int]


@dataclass(frozen=True)
class Node:
    nid: int

    def children(self) -> Iterator["Node"]:
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, Node):
                yield value
            elif isinstance(value, tuple):
                for item in value:
                    if isinstance(item, Node):
                        yield item


# -- expressions -------------------------------------------------------------

@dataclass(frozen=True)
class Num(Node):
    value: float
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class BoolLit(Node):
    value: bool
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class SeqLit(Node):
    items: tuple
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Var(Node):
    name: str
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Unary(Node):
    op: str
    operand: Node
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Binary(Node):
    op: str
    left: Node
    right: Node
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Call(Node):
    name: str
    args: tuple
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Index(Node):
    target: Node
    index: Node
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Slice(Node):
    target: Node
    lo: Node
    hi: Node
    pos: Pos = field(default=(0, 0), compare=False)


Expr = Union[Num, BoolLit, SeqLit, Var, Unary, Binary, Call, Index, Slice]


# -- statements --------------------------------------------------------------

@dataclass(frozen=True)
class Let(Node):
    name: str
    value: Node
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Assign(Node):
    name: str
    value: Node
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class If(Node):
    cond: Node
    then: "Block"
    orelse: Optional[Node]  # Block, If, or None
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class While(Node):
    cond: Node
    body: "Block"
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Return(Node):
    value: Node
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Throw(Node):
    kind: str
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Block(Node):
    body: tuple
    pos: Pos = field(default=(0, 0), compare=False)


STATEMENTS = (Let, Assign, If, While, Return, Throw, Block)


@dataclass(frozen=True)
class Function(Node):
    name: str
    params: tuple[tuple[str, TypeTag], ...]
    output: TypeTag
    body: Block
    pos: Pos = field(default=(0, 0), compare=False)

    @property
    def signature(self) -> Signature:
        return Signature(self.params, self.output)


BINARY_OPS = {
    "||", "&&", "==", "!=", "<", "<=", ">", ">=", "&", ">>", "+", "-", "*", "/", "%",
}


def walk(node: Node) -> Iterator[Node]:
    """Preorder traversal."""
    stack = [node]
    while stack:
        current = stack.pop()
        yield current
        stack.extend(reversed(list(current.children())))


def find(root: Node, nid: int) -> Node:
    for node in walk(root):
        if node.nid == nid:
            return node
    raise KeyError(nid)


def _rebuild(node: Node, fn) -> Node:
    """Bottom-up rebuild; ``fn(node)`` returns a replacement (or the node itself)."""
    changes = {}
    for f in dataclasses.fields(node):
        value = getattr(node, f.name)
        if isinstance(value, Node):
            new = _rebuild(value, fn)
            if new is not value:
                changes[f.name] = new
        elif isinstance(value, tuple) and value and isinstance(value[0], Node):
            items = []
            for item in value:
                new = _rebuild(item, fn)
                if new is not None:
                    items.append(new)
            items = tuple(items)
            if items != value or any(a is not b for a, b in zip(items, value)):
                changes[f.name] = items
    if changes:
        node = dataclasses.replace(node, **changes)
    return fn(node)


def replace(root: Node, nid: int, new: Optional[Node]) -> Node:
    """Return a copy of ``root`` with node ``nid`` replaced (``None`` deletes it
    from its enclosing tuple, e.g. a statement from a block)."""
    found = []

    def swap(node):
        if node.nid == nid:
            found.append(node)
            return new
        return node

    result = _rebuild(root, swap)
    if not found:
        raise KeyError(nid)
    return result
