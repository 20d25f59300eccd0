"""First-order AST mutants of a subject function and the train/eval split.

Operator profile (restricted to what muLang can express):

==== =========================================================
AOR  arithmetic replacement, ``+`` <-> ``-`` and ``*`` <-> ``/``
ROR  relational replacement, each of == != < <= > >= to every other
LOR  logical replacement, ``&&`` <-> ``||``
CRP  constant replacement, c -> c+1, c-1, 0, -c
BLF  boolean literal flip
SDL  deletion of a statement that is neither ``return`` nor ``let``
==== =========================================================

Variants that fail the type checker (for instance deleting the only
``throw`` on some path) are stillborn and silently dropped.
"""
from __future__ import annotations

import random
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional

from .lang import SubjectProgram, TypeCheckError, program_from_ast
from .lang import ast
from .lang.render import render_expr
from .values import format_number

_AOR = {"+": "-", "-": "+", "*": "/", "/": "*"}
_ROR = ("==", "!=", "<", "<=", ">", ">=")
_LOR = {"&&": "||", "||": "&&"}
_DELETABLE = (ast.Assign, ast.If, ast.While, ast.Throw, ast.Block)

OPERATORS = ("AOR", "ROR", "LOR", "CRP", "BLF", "SDL")


@dataclass(frozen=True)
class Mutant:
    id: str
    base: SubjectProgram = field(repr=False, compare=False)
    operator: str
    node: int
    program: SubjectProgram = field(repr=False, compare=False)
    original: str = ""
    mutated: str = ""
    location: tuple[int, int] = (0, 0)

    def manifest_line(self) -> str:
        line, col = self.location
        return f"{self.id}\t{self.operator}\t{line}:{col}\t{self.original} -> {self.mutated}"


@dataclass
class MutantSet:
    train: list[Mutant]
    eval: list[Mutant]


@dataclass(frozen=True)
class _Site:
    operator: str
    node: ast.Node
    variant: str
    replacement: Optional[ast.Node]
    original: str
    mutated: str


def _statement_text(stmt) -> str:
    from .lang.render import _lines

    first = _lines(stmt, 0)[0].strip()
    return first.rstrip("{").strip()


def _sites(function: ast.Function) -> Iterator[_Site]:
    for node in ast.walk(function.body):
        if isinstance(node, ast.Binary):
            if node.op in _AOR:
                to = _AOR[node.op]
                yield _Site("AOR", node, to, ast.Binary(node.nid, to, node.left, node.right, node.pos), node.op, to)
            elif node.op in _ROR:
                for to in _ROR:
                    if to != node.op:
                        yield _Site("ROR", node, to, ast.Binary(node.nid, to, node.left, node.right, node.pos),
                                    node.op, to)
            elif node.op in _LOR:
                to = _LOR[node.op]
                yield _Site("LOR", node, to, ast.Binary(node.nid, to, node.left, node.right, node.pos), node.op, to)
        elif isinstance(node, ast.Num):
            c = node.value
            seen = {c}
            for new in (c + 1, c - 1, 0.0, -c):
                new = new + 0.0
                if new in seen:
                    continue
                seen.add(new)
                text = format_number(new)
                yield _Site("CRP", node, text, ast.Num(node.nid, new, node.pos), format_number(c), text)
        elif isinstance(node, ast.BoolLit):
            to = not node.value
            yield _Site("BLF", node, "", ast.BoolLit(node.nid, to, node.pos),
                        render_expr(node), "true" if to else "false")
        if isinstance(node, _DELETABLE) and node is not function.body and _is_statement(function, node):
            yield _Site("SDL", node, "", None, _statement_text(node), "<deleted>")


def _is_statement(function: ast.Function, node) -> bool:
    # If/While bodies are Blocks but not statements in their own right
    if not isinstance(node, ast.Block):
        return True
    for parent in ast.walk(function.body):
        if isinstance(parent, ast.Block) and any(s is node for s in parent.body):
            return True
    return False


def generate_mutants(program: SubjectProgram) -> list[Mutant]:
    """Every type-correct first-order mutant, ordered by (node id, opcode, variant)."""
    fn = program.function
    mutants = []
    for site in _sites(fn):
        mutated_fn = ast.replace(fn, site.node.nid, site.replacement)
        try:
            mutated = program_from_ast(mutated_fn)
        except TypeCheckError:
            continue
        suffix = f":{site.variant}" if site.variant else ""
        mutants.append(Mutant(
            id=f"{program.name}@{site.operator}:{site.node.nid}{suffix}",
            base=program,
            operator=site.operator,
            node=site.node.nid,
            program=mutated,
            original=site.original,
            mutated=site.mutated,
            location=site.node.pos,
        ))
    mutants.sort(key=lambda m: (m.node, OPERATORS.index(m.operator), _variant_key(m.id)))
    return mutants


def _variant_key(mutant_id: str):
    parts = mutant_id.split(":")
    if len(parts) < 3:
        return (0, 0.0, "")
    variant = parts[2]
    try:
        return (1, float(variant), "")
    except ValueError:
        return (2, 0.0, variant)


def split_mutants(mutants: list[Mutant], eval_fraction: float, seed: int) -> MutantSet:
    """Seeded partition into disjoint train and eval lists, each kept in input order."""
    if not 0 < eval_fraction < 1:
        raise ValueError(f"eval_fraction must be in (0, 1), got {eval_fraction}")
    n = len(mutants)
    if n < 2:
        warnings.warn(f"only {n} mutant(s); nothing left for evaluation", UserWarning, stacklevel=2)
        return MutantSet(list(mutants), [])
    order = list(range(n))
    random.Random(seed).shuffle(order)
    n_eval = min(max(round(n * eval_fraction), 1), n - 1)
    chosen = set(order[:n_eval])
    return MutantSet(
        train=[m for i, m in enumerate(mutants) if i not in chosen],
        eval=[m for i, m in enumerate(mutants) if i in chosen],
    )


def write_manifest(mutants: Iterable[Mutant], path: Path) -> None:
    text = "".join(m.manifest_line() + "\n" for m in mutants)
    Path(path).write_text(text, encoding="utf-8")


def read_manifest_ids(path: Path) -> list[str]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [line.split("\t", 1)[0] for line in lines if line.strip()]
