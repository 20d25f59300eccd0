"""muLang: the small imperative language subject functions are written in."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

from ..values import Signature, coerce, format_number
from . import ast
from .checker import TypeCheckError, check_function
from .interp import DEFAULT_STEP_BUDGET, Compiler, ExecutionTrace, RunOutcome, Status
from .parser import DiagnosticError, ParseError, parse_function
from .render import render_expr, render_function

__all__ = [
    "ConstantPool", "DEFAULT_STEP_BUDGET", "DiagnosticError", "ExecutionTrace", "ParseError",
    "RunOutcome", "Status", "SubjectProgram", "TypeCheckError", "mine_constants",
    "parse_program", "program_from_ast", "run_function", "render_expr",
]


@dataclass(frozen=True)
class SubjectProgram:
    """A parsed, type-checked subject function. Treat as immutable."""

    name: str
    signature: Signature
    function: ast.Function = field(repr=False)
    source_text: str = field(repr=False)
    types: dict = field(repr=False, compare=False, hash=False)

    @property
    def body(self) -> ast.Block:
        return self.function.body

    @cached_property
    def _lean(self):
        return Compiler(self.function, self.types, trace=False).compile()

    @cached_property
    def _traced(self):
        return Compiler(self.function, self.types, trace=True).compile()

    def run(self, inputs: Sequence, step_budget: int = DEFAULT_STEP_BUDGET, trace: bool = True) -> RunOutcome:
        runner = self._traced if trace else self._lean
        return runner(inputs, step_budget)

    def node(self, nid: int):
        return ast.find(self.function, nid)


def program_from_ast(function: ast.Function, source_text: str | None = None) -> SubjectProgram:
    """Type check ``function`` and wrap it. Raises :class:`TypeCheckError`."""
    types = check_function(function)
    if source_text is None:
        source_text = render_function(function)
    return SubjectProgram(function.name, function.signature, function, source_text, types)


def parse_program(text: str) -> SubjectProgram:
    return program_from_ast(parse_function(text), text)


def run_function(program: SubjectProgram, inputs: Sequence, step_budget: int = DEFAULT_STEP_BUDGET,
                 trace: bool = True) -> RunOutcome:
    """Run ``program`` on ``inputs``.

    Inputs may be loosely typed (ints, lists); they are coerced against the
    signature first. A tag mismatch is a caller bug and raises ``TypeError``.
    """
    sig = program.signature
    if len(inputs) != len(sig):
        raise TypeError(f"{program.name} takes {len(sig)} inputs, got {len(inputs)}")
    values = [coerce(v, tag) for v, tag in zip(inputs, sig.tags)]
    return program.run(values, step_budget, trace)


@dataclass(frozen=True)
class ConstantPool:
    constants: tuple[tuple[float, int], ...]

    @property
    def values(self) -> tuple[float, ...]:
        return tuple(v for v, _ in self.constants)

    def weight(self, value: float) -> int:
        for v, w in self.constants:
            if v == value:
                return w
        raise KeyError(value)

    def __str__(self) -> str:
        return "{" + ", ".join(f"{format_number(v)}:{w}" for v, w in self.constants) + "}"


PREDEFINED_CONSTANTS = (-1.0, 1.0)


def mine_constants(traces: Sequence[ExecutionTrace]) -> ConstantPool:
    """Values observed in *every* trace, plus -1 and 1, weighted by total count."""
    if not traces:
        raise ValueError("constant mining needs at least one trace")
    totals = Counter()
    shared = None
    for trace in traces:
        seen = {v for v in trace.observed_values if v == v}
        shared = seen if shared is None else shared & seen
        totals.update(trace.observed_values)
    chosen = set(shared) | set(PREDEFINED_CONSTANTS)
    # -0.0 and 0.0 are the same constant
    merged = Counter()
    for v in chosen:
        merged[v + 0.0] = max(merged[v + 0.0], totals.get(v, 0))
    pool = tuple(sorted(((v, max(w, 1)) for v, w in merged.items()), key=lambda p: p[0]))
    return ConstantPool(pool)
