"""Instrumented interpreter for muLang.

The AST is compiled once into nested Python closures; running a function is
then a matter of calling the root closure with a fresh frame. Two variants
exist per program: a traced one (branch outcomes plus numbers observed at
literals and variable reads) and a lean one used for bulk mutant execution.

Steps are counted per executed statement and per loop-condition evaluation.
A run is cut off as ``TIMEOUT`` when it exhausts the step budget, or earlier
when a loop head sees a variable state it has seen before (Brent's cycle
detection): the language is deterministic, so such a run never terminates.
"""
from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from ..values import TypeTag
from . import ast

DEFAULT_STEP_BUDGET = 100_000


class Status(enum.Enum):
    OK = "ok"
    ERROR = "error"
    TIMEOUT = "timeout"


@dataclass
class ExecutionTrace:
    branch_outcomes: frozenset = frozenset()
    observed_values: Counter = field(default_factory=Counter)
    step_count: int = 0


@dataclass
class RunOutcome:
    status: Status
    output: object = None
    error_kind: Optional[str] = None
    trace: ExecutionTrace = field(default_factory=ExecutionTrace)

    @property
    def ok(self) -> bool:
        return self.status is Status.OK


class _Thrown(Exception):
    def __init__(self, kind):
        self.kind = kind


class _Timeout(Exception):
    pass


class _Frame:
    __slots__ = ("env", "steps", "budget", "branches", "values")

    def __init__(self, env, budget):
        self.env = env
        self.steps = 0
        self.budget = budget
        self.branches = set()
        self.values = []


class _Ret:
    __slots__ = ("value",)

    def __init__(self, value):
        self.value = value


def _to_long(x: float) -> int:
    # Java (long) cast: NaN -> 0, saturating at the int64 range
    if x != x:
        return 0
    if x >= 9.223372036854776e18:
        return 2**63 - 1
    if x <= -9.223372036854776e18:
        return -(2**63)
    return int(x)


def _div(a, b):
    if b == 0.0:
        raise _Thrown("ArithmeticException")
    return a / b


def _mod(a, b):
    if b == 0.0:
        raise _Thrown("ArithmeticException")
    if not math.isfinite(a) or b != b:
        return math.nan
    if math.isinf(b):
        return a
    return math.fmod(a, b)


def _index(s, i):
    if i != i or math.isinf(i):
        raise _Thrown("IndexOutOfBounds")
    k = int(i)
    if not 0 <= k < len(s):
        raise _Thrown("IndexOutOfBounds")
    return s[k]


def _slice(s, lo, hi):
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise _Thrown("IndexOutOfBounds")
    a, b = int(lo), int(hi)
    if not 0 <= a <= b <= len(s):
        raise _Thrown("IndexOutOfBounds")
    return s[a:b]


_BINARY = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": _div,
    "%": _mod,
    "&": lambda a, b: float(_to_long(a) & _to_long(b)),
    ">>": lambda a, b: float(_to_long(a) >> (_to_long(b) & 63)),
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
}

COPY_STEP = 64  # elements copied per charged step


def _charge(f, copied: int) -> None:
    # building a sequence costs steps in proportion to its length, so runaway
    # appends hit the budget before the copying turns quadratic
    f.steps += copied // COPY_STEP
    if f.steps > f.budget:
        raise _Timeout


_BUILTINS = {
    "len": lambda s: float(len(s)),
    "append": lambda s, x: s + (x,),
    "concat": lambda a, b: a + b,
}


class Compiler:
    def __init__(self, function: ast.Function, types: dict[int, TypeTag], trace: bool):
        self.function = function
        self.types = types
        self.trace = trace
        self.slots: dict[str, int] = {}
        for name, _ in function.params:
            self.slot(name)

    def slot(self, name: str) -> int:
        if name not in self.slots:
            self.slots[name] = len(self.slots)
        return self.slots[name]

    # -- expressions ----------------------------------------------------------
    def expr(self, node):
        if isinstance(node, ast.Num):
            value = node.value
            if self.trace:
                def lit(f):
                    f.values.append(value)
                    return value
                return lit
            return lambda f: value
        if isinstance(node, ast.BoolLit):
            value = node.value
            return lambda f: value
        if isinstance(node, ast.Var):
            i = self.slot(node.name)
            if self.trace and self.types[node.nid] is TypeTag.NUM:
                def read(f):
                    v = f.env[i]
                    f.values.append(v)
                    return v
                return read
            return lambda f: f.env[i]
        if isinstance(node, ast.SeqLit):
            items = [self.expr(item) for item in node.items]
            return lambda f: tuple(item(f) for item in items)
        if isinstance(node, ast.Unary):
            operand = self.expr(node.operand)
            if node.op == "-":
                return lambda f: -operand(f)
            return lambda f: not operand(f)
        if isinstance(node, ast.Binary):
            left, right = self.expr(node.left), self.expr(node.right)
            if node.op == "&&":
                return lambda f: left(f) and right(f)
            if node.op == "||":
                return lambda f: left(f) or right(f)
            op = _BINARY[node.op]
            return lambda f: op(left(f), right(f))
        if isinstance(node, ast.Call):
            fn = _BUILTINS[node.name]
            args = [self.expr(a) for a in node.args]
            if len(args) == 1:
                (a,) = args
                return lambda f: fn(a(f))
            a, b = args

            def call(f):
                out = fn(a(f), b(f))
                _charge(f, len(out))
                return out
            return call
        if isinstance(node, ast.Index):
            target, index = self.expr(node.target), self.expr(node.index)
            return lambda f: _index(target(f), index(f))
        if isinstance(node, ast.Slice):
            target, lo, hi = self.expr(node.target), self.expr(node.lo), self.expr(node.hi)

            def sliced(f):
                out = _slice(target(f), lo(f), hi(f))
                _charge(f, len(out))
                return out
            return sliced
        raise TypeError(f"cannot compile {node!r}")

    # -- statements -----------------------------------------------------------
    def block(self, block: ast.Block):
        stmts = tuple(self.stmt(s) for s in block.body)

        def run_block(f):
            for stmt in stmts:
                f.steps += 1
                if f.steps > f.budget:
                    raise _Timeout
                r = stmt(f)
                if r is not None:
                    return r
            return None
        return run_block

    def cond(self, node, nid):
        test = self.expr(node)
        if not self.trace:
            return test

        def traced(f):
            outcome = test(f)
            f.branches.add((nid, outcome))
            return outcome
        return traced

    def stmt(self, node):
        if isinstance(node, (ast.Let, ast.Assign)):
            i = self.slot(node.name)
            value = self.expr(node.value)

            def assign(f):
                f.env[i] = value(f)
            return assign
        if isinstance(node, ast.If):
            test = self.cond(node.cond, node.nid)
            then = self.block(node.then)
            if node.orelse is None:
                return lambda f: then(f) if test(f) else None
            orelse = self.block(node.orelse) if isinstance(node.orelse, ast.Block) else self.stmt(node.orelse)
            return lambda f: then(f) if test(f) else orelse(f)
        if isinstance(node, ast.While):
            test = self.cond(node.cond, node.nid)
            body = self.block(node.body)

            def loop(f):
                # Brent's cycle detection on the variable state; a repeat means
                # the loop can never exit
                snapshot, power, since = None, 1, 0
                while True:
                    state = tuple(f.env)
                    if state == snapshot:
                        raise _Timeout
                    since += 1
                    if since == power:
                        snapshot, power, since = state, power * 2, 0
                    f.steps += 1
                    if f.steps > f.budget:
                        raise _Timeout
                    if not test(f):
                        return None
                    r = body(f)
                    if r is not None:
                        return r
            return loop
        if isinstance(node, ast.Return):
            value = self.expr(node.value)
            return lambda f: _Ret(value(f))
        if isinstance(node, ast.Throw):
            kind = node.kind

            def throw(f):
                raise _Thrown(kind)
            return throw
        if isinstance(node, ast.Block):
            return self.block(node)
        raise TypeError(f"cannot compile {node!r}")

    def compile(self):
        body = self.block(self.function.body)
        n_params = len(self.function.params)
        n_slots = len(self.slots)
        trace = self.trace

        def run(inputs, budget):
            env = list(inputs) + [None] * (n_slots - n_params)
            f = _Frame(env, budget)
            try:
                r = body(f)
            except _Thrown as exc:
                outcome = RunOutcome(Status.ERROR, error_kind=exc.kind)
            except _Timeout:
                outcome = RunOutcome(Status.TIMEOUT)
            except RecursionError:
                outcome = RunOutcome(Status.ERROR, error_kind="StackOverflow")
            else:
                # the checker guarantees every path returns or throws
                outcome = RunOutcome(Status.OK, output=r.value)
            steps = min(f.steps, budget)
            if trace:
                outcome.trace = ExecutionTrace(frozenset(f.branches), Counter(f.values), steps)
            else:
                outcome.trace = ExecutionTrace(step_count=steps)
            return outcome
        return run
