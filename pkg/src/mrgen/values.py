"""Runtime values and the relation operator set.

Values are plain Python objects, one type per tag:

* ``bool``  -> :attr:`TypeTag.BOOL`
* ``float`` -> :attr:`TypeTag.NUM`
* ``tuple`` of floats -> :attr:`TypeTag.SEQ`

Strings live inside ``SEQ`` as code points. Every operator in
:data:`OPERATORS` is total on well-tagged arguments.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence, Union

DEFAULT_TOL = 1e-6


class TypeTag(enum.Enum):
    BOOL = "bool"
    NUM = "num"
    SEQ = "seq"

    def __str__(self) -> str:
        return self.value


Value = Union[bool, float, tuple]


class OperatorTypeError(TypeError):
    """Raised when an operator receives arguments outside its operand row."""


def tag_of(value) -> TypeTag:
    if isinstance(value, bool):
        return TypeTag.BOOL
    if isinstance(value, float):
        return TypeTag.NUM
    if isinstance(value, tuple):
        return TypeTag.SEQ
    raise TypeError(f"not a runtime value: {value!r}")


def coerce(value, tag: TypeTag):
    """Convert a loosely typed Python value (int, list, ...) into the canonical form."""
    if tag is TypeTag.BOOL:
        if not isinstance(value, bool):
            raise TypeError(f"expected bool, got {value!r}")
        return value
    if tag is TypeTag.NUM:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TypeError(f"expected number, got {value!r}")
        return float(value)
    if isinstance(value, (str, bytes)):
        raise TypeError(f"expected sequence, got {value!r}")
    items = tuple(value)
    for item in items:
        if isinstance(item, bool) or not isinstance(item, (int, float)):
            raise TypeError(f"sequence element is not a number: {item!r}")
    return tuple(float(x) for x in items)


@dataclass(frozen=True)
class Signature:
    """Parameter names/tags and the output tag of a subject function."""

    params: tuple[tuple[str, TypeTag], ...]
    output: TypeTag

    def __post_init__(self):
        names = [name for name, _ in self.params]
        if not names:
            raise ValueError("a signature needs at least one parameter")
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate parameter names in {names}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.params)

    @property
    def tags(self) -> tuple[TypeTag, ...]:
        return tuple(tag for _, tag in self.params)

    def __len__(self) -> int:
        return len(self.params)

    def check(self, values: Sequence) -> None:
        if len(values) != len(self.params):
            raise TypeError(f"expected {len(self.params)} inputs, got {len(values)}")
        for (name, tag), value in zip(self.params, values):
            if tag_of(value) is not tag:
                raise TypeError(f"input {name!r} expects {tag}, got {value!r}")

    def __str__(self) -> str:
        inner = ", ".join(f"{name}: {tag}" for name, tag in self.params)
        return f"({inner}) -> {self.output}"


# -- equality and rendering -------------------------------------------------

def nums_equal(a: float, b: float, tol: float) -> bool:
    if a == b:
        return True
    if a != a and b != b:  # NaN on both sides
        return True
    return abs(a - b) <= tol


def values_equal(a, b, tol: float = DEFAULT_TOL) -> bool:
    """Tolerant structural equality. Tag mismatches compare unequal."""
    ta, tb = tag_of(a), tag_of(b)
    if ta is not tb:
        return False
    if ta is TypeTag.BOOL:
        return a == b
    if ta is TypeTag.NUM:
        return nums_equal(a, b, tol)
    if len(a) != len(b):
        return False
    return all(nums_equal(x, y, tol) for x, y in zip(a, b))


@lru_cache(maxsize=65536)
def format_number(x: float) -> str:
    """Shortest decimal that reads back as ``x``; integral values drop ``.0``."""
    if math.isfinite(x) and x.is_integer() and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def num_to_seq(n: float) -> tuple[float, ...]:
    return _num_to_seq(n)


@lru_cache(maxsize=65536)
def _num_to_seq(n: float) -> tuple[float, ...]:
    return tuple(float(ord(c)) for c in format_number(n))


def render_value(value) -> str:
    tag = tag_of(value)
    if tag is TypeTag.BOOL:
        return "true" if value else "false"
    if tag is TypeTag.NUM:
        return format_number(value)
    return "[" + ",".join(format_number(x) for x in value) + "]"


def parse_value(text: str, tag: TypeTag | None = None):
    """Inverse of :func:`render_value`."""
    text = text.strip()
    if text in ("true", "false"):
        value = text == "true"
    elif text.startswith("["):
        if not text.endswith("]"):
            raise ValueError(f"unterminated sequence: {text!r}")
        body = text[1:-1].strip()
        value = tuple(float(part) for part in body.split(",")) if body else ()
    else:
        value = float(text)
    if tag is not None and tag_of(value) is not tag:
        raise ValueError(f"expected {tag} value, got {text!r}")
    return value


def split_values(text: str) -> list[str]:
    """Split a comma-separated value list, keeping bracketed sequences intact."""
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(text):
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append(text[start:i])
            start = i + 1
    parts.append(text[start:])
    return [p.strip() for p in parts if p.strip()]


# -- operator semantics ------------------------------------------------------

def protected_div(a: float, b: float) -> float:
    if b == 0.0:
        return 1.0
    return a / b


def seq_sum(s: tuple[float, ...]) -> float:
    # left-to-right on purpose; the vectorised evaluator accumulates in the same order
    total = 0.0
    for x in s:
        total += x
    return total


def seq_remove(s: tuple[float, ...], n: float) -> tuple[float, ...]:
    if not math.isfinite(n):
        return s
    i = int(n)
    if i < 0:
        i += len(s)
    if 0 <= i < len(s):
        return s[:i] + s[i + 1:]
    return s


def seq_truncate(s: tuple[float, ...], n: float) -> tuple[float, ...]:
    if n != n:
        k = 0
    elif n == math.inf:
        k = len(s)
    elif n == -math.inf:
        k = 0
    else:
        k = min(max(int(n), 0), len(s))
    return s[:k]


@dataclass(frozen=True)
class OpSpec:
    name: str
    args: tuple[TypeTag, ...]
    out: TypeTag
    symbol: str
    fn: Callable
    tolerant: bool = False

    @property
    def arity(self) -> int:
        return len(self.args)


_N, _B, _S = TypeTag.NUM, TypeTag.BOOL, TypeTag.SEQ


def _specs() -> dict[str, OpSpec]:
    rows = [
        OpSpec("add", (_N, _N), _N, "+", lambda a, b: a + b),
        OpSpec("sub", (_N, _N), _N, "-", lambda a, b: a - b),
        OpSpec("mul", (_N, _N), _N, "*", lambda a, b: a * b),
        OpSpec("div", (_N, _N), _N, "/", protected_div),
        OpSpec("abs", (_N,), _N, "abs", abs),
        OpSpec("eq", (_N, _N), _B, "==", lambda a, b, tol: nums_equal(a, b, tol), True),
        OpSpec("ne", (_N, _N), _B, "!=", lambda a, b, tol: not nums_equal(a, b, tol), True),
        OpSpec("lt", (_N, _N), _B, "<", lambda a, b: a < b),
        OpSpec("gt", (_N, _N), _B, ">", lambda a, b: a > b),
        OpSpec("le", (_N, _N), _B, "<=", lambda a, b: a <= b),
        OpSpec("ge", (_N, _N), _B, ">=", lambda a, b: a >= b),
        OpSpec("tostring", (_N,), _S, "toString", num_to_seq),
        OpSpec("and", (_B, _B), _B, "&&", lambda a, b: a and b),
        OpSpec("or", (_B, _B), _B, "||", lambda a, b: a or b),
        OpSpec("xor", (_B, _B), _B, "^", lambda a, b: a != b),
        OpSpec("iff", (_B, _B), _B, "<=>", lambda a, b: a == b),
        OpSpec("implies", (_B, _B), _B, "=>", lambda a, b: (not a) or b),
        OpSpec("not", (_B,), _B, "!", lambda a: not a),
        OpSpec("length", (_S,), _N, "length", lambda s: float(len(s))),
        OpSpec("sum", (_S,), _N, "sum", seq_sum),
        OpSpec("seq_eq", (_S, _S), _B, "==", lambda a, b, tol: values_equal(a, b, tol), True),
        OpSpec("seq_ne", (_S, _S), _B, "!=", lambda a, b, tol: not values_equal(a, b, tol), True),
        OpSpec("flip", (_S,), _S, "flip", lambda s: s[::-1]),
        OpSpec("remove", (_S, _N), _S, "remove", seq_remove),
        OpSpec("truncate", (_S, _N), _S, "truncate", seq_truncate),
    ]
    return {spec.name: spec for spec in rows}


OPERATORS: dict[str, OpSpec] = _specs()

BY_OUTPUT: dict[TypeTag, tuple[OpSpec, ...]] = {
    tag: tuple(spec for spec in OPERATORS.values() if spec.out is tag) for tag in TypeTag
}


def apply_operator(op: str, args: Sequence, tol: float = DEFAULT_TOL):
    try:
        spec = OPERATORS[op]
    except KeyError:
        raise OperatorTypeError(f"unknown operator {op!r}") from None
    if len(args) != spec.arity:
        raise OperatorTypeError(f"{op} takes {spec.arity} arguments, got {len(args)}")
    for want, arg in zip(spec.args, args):
        if tag_of(arg) is not want:
            raise OperatorTypeError(f"{op} expects {want} operand, got {arg!r}")
    if spec.tolerant:
        return spec.fn(*args, tol)
    return spec.fn(*args)
