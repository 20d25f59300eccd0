"""Input transformation templates, follow-up construction, and canonical input relations."""
from __future__ import annotations

import enum
import math
import random
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .inputs import InputCase
from .lang import ConstantPool
from .values import DEFAULT_TOL, Signature, TypeTag, format_number, nums_equal, seq_remove, values_equal


class Template(enum.Enum):
    PERMUTE_PARAMETERS = "PermuteParameters"
    BOOLEAN_FLIP = "BooleanFlip"
    NUMERIC_ADDITION = "NumericAddition"
    NUMERIC_MULTIPLICATION = "NumericMultiplication"
    SEQUENCE_REMOVE = "SequenceRemove"
    SEQUENCE_FLIP = "SequenceFlip"

    @property
    def parameterized(self) -> bool:
        return self in (Template.NUMERIC_ADDITION, Template.NUMERIC_MULTIPLICATION, Template.SEQUENCE_REMOVE)


_TARGET_TAG = {
    Template.BOOLEAN_FLIP: TypeTag.BOOL,
    Template.NUMERIC_ADDITION: TypeTag.NUM,
    Template.NUMERIC_MULTIPLICATION: TypeTag.NUM,
    Template.SEQUENCE_REMOVE: TypeTag.SEQ,
    Template.SEQUENCE_FLIP: TypeTag.SEQ,
}

SEQUENCE_REMOVE_INDICES = (0.0, -1.0)


@dataclass(frozen=True)
class InputTransform:
    kind: Template
    params: tuple[int, ...]
    constant: Optional[float] = None
    # sampling weight; not part of identity
    weight: float = field(default=1.0, compare=False)

    def __post_init__(self):
        if self.kind is Template.PERMUTE_PARAMETERS:
            if len(self.params) != 2 or self.params[0] == self.params[1]:
                raise ValueError("PermuteParameters needs two distinct parameters")
        elif len(self.params) != 1:
            raise ValueError(f"{self.kind.value} targets exactly one parameter")
        if (self.constant is not None) != self.kind.parameterized:
            raise ValueError(f"{self.kind.value}: constant present iff the template is parameterized")

    @property
    def param(self) -> int:
        return self.params[0]

    def descriptor(self) -> str:
        k = self.kind.value
        if self.kind is Template.PERMUTE_PARAMETERS:
            return f"{k}(a={self.params[0]}, b={self.params[1]})"
        if self.kind is Template.SEQUENCE_REMOVE:
            return f"{k}(param={self.param}, index={format_number(self.constant)})"
        if self.kind.parameterized:
            return f"{k}(param={self.param}, c={format_number(self.constant)})"
        return f"{k}(param={self.param})"

    def __str__(self) -> str:
        return self.descriptor()

    def check_signature(self, signature: Signature) -> None:
        n = len(signature)
        for p in self.params:
            if not 0 <= p < n:
                raise ValueError(f"{self}: parameter index out of range for {signature}")
        tags = [signature.tags[p] for p in self.params]
        if self.kind is Template.PERMUTE_PARAMETERS:
            if tags[0] is not tags[1]:
                raise ValueError(f"{self}: permuted parameters must share a type")
        elif tags[0] is not _TARGET_TAG[self.kind]:
            raise ValueError(f"{self}: target must be {_TARGET_TAG[self.kind]}")


_DESCRIPTOR_RE = re.compile(r"^\s*(\w+)\((.*)\)\s*$")


def parse_descriptor(text: str) -> InputTransform:
    m = _DESCRIPTOR_RE.match(text)
    if not m:
        raise ValueError(f"malformed transform descriptor {text!r}")
    try:
        kind = Template(m.group(1))
    except ValueError:
        raise ValueError(f"unknown template {m.group(1)!r}") from None
    fields = {}
    for part in filter(None, (p.strip() for p in m.group(2).split(","))):
        key, _, value = part.partition("=")
        fields[key.strip()] = value.strip()
    try:
        if kind is Template.PERMUTE_PARAMETERS:
            return InputTransform(kind, (int(fields["a"]), int(fields["b"])))
        if kind is Template.SEQUENCE_REMOVE:
            return InputTransform(kind, (int(fields["param"]),), float(fields["index"]))
        if kind.parameterized:
            return InputTransform(kind, (int(fields["param"]),), float(fields["c"]))
        return InputTransform(kind, (int(fields["param"]),))
    except KeyError as exc:
        raise ValueError(f"transform descriptor {text!r} lacks field {exc.args[0]}") from None


# -- enumeration and sampling -------------------------------------------------

def enumerate_applicable(signature: Signature, pool: ConstantPool) -> list[InputTransform]:
    """Every non-degenerate instantiation for ``signature``, in a fixed order."""
    tags = signature.tags
    mean_weight = sum(w for _, w in pool.constants) / len(pool.constants) if pool.constants else 1.0
    out: list[InputTransform] = []
    for i in range(len(tags)):
        for j in range(i + 1, len(tags)):
            if tags[i] is tags[j]:
                out.append(InputTransform(Template.PERMUTE_PARAMETERS, (i, j), weight=mean_weight))
    pool_weight = {}
    for c, w in pool.constants:
        for v in (c + 0.0, -c + 0.0):
            pool_weight[v] = max(pool_weight.get(v, 0), w)
    for i, tag in enumerate(tags):
        if tag is TypeTag.BOOL:
            out.append(InputTransform(Template.BOOLEAN_FLIP, (i,), weight=mean_weight))
        elif tag is TypeTag.NUM:
            for kind, neutral in ((Template.NUMERIC_ADDITION, 0.0), (Template.NUMERIC_MULTIPLICATION, 1.0)):
                seen = set()
                for c, _ in pool.constants:
                    for v in (c + 0.0, -c + 0.0):
                        if v == neutral or v in seen or not math.isfinite(v):
                            continue
                        seen.add(v)
                        out.append(InputTransform(kind, (i,), v, weight=pool_weight[v]))
        else:
            out.append(InputTransform(Template.SEQUENCE_FLIP, (i,), weight=mean_weight))
            for index in SEQUENCE_REMOVE_INDICES:
                out.append(InputTransform(Template.SEQUENCE_REMOVE, (i,), index, weight=mean_weight))
    return out


def sample_instantiations(applicable: Sequence[InputTransform], k: int, seed: int) -> list[InputTransform]:
    """Weighted sampling without replacement (Efraimidis-Spirakis keys), heaviest draw first."""
    if not applicable:
        raise ValueError("no applicable transforms: MR generation is impossible for this signature")
    if k <= 0:
        raise ValueError(f"k must be positive, got {k}")
    if k >= len(applicable):
        return list(applicable)
    rng = random.Random(seed)
    keyed = []
    for index, t in enumerate(applicable):
        u = rng.random()
        key = u ** (1.0 / t.weight) if t.weight > 0 else 0.0
        keyed.append((key, -index, t))
    keyed.sort(key=lambda item: (item[0], item[1]), reverse=True)
    return [t for _, _, t in keyed[:k]]


# -- application -------------------------------------------------------------

def transform_values(t: InputTransform, values: Sequence) -> tuple:
    out = list(values)
    kind = t.kind
    if kind is Template.PERMUTE_PARAMETERS:
        a, b = t.params
        out[a], out[b] = values[b], values[a]
    elif kind is Template.BOOLEAN_FLIP:
        out[t.param] = not values[t.param]
    elif kind is Template.NUMERIC_ADDITION:
        out[t.param] = values[t.param] + t.constant
    elif kind is Template.NUMERIC_MULTIPLICATION:
        out[t.param] = values[t.param] * t.constant
    elif kind is Template.SEQUENCE_REMOVE:
        out[t.param] = seq_remove(values[t.param], t.constant)
    else:
        out[t.param] = tuple(reversed(values[t.param]))
    return tuple(out)


def followup_id(source_id: str) -> str:
    return f"{source_id}followup"


def apply_transform(t: InputTransform, x1: InputCase) -> InputCase:
    return InputCase(followup_id(x1.id), transform_values(t, x1.values))


# -- canonical input relation -------------------------------------------------

@dataclass(frozen=True)
class InputRelationSpec:
    transform: InputTransform
    signature: Signature

    @property
    def rendering(self) -> str:
        names = self.signature.names
        t = self.transform
        clauses = []
        for i, name in enumerate(names):
            src = f"{name}_s"
            if t.kind is Template.PERMUTE_PARAMETERS and i in t.params:
                other = t.params[1] if i == t.params[0] else t.params[0]
                rhs = f"{names[other]}_s"
            elif i not in t.params:
                rhs = src
            elif t.kind is Template.BOOLEAN_FLIP:
                rhs = f"!{src}"
            elif t.kind is Template.NUMERIC_ADDITION:
                sign = "-" if t.constant < 0 else "+"
                rhs = f"{src} {sign} {format_number(abs(t.constant))}"
            elif t.kind is Template.NUMERIC_MULTIPLICATION:
                rhs = f"{src} * {format_number(t.constant)}"
            elif t.kind is Template.SEQUENCE_REMOVE:
                rhs = f"remove({src}, {format_number(t.constant)})"
            else:
                rhs = f"flip({src})"
            clauses.append(f"({name}_f == {rhs})")
        return " && ".join(clauses)

    def __str__(self) -> str:
        return self.rendering


def canonical(t: InputTransform, signature: Signature) -> InputRelationSpec:
    t.check_signature(signature)
    return InputRelationSpec(t, signature)


def check_relation(rel: InputRelationSpec, x1, x2, tol: float = DEFAULT_TOL) -> bool:
    """R_i(x1, x2): does ``x2`` equal the unique follow-up of ``x1``?"""
    v1 = x1.values if isinstance(x1, InputCase) else tuple(x1)
    v2 = x2.values if isinstance(x2, InputCase) else tuple(x2)
    if len(v1) != len(rel.signature) or len(v2) != len(rel.signature):
        return False
    expected = transform_values(rel.transform, v1)
    for tag, want, got in zip(rel.signature.tags, expected, v2):
        if tag is TypeTag.NUM:
            if not (isinstance(got, float) and not isinstance(got, bool) and nums_equal(want, got, tol)):
                return False
        elif not values_equal(want, got, 0.0):
            return False
    return True
