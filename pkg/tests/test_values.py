from __future__ import annotations

import itertools
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mrgen.values import (OPERATORS, OperatorTypeError, Signature, TypeTag, apply_operator, coerce, format_number,
                          num_to_seq, parse_value, protected_div, render_value, seq_remove, seq_truncate,
                          split_values, values_equal)

from .conftest import finite_nums, sequences, small_ints

GRID_NUMS = (-2.0, -1.0, 0.0, 0.5, 1.0, 2.0)
GRID_BOOLS = (False, True)
GRID_SEQS = tuple(tuple(float(x) for x in items)
                  for n in range(4) for items in itertools.product((0, 1, 2), repeat=n))
TOL = 1e-6


# -- independent brute-force operator oracle ------------------------------------
# Written without touching mrgen.values so that agreement is evidence.

def close(a, b):
    if a != a or b != b:
        return a != a and b != b
    return a == b or abs(a - b) <= TOL


def oracle(name, args):
    if name == "add":
        return args[0] + args[1]
    if name == "sub":
        return args[0] - args[1]
    if name == "mul":
        return args[0] * args[1]
    if name == "div":
        return 1.0 if args[1] == 0 else args[0] / args[1]
    if name == "abs":
        return -args[0] if args[0] < 0 else args[0]
    if name in ("eq", "ne"):
        same = close(args[0], args[1])
        return same if name == "eq" else not same
    if name == "lt":
        return args[0] < args[1]
    if name == "gt":
        return args[1] < args[0]
    if name == "le":
        return args[0] < args[1] or args[0] == args[1]
    if name == "ge":
        return args[1] < args[0] or args[0] == args[1]
    if name == "tostring":
        x = args[0]
        text = str(int(x)) if math.isfinite(x) and x == int(x) and abs(x) < 1e16 else repr(x)
        return tuple(float(ord(ch)) for ch in text)
    if name == "and":
        return all(args)
    if name == "or":
        return any(args)
    if name == "xor":
        return sum(args) == 1
    if name == "iff":
        return sum(args) != 1
    if name == "implies":
        return args[1] if args[0] else True
    if name == "not":
        return not args[0]
    if name == "length":
        return float(len(args[0]))
    if name == "sum":
        total = 0.0
        for x in args[0]:
            total += x
        return total
    if name in ("seq_eq", "seq_ne"):
        a, b = args
        same = len(a) == len(b) and all(close(x, y) for x, y in zip(a, b))
        return same if name == "seq_eq" else not same
    if name == "flip":
        return tuple(args[0][len(args[0]) - 1 - i] for i in range(len(args[0])))
    if name == "remove":
        if not math.isfinite(args[1]):
            return args[0]
        s, n = list(args[0]), int(args[1])
        index = n + len(s) if n < 0 else n
        if 0 <= index < len(s):
            s.pop(index)
        return tuple(s)
    if name == "truncate":
        s, n = args[0], args[1]
        if n != n or n == -math.inf:
            return ()
        if n == math.inf:
            return s
        n = math.trunc(n)  # fractional counts round toward zero
        out = []
        for i, x in enumerate(s):
            if i < n:
                out.append(x)
        return tuple(out)
    raise KeyError(name)


def grid_for(tag):
    return {TypeTag.NUM: GRID_NUMS, TypeTag.BOOL: GRID_BOOLS, TypeTag.SEQ: GRID_SEQS}[tag]


class TestOperatorOracle:
    @pytest.mark.parametrize("name", sorted(OPERATORS))
    def test_matches_brute_force_on_grid(self, name):
        spec = OPERATORS[name]
        checked = 0
        for args in itertools.product(*(grid_for(tag) for tag in spec.args)):
            got = apply_operator(name, list(args))
            want = oracle(name, args)
            assert got == want, (name, args, got, want)
            checked += 1
        assert checked > 0

    def test_table_has_every_row(self):
        assert set(OPERATORS) == {"add", "sub", "mul", "div", "abs", "eq", "ne", "lt", "gt", "le", "ge",
                                  "tostring", "and", "or", "xor", "iff", "implies", "not", "length", "sum",
                                  "seq_eq", "seq_ne", "flip", "remove", "truncate"}

    def test_wrong_tag_raises(self):
        with pytest.raises(OperatorTypeError):
            apply_operator("add", [1.0, True])
        with pytest.raises(OperatorTypeError):
            apply_operator("flip", [1.0])
        with pytest.raises(OperatorTypeError):
            apply_operator("not", [True, False])
        with pytest.raises(OperatorTypeError):
            apply_operator("nosuch", [])


class TestExamples:
    def test_protected_division_by_zero(self):
        assert protected_div(7.0, 0.0) == 1.0
        assert apply_operator("div", [7.0, 0.0]) == 1.0
        assert apply_operator("div", [0.0, -0.0]) == 1.0

    def test_flip(self):
        assert apply_operator("flip", [(1.0, 2.0, 3.0)]) == (3.0, 2.0, 1.0)

    def test_remove_negative_index(self):
        assert apply_operator("remove", [(5.0, 6.0, 7.0), -1.0]) == (5.0, 6.0)

    def test_remove_out_of_range_is_noop(self):
        assert apply_operator("remove", [(5.0, 6.0, 7.0), 9.0]) == (5.0, 6.0, 7.0)
        assert seq_remove((5.0,), -4.0) == (5.0,)
        assert seq_remove((5.0,), math.nan) == (5.0,)

    def test_vacuous_implication(self):
        assert apply_operator("implies", [False, False]) is True

    def test_values_equal_examples(self):
        assert values_equal(16384.0, 16384.0, 1e-9)
        assert values_equal((), (), 0.0)
        assert values_equal(1.0, 1.0 + 1e-12, 1e-9)
        assert not values_equal(1.0, True)
        assert values_equal(math.nan, math.nan, 0.0)
        assert not values_equal((1.0,), (1.0, 2.0))

    def test_nan_orderings_are_false(self):
        for name in ("lt", "gt", "le", "ge"):
            assert apply_operator(name, [math.nan, 1.0]) is False

    def test_truncate_non_finite_counts(self):
        s = (1.0, 2.0)
        assert seq_truncate(s, math.inf) == s
        assert seq_truncate(s, -math.inf) == ()
        assert seq_truncate(s, math.nan) == ()


class TestNumToSeq:
    def _text(self, seq):
        return "".join(chr(int(c)) for c in seq)

    def test_integral(self):
        assert self._text(num_to_seq(16384.0)) == "16384"

    def test_zero(self):
        assert self._text(num_to_seq(0.0)) == "0"

    def test_fraction(self):
        assert self._text(num_to_seq(-1.5)) == "-1.5"

    @given(finite_nums)
    def test_rendering_round_trips(self, x):
        text = self._text(num_to_seq(x))
        assert float(text) == x
        if x == int(x) and abs(x) < 1e16:
            assert "." not in text and "e" not in text


class TestRendering:
    @given(st.one_of(st.booleans(), finite_nums, sequences))
    def test_render_parse_round_trip(self, value):
        assert parse_value(render_value(value)) == value

    def test_canonical_forms(self):
        assert render_value(True) == "true"
        assert render_value(-128.0) == "-128"
        assert render_value((1.0, 2.5)) == "[1,2.5]"
        assert format_number(0.1) == "0.1"

    def test_split_keeps_sequences(self):
        assert split_values("-128, [1,2,3], true") == ["-128", "[1,2,3]", "true"]

    def test_parse_checks_tag(self):
        with pytest.raises(ValueError):
            parse_value("true", TypeTag.NUM)
        with pytest.raises(ValueError):
            parse_value("[1,2")


class TestSignature:
    def test_str(self):
        sig = Signature((("k", TypeTag.NUM), ("e", TypeTag.NUM)), TypeTag.NUM)
        assert str(sig) == "(k: num, e: num) -> num"
        assert sig.names == ("k", "e")

    def test_rejects_duplicates_and_empty(self):
        with pytest.raises(ValueError):
            Signature((("k", TypeTag.NUM), ("k", TypeTag.BOOL)), TypeTag.NUM)
        with pytest.raises(ValueError):
            Signature((), TypeTag.NUM)

    def test_coerce(self):
        assert coerce(3, TypeTag.NUM) == 3.0
        assert coerce([1, 2], TypeTag.SEQ) == (1.0, 2.0)
        with pytest.raises(TypeError):
            coerce(True, TypeTag.NUM)


# -- properties -------------------------------------------------------------

values_any = st.one_of(st.booleans(), finite_nums, sequences)
op_args = st.sampled_from(sorted(OPERATORS)).flatmap(
    lambda name: st.tuples(st.just(name), st.tuples(*(
        {TypeTag.NUM: st.floats(allow_nan=True, allow_infinity=True), TypeTag.BOOL: st.booleans(),
         TypeTag.SEQ: sequences}[tag] for tag in OPERATORS[name].args))))


class TestProperties:
    @given(op_args)
    def test_totality(self, item):
        name, args = item
        out = apply_operator(name, list(args))
        want = OPERATORS[name].out
        assert {TypeTag.NUM: float, TypeTag.BOOL: bool, TypeTag.SEQ: tuple}[want] is type(out)

    @given(sequences)
    def test_flip_involution(self, s):
        assert apply_operator("flip", [apply_operator("flip", [s])]) == s

    @given(sequences, st.floats(min_value=-10, max_value=10, allow_nan=False))
    def test_truncate_length(self, s, n):
        assert len(seq_truncate(s, n)) == min(max(int(n), 0), len(s))

    @given(sequences, small_ints)
    def test_remove_shrinks_by_at_most_one(self, s, n):
        assert len(s) - len(seq_remove(s, n)) in (0, 1)

    @given(values_any, st.floats(min_value=0, max_value=1))
    def test_values_equal_reflexive(self, a, tol):
        assert values_equal(a, a, tol)

    @given(values_any, values_any, st.floats(min_value=0, max_value=1))
    def test_values_equal_symmetric(self, a, b, tol):
        assert values_equal(a, b, tol) == values_equal(b, a, tol)

    @given(finite_nums, finite_nums)
    def test_division_finite_for_finite_args(self, a, b):
        assert math.isfinite(protected_div(a, b)) or abs(b) < 1e-300
