"""Column-wise evaluation of output relations over a whole execution store.

Numbers are float64 arrays, booleans bool arrays, sequences a zero-padded
2-D array plus a length vector. Every operator mirrors the scalar semantics
in ``values`` exactly, including the left-to-right order of ``sum``;
``tests/test_vector.py`` checks the two paths against each other.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..values import DEFAULT_TOL, TypeTag, num_to_seq
from .tree import RETURN, Node

_INDEX_CLIP = 1e12


@dataclass(frozen=True)
class SeqColumn:
    values: np.ndarray  # (n, width), zero beyond each row's length
    lengths: np.ndarray  # (n,), int64

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def widened(self, width: int) -> np.ndarray:
        if width == self.width:
            return self.values
        pad = np.zeros((self.values.shape[0], width - self.width))
        return np.concatenate([self.values, pad], axis=1)


def seq_column(rows) -> SeqColumn:
    n = len(rows)
    width = max((len(r) for r in rows), default=0)
    values = np.zeros((n, width))
    lengths = np.zeros(n, dtype=np.int64)
    for i, row in enumerate(rows):
        lengths[i] = len(row)
        if row:
            values[i, :len(row)] = row
    return SeqColumn(values, lengths)


def column(tag: TypeTag, items):
    if tag is TypeTag.NUM:
        return np.asarray(items, dtype=np.float64)
    if tag is TypeTag.BOOL:
        return np.asarray(items, dtype=bool)
    return seq_column(items)


class PairTable:
    """Variable columns for a list of execution pairs (correct ones first)."""

    def __init__(self, signature, pairs):
        self.n = len(pairs)
        self.signature = signature
        self.columns = {}
        for index, (name, tag) in enumerate(signature.params):
            self.columns[f"{name}_s"] = column(tag, [p.source.values[index] for p in pairs])
            self.columns[f"{name}_f"] = column(tag, [p.followup.values[index] for p in pairs])
        out = signature.output
        self.columns[f"{RETURN}_s"] = column(out, [p.source.output for p in pairs])
        self.columns[f"{RETURN}_f"] = column(out, [p.followup.output for p in pairs])


def _nums_equal(a, b, tol):
    with np.errstate(invalid="ignore"):
        return (a == b) | (np.isnan(a) & np.isnan(b)) | (np.abs(a - b) <= tol)


def _seq_equal(a: SeqColumn, b: SeqColumn, tol):
    width = max(a.width, b.width)
    av, bv = a.widened(width), b.widened(width)
    if width == 0:
        return a.lengths == b.lengths
    same = _nums_equal(av, bv, tol).all(axis=1)
    return (a.lengths == b.lengths) & same


def _flip(s: SeqColumn) -> SeqColumn:
    w = s.width
    if w == 0:
        return s
    idx = s.lengths[:, None] - 1 - np.arange(w)[None, :]
    valid = idx >= 0
    picked = np.take_along_axis(s.values, np.clip(idx, 0, w - 1), axis=1)
    return SeqColumn(np.where(valid, picked, 0.0), s.lengths)


def _trunc_index(n: np.ndarray) -> np.ndarray:
    finite = np.where(np.isfinite(n), n, 0.0)
    return np.trunc(np.clip(finite, -_INDEX_CLIP, _INDEX_CLIP)).astype(np.int64)


def _remove(s: SeqColumn, n: np.ndarray) -> SeqColumn:
    w = s.width
    if w == 0:
        return s
    i = _trunc_index(n)
    i = np.where(i < 0, i + s.lengths, i)
    hit = np.isfinite(n) & (i >= 0) & (i < s.lengths)
    cols = np.arange(w)[None, :]
    shift = ((cols >= i[:, None]) & hit[:, None]).astype(np.int64)
    padded = np.concatenate([s.values, np.zeros((s.values.shape[0], 1))], axis=1)
    moved = np.take_along_axis(padded, cols + shift, axis=1)
    lengths = s.lengths - hit.astype(np.int64)
    return SeqColumn(np.where(cols < lengths[:, None], moved, 0.0), lengths)


def _truncate(s: SeqColumn, n: np.ndarray) -> SeqColumn:
    k = _trunc_index(n)
    k = np.where(np.isnan(n), 0, k)
    k = np.where(n == np.inf, s.lengths, k)
    k = np.where(n == -np.inf, 0, k)
    k = np.minimum(np.maximum(k, 0), s.lengths)
    cols = np.arange(s.width)[None, :]
    return SeqColumn(np.where(cols < k[:, None], s.values, 0.0), k)


def _sum(s: SeqColumn) -> np.ndarray:
    total = np.zeros(s.values.shape[0])
    for j in range(s.width):
        total = total + s.values[:, j]
    return total


def _tostring(a: np.ndarray) -> SeqColumn:
    return seq_column([num_to_seq(float(x)) for x in a])


def evaluate(node: Node, table: PairTable, tol: float = DEFAULT_TOL):
    """Evaluate ``node`` for every row of ``table``; returns a column."""
    n = table.n
    if node.is_var:
        return table.columns[node.value]
    if node.is_const:
        if node.tag is TypeTag.BOOL:
            return np.full(n, node.value, dtype=bool)
        return np.full(n, node.value, dtype=np.float64)
    args = [evaluate(c, table, tol) for c in node.children]
    o = node.op
    with np.errstate(all="ignore"):
        if o == "add":
            return args[0] + args[1]
        if o == "sub":
            return args[0] - args[1]
        if o == "mul":
            return args[0] * args[1]
        if o == "div":
            a, b = args
            return np.where(b == 0.0, 1.0, a / np.where(b == 0.0, 1.0, b))
        if o == "abs":
            return np.abs(args[0])
        if o == "eq":
            return _nums_equal(args[0], args[1], tol)
        if o == "ne":
            return ~_nums_equal(args[0], args[1], tol)
        if o == "lt":
            return args[0] < args[1]
        if o == "gt":
            return args[0] > args[1]
        if o == "le":
            return args[0] <= args[1]
        if o == "ge":
            return args[0] >= args[1]
        if o == "tostring":
            return _tostring(args[0])
        if o == "and":
            return args[0] & args[1]
        if o == "or":
            return args[0] | args[1]
        if o == "xor":
            return args[0] ^ args[1]
        if o == "iff":
            return ~(args[0] ^ args[1])
        if o == "implies":
            return ~args[0] | args[1]
        if o == "not":
            return ~args[0]
        if o == "length":
            return args[0].lengths.astype(np.float64)
        if o == "sum":
            return _sum(args[0])
        if o == "seq_eq":
            return _seq_equal(args[0], args[1], tol)
        if o == "seq_ne":
            return ~_seq_equal(args[0], args[1], tol)
        if o == "flip":
            return _flip(args[0])
        if o == "remove":
            return _remove(args[0], args[1])
        if o == "truncate":
            return _truncate(args[0], args[1])
    raise ValueError(f"unknown operator {o!r}")
