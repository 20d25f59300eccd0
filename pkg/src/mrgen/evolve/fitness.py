"""False-positive / false-negative fitness of output relations over a store."""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..store import ExecutionPair, ExecutionStore
from ..transforms import InputRelationSpec
from ..values import DEFAULT_TOL, apply_operator
from .tree import RETURN, Node, Scope, size, to_infix, to_prefix
from .vector import PairTable, evaluate


@dataclass(frozen=True)
class Fitness:
    fp: int
    fn: int
    size: int
    fn_set: int = field(default=0, repr=False)
    fp_set: int = field(default=0, repr=False)

    @property
    def triple(self) -> tuple[int, int, int]:
        return self.fp, self.fn, self.size


def fp_key(f: Fitness) -> tuple[int, int, int]:
    return f.fp, f.fn, f.size


def fn_key(f: Fitness) -> tuple[int, int, int]:
    return f.fn, f.fp, f.size


def dominates_fp(a: Fitness, b: Fitness) -> bool:
    if a.fp != b.fp:
        return a.fp < b.fp
    if a.fn != b.fn:
        return a.fn < b.fn
    return a.size < b.size


def dominates_fn(a: Fitness, b: Fitness) -> bool:
    if a.fn != b.fn:
        return a.fn < b.fn
    if a.fp != b.fp:
        return a.fp < b.fp
    return a.size < b.size


@dataclass(frozen=True)
class MetamorphicRelation:
    input_relation: InputRelationSpec
    output_relation: Node
    fitness: Optional[Fitness] = None

    @property
    def prefix(self) -> str:
        return to_prefix(self.output_relation)

    def infix(self, function_name: Optional[str] = None) -> str:
        return to_infix(self.output_relation, self.input_relation.signature, function_name)

    def to_json(self, function_name: Optional[str] = None) -> dict:
        obj = {
            "transform": self.input_relation.transform.descriptor(),
            "inputRelation": self.input_relation.rendering,
            "outputRelation": self.prefix,
            "infix": self.infix(function_name),
        }
        if self.fitness is not None:
            obj["fitness"] = {"fp": self.fitness.fp, "fn": self.fitness.fn, "size": self.fitness.size}
        return obj


# -- scalar route (used as the reference oracle) ------------------------------

def bindings(pair: ExecutionPair) -> dict:
    env = {}
    for (name, s), (_, f) in zip(pair.source.inputs, pair.followup.inputs):
        env[f"{name}_s"] = s
        env[f"{name}_f"] = f
    env[f"{RETURN}_s"] = pair.source.output
    env[f"{RETURN}_f"] = pair.followup.output
    return env


def eval_tree(node: Node, env: dict, tol: float = DEFAULT_TOL):
    if node.is_var:
        return env[node.value]
    if node.is_const:
        return node.value
    return apply_operator(node.op, [eval_tree(c, env, tol) for c in node.children], tol)


def eval_relation(expr: Node, pair: ExecutionPair, tol: float = DEFAULT_TOL) -> bool:
    return bool(eval_tree(expr, bindings(pair), tol))


# -- vector route ----------------------------------------------------------------

def _bitset(mask: np.ndarray) -> int:
    if not mask.size:
        return 0
    return int.from_bytes(np.packbits(mask, bitorder="little").tobytes(), "little")


class FitnessEvaluator:
    """Evaluates relations against one store, memoized by prefix form."""

    def __init__(self, store: ExecutionStore, tol: float = DEFAULT_TOL):
        self.store = store
        self.signature = store.signature
        self.scope = Scope(store.signature)
        self.tol = tol
        self.n_correct = len(store.correct)
        self.n_incorrect = len(store.incorrect)
        self.table = PairTable(store.signature, store.correct + store.incorrect)
        self._memo: dict[str, Fitness] = {}
        self._lock = threading.Lock()
        self.evaluations = 0

    def outcomes(self, expr: Node) -> np.ndarray:
        """R_o truth value for every pair, correct pairs first."""
        result = evaluate(expr, self.table, self.tol)
        return np.asarray(result, dtype=bool)

    def __call__(self, expr: Node) -> Fitness:
        key = to_prefix(expr)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        holds = self.outcomes(expr)
        fp_mask = ~holds[:self.n_correct]
        fn_mask = holds[self.n_correct:]
        fit = Fitness(int(fp_mask.sum()), int(fn_mask.sum()), size(expr), _bitset(fn_mask), _bitset(fp_mask))
        with self._lock:
            self._memo[key] = fit
            self.evaluations += 1
        return fit


def fitness(mr: MetamorphicRelation, store: ExecutionStore, evaluator: Optional[FitnessEvaluator] = None) -> Fitness:
    if mr.input_relation.transform != store.transform:
        raise ValueError(f"relation is over {mr.input_relation.transform}, store over {store.transform}")
    evaluator = evaluator or FitnessEvaluator(store)
    return evaluator(mr.output_relation)


def naive_fitness(expr: Node, store: ExecutionStore, tol: float = DEFAULT_TOL) -> Fitness:
    """Pair-by-pair recount through the scalar route; the reference for tests."""
    fp_set = fn_set = 0
    for i, pair in enumerate(store.correct):
        if not eval_tree(expr, bindings(pair), tol):
            fp_set |= 1 << i
    for i, pair in enumerate(store.incorrect):
        if eval_tree(expr, bindings(pair), tol):
            fn_set |= 1 << i
    return Fitness(fp_set.bit_count(), fn_set.bit_count(), size(expr), fn_set, fp_set)
