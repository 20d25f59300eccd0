"""Random tree construction, crossover, mutation, and parent selection."""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional, Sequence

from ..values import OPERATORS, OpSpec, TypeTag
from .tree import Node, Scope, clamp, const, paths, replace_at, size, var

CROSSOVER_ATTEMPTS = 8
SUBTREE_DEPTH = 3
DEFAULT_LEAF_CONSTANTS = (-1.0, 0.0, 1.0, 2.0)


@dataclass(frozen=True)
class Grammar:
    """Operators and leaves available for one signature.

    With ``operators="auto"`` the sequence operators are dropped when no
    variable in scope is a sequence: they could then only ever act on
    ``toString`` of a number.
    """

    scope: Scope
    operators: tuple[OpSpec, ...]
    leaf_constants: tuple[float, ...] = DEFAULT_LEAF_CONSTANTS
    p_variable_leaf: float = 0.75

    @classmethod
    def for_scope(cls, scope: Scope, operators="auto", leaf_constants: Sequence[float] = DEFAULT_LEAF_CONSTANTS,
                  p_variable_leaf: float = 0.75) -> "Grammar":
        if operators == "auto":
            has_seq = bool(scope.of_tag(TypeTag.SEQ))
            specs = tuple(s for s in OPERATORS.values()
                          if has_seq or (TypeTag.SEQ not in s.args and s.out is not TypeTag.SEQ))
        elif operators == "all":
            specs = tuple(OPERATORS.values())
        else:
            specs = tuple(OPERATORS[name] for name in operators)
        constants = tuple(sorted({clamp(float(c)) for c in leaf_constants}))
        return cls(scope, specs, constants, p_variable_leaf)

    def producing(self, tag: TypeTag) -> tuple[OpSpec, ...]:
        return tuple(s for s in self.operators if s.out is tag)

    def has_leaf(self, tag: TypeTag) -> bool:
        return tag is not TypeTag.SEQ or bool(self.scope.of_tag(TypeTag.SEQ))

    def random_leaf(self, tag: TypeTag, rng: random.Random) -> Node:
        names = self.scope.of_tag(tag)
        if tag is TypeTag.SEQ:
            if not names:
                raise ValueError("no sequence leaves in scope")
            return var(rng.choice(names), tag)
        if names and rng.random() < self.p_variable_leaf:
            return var(rng.choice(names), tag)
        if tag is TypeTag.BOOL:
            return const(rng.random() < 0.5)
        if self.leaf_constants and rng.random() < 0.5:
            return const(rng.choice(self.leaf_constants))
        return const(float(rng.randint(-10, 10)))

    def random_tree(self, tag: TypeTag, depth: int, rng: random.Random, full: bool = False) -> Node:
        """Typed random tree; ``full`` grows every branch to ``depth``."""
        ops = self.producing(tag)
        leaf_ok = self.has_leaf(tag)
        stop = depth <= 1 or not ops or (not full and leaf_ok and rng.random() < 0.3)
        if stop and leaf_ok:
            return self.random_leaf(tag, rng)
        if not ops:
            raise ValueError(f"cannot build a {tag} tree")
        spec = rng.choice(ops)
        if depth <= 1:
            # a sequence needs an operator even at the depth floor; prefer unary producers
            spec = min(ops, key=lambda s: s.arity)
        kids = tuple(self.random_tree(t, max(depth - 1, 1), rng, full) for t in spec.args)
        return Node(spec.name, spec.out, kids)


def ramped_population(grammar: Grammar, n: int, rng: random.Random, depths=(2, 4), bound: int = 16) -> list[Node]:
    """Ramped half-and-half initialisation of Bool trees within the size bound."""
    lo, hi = depths
    out = []
    span = hi - lo + 1
    for i in range(n):
        depth = lo + i % span
        full = (i // span) % 2 == 0
        for _ in range(20):
            tree = grammar.random_tree(TypeTag.BOOL, depth, rng, full)
            if size(tree) <= bound:
                break
            full = False
        else:
            tree = grammar.random_tree(TypeTag.BOOL, lo, rng, False)
            while size(tree) > bound:
                tree = grammar.random_tree(TypeTag.BOOL, 2, rng, False)
        out.append(tree)
    return out


# -- crossover ---------------------------------------------------------------------

def crossover(a: Node, b: Node, rng: random.Random, bound: int = 16) -> tuple[Node, Node]:
    """Typed subtree swap; oversize offspring fall back to the parent copy."""
    points_a = list(paths(a))
    points_b = list(paths(b))
    for _ in range(CROSSOVER_ATTEMPTS):
        path_a, sub_a = rng.choice(points_a)
        matches = [(p, s) for p, s in points_b if s.tag is sub_a.tag]
        if not matches:
            continue
        path_b, sub_b = rng.choice(matches)
        child_a = replace_at(a, path_a, sub_b)
        child_b = replace_at(b, path_b, sub_a)
        if size(child_a) > bound:
            child_a = a
        if size(child_b) > bound:
            child_b = b
        return child_a, child_b
    return a, b


# -- mutation -----------------------------------------------------------------------

MUTATIONS = ("node", "subtree", "constant")


def mutate_node(e: Node, grammar: Grammar, rng: random.Random) -> Node:
    leaves = [(p, n) for p, n in paths(e) if n.is_leaf]
    path, leaf = rng.choice(leaves)
    new = leaf
    for _ in range(4):
        new = grammar.random_leaf(leaf.tag, rng)
        if new != leaf:
            break
    return replace_at(e, path, new)


def mutate_subtree(e: Node, grammar: Grammar, rng: random.Random, bound: int) -> Node:
    inner = [(p, n) for p, n in paths(e) if not n.is_leaf]
    if not inner:
        return mutate_node(e, grammar, rng)
    path, old = rng.choice(inner)
    for _ in range(CROSSOVER_ATTEMPTS):
        new = grammar.random_tree(old.tag, rng.randint(1, SUBTREE_DEPTH), rng, False)
        out = replace_at(e, path, new)
        if size(out) <= bound:
            return out
    return e


def mutate_constant(e: Node, grammar: Grammar, rng: random.Random, delta: float) -> Node:
    consts = [(p, n) for p, n in paths(e) if n.is_const and n.tag is TypeTag.NUM]
    if not consts:
        return mutate_node(e, grammar, rng)
    path, old = rng.choice(consts)
    step = delta if rng.random() < 0.5 else -delta
    # rounding keeps repeated 0.1 steps from accumulating binary noise
    return replace_at(e, path, const(clamp(round(old.value + step, 9))))


def mutate_relation(e: Node, rng: random.Random, grammar: Grammar, bound: int = 16, delta: float = 0.1,
                    kind: Optional[str] = None) -> Node:
    kind = kind or rng.choice(MUTATIONS)
    if kind == "node":
        return mutate_node(e, grammar, rng)
    if kind == "subtree":
        return mutate_subtree(e, grammar, rng, bound)
    if kind == "constant":
        return mutate_constant(e, grammar, rng, delta)
    raise ValueError(f"unknown mutation {kind!r}")


# -- selection ------------------------------------------------------------------------

@dataclass
class Individual:
    tree: Node
    fitness: object  # Fitness
    prefix: str = field(default="", compare=False)


def tournament(pop: Sequence[Individual], key, rng: random.Random, k: int = 2) -> Individual:
    entrants = [pop[rng.randrange(len(pop))] for _ in range(k)]
    best = entrants[0]
    for other in entrants[1:]:
        if key(other.fitness) < key(best.fitness):
            best = other
    return best


def best_match_score(first, candidate) -> int:
    """Pairs misclassified by ``first`` that ``candidate`` gets right."""
    return (first.fp_set & ~candidate.fp_set).bit_count() + (first.fn_set & ~candidate.fn_set).bit_count()


def best_match(pop: Sequence[Individual], rng: random.Random, candidates: int = 16) -> tuple[Individual, Individual]:
    first = pop[rng.randrange(len(pop))]
    pool = [pop[rng.randrange(len(pop))] for _ in range(candidates)]
    weights = [1 + best_match_score(first.fitness, c.fitness) for c in pool]
    second = rng.choices(pool, weights=weights)[0]
    return first, second


def select_parents(pop: Sequence[Individual], key, rng: random.Random, p_best_match: float = 0.5, k: int = 2,
                   candidates: int = 16) -> tuple[Individual, Individual]:
    if not pop:
        raise ValueError("cannot select from an empty population")
    if len(pop) == 1:
        return pop[0], pop[0]
    if rng.random() < p_best_match:
        return best_match(pop, rng, candidates)
    return tournament(pop, key, rng, k), tournament(pop, key, rng, k)
