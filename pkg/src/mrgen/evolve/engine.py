"""Two-population co-evolution of output relations.

One population is ranked by (fp, fn, size), the other by (fn, fp, size).
Each generation keeps an elite, then refills the population through
selection, crossover, and mutation. Every ``migration_period``
generations each population receives copies of the other's best
individuals.
"""
from __future__ import annotations

import random
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from ..seeds import derive_seed
from ..store import ExecutionStore
from ..transforms import InputRelationSpec
from ..values import TypeTag
from .fitness import FitnessEvaluator, MetamorphicRelation, fn_key, fp_key
from .operators import (DEFAULT_LEAF_CONSTANTS, Grammar, Individual, crossover, mutate_relation, ramped_population,
                        select_parents)
from .tree import Node, Scope, check_well_typed, satisfies_soft_constraint, size, to_prefix


@dataclass
class EvolutionConfig:
    population_size: int = 200
    generations: int = 60
    time_budget: Optional[float] = None  # seconds; stops early when exceeded
    p_crossover: float = 0.9
    p_mutation: float = 0.3
    tournament_k: int = 2
    p_best_match: float = 0.5
    best_match_candidates: int = 16
    elite_size: int = 10
    migration_period: int = 10
    migration_count: int = 32
    size_bound: int = 16
    constant_delta: float = 0.1
    init_depths: tuple[int, int] = (2, 4)
    output_count: int = 10
    operators: object = "auto"
    leaf_constants: tuple[float, ...] = DEFAULT_LEAF_CONSTANTS
    seed: int = 0
    unique_offspring: bool = True  # reject offspring already present in the new population
    parallel: bool = False
    check_invariants: bool = False

    def __post_init__(self):
        for name in ("p_crossover", "p_mutation", "p_best_match"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be a probability, got {value}")
        for name in ("population_size", "tournament_k", "elite_size", "migration_period", "migration_count",
                     "size_bound", "output_count", "best_match_candidates"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.generations < 0:
            raise ValueError("generations must be non-negative")
        if self.elite_size > self.population_size:
            raise ValueError("elite_size cannot exceed population_size")


DUPLICATE_PATIENCE = 50

FP, FN = "FP", "FN"
_KEYS = {FP: fp_key, FN: fn_key}


def ranking_key(objective: str) -> Callable:
    key = _KEYS[objective]
    # prefix string breaks exact ties so ordering never depends on insertion history
    return lambda ind: (key(ind.fitness), ind.prefix)


def elite_insert(elite: list[Individual], candidate: Individual, key: Callable, limit: int) -> list[Individual]:
    """Admit ``candidate`` if it passes the soft and uniqueness constraints and fits."""
    if not satisfies_soft_constraint(candidate.tree):
        return elite
    for member in elite:
        if member.prefix == candidate.prefix or member.fitness.fn_set == candidate.fitness.fn_set:
            return elite
    if len(elite) < limit:
        return sorted(elite + [candidate], key=key)
    worst = elite[-1]
    if key(candidate) < key(worst):
        return sorted(elite[:-1] + [candidate], key=key)
    return elite


def best_individuals(pop: Sequence[Individual], objective: str, limit: int) -> list[Individual]:
    """Elite under the given objective: soft constraint plus both uniqueness rules."""
    key = ranking_key(objective)
    elite: list[Individual] = []
    for ind in sorted(pop, key=key):
        if len(elite) >= limit:
            break
        elite = elite_insert(elite, ind, key, limit)
    return elite


@dataclass
class GenerationRecord:
    generation: int
    migrated: bool
    best_fp: tuple
    best_fn: tuple
    elite_fp: tuple[str, ...]
    elite_fn: tuple[str, ...]


@dataclass
class EvolutionResult:
    relations: list[MetamorphicRelation]
    history: list[GenerationRecord] = field(default_factory=list)
    generations_run: int = 0
    evaluations: int = 0
    invariant_checks: int = 0

    @property
    def migration_generations(self) -> list[int]:
        return [h.generation for h in self.history if h.migrated]


class Evolution:
    def __init__(self, input_relation: InputRelationSpec, store: ExecutionStore, config: EvolutionConfig,
                 seeds: Sequence[Node] = (), evaluator: Optional[FitnessEvaluator] = None):
        if input_relation.transform != store.transform:
            raise ValueError(f"relation is over {input_relation.transform}, store over {store.transform}")
        if not store.correct:
            raise ValueError("evolution needs at least one correct execution")
        if not store.incorrect:
            warnings.warn("no incorrect executions: nothing pushes false negatives down", UserWarning, stacklevel=2)
        self.relation = input_relation
        self.store = store
        self.config = config
        self.scope = Scope(store.signature)
        self.grammar = Grammar.for_scope(self.scope, config.operators, config.leaf_constants)
        self.evaluate = evaluator or FitnessEvaluator(store)
        self.seeds = list(seeds)
        self.rngs = {FP: random.Random(derive_seed(config.seed, "evolve", FP)),
                     FN: random.Random(derive_seed(config.seed, "evolve", FN))}
        self.invariant_checks = 0

    # -- helpers ------------------------------------------------------------------
    def individual(self, tree: Node) -> Individual:
        if self.config.check_invariants:
            check_well_typed(tree, self.scope)
            if tree.tag is not TypeTag.BOOL:
                raise AssertionError(f"relation root is {tree.tag}")
            if size(tree) > self.config.size_bound:
                raise AssertionError(f"relation of size {size(tree)} exceeds bound {self.config.size_bound}")
            self.invariant_checks += 1
        return Individual(tree, self.evaluate(tree), to_prefix(tree))

    def initial_population(self, objective: str) -> list[Individual]:
        cfg = self.config
        trees = list(self.seeds)[:cfg.population_size]
        trees += ramped_population(self.grammar, cfg.population_size - len(trees), self.rngs[objective],
                                   cfg.init_depths, cfg.size_bound)
        return [self.individual(t) for t in trees]

    def _check_elite(self, elite: Sequence[Individual]) -> None:
        prefixes = [e.prefix for e in elite]
        fn_sets = [e.fitness.fn_set for e in elite]
        if len(set(prefixes)) != len(prefixes) or len(set(fn_sets)) != len(fn_sets):
            raise AssertionError("elite holds duplicate relations")

    def select_and_reproduce(self, pop: list[Individual], objective: str) -> list[Individual]:
        cfg = self.config
        rng = self.rngs[objective]
        key = ranking_key(objective)
        elite = best_individuals(pop, objective, cfg.elite_size)
        if cfg.check_invariants:
            self._check_elite(elite)
        new = list(elite)
        present = {ind.prefix for ind in new}
        rejected = 0
        fitness_key = _KEYS[objective]
        while len(new) < cfg.population_size:
            p1, p2 = select_parents(pop, fitness_key, rng, cfg.p_best_match, cfg.tournament_k,
                                    cfg.best_match_candidates)
            if rng.random() < cfg.p_crossover:
                c1, c2 = crossover(p1.tree, p2.tree, rng, cfg.size_bound)
            else:
                c1, c2 = p1.tree, p2.tree
            for child in (c1, c2):
                if len(new) >= cfg.population_size:
                    break
                if rng.random() < cfg.p_mutation:
                    child = mutate_relation(child, rng, self.grammar, cfg.size_bound, cfg.constant_delta)
                if size(child) > cfg.size_bound:
                    continue  # dropped before evaluation
                prefix = to_prefix(child)
                # clones crowd out diversity; give up on uniqueness if the population has collapsed
                if cfg.unique_offspring and prefix in present and rejected < DUPLICATE_PATIENCE * cfg.population_size:
                    rejected += 1
                    continue
                present.add(prefix)
                new.append(self.individual(child))
        new.sort(key=key)
        return new

    def migrants(self, pop: list[Individual], objective: str) -> list[Individual]:
        return sorted(pop, key=ranking_key(objective))[:self.config.migration_count]

    # -- main loop ------------------------------------------------------------------
    def run(self) -> EvolutionResult:
        cfg = self.config
        pops = {FP: self.initial_population(FP), FN: self.initial_population(FN)}
        history: list[GenerationRecord] = []
        start = time.monotonic()
        gen = 0
        executor = ThreadPoolExecutor(max_workers=2) if cfg.parallel else None
        try:
            while gen < cfg.generations:
                if cfg.time_budget is not None and time.monotonic() - start >= cfg.time_budget:
                    break
                gen += 1
                if executor is not None:
                    futures = {o: executor.submit(self.select_and_reproduce, pops[o], o) for o in (FP, FN)}
                    pops = {o: f.result() for o, f in futures.items()}
                else:
                    pops = {o: self.select_and_reproduce(pops[o], o) for o in (FP, FN)}
                migrated = gen % cfg.migration_period == 0
                if migrated:
                    from_fn = self.migrants(pops[FN], FN)
                    from_fp = self.migrants(pops[FP], FP)
                    # copies are appended; the next generation truncates to population_size
                    pops[FP] = pops[FP] + [Individual(m.tree, m.fitness, m.prefix) for m in from_fn]
                    pops[FN] = pops[FN] + [Individual(m.tree, m.fitness, m.prefix) for m in from_fp]
                history.append(self._record(gen, migrated, pops))
        finally:
            if executor is not None:
                executor.shutdown()
        union = pops[FP] + pops[FN]
        best = best_individuals(union, FP, cfg.output_count)
        relations = [MetamorphicRelation(self.relation, ind.tree, ind.fitness) for ind in best]
        return EvolutionResult(relations, history, gen, self.evaluate.evaluations, self.invariant_checks)

    def _record(self, gen: int, migrated: bool, pops) -> GenerationRecord:
        def best(objective):
            elite = best_individuals(pops[objective], objective, self.config.elite_size)
            return elite

        elite_fp, elite_fn = best(FP), best(FN)
        if self.config.check_invariants:
            self._check_elite(elite_fp)
            self._check_elite(elite_fn)
        return GenerationRecord(
            gen, migrated,
            fp_key(elite_fp[0].fitness) if elite_fp else (),
            fn_key(elite_fn[0].fitness) if elite_fn else (),
            tuple(e.prefix for e in elite_fp), tuple(e.prefix for e in elite_fn),
        )


def evolve(input_relation: InputRelationSpec, store: ExecutionStore, config: EvolutionConfig,
           seeds: Sequence[Node] = ()) -> list[MetamorphicRelation]:
    return Evolution(input_relation, store, config, seeds).run().relations
