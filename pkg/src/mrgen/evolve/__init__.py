"""Co-evolution of metamorphic output relations."""
from .engine import (EvolutionConfig, Evolution, EvolutionResult, best_individuals, elite_insert, evolve,
                     ranking_key)
from .fitness import (Fitness, FitnessEvaluator, MetamorphicRelation, dominates_fn, dominates_fp, eval_relation,
                      fitness, naive_fitness)
from .operators import Grammar, crossover, mutate_relation, select_parents
from .tree import Node, Scope, const, op, parse_prefix, satisfies_soft_constraint, size, to_infix, to_prefix, var

__all__ = [
    "Evolution", "EvolutionConfig", "EvolutionResult", "Fitness", "FitnessEvaluator", "Grammar",
    "MetamorphicRelation", "Node", "Scope", "best_individuals", "const", "crossover", "dominates_fn",
    "dominates_fp", "elite_insert", "eval_relation", "evolve", "fitness", "mutate_relation", "naive_fitness", "op",
    "parse_prefix", "ranking_key", "satisfies_soft_constraint", "select_parents", "size", "to_infix", "to_prefix",
    "var",
]
