from __future__ import annotations

import dataclasses
import itertools
import random
import warnings

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrgen.evolve import engine
from mrgen.evolve.engine import (FN, FP, Evolution, EvolutionConfig, best_individuals, elite_insert, evolve,
                                 ranking_key)
from mrgen.evolve.fitness import (Fitness, FitnessEvaluator, MetamorphicRelation, dominates_fn, dominates_fp,
                                  eval_relation, fitness, fn_key, fp_key, naive_fitness)
from mrgen.evolve.operators import (Grammar, Individual, best_match_score, crossover, mutate_constant,
                                    mutate_node, mutate_relation, ramped_population, select_parents, tournament)
from mrgen.evolve.tree import (Scope, check_well_typed, const, is_well_typed, op, parse_prefix, paths,
                               satisfies_soft_constraint, size, to_infix, to_prefix, var)
from mrgen.fixtures import load_fixture
from mrgen.inputs import generate_random_inputs
from mrgen.lang import Status
from mrgen.store import ExecutionPair, ExecutionRecord, ExecutionStore, Label, collect_executions
from mrgen.transforms import InputTransform, Template, canonical
from mrgen.values import TypeTag

from .test_values import oracle

DIVIDE_BY_BASE = "(eq return_f (div return_s k_s))"
OUTPUTS_DIFFER = "(ne return_s return_f)"


def pow_record(system, test, k, e, out):
    return ExecutionRecord(system, test, (("k", float(k)), ("e", float(e))), Status.OK, float(out))


def pow_pair(transform, i, source, followup, outputs, mutant=None):
    system = mutant or "pow@original"
    label = Label.INCORRECT if mutant else Label.CORRECT
    return ExecutionPair(transform, pow_record(system, f"test{i}", *source, outputs[0]),
                         pow_record(system, f"test{i}followup", *followup, outputs[1]), label, mutant)


@pytest.fixture(scope="module")
def scope(pow_program):
    return Scope(pow_program.signature)


@pytest.fixture(scope="module")
def running_store(pow_program, e_minus_one):
    """The correct and mutant executions of the running example."""
    correct = [pow_pair(e_minus_one, 0, (-128, 2), (-128, 1), (16384, -128))]
    incorrect = [pow_pair(e_minus_one, 0, (-128, 2), (-128, 1), (-128, -128), "pow@SDL:38")]
    return ExecutionStore(pow_program.signature, e_minus_one, correct, incorrect)


@pytest.fixture(scope="module")
def nonzero_store(pow_train_store):
    keep = [p for p in pow_train_store.correct if p.source.values[0] != 0]
    drop = [p for p in pow_train_store.incorrect if p.source.values[0] != 0]
    return dataclasses.replace(pow_train_store, correct=keep, incorrect=drop)


@pytest.fixture(scope="module")
def reverse_store():
    program = load_fixture("reverse")
    from mrgen.mutate import generate_mutants

    flip = InputTransform(Template.SEQUENCE_FLIP, (0,))
    corpus = generate_random_inputs(program.signature, 40, 2)
    return collect_executions(program, generate_mutants(program), corpus, flip)


def relation(store, text):
    return MetamorphicRelation(canonical(store.transform, store.signature), parse_prefix(text, Scope(store.signature)))


# -- independent interpreter ---------------------------------------------------------

def oracle_eval(node, env):
    if node.is_var:
        return env[node.value]
    if node.is_const:
        return node.value
    return oracle(node.op, tuple(oracle_eval(c, env) for c in node.children))


def oracle_fitness(expr, store):
    def env(pair):
        out = {}
        for (name, s), (_, f) in zip(pair.source.inputs, pair.followup.inputs):
            out[name + "_s"], out[name + "_f"] = s, f
        out["return_s"], out["return_f"] = pair.source.output, pair.followup.output
        return out

    fp = sum(1 for p in store.correct if not oracle_eval(expr, env(p)))
    fn = sum(1 for p in store.incorrect if oracle_eval(expr, env(p)))
    return fp, fn


def random_relations(store, count, seed):
    grammar = Grammar.for_scope(Scope(store.signature), operators="all")
    return ramped_population(grammar, count, random.Random(seed), (2, 5))


def take(store, n):
    return dataclasses.replace(store, correct=store.correct[:n], incorrect=store.incorrect[:n])


# -- trees ---------------------------------------------------------------------------

class TestTree:
    def test_divide_by_base_infix(self, scope, pow_program):
        tree = parse_prefix(DIVIDE_BY_BASE, scope)
        assert to_infix(tree) == "return_f == return_s / k_s"
        assert to_infix(tree, pow_program.signature, "pow") == "pow(k_f, e_f) == pow(k_s, e_s) / k_s"

    def test_prefix_round_trip(self, pow_train_store):
        sc = Scope(pow_train_store.signature)
        for tree in random_relations(pow_train_store, 200, 4):
            assert parse_prefix(to_prefix(tree), sc) == tree

    def test_prefix_whitespace_normalized(self, scope):
        assert to_prefix(parse_prefix("  (eq   return_f\n(div return_s  k_s) )", scope)) == DIVIDE_BY_BASE

    @pytest.mark.parametrize("text", ["(eq return_f)", "(frob 1 2)", "(eq zzz 1)", "(eq 1 2", "(eq 1 2))",
                                      "(and 1 true)"])
    def test_bad_prefix(self, scope, text):
        with pytest.raises(ValueError):
            parse_prefix(text, scope)

    def test_constants_clamped(self):
        assert const(250).value == 100.0
        assert const(-1e9).value == -100.0
        with pytest.raises(TypeError):
            check_well_typed(dataclasses.replace(const(1), value=500.0))

    def test_ill_typed_rejected(self, scope):
        with pytest.raises(TypeError):
            op("add", const(1), const(True))
        bad = dataclasses.replace(op("eq", const(1), const(2)), tag=TypeTag.NUM)
        assert not is_well_typed(bad)
        assert not is_well_typed(var("return_s", TypeTag.BOOL), scope)

    def test_soft_constraint_examples(self, scope):
        assert satisfies_soft_constraint(parse_prefix(DIVIDE_BY_BASE, scope))
        assert not satisfies_soft_constraint(parse_prefix("(gt k_f k_s)", scope))
        assert not satisfies_soft_constraint(parse_prefix("(eq return_s return_s)", scope))


# -- fitness ---------------------------------------------------------------------------

class TestFitness:
    def test_divide_by_base_on_running_pairs(self, running_store):
        mr = relation(running_store, DIVIDE_BY_BASE)
        assert eval_relation(mr.output_relation, running_store.correct[0])
        assert not eval_relation(mr.output_relation, running_store.incorrect[0])
        f = fitness(mr, running_store)
        assert (f.fp, f.fn, f.size) == (0, 0, 5)

    def test_outputs_differ_mutant_pair_is_false_negative(self, pow_program, e_minus_one, sdl_mutant):
        # the statement-deletion mutant gives 2 on (2, 8) and 8 on (2, 7)
        assert sdl_mutant.program.run((2.0, 8.0)).output == 2.0
        assert sdl_mutant.program.run((2.0, 7.0)).output == 8.0
        pair = pow_pair(e_minus_one, 0, (2, 8), (2, 7), (2, 8), sdl_mutant.id)
        good = pow_pair(e_minus_one, 0, (2, 8), (2, 7), (256, 128))
        store = ExecutionStore(pow_program.signature, e_minus_one, [good], [pair])
        f = fitness(relation(store, OUTPUTS_DIFFER), store)
        assert f.fn >= 1 and f.fn_set == 1

    def test_constant_true(self, pow_train_store):
        f = fitness(relation(pow_train_store, "true"), pow_train_store)
        assert (f.fp, f.fn) == (0, len(pow_train_store.incorrect))
        assert not satisfies_soft_constraint(const(True))

    def test_transform_mismatch(self, pow_train_store):
        other = InputTransform(Template.NUMERIC_ADDITION, (0,), 1.0)
        mr = MetamorphicRelation(canonical(other, pow_train_store.signature), const(True))
        with pytest.raises(ValueError):
            fitness(mr, pow_train_store)

    def test_memoized(self, pow_train_store, scope):
        evaluator = FitnessEvaluator(pow_train_store)
        tree = parse_prefix(DIVIDE_BY_BASE, scope)
        assert evaluator(tree) is evaluator(parse_prefix(DIVIDE_BY_BASE, scope))
        assert evaluator.evaluations == 1

    def test_invariants(self, pow_train_store):
        evaluator = FitnessEvaluator(pow_train_store)
        for tree in random_relations(pow_train_store, 100, 8):
            f = evaluator(tree)
            assert f.fp <= len(pow_train_store.correct) and f.fn <= len(pow_train_store.incorrect)
            assert f.fn == f.fn_set.bit_count() and f.fp == f.fp_set.bit_count()
            assert f.size == size(tree)

    @pytest.mark.parametrize("which", ["pow", "reverse"])
    def test_vector_matches_scalar_and_oracle(self, which, pow_train_store, reverse_store):
        store = take(pow_train_store if which == "pow" else reverse_store, 25)
        assert len(store.correct) + len(store.incorrect) == 50
        evaluator = FitnessEvaluator(store)
        for tree in random_relations(store, 100, 12):
            fast = evaluator(tree)
            slow = naive_fitness(tree, store)
            assert fast == slow, to_prefix(tree)
            assert (fast.fp, fast.fn) == oracle_fitness(tree, store), to_prefix(tree)


# -- dominance ----------------------------------------------------------------------------

def fit(fp, fn, sz):
    return Fitness(fp, fn, sz)


class TestDominance:
    def test_examples(self):
        a, b = fit(0, 5, 9), fit(1, 0, 3)
        assert dominates_fp(a, b) and not dominates_fn(a, b)
        assert not dominates_fp(a, a) and not dominates_fn(a, a)
        assert dominates_fp(fit(0, 5, 3), fit(0, 5, 9)) and dominates_fn(fit(0, 5, 3), fit(0, 5, 9))

    def test_keys_agree_with_dominance(self):
        grid = [fit(*t) for t in itertools.product(range(3), repeat=3)]
        for a, b in itertools.product(grid, repeat=2):
            assert dominates_fp(a, b) == (fp_key(a) < fp_key(b))
            assert dominates_fn(a, b) == (fn_key(a) < fn_key(b))

    @given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3), st.integers(1, 4)), min_size=3, max_size=3))
    def test_strict_partial_order(self, triples):
        a, b, c = (fit(*t) for t in triples)
        for dom in (dominates_fp, dominates_fn):
            assert not dom(a, a)
            assert not (dom(a, b) and dom(b, a))
            if dom(a, b) and dom(b, c):
                assert dom(a, c)


# -- selection -------------------------------------------------------------------------------

def ind(tree, f):
    return Individual(tree, f, to_prefix(tree))


class TestSelection:
    def test_singleton(self, scope):
        only = ind(parse_prefix(DIVIDE_BY_BASE, scope), fit(0, 1, 5))
        assert select_parents([only], fp_key, random.Random(0)) == (only, only)

    def test_empty(self):
        with pytest.raises(ValueError):
            select_parents([], fp_key, random.Random(0))

    def test_tournament_dominating_wins(self, scope):
        strong = ind(parse_prefix(DIVIDE_BY_BASE, scope), fit(0, 3, 5))
        weak = ind(parse_prefix(OUTPUTS_DIFFER, scope), fit(2, 0, 3))
        pop = [weak, strong]
        for seed in range(200):
            drawn = [pop[i] for i in (lambda r: [r.randrange(2), r.randrange(2)])(random.Random(seed))]
            winner = tournament(pop, fp_key, random.Random(seed), 2)
            assert winner is (strong if strong in drawn else weak)

    def test_best_match_score_brute_force(self):
        rng = random.Random(3)
        n_correct = n_incorrect = 5
        for _ in range(200):
            sets = [[rng.random() < 0.4 for _ in range(10)] for _ in range(2)]

            def as_fitness(wrong):
                fp_set = sum(1 << i for i in range(n_correct) if wrong[i])
                fn_set = sum(1 << i for i in range(n_incorrect) if wrong[n_correct + i])
                return Fitness(fp_set.bit_count(), fn_set.bit_count(), 3, fn_set, fp_set)

            first, cand = sets
            want = sum(1 for i in range(10) if first[i] and not cand[i])
            assert best_match_score(as_fitness(first), as_fitness(cand)) == want

    def test_best_match_prefers_covering_candidate(self, scope):
        # first parent misses every pair; one candidate gets all of them right
        all_wrong = Fitness(5, 5, 3, 0b11111, 0b11111)
        perfect = Fitness(0, 0, 3, 0, 0)
        assert best_match_score(all_wrong, perfect) == 10
        assert best_match_score(all_wrong, all_wrong) == 0
        trees = [parse_prefix(t, scope) for t in (DIVIDE_BY_BASE, OUTPUTS_DIFFER)]
        pop = [ind(trees[0], all_wrong), ind(trees[1], perfect)]
        picks = []
        for seed in range(400):
            first, second = select_parents(pop, fp_key, random.Random(seed), p_best_match=1.0)
            if first is pop[0]:
                picks.append(second is pop[1])
        # weights 11 vs 1 per drawn candidate
        assert sum(picks) / len(picks) > 0.8


# -- variation ---------------------------------------------------------------------------------

class TestVariation:
    def test_root_swap(self, scope):
        a, b = parse_prefix(DIVIDE_BY_BASE, scope), parse_prefix(OUTPUTS_DIFFER, scope)
        assert next(paths(a))[0] == ()  # the root comes first

        class RootRng(random.Random):
            def choice(self, seq):
                return seq[0]

        assert crossover(a, b, RootRng(0)) == (b, a)

    def test_bool_only_common_tag(self, scope):
        a = parse_prefix("(and (gt return_s 1) (lt return_f 2))", scope)
        b = parse_prefix("(not true)", scope)
        for seed in range(50):
            c1, c2 = crossover(a, b, random.Random(seed))
            assert c1.tag is TypeTag.BOOL and c2.tag is TypeTag.BOOL
            assert is_well_typed(c1, scope) and is_well_typed(c2, scope)

    @given(st.integers(0, 10_000))
    @settings(max_examples=60, deadline=None)
    def test_crossover_bound_and_types(self, seed):
        sc = Scope(load_fixture("pow").signature)
        grammar = Grammar.for_scope(sc)
        rng = random.Random(seed)
        a, b = ramped_population(grammar, 2, rng, (3, 5))
        for child in crossover(a, b, rng, 16):
            assert size(child) <= 16
            check_well_typed(child, sc)

    @given(st.integers(0, 10_000))
    @settings(max_examples=60, deadline=None)
    def test_mutation_bound_and_types(self, seed):
        sc = Scope(load_fixture("pow").signature)
        grammar = Grammar.for_scope(sc)
        rng = random.Random(seed)
        tree = ramped_population(grammar, 1, rng, (2, 4))[0]
        for kind in ("node", "subtree", "constant"):
            out = mutate_relation(tree, rng, grammar, 16, 0.1, kind)
            assert size(out) <= 16 and out.tag is TypeTag.BOOL
            check_well_typed(out, sc)

    def test_constant_step(self, scope):
        grammar = Grammar.for_scope(scope)
        tree = parse_prefix("(eq return_f (add return_s 5))", scope)
        seen = {to_prefix(mutate_constant(tree, grammar, random.Random(s), 0.1)) for s in range(40)}
        assert seen == {"(eq return_f (add return_s 5.1))", "(eq return_f (add return_s 4.9))"}

    def test_constant_clamped(self, scope):
        grammar = Grammar.for_scope(scope)
        tree = parse_prefix("(eq return_f (add return_s 100))", scope)
        for s in range(20):
            value = mutate_constant(tree, grammar, random.Random(s), 0.1).children[1].children[1].value
            assert value in (100.0, 99.9)

    def test_constant_free_falls_back_to_node(self, scope):
        grammar = Grammar.for_scope(scope)
        tree = parse_prefix("(eq return_f return_s)", scope)
        for s in range(20):
            got = mutate_constant(tree, grammar, random.Random(s), 0.1)
            want = mutate_node(tree, grammar, random.Random(s))
            assert got == want

    def test_leaf_replaced_by_same_tag(self, scope):
        grammar = Grammar.for_scope(scope)
        tree = parse_prefix("(eq return_s return_f)", scope)
        for s in range(50):
            out = mutate_node(tree, grammar, random.Random(s))
            assert out.op == "eq"
            assert all(c.tag is TypeTag.NUM and c.is_leaf for c in out.children)

    def test_unknown_mutation(self, scope):
        with pytest.raises(ValueError):
            mutate_relation(parse_prefix(DIVIDE_BY_BASE, scope), random.Random(0), Grammar.for_scope(scope), kind="bogus")


# -- elitism ------------------------------------------------------------------------------------

class TestElite:
    def test_tautology_suffix_rejected(self, pow_train_store, scope):
        evaluator = FitnessEvaluator(pow_train_store)
        x = parse_prefix(DIVIDE_BY_BASE, scope)
        x_and_true = op("and", x, const(True))
        elite = [ind(x, evaluator(x))]
        assert elite_insert(elite, ind(x_and_true, evaluator(x_and_true)), ranking_key(FP), 10) == elite

    def test_textual_duplicate_rejected(self, scope):
        x = parse_prefix(DIVIDE_BY_BASE, scope)
        elite = [ind(x, Fitness(0, 3, 5, 0b111))]
        clone = ind(parse_prefix(DIVIDE_BY_BASE, scope), Fitness(0, 3, 5, 0b1110))
        assert elite_insert(elite, clone, ranking_key(FP), 10) == elite

    def test_soft_constraint_required(self, scope):
        lonely = ind(parse_prefix("(gt k_f k_s)", scope), Fitness(0, 0, 3, 0))
        assert elite_insert([], lonely, ranking_key(FP), 10) == []

    def test_dominated_rejected_when_full(self, scope):
        texts = ["(eq return_f (add return_s {}))".format(i) for i in range(3)]
        elite = [ind(parse_prefix(t, scope), Fitness(0, i + 1, 5, 1 << i)) for i, t in enumerate(texts)]
        worse = ind(parse_prefix("(eq return_f (mul return_s 7))", scope), Fitness(4, 0, 5, 1 << 9))
        assert elite_insert(elite, worse, ranking_key(FP), 3) == elite
        better = ind(parse_prefix("(eq return_f (mul return_s 8))", scope), Fitness(0, 0, 5, 1 << 8))
        out = elite_insert(elite, better, ranking_key(FP), 3)
        assert out[0] is better and len(out) == 3 and elite[-1] not in out

    def test_best_individuals_unique(self, pow_train_store):
        evaluator = FitnessEvaluator(pow_train_store)
        pop = [ind(t, evaluator(t)) for t in random_relations(pow_train_store, 300, 5)]
        for objective in (FP, FN):
            elite = best_individuals(pop + pop, objective, 10)
            assert len({e.prefix for e in elite}) == len(elite)
            assert len({e.fitness.fn_set for e in elite}) == len(elite)
            assert all(satisfies_soft_constraint(e.tree) for e in elite)


# -- engine ---------------------------------------------------------------------------------------

SMALL = dict(population_size=40, generations=12, elite_size=5, migration_count=8, migration_period=5, seed=3)


def small_config(**over):
    return EvolutionConfig(**{**SMALL, **over})


class TestEngine:
    def test_config_validation(self):
        for bad in (dict(p_crossover=1.5), dict(population_size=0), dict(generations=-1),
                    dict(elite_size=50, population_size=10)):
            with pytest.raises(ValueError):
                EvolutionConfig(**bad)

    def test_zero_generations(self, pow_train_store):
        rel = canonical(pow_train_store.transform, pow_train_store.signature)
        result = Evolution(rel, pow_train_store, small_config(generations=0)).run()
        assert result.generations_run == 0 and result.history == []
        assert result.relations
        assert result.evaluations <= 2 * SMALL["population_size"]

    def test_injected_divide_by_base_never_lost(self, nonzero_store, scope):
        rel = canonical(nonzero_store.transform, nonzero_store.signature)
        divide_by_base = parse_prefix(DIVIDE_BY_BASE, scope)
        target = FitnessEvaluator(nonzero_store)(divide_by_base)
        assert target.fp == 0
        for seed in range(3):
            result = Evolution(rel, nonzero_store, small_config(seed=seed), seeds=[divide_by_base]).run()
            best = result.relations[0].fitness
            assert fp_key(best) <= fp_key(target)
            for record in result.history:
                assert record.best_fp <= fp_key(target)

    def test_fp_elitism_monotone(self, pow_train_store):
        rel = canonical(pow_train_store.transform, pow_train_store.signature)
        history = Evolution(rel, pow_train_store, small_config(generations=25)).run().history
        for before, after in zip(history, history[1:]):
            assert after.best_fp <= before.best_fp
            assert after.best_fn <= before.best_fn

    def test_migration_generations(self, pow_train_store):
        rel = canonical(pow_train_store.transform, pow_train_store.signature)
        result = Evolution(rel, pow_train_store, small_config(generations=30, migration_period=10)).run()
        assert result.migration_generations == [10, 20, 30]

    def test_deterministic(self, pow_train_store):
        rel = canonical(pow_train_store.transform, pow_train_store.signature)
        a = evolve(rel, pow_train_store, small_config())
        b = evolve(rel, pow_train_store, small_config())
        assert [m.prefix for m in a] == [m.prefix for m in b]
        assert [m.fitness for m in a] == [m.fitness for m in b]

    def test_parallel_matches_sequential(self, pow_train_store):
        rel = canonical(pow_train_store.transform, pow_train_store.signature)
        seq = Evolution(rel, pow_train_store, small_config()).run()
        par = Evolution(rel, pow_train_store, small_config(parallel=True)).run()
        assert [m.prefix for m in seq.relations] == [m.prefix for m in par.relations]
        assert seq.history == par.history

    def test_output_sorted_and_unique(self, pow_train_store):
        rel = canonical(pow_train_store.transform, pow_train_store.signature)
        out = evolve(rel, pow_train_store, small_config(output_count=6))
        assert 0 < len(out) <= 6
        keys = [fp_key(m.fitness) for m in out]
        assert keys == sorted(keys)
        assert len({m.prefix for m in out}) == len(out)

    def test_empty_incorrect_warns(self, pow_train_store):
        store = dataclasses.replace(pow_train_store, incorrect=[])
        rel = canonical(store.transform, store.signature)
        with pytest.warns(UserWarning):
            Evolution(rel, store, small_config(generations=1))

    def test_empty_correct_rejected(self, pow_train_store):
        store = dataclasses.replace(pow_train_store, correct=[])
        with pytest.raises(ValueError):
            Evolution(canonical(store.transform, store.signature), store, small_config())

    def test_invariant_checks_run(self, pow_train_store):
        rel = canonical(pow_train_store.transform, pow_train_store.signature)
        result = Evolution(rel, pow_train_store, small_config(check_invariants=True)).run()
        assert result.invariant_checks >= SMALL["population_size"] * 2

    def test_population_size_constant(self, pow_train_store, monkeypatch):
        rel = canonical(pow_train_store.transform, pow_train_store.signature)
        evo = Evolution(rel, pow_train_store, small_config())
        sizes = []
        original = evo.select_and_reproduce

        def spy(pop, objective):
            out = original(pop, objective)
            sizes.append(len(out))
            return out

        monkeypatch.setattr(evo, "select_and_reproduce", spy)
        evo.run()
        assert set(sizes) == {SMALL["population_size"]}

    def test_duplicate_patience_bounded(self, pow_train_store, scope, monkeypatch):
        # a one-tree population that never varies must still fill up
        monkeypatch.setattr(engine, "DUPLICATE_PATIENCE", 1)
        rel = canonical(pow_train_store.transform, pow_train_store.signature)
        cfg = small_config(p_crossover=0.0, p_mutation=0.0, generations=2)
        divide_by_base = parse_prefix(DIVIDE_BY_BASE, scope)
        evo = Evolution(rel, pow_train_store, cfg, seeds=[divide_by_base] * cfg.population_size)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            result = evo.run()
        assert result.generations_run == 2
