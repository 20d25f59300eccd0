from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrgen.fixtures import NAMES, load_fixture
from mrgen.inputs import (PURPOSES, Corpus, InputCase, check_case, corpus_seed, generate_coverage_guided,
                          generate_random_inputs, load_corpus, replay_coverage, sample_cases, save_corpus)
from mrgen.values import Signature, TypeTag

POW_SIG = Signature((("k", TypeTag.NUM), ("e", TypeTag.NUM)), TypeTag.NUM)
MIXED_SIG = Signature((("b", TypeTag.BOOL), ("x", TypeTag.NUM), ("s", TypeTag.SEQ)), TypeTag.NUM)


class TestRandom:
    def test_stable(self):
        a = generate_random_inputs(POW_SIG, 3, 42)
        b = generate_random_inputs(POW_SIG, 3, 42)
        assert a.cases == b.cases
        assert len(a) == 3
        assert all(len(c.values) == 2 for c in a)

    def test_zero_is_error(self):
        with pytest.raises(ValueError):
            generate_random_inputs(POW_SIG, 0, 1)

    def test_seeds_differ(self):
        # 100 seed pairs; a full-corpus collision would need every case to repeat
        for seed in range(100):
            a = generate_random_inputs(POW_SIG, 5, seed)
            b = generate_random_inputs(POW_SIG, 5, seed + 1000)
            assert a.cases != b.cases

    @given(st.integers(0, 10_000))
    @settings(max_examples=50)
    def test_cases_match_signature(self, seed):
        for case in generate_random_inputs(MIXED_SIG, 20, seed):
            check_case(case, MIXED_SIG)

    def test_profile_mixture(self):
        nums = [v for c in generate_random_inputs(POW_SIG, 2000, 5) for v in c.values]
        assert -128.0 in nums and 0.0 in nums
        assert any(abs(v) > 100 for v in nums)
        assert all(float(v).is_integer() for v in nums)

    def test_sequence_lengths_average_four(self):
        sig = Signature((("s", TypeTag.SEQ),), TypeTag.NUM)
        lengths = [len(c.values[0]) for c in generate_random_inputs(sig, 4000, 3)]
        assert 3.5 < sum(lengths) / len(lengths) < 4.5


class TestCoverageGuided:
    def test_pow_branch_outcomes(self, pow_program):
        corpus = generate_coverage_guided(pow_program, 2000, 11)
        covered = replay_coverage(pow_program, corpus.cases)
        guard, loop, odd = 2, 12, 17
        for nid in (guard, loop, odd):
            assert (nid, True) in covered and (nid, False) in covered

    def test_replay_reproduces_coverage(self, pow_program):
        corpus = generate_coverage_guided(pow_program, 500, 3)
        assert replay_coverage(pow_program, corpus.cases) == corpus.covered_branches

    def test_budget_one(self, pow_program):
        assert len(generate_coverage_guided(pow_program, 1, 0)) == 1

    def test_budget_must_be_positive(self, pow_program):
        with pytest.raises(ValueError):
            generate_coverage_guided(pow_program, 0, 0)

    def test_is_prime_both_outputs(self):
        program = load_fixture("isPrime")
        corpus = generate_coverage_guided(program, 2000, 4)
        outputs = {program.run(c.values).output for c in corpus}
        assert {True, False} <= outputs

    @pytest.mark.parametrize("name", NAMES)
    def test_covers_at_least_random(self, name):
        program = load_fixture(name)
        budget = 1000
        for seed in (1, 2):
            guided = generate_coverage_guided(program, budget, seed)
            plain = generate_random_inputs(program.signature, budget, seed)
            assert replay_coverage(program, plain.cases) <= guided.covered_branches

    def test_deterministic(self, pow_program):
        a = generate_coverage_guided(pow_program, 300, 9)
        b = generate_coverage_guided(pow_program, 300, 9)
        assert a.cases == b.cases


class TestCorpus:
    def test_unique_ids(self):
        with pytest.raises(ValueError):
            Corpus([InputCase("t", (1.0,)), InputCase("t", (2.0,))])

    def test_purpose_seeds_disjoint(self):
        for master in range(20):
            assert len({corpus_seed(master, p) for p in PURPOSES}) == 3

    def test_file_round_trip(self, tmp_path):
        corpus = generate_random_inputs(MIXED_SIG, 50, 8)
        path = tmp_path / "c.tsv"
        save_corpus(corpus, path)
        assert load_corpus(path, MIXED_SIG).cases == corpus.cases
        first = path.read_text().splitlines()[0]
        assert first.startswith("test0\t")

    def test_bad_file(self, tmp_path):
        path = tmp_path / "c.tsv"
        path.write_text("test0\t1\n")
        with pytest.raises(ValueError, match=":1:"):
            load_corpus(path, POW_SIG)

    def test_sample_without_replacement(self):
        corpus = generate_random_inputs(POW_SIG, 100, 1)
        picked = sample_cases(corpus, 10, 2)
        assert len(picked) == 10
        assert len({c.id for c in picked}) == 10
        assert sample_cases(corpus, 500, 2) is corpus
