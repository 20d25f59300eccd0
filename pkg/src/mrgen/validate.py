"""Two-step false-positive filter and mutation-based evaluation.

Step 1 replays each relation on fresh random inputs. Step 2 searches for a
violating source input with a restarted (1+1) search guided by branch
distance. Evaluation then measures how many held-out mutants the surviving
relations kill, next to a regression-assertion baseline.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .evolve.fitness import MetamorphicRelation, eval_tree
from .evolve.tree import RETURN, Node
from .inputs import DEFAULT_PROFILE, Corpus, InputCase, ValueProfile, mutate_case, random_case
from .lang import SubjectProgram
from .mutate import Mutant
from .store import RunCache, original_id
from .transforms import transform_values
from .values import DEFAULT_TOL, nums_equal, values_equal

EPSILON = 1e-9
UNSAT = 1.0  # distance charged for flipping a boolean leaf or a sequence comparison
SEARCH_RESTARTS = 4


# -- verdicts ------------------------------------------------------------------

@dataclass(frozen=True)
class StepVerdict:
    status: str  # "pass", "fail" or "skipped"
    witness: Optional[InputCase] = None
    checked: int = 0

    @property
    def passed(self) -> bool:
        return self.status == "pass"


SKIPPED = StepVerdict("skipped")


@dataclass(frozen=True)
class FilterVerdict:
    mr: MetamorphicRelation
    step1: StepVerdict
    step2: StepVerdict

    def __post_init__(self):
        if self.step2.status == "skipped" and self.step1.passed:
            raise ValueError("step 2 may only be skipped after a step-1 failure")

    @property
    def valid(self) -> bool:
        return self.step1.passed and self.step2.passed


def relation_env(signature, source: Sequence, followup: Sequence, out_s, out_f) -> dict:
    env = {}
    for (name, _), s, f in zip(signature.params, source, followup):
        env[f"{name}_s"] = s
        env[f"{name}_f"] = f
    env[f"{RETURN}_s"] = out_s
    env[f"{RETURN}_f"] = out_f
    return env


def _holds(mr: MetamorphicRelation, signature, x1, x2, o1, o2, tol) -> bool:
    return bool(eval_tree(mr.output_relation, relation_env(signature, x1, x2, o1, o2), tol))


# -- step 1 ---------------------------------------------------------------------

def filter_fresh_inputs(mr: MetamorphicRelation, program: SubjectProgram, corpus: Corpus,
                        cache: Optional[RunCache] = None, tol: float = DEFAULT_TOL) -> StepVerdict:
    """Fail on the first fresh source input whose pair violates R_o.
    Pairs where the original program does not return normally are skipped."""
    cache = cache or RunCache()
    sig = program.signature
    orig = original_id(program.name)
    t = mr.input_relation.transform
    checked = 0
    for case in corpus:
        x2 = transform_values(t, case.values)
        r1 = cache.run(orig, program, case.values)
        r2 = cache.run(orig, program, x2)
        if not (r1.ok and r2.ok):
            continue
        checked += 1
        if not _holds(mr, sig, case.values, x2, r1.output, r2.output, tol):
            return StepVerdict("fail", case, checked)
    return StepVerdict("pass", None, checked)


# -- step 2 ---------------------------------------------------------------------

def _num_distance(x: float) -> float:
    return math.inf if x != x else x


def branch_distance(node: Node, env: dict, want: bool, tol: float = DEFAULT_TOL) -> float:
    """How far ``node`` is from evaluating to ``want`` (0 when it already does)."""
    o = node.op
    kids = node.children
    if o == "not":
        return branch_distance(kids[0], env, not want, tol)
    if o in ("and", "or"):
        conj = (o == "and") == want
        a = branch_distance(kids[0], env, want, tol)
        b = branch_distance(kids[1], env, want, tol)
        # and->true and or->false need both sides; the others need one
        return a + b if conj else min(a, b)
    if o == "implies":
        if want:
            return min(branch_distance(kids[0], env, False, tol), branch_distance(kids[1], env, True, tol))
        return branch_distance(kids[0], env, True, tol) + branch_distance(kids[1], env, False, tol)
    if o in ("xor", "iff"):
        same = (o == "iff") == want
        tt = branch_distance(kids[0], env, True, tol) + branch_distance(kids[1], env, True, tol)
        ff = branch_distance(kids[0], env, False, tol) + branch_distance(kids[1], env, False, tol)
        tf = branch_distance(kids[0], env, True, tol) + branch_distance(kids[1], env, False, tol)
        ft = branch_distance(kids[0], env, False, tol) + branch_distance(kids[1], env, True, tol)
        return min(tt, ff) if same else min(tf, ft)
    if o in ("eq", "ne", "lt", "gt", "le", "ge"):
        a = eval_tree(kids[0], env, tol)
        b = eval_tree(kids[1], env, tol)
        return _compare_distance(o, a, b, want, tol)
    value = bool(eval_tree(node, env, tol))
    return 0.0 if value == want else UNSAT


def _compare_distance(o: str, a: float, b: float, want: bool, tol: float) -> float:
    if o in ("gt", "ge"):
        o, a, b = ("lt" if o == "gt" else "le"), b, a
    if o in ("eq", "ne"):
        equal = nums_equal(a, b, tol)
        if (o == "eq") == want:
            return 0.0 if equal else _num_distance(abs(a - b))
        return 0.0 if not equal else UNSAT
    strict = o == "lt"
    holds = a < b if strict else a <= b
    if holds == want:
        return 0.0
    if want:
        return _num_distance(a - b + (EPSILON if strict else 0.0))
    return _num_distance(b - a + (0.0 if strict else EPSILON))


def search_counterexample(mr: MetamorphicRelation, program: SubjectProgram, budget: int, seed: int,
                          restarts: int = SEARCH_RESTARTS, profile: ValueProfile = DEFAULT_PROFILE,
                          cache: Optional[RunCache] = None, tol: float = DEFAULT_TOL) -> StepVerdict:
    """Restarted (1+1) search for a source input whose pair violates R_o.
    Passing means no violation was found within ``budget`` evaluations."""
    if budget <= 0:
        return StepVerdict("pass", None, 0)
    cache = cache or RunCache()
    sig = program.signature
    orig = original_id(program.name)
    t = mr.input_relation.transform
    rng = random.Random(seed)
    per_restart = [budget // restarts + (1 if i < budget % restarts else 0) for i in range(restarts)]
    used = 0

    def score(values: tuple):
        x2 = transform_values(t, values)
        r1 = cache.run(orig, program, values)
        r2 = cache.run(orig, program, x2)
        if not (r1.ok and r2.ok):
            return math.inf, False
        env = relation_env(sig, values, x2, r1.output, r2.output)
        if not eval_tree(mr.output_relation, env, tol):
            return 0.0, True
        d = branch_distance(mr.output_relation, env, False, tol)
        return (math.inf if d != d else d), False

    for quota in per_restart:
        if quota == 0:
            continue
        current = random_case(sig, rng, profile)
        best, violated = score(current)
        used += 1
        if violated:
            return StepVerdict("fail", InputCase("witness", current), used)
        for _ in range(quota - 1):
            if rng.random() < 0.2:
                candidate = list(current)
                i = rng.randrange(len(candidate))
                candidate[i] = profile.value(sig.tags[i], rng)
                candidate = tuple(candidate)
            else:
                candidate = current
                for _ in range(1 + int(rng.expovariate(1.0))):
                    candidate = mutate_case(candidate, sig, rng, profile)
            d, violated = score(candidate)
            used += 1
            if violated:
                return StepVerdict("fail", InputCase("witness", candidate), used)
            if d <= best:
                current, best = candidate, d
    return StepVerdict("pass", None, used)


def validate_relations(mrs: Sequence[MetamorphicRelation], program: SubjectProgram, filter_corpus: Corpus,
                       search_budget: int, seed: int, cache: Optional[RunCache] = None,
                       tol: float = DEFAULT_TOL) -> list[FilterVerdict]:
    cache = cache or RunCache()
    verdicts = []
    for index, mr in enumerate(mrs):
        step1 = filter_fresh_inputs(mr, program, filter_corpus, cache, tol)
        if step1.passed:
            step2 = search_counterexample(mr, program, search_budget, seed + index, cache=cache, tol=tol)
        else:
            step2 = SKIPPED
        verdicts.append(FilterVerdict(mr, step1, step2))
    return verdicts


# -- evaluation -------------------------------------------------------------------

@dataclass
class EvalReport:
    mutant_ids: list[str]
    per_mr_kills: list[int] = field(default_factory=list)  # bitset over mutant_ids, one per valid MR
    trivial_kills: int = 0
    baseline_kills: int = 0
    ms: float = 0.0
    ms_oracle: float = 0.0
    baseline_ms: float = 0.0
    pz: float = 0.0
    pzo: float = 0.0
    delta_ms: Optional[float] = None
    n_relations: int = 0
    n_step1_pass: int = 0
    n_valid: int = 0

    @property
    def mr_kills(self) -> int:
        out = self.trivial_kills if self.per_mr_kills else 0
        for bits in self.per_mr_kills:
            out |= bits
        return out


def _bits(indices) -> int:
    out = 0
    for i in indices:
        out |= 1 << i
    return out


def popcount(bits: int) -> int:
    return bits.bit_count()


def kill_sets(mrs: Sequence[MetamorphicRelation], program: SubjectProgram, mutants: Sequence[Mutant],
              corpus: Corpus, cache: Optional[RunCache] = None, tol: float = DEFAULT_TOL) -> tuple[list[int], int]:
    """Per-MR oracle kill bitsets and the bitset of crash kills seen while running the MRs."""
    cache = cache or RunCache()
    sig = program.signature
    orig = original_id(program.name)
    per_mr = [0] * len(mrs)
    trivial = 0
    transforms = list(dict.fromkeys(mr.input_relation.transform for mr in mrs))
    for m_index, mutant in enumerate(mutants):
        bit = 1 << m_index
        for t in transforms:
            for case in corpus:
                for x in (case.values, transform_values(t, case.values)):
                    if cache.run(orig, program, x).ok and not cache.run(mutant.id, mutant.program, x).ok:
                        trivial |= bit
                        break
                if trivial & bit:
                    break
            if trivial & bit:
                break
        for r_index, mr in enumerate(mrs):
            t = mr.input_relation.transform
            for case in corpus:
                x1 = case.values
                x2 = transform_values(t, x1)
                o1, o2 = cache.run(orig, program, x1), cache.run(orig, program, x2)
                if not (o1.ok and o2.ok):
                    continue
                m1, m2 = cache.run(mutant.id, mutant.program, x1), cache.run(mutant.id, mutant.program, x2)
                if not (m1.ok and m2.ok):
                    continue
                if values_equal(m1.output, o1.output, tol) and values_equal(m2.output, o2.output, tol):
                    continue
                if not _holds(mr, sig, x1, x2, m1.output, m2.output, tol):
                    per_mr[r_index] |= bit
                    break
    return per_mr, trivial


def baseline_kills(program: SubjectProgram, mutants: Sequence[Mutant], corpus: Corpus,
                   cache: Optional[RunCache] = None, tol: float = DEFAULT_TOL) -> int:
    """Regression assertions: the original outcome on each input is recorded
    and a mutant dies when any outcome differs."""
    cache = cache or RunCache()
    orig = original_id(program.name)
    killed = 0
    for m_index, mutant in enumerate(mutants):
        for case in corpus:
            o = cache.run(orig, program, case.values)
            m = cache.run(mutant.id, mutant.program, case.values)
            if o.status is not m.status:
                differs = True
            elif o.ok:
                differs = not values_equal(o.output, m.output, tol)
            else:
                differs = o.error_kind != m.error_kind
            if differs:
                killed |= 1 << m_index
                break
    return killed


def delta_ms(baseline: int, mr_killed: int, total: int) -> Optional[float]:
    """Share of baseline survivors killed by the relations; ``None`` if none survived."""
    everyone = (1 << total) - 1
    survivors = everyone & ~baseline
    if not survivors:
        return None
    return popcount(mr_killed & survivors) / popcount(survivors)


def mutation_score(mrs: Sequence[MetamorphicRelation], program: SubjectProgram, mutants: Sequence[Mutant],
                   corpus: Corpus, cache: Optional[RunCache] = None, tol: float = DEFAULT_TOL) -> EvalReport:
    if not mutants:
        raise ValueError("mutation score needs at least one eval mutant")
    cache = cache or RunCache()
    report = EvalReport([m.id for m in mutants])
    if mrs:
        report.per_mr_kills, report.trivial_kills = kill_sets(mrs, program, mutants, corpus, cache, tol)
        report.ms = popcount(report.mr_kills) / len(mutants)
        oracle = 0
        for bits in report.per_mr_kills:
            oracle |= bits
        report.ms_oracle = popcount(oracle) / len(mutants)
    return report


def evaluate(verdicts: Sequence[FilterVerdict], program: SubjectProgram, mutants: Sequence[Mutant], corpus: Corpus,
             cache: Optional[RunCache] = None, tol: float = DEFAULT_TOL) -> EvalReport:
    """Full report: MS over valid MRs, PZ, PZO and the delta over the baseline."""
    cache = cache or RunCache()
    valid = [v.mr for v in verdicts if v.valid]
    report = mutation_score(valid, program, mutants, corpus, cache, tol)
    report.n_relations = len(verdicts)
    report.n_step1_pass = sum(v.step1.passed for v in verdicts)
    report.n_valid = len(valid)
    report.pz = report.n_step1_pass / len(verdicts) if verdicts else 0.0
    report.pzo = report.n_valid / report.n_step1_pass if report.n_step1_pass else 0.0
    report.baseline_kills = baseline_kills(program, mutants, corpus, cache, tol)
    report.baseline_ms = popcount(report.baseline_kills) / len(mutants)
    report.delta_ms = delta_ms(report.baseline_kills, report.mr_kills, len(mutants))
    return report


def relation_mutation_scores(mrs: Sequence[MetamorphicRelation], program: SubjectProgram,
                             mutants: Sequence[Mutant], corpus: Corpus, cache: Optional[RunCache] = None,
                             tol: float = DEFAULT_TOL) -> list[float]:
    """MS of each relation on its own oracle kills; crash kills are not credited to it."""
    cache = cache or RunCache()
    return [mutation_score([mr], program, mutants, corpus, cache, tol).ms_oracle for mr in mrs]
