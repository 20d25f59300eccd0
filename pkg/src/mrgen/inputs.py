"""Source-input generation: plain random corpora and branch-novelty corpora."""
from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .lang import DEFAULT_STEP_BUDGET, SubjectProgram
from .seeds import derive_seed
from .values import Signature, TypeTag, parse_value, render_value, split_values, tag_of

PURPOSES = ("train", "filter", "eval")


@dataclass(frozen=True)
class InputCase:
    id: str
    values: tuple

    def render(self) -> str:
        return ",".join(render_value(v) for v in self.values)


@dataclass
class Corpus:
    cases: list[InputCase]
    covered_branches: frozenset = frozenset()
    generator_seed: int = 0
    purpose: str = "train"

    def __post_init__(self):
        ids = [c.id for c in self.cases]
        if len(set(ids)) != len(ids):
            raise ValueError("corpus case ids must be unique")
        if self.purpose not in PURPOSES:
            raise ValueError(f"unknown corpus purpose {self.purpose!r}")

    def __len__(self) -> int:
        return len(self.cases)

    def __iter__(self):
        return iter(self.cases)


@dataclass(frozen=True)
class ValueProfile:
    """Mixture used for every random number: specials, small ints, wide ints."""

    specials: tuple[float, ...] = (-128.0, -1.0, 0.0, 1.0, 2.0)
    small: tuple[int, int] = (-10, 10)
    wide: tuple[int, int] = (-10_000, 10_000)
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    seq_mean_length: float = 4.0
    seq_max_length: int = 64

    def number(self, rng: random.Random) -> float:
        bucket = rng.choices((0, 1, 2), weights=self.weights)[0]
        if bucket == 0:
            return float(rng.choice(self.specials))
        lo, hi = self.small if bucket == 1 else self.wide
        return float(rng.randint(lo, hi))

    def sequence(self, rng: random.Random) -> tuple[float, ...]:
        # geometric on {0, 1, ...} with the configured mean
        p = 1.0 / (1.0 + self.seq_mean_length)
        length = 0
        while length < self.seq_max_length and rng.random() >= p:
            length += 1
        return tuple(self.number(rng) for _ in range(length))

    def value(self, tag: TypeTag, rng: random.Random):
        if tag is TypeTag.BOOL:
            return rng.random() < 0.5
        if tag is TypeTag.NUM:
            return self.number(rng)
        return self.sequence(rng)


DEFAULT_PROFILE = ValueProfile()


def corpus_seed(master: int, purpose: str) -> int:
    """Seed for a corpus of the given purpose; purposes never share a stream."""
    if purpose not in PURPOSES:
        raise ValueError(f"unknown corpus purpose {purpose!r}")
    return derive_seed(master, "corpus", purpose)


def random_case(signature: Signature, rng: random.Random, profile: ValueProfile = DEFAULT_PROFILE) -> tuple:
    return tuple(profile.value(tag, rng) for tag in signature.tags)


def generate_random_inputs(signature: Signature, n: int, seed: int, profile: ValueProfile = DEFAULT_PROFILE,
                           purpose: str = "train") -> Corpus:
    if n <= 0:
        raise ValueError(f"need a positive number of inputs, got {n}")
    rng = random.Random(seed)
    cases = [InputCase(f"test{i}", random_case(signature, rng, profile)) for i in range(n)]
    return Corpus(cases, frozenset(), seed, purpose)


def _tweak(value, tag: TypeTag, rng: random.Random, profile: ValueProfile):
    if tag is TypeTag.BOOL:
        return not value
    if tag is TypeTag.NUM:
        move = rng.randrange(4)
        if move == 0:
            return value + 1.0
        if move == 1:
            return value - 1.0
        if move == 2:
            return value * 2.0
        return -value
    items = list(value)
    move = rng.randrange(3) if items else 1
    if move == 0:
        i = rng.randrange(len(items))
        items[i] = items[i] + rng.choice((-1.0, 1.0)) if rng.random() < 0.5 else profile.number(rng)
    elif move == 1 and len(items) < profile.seq_max_length:
        items.insert(rng.randint(0, len(items)), profile.number(rng))
    elif items:
        del items[rng.randrange(len(items))]
    return tuple(items)


def mutate_case(values: tuple, signature: Signature, rng: random.Random,
                profile: ValueProfile = DEFAULT_PROFILE) -> tuple:
    i = rng.randrange(len(values))
    out = list(values)
    out[i] = _tweak(values[i], signature.tags[i], rng, profile)
    return tuple(out)


def generate_coverage_guided(program: SubjectProgram, budget: int, seed: int, n_base: Optional[int] = None,
                             profile: ValueProfile = DEFAULT_PROFILE, purpose: str = "train",
                             step_budget: int = DEFAULT_STEP_BUDGET) -> Corpus:
    """Random search that keeps the first ``n_base`` cases plus any case reaching
    a branch outcome not seen before. Later candidates are either fresh random
    cases or single-parameter tweaks of retained ones, half and half."""
    if budget <= 0:
        raise ValueError(f"budget must be positive, got {budget}")
    if n_base is None:
        n_base = max(1, budget // 4)
    sig = program.signature
    rng = random.Random(seed)
    kept: list[tuple] = []
    covered: set = set()
    for i in range(budget):
        if i < n_base or not kept or rng.random() < 0.5:
            values = random_case(sig, rng, profile)
        else:
            values = mutate_case(rng.choice(kept), sig, rng, profile)
        outcome = program.run(values, step_budget, trace=True)
        novel = not outcome.trace.branch_outcomes <= covered
        if i < n_base or novel:
            kept.append(values)
            covered |= outcome.trace.branch_outcomes
    cases = [InputCase(f"test{i}", values) for i, values in enumerate(kept)]
    return Corpus(cases, frozenset(covered), seed, purpose)


def replay_coverage(program: SubjectProgram, cases: Sequence[InputCase],
                    step_budget: int = DEFAULT_STEP_BUDGET) -> frozenset:
    covered = set()
    for case in cases:
        covered |= program.run(case.values, step_budget, trace=True).trace.branch_outcomes
    return frozenset(covered)


def check_case(case: InputCase, signature: Signature) -> None:
    if len(case.values) != len(signature):
        raise ValueError(f"{case.id}: expected {len(signature)} values, got {len(case.values)}")
    for value, tag in zip(case.values, signature.tags):
        if tag_of(value) is not tag:
            raise ValueError(f"{case.id}: expected {tag}, got {render_value(value)}")


def sample_cases(corpus: Corpus, n: int, seed: int) -> Corpus:
    """Uniform sample without replacement (the whole corpus when ``n`` covers it)."""
    if n >= len(corpus):
        return corpus
    rng = random.Random(seed)
    picked = sorted(rng.sample(range(len(corpus)), n))
    return Corpus([corpus.cases[i] for i in picked], corpus.covered_branches, corpus.generator_seed,
                  corpus.purpose)


# -- corpus file --------------------------------------------------------------

def save_corpus(corpus: Corpus, path: Path) -> None:
    lines = [f"{case.id}\t{case.render()}\n" for case in corpus.cases]
    Path(path).write_text("".join(lines), encoding="utf-8")


def load_corpus(path: Path, signature: Signature, purpose: str = "train", seed: int = 0) -> Corpus:
    cases = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            case_id, body = line.split("\t", 1)
            parts = split_values(body)
            if len(parts) != len(signature):
                raise ValueError(f"expected {len(signature)} values, got {len(parts)}")
            values = tuple(parse_value(p, tag) for p, tag in zip(parts, signature.tags))
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
        cases.append(InputCase(case_id, values))
    return Corpus(cases, frozenset(), seed, purpose)
