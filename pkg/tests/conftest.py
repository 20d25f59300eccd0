from __future__ import annotations

import pytest
from hypothesis import strategies as st

from mrgen.fixtures import load_fixture

finite_nums = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)
small_ints = st.integers(min_value=-20, max_value=20).map(float)
sequences = st.lists(small_ints, max_size=6).map(tuple)


@pytest.fixture(scope="session")
def pow_program():
    return load_fixture("pow")


@pytest.fixture(scope="session")
def pow_mutants(pow_program):
    from mrgen.mutate import generate_mutants

    return generate_mutants(pow_program)


@pytest.fixture(scope="session")
def sdl_mutant(pow_mutants):
    """The mutant that deletes ``k2p = k2p * k2p``."""
    return next(m for m in pow_mutants if m.operator == "SDL" and m.original == "k2p = k2p * k2p;")


@pytest.fixture(scope="session")
def e_minus_one():
    from mrgen.transforms import InputTransform, Template

    return InputTransform(Template.NUMERIC_ADDITION, (1,), -1.0)


@pytest.fixture(scope="session")
def pow_train_store(pow_program, pow_mutants, e_minus_one):
    """Deduplicated pow store for the e-1 transform over a seeded random corpus."""
    from mrgen.inputs import generate_random_inputs
    from mrgen.store import collect_executions, filter_and_sample

    corpus = generate_random_inputs(pow_program.signature, 300, 21)
    store = collect_executions(pow_program, pow_mutants, corpus, e_minus_one)
    return filter_and_sample(store, (9000, 9000), 0)
