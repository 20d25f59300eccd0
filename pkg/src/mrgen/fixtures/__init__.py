"""Bundled muLang subject functions."""
from __future__ import annotations

from importlib import resources

from ..lang import SubjectProgram, parse_program

NAMES = ("pow", "gcd", "isPrime", "nextPrime", "min", "meanOf", "isSorted", "repeat", "reverse")


def fixture_source(name: str) -> str:
    if name not in NAMES:
        raise KeyError(f"unknown fixture {name!r}; choose from {', '.join(NAMES)}")
    return resources.files(__name__).joinpath(f"{name}.mu").read_text(encoding="utf-8")


def load_fixture(name: str) -> SubjectProgram:
    return parse_program(fixture_source(name))
