"""Correct and incorrect execution pairs, cached once per transform.

Record file format (JSON lines). The first line is a header object::

    {"format": "mrgen-store", "version": 1, "subject": "pow",
     "signature": "(k: num, e: num) -> num", "transform": "NumericAddition(param=1, c=-1)",
     "caps": [9000, 9000], "correct": 2, "incorrect": 1, "triviallyKilled": {"pow@SDL:2": 3}}

followed by two lines per pair, source record first::

    {"systemId": "pow@original", "testId": "test100",
     "variables": {"inputs": {"k": -128.0, "e": 2.0}, "outputs": {"return": 16384.0}},
     "status": "Ok", "label": "Correct", "role": "source"}

``systemId``, ``testId`` and ``variables`` follow the instrumentation layout
of the original tool. ``status``, ``label`` and ``role`` are extensions.
Error records would carry ``"status": "Error"`` and an ``errorKind`` key in
place of ``outputs``; pairs never contain them, but :func:`parse_record`
accepts them.
"""
from __future__ import annotations

import enum
import json
import random
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .inputs import Corpus, InputCase
from .lang import DEFAULT_STEP_BUDGET, RunOutcome, Status, SubjectProgram
from .mutate import Mutant
from .transforms import InputTransform, apply_transform, canonical, check_relation, parse_descriptor
from .values import DEFAULT_TOL, Signature, TypeTag, coerce, render_value, values_equal

FORMAT = "mrgen-store"
VERSION = 1

_STATUS_NAMES = {Status.OK: "Ok", Status.ERROR: "Error", Status.TIMEOUT: "Timeout"}
_STATUS_BY_NAME = {v: k for k, v in _STATUS_NAMES.items()}


def original_id(program_name: str) -> str:
    return f"{program_name}@original"


class Label(enum.Enum):
    CORRECT = "Correct"
    INCORRECT = "Incorrect"


class StoreFormatError(ValueError):
    def __init__(self, message: str, line: int, offset: int):
        self.line = line
        self.offset = offset
        super().__init__(f"line {line} (byte offset {offset}): {message}")


@dataclass(frozen=True)
class ExecutionRecord:
    system_id: str
    test_id: str
    inputs: tuple[tuple[str, object], ...]
    status: Status
    output: object = None
    error_kind: Optional[str] = None

    def __post_init__(self):
        if self.status is Status.OK and self.error_kind is not None:
            raise ValueError("Ok records carry no error kind")
        if self.status is not Status.OK and self.output is not None:
            raise ValueError("failed records carry no output")

    @property
    def values(self) -> tuple:
        return tuple(v for _, v in self.inputs)

    @property
    def ok(self) -> bool:
        return self.status is Status.OK

    def to_json(self) -> dict:
        obj = {
            "systemId": self.system_id,
            "testId": self.test_id,
            "variables": {"inputs": {name: _jsonable(v) for name, v in self.inputs}},
            "status": _STATUS_NAMES[self.status],
        }
        if self.ok:
            obj["variables"]["outputs"] = {"return": _jsonable(self.output)}
        elif self.error_kind is not None:
            obj["errorKind"] = self.error_kind
        return obj


def _jsonable(value):
    return list(value) if isinstance(value, tuple) else value


def record_from_outcome(system_id: str, case: InputCase, signature: Signature,
                        outcome: RunOutcome) -> ExecutionRecord:
    return ExecutionRecord(system_id, case.id, tuple(zip(signature.names, case.values)), outcome.status,
                           outcome.output if outcome.ok else None,
                           outcome.error_kind if outcome.status is Status.ERROR else None)


def parse_record(obj: dict, signature: Signature) -> ExecutionRecord:
    """Build a record from one decoded JSON object."""
    try:
        raw_inputs = obj["variables"]["inputs"]
        inputs = tuple((name, coerce(raw_inputs[name], tag)) for name, tag in signature.params)
        status = _STATUS_BY_NAME[obj.get("status", "Ok")]
        output = None
        if status is Status.OK:
            output = coerce(obj["variables"]["outputs"]["return"], signature.output)
        return ExecutionRecord(str(obj["systemId"]), str(obj["testId"]), inputs, status, output,
                               obj.get("errorKind"))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"bad record: missing or mistyped {exc}") from None


@dataclass(frozen=True)
class ExecutionPair:
    transform: InputTransform
    source: ExecutionRecord
    followup: ExecutionRecord
    label: Label
    mutant_id: Optional[str] = None

    def __post_init__(self):
        if (self.mutant_id is not None) != (self.label is Label.INCORRECT):
            raise ValueError("mutant_id is present exactly on Incorrect pairs")

    def key(self) -> tuple:
        return (
            self.label.value, self.mutant_id,
            tuple(render_value(v) for v in self.source.values), render_value(self.source.output),
            tuple(render_value(v) for v in self.followup.values), render_value(self.followup.output),
        )


@dataclass
class ExecutionStore:
    signature: Signature
    transform: InputTransform
    correct: list[ExecutionPair] = field(default_factory=list)
    incorrect: list[ExecutionPair] = field(default_factory=list)
    caps: tuple[int, int] = (9000, 9000)
    trivially_killed: Counter = field(default_factory=Counter)
    subject: str = ""

    @property
    def relation(self):
        return canonical(self.transform, self.signature)

    def original_outputs(self) -> dict[str, tuple]:
        """test id -> (source output, follow-up output) of the original program."""
        return {p.source.test_id: (p.source.output, p.followup.output) for p in self.correct}


class RunCache:
    """Memoizes (system id, input values) -> RunOutcome. Safe to share across transforms."""

    def __init__(self, step_budget: int = DEFAULT_STEP_BUDGET):
        self.step_budget = step_budget
        self._runs: dict = {}
        self.hits = 0

    def run(self, system_id: str, program: SubjectProgram, values: tuple) -> RunOutcome:
        key = (system_id, values)
        hit = self._runs.get(key)
        if hit is not None:
            self.hits += 1
            return hit
        outcome = program.run(values, self.step_budget, trace=False)
        self._runs[key] = outcome
        return outcome


def collect_executions(program: SubjectProgram, mutants: Sequence[Mutant], corpus: Corpus, t: InputTransform,
                       cache: Optional[RunCache] = None, tol: float = DEFAULT_TOL,
                       caps: tuple[int, int] = (9000, 9000)) -> ExecutionStore:
    sig = program.signature
    t.check_signature(sig)
    cache = cache or RunCache()
    orig_id = original_id(program.name)
    store = ExecutionStore(sig, t, caps=caps, subject=program.name)
    for case in corpus:
        follow = apply_transform(t, case)
        src_run = cache.run(orig_id, program, case.values)
        fol_run = cache.run(orig_id, program, follow.values)
        if not (src_run.ok and fol_run.ok):
            continue
        store.correct.append(ExecutionPair(
            t, record_from_outcome(orig_id, case, sig, src_run), record_from_outcome(orig_id, follow, sig, fol_run),
            Label.CORRECT))
        for mutant in mutants:
            m_src = cache.run(mutant.id, mutant.program, case.values)
            m_fol = cache.run(mutant.id, mutant.program, follow.values)
            if not (m_src.ok and m_fol.ok):
                store.trivially_killed[mutant.id] += 1
                continue
            if values_equal(m_src.output, src_run.output, tol) and values_equal(m_fol.output, fol_run.output, tol):
                continue
            store.incorrect.append(ExecutionPair(
                t, record_from_outcome(mutant.id, case, sig, m_src),
                record_from_outcome(mutant.id, follow, sig, m_fol), Label.INCORRECT, mutant.id))
    return store


def _dedup(pairs: Iterable[ExecutionPair]) -> list[ExecutionPair]:
    seen, out = set(), []
    for pair in pairs:
        k = pair.key()
        if k not in seen:
            seen.add(k)
            out.append(pair)
    return out


def _sample(pairs: list[ExecutionPair], cap: int, rng: random.Random) -> list[ExecutionPair]:
    if len(pairs) <= cap:
        return pairs
    keep = sorted(rng.sample(range(len(pairs)), cap))
    return [pairs[i] for i in keep]


def filter_and_sample(store: ExecutionStore, caps: tuple[int, int], seed: int) -> ExecutionStore:
    """Deduplicate, then sample each label uniformly down to its cap (order preserved)."""
    max_correct, max_incorrect = caps
    if max_correct <= 0 or max_incorrect <= 0:
        raise ValueError(f"caps must be positive, got {caps}")
    rng = random.Random(seed)
    correct = _sample(_dedup(store.correct), max_correct, rng)
    incorrect = _sample(_dedup(store.incorrect), max_incorrect, rng)
    return replace(store, correct=correct, incorrect=incorrect, caps=(max_correct, max_incorrect),
                   trivially_killed=Counter(store.trivially_killed))


# -- persistence --------------------------------------------------------------

def _dumps(obj) -> str:
    return json.dumps(obj, separators=(", ", ": "), ensure_ascii=False)


def store_to_text(store: ExecutionStore) -> str:
    header = {
        "format": FORMAT,
        "version": VERSION,
        "subject": store.subject,
        "signature": str(store.signature),
        "transform": store.transform.descriptor(),
        "caps": list(store.caps),
        "correct": len(store.correct),
        "incorrect": len(store.incorrect),
        "triviallyKilled": dict(sorted(store.trivially_killed.items())),
    }
    lines = [_dumps(header)]
    for pair in store.correct + store.incorrect:
        for role, record in (("source", pair.source), ("followup", pair.followup)):
            obj = record.to_json()
            obj["label"] = pair.label.value
            obj["role"] = role
            lines.append(_dumps(obj))
    return "\n".join(lines) + "\n"


def save_store(store: ExecutionStore, path: Path) -> None:
    Path(path).write_text(store_to_text(store), encoding="utf-8")


def parse_signature(text: str) -> Signature:
    head, _, output = text.partition("->")
    inner = head.strip()
    if not (inner.startswith("(") and inner.endswith(")")):
        raise ValueError(f"malformed signature {text!r}")
    params = []
    for part in filter(None, (p.strip() for p in inner[1:-1].split(","))):
        name, _, tag = part.partition(":")
        params.append((name.strip(), TypeTag(tag.strip())))
    return Signature(tuple(params), TypeTag(output.strip()))


def store_from_text(text: str) -> ExecutionStore:
    lines = text.split("\n")
    offsets, pos = [], 0
    for line in lines:
        offsets.append(pos)
        pos += len(line.encode("utf-8")) + 1
    if not text.endswith("\n"):
        raise StoreFormatError("file does not end with a newline (truncated?)", len(lines), offsets[-1])
    lines = lines[:-1]

    def decode(i: int) -> dict:
        try:
            obj = json.loads(lines[i])
        except json.JSONDecodeError as exc:
            raise StoreFormatError(exc.msg, i + 1, offsets[i] + exc.pos) from None
        if not isinstance(obj, dict):
            raise StoreFormatError("expected a JSON object", i + 1, offsets[i])
        return obj

    if not lines:
        raise StoreFormatError("empty store file", 1, 0)
    header = decode(0)
    if header.get("format") != FORMAT or header.get("version") != VERSION:
        raise StoreFormatError("not a version-1 store header", 1, 0)
    try:
        signature = parse_signature(header["signature"])
        transform = parse_descriptor(header["transform"])
        n_correct, n_incorrect = int(header["correct"]), int(header["incorrect"])
        caps = tuple(int(c) for c in header["caps"])
    except (KeyError, ValueError) as exc:
        raise StoreFormatError(f"bad header: {exc}", 1, 0) from None
    expected = 1 + 2 * (n_correct + n_incorrect)
    if len(lines) != expected:
        raise StoreFormatError(f"expected {expected} lines, found {len(lines)}", len(lines), offsets[len(lines) - 1])
    relation = canonical(transform, signature)
    store = ExecutionStore(signature, transform, caps=caps, subject=str(header.get("subject", "")),
                           trivially_killed=Counter(header.get("triviallyKilled", {})))
    for k in range(n_correct + n_incorrect):
        i = 1 + 2 * k
        objs = decode(i), decode(i + 1)
        try:
            src, fol = (parse_record(o, signature) for o in objs)
            label = Label(objs[0]["label"])
        except (KeyError, ValueError) as exc:
            raise StoreFormatError(str(exc), i + 1, offsets[i]) from None
        if objs[0].get("role") != "source" or objs[1].get("role") != "followup" or objs[1].get("label") != label.value:
            raise StoreFormatError("pair records out of order", i + 1, offsets[i])
        if (label is Label.CORRECT) != (k < n_correct):
            raise StoreFormatError("label does not match header counts", i + 1, offsets[i])
        if not check_relation(relation, src.values, fol.values):
            raise StoreFormatError("pair violates the canonical input relation", i + 1, offsets[i])
        mutant_id = src.system_id if label is Label.INCORRECT else None
        pair = ExecutionPair(transform, src, fol, label, mutant_id)
        (store.correct if label is Label.CORRECT else store.incorrect).append(pair)
    return store


def load_store(path: Path) -> ExecutionStore:
    return store_from_text(Path(path).read_text(encoding="utf-8"))
