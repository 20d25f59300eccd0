"""End-to-end orchestration: six stages that communicate only through files.

Layout of the output directory::

    config.yaml             resolved configuration (provenance)
    inputs/{train,filter,eval}.tsv
    mutants/manifest.tsv    mutants/split.json
    transforms.json         sampled input transforms and the mined constant pool
    stores/store-<i>.jsonl  one execution store per transform
    relations.json          evolved relations per transform
    verdicts.json           verdicts.log
    report.json             report.txt
    timings.json            wall-clock seconds per stage (kept out of the report)

``run_all`` calls the stages in order, each re-reading its inputs from disk,
so a full run and a sequence of single-stage invocations are the same thing.
"""
from __future__ import annotations

import hashlib
import json
import time
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

from .config import ConfigError, PipelineConfig, subject_source
from .evolve import Evolution, Fitness, MetamorphicRelation, Node, Scope, parse_prefix, to_prefix
from .inputs import Corpus, InputCase, corpus_seed, generate_coverage_guided, generate_random_inputs, load_corpus, \
    save_corpus
from .lang import SubjectProgram, mine_constants, parse_program
from .mutate import Mutant, MutantSet, generate_mutants, split_mutants, write_manifest
from .store import RunCache, collect_executions, filter_and_sample, load_store, save_store
from .transforms import (InputTransform, apply_transform, canonical, enumerate_applicable, parse_descriptor,
                         sample_instantiations)
from .validate import EvalReport, FilterVerdict, StepVerdict, evaluate, relation_mutation_scores, validate_relations
from .values import parse_value, render_value, split_values

STAGES = ("gen-inputs", "gen-mutants", "collect", "evolve", "filter", "evaluate")
PURPOSES = ("train", "filter", "eval")


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.message = message


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n", encoding="utf-8")


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _step_json(step: StepVerdict) -> dict:
    return {"status": step.status, "checked": step.checked,
            "witness": None if step.witness is None else step.witness.render()}


def _fitness_json(f: Optional[Fitness]) -> Optional[dict]:
    return None if f is None else {"fp": f.fp, "fn": f.fn, "size": f.size}


@dataclass
class Workspace:
    root: Path

    def path(self, *parts: str) -> Path:
        return self.root.joinpath(*parts)

    def require(self, stage: str, *parts: str) -> Path:
        path = self.path(*parts)
        if not path.exists():
            raise StageError(stage, f"missing {path}: run stage {_PRODUCER[parts[0]]} first")
        return path


_PRODUCER = {"inputs": "gen-inputs", "mutants": "gen-mutants", "transforms.json": "collect", "stores": "collect",
             "relations.json": "evolve", "verdicts.json": "filter", "report.json": "evaluate"}


class Pipeline:
    """One configured run. Constructing it validates the configuration."""

    def __init__(self, config: PipelineConfig):
        config.validate()
        self.config = config
        self.source = subject_source(config.subject)
        try:
            self.program: SubjectProgram = parse_program(self.source)
        except Exception as exc:  # parse and type errors alike
            raise ConfigError(f"subject {config.subject!r} does not parse or type-check: {exc}") from None
        self.signature = self.program.signature
        self.scope = Scope(self.signature)
        try:
            self.fixed_transforms = [parse_descriptor(d) for d in config.transform_descriptors]
            for t in self.fixed_transforms:
                t.check_signature(self.signature)
            self.seed_trees = [parse_prefix(text, self.scope) for text in config.seed_relations]
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from None
        self.ws = Workspace(Path(config.out))
        self.cache = RunCache(config.step_budget)
        self._mutants: Optional[list[Mutant]] = None

    # -- shared helpers ---------------------------------------------------------
    @property
    def seeds(self) -> dict:
        cfg = self.config
        seeds = {f"corpus/{p}": corpus_seed(cfg.seed, p) for p in PURPOSES}
        seeds["mutants/split"] = cfg.stage_seed("mutants", "split")
        seeds["transforms"] = cfg.stage_seed("transforms")
        return seeds

    def transform_seeds(self, t: InputTransform) -> dict:
        d = t.descriptor()
        return {"store": self.config.stage_seed("store", d), "evolve": self.config.stage_seed("evolve", d),
                "search": self.config.stage_seed("search", d)}

    def all_mutants(self) -> list[Mutant]:
        if self._mutants is None:
            self._mutants = generate_mutants(self.program)
        return self._mutants

    def load_corpus(self, stage: str, purpose: str) -> Corpus:
        path = self.ws.require(stage, "inputs", f"{purpose}.tsv")
        return load_corpus(path, self.signature, purpose, corpus_seed(self.config.seed, purpose))

    def load_split(self, stage: str) -> MutantSet:
        data = json.loads(self.ws.require(stage, "mutants", "split.json").read_text(encoding="utf-8"))
        by_id = {m.id: m for m in self.all_mutants()}
        missing = [i for i in data["train"] + data["eval"] if i not in by_id]
        if missing:
            raise StageError(stage, f"mutant split does not match the subject ({missing[0]}): "
                                    f"run stage gen-mutants first")
        return MutantSet([by_id[i] for i in data["train"]], [by_id[i] for i in data["eval"]])

    def load_transforms(self, stage: str) -> list[InputTransform]:
        data = json.loads(self.ws.require(stage, "transforms.json").read_text(encoding="utf-8"))
        return [parse_descriptor(entry["descriptor"]) for entry in data["transforms"]]

    def load_relations(self, stage: str) -> list[dict]:
        data = json.loads(self.ws.require(stage, "relations.json").read_text(encoding="utf-8"))
        out = []
        for group in data["groups"]:
            t = parse_descriptor(group["transform"])
            rel = canonical(t, self.signature)
            mrs = []
            for entry in group["relations"]:
                fit = entry.get("fitness")
                mrs.append(MetamorphicRelation(rel, parse_prefix(entry["outputRelation"], self.scope),
                                               None if fit is None else Fitness(fit["fp"], fit["fn"], fit["size"])))
            out.append({**group, "mrs": mrs})
        return out

    def load_verdicts(self, stage: str, groups: list[dict]) -> list[list[FilterVerdict]]:
        data = json.loads(self.ws.require(stage, "verdicts.json").read_text(encoding="utf-8"))
        out = []
        for group, saved in zip(groups, data["groups"], strict=True):
            verdicts = []
            for mr, entry in zip(group["mrs"], saved["verdicts"], strict=True):
                if entry["outputRelation"] != mr.prefix:
                    raise StageError(stage, "verdicts do not match relations: run stage filter first")
                verdicts.append(FilterVerdict(mr, self._step(entry["step1"]), self._step(entry["step2"])))
            out.append(verdicts)
        return out

    def _step(self, obj: dict) -> StepVerdict:
        witness = None
        if obj["witness"] is not None:
            parts = split_values(obj["witness"])
            witness = InputCase("witness", tuple(parse_value(p, tag) for p, tag in zip(parts, self.signature.tags)))
        return StepVerdict(obj["status"], witness, obj["checked"])

    # -- stages -------------------------------------------------------------------
    def gen_inputs(self) -> None:
        cfg = self.config
        self.ws.path("inputs").mkdir(parents=True, exist_ok=True)
        train = generate_coverage_guided(self.program, cfg.train_budget, corpus_seed(cfg.seed, "train"),
                                         n_base=cfg.train_size, step_budget=cfg.step_budget)
        save_corpus(train, self.ws.path("inputs", "train.tsv"))
        for purpose, n in (("filter", cfg.filter_size), ("eval", cfg.eval_size)):
            corpus = generate_random_inputs(self.signature, n, corpus_seed(cfg.seed, purpose), purpose=purpose)
            save_corpus(corpus, self.ws.path("inputs", f"{purpose}.tsv"))

    def gen_mutants(self) -> None:
        self.ws.path("mutants").mkdir(parents=True, exist_ok=True)
        mutants = self.all_mutants()
        write_manifest(mutants, self.ws.path("mutants", "manifest.tsv"))
        split = split_mutants(mutants, self.config.eval_fraction, self.seeds["mutants/split"])
        _dump_json({"train": [m.id for m in split.train], "eval": [m.id for m in split.eval]},
                   self.ws.path("mutants", "split.json"))

    def select_transforms(self, train: Corpus) -> tuple[list[InputTransform], str]:
        traces = [self.program.run(c.values, self.config.step_budget, trace=True).trace for c in train]
        pool = mine_constants(traces)
        if self.fixed_transforms:
            return list(self.fixed_transforms), str(pool)
        applicable = enumerate_applicable(self.signature, pool)
        k = self.config.transform_count
        if k > len(applicable):
            warnings.warn(f"{k} transforms requested but only {len(applicable)} apply; using all of them",
                          UserWarning, stacklevel=2)
        return sample_instantiations(applicable, k, self.seeds["transforms"]), str(pool)

    def collect(self) -> None:
        stage = "collect"
        train = self.load_corpus(stage, "train")
        split = self.load_split(stage)
        transforms, pool = self.select_transforms(train)
        _dump_json({"constantPool": pool,
                    "transforms": [{"descriptor": t.descriptor(), "weight": t.weight} for t in transforms]},
                   self.ws.path("transforms.json"))
        self.ws.path("stores").mkdir(parents=True, exist_ok=True)
        for index, t in enumerate(transforms):
            raw = collect_executions(self.program, split.train, train, t, self.cache, self.config.tolerance,
                                     self.config.caps)
            store = filter_and_sample(raw, self.config.caps, self.transform_seeds(t)["store"])
            save_store(store, self.ws.path("stores", f"store-{index}.jsonl"))

    def evolve(self) -> None:
        stage = "evolve"
        transforms = self.load_transforms(stage)
        groups = []
        for index, t in enumerate(transforms):
            store = load_store(self.ws.require(stage, "stores", f"store-{index}.jsonl"))
            group = {"transform": t.descriptor(), "inputRelation": canonical(t, self.signature).rendering,
                     "store": {"correct": len(store.correct), "incorrect": len(store.incorrect),
                               "triviallyKilled": sum(store.trivially_killed.values())}}
            if not store.correct:
                warnings.warn(f"{t.descriptor()}: no correct executions, no relations evolved", UserWarning,
                              stacklevel=2)
                groups.append({**group, "generations": 0, "evaluations": 0, "relations": []})
                continue
            evo_cfg = replace(self.config.evolution, seed=self.transform_seeds(t)["evolve"],
                              parallel=self.config.evolution.parallel and not self.config.deterministic)
            result = Evolution(canonical(t, self.signature), store, evo_cfg, self.seed_trees).run()
            groups.append({**group, "generations": result.generations_run, "evaluations": result.evaluations,
                           "relations": [{"outputRelation": mr.prefix, "infix": mr.infix(self.program.name),
                                          "fitness": _fitness_json(mr.fitness)} for mr in result.relations]})
        _dump_json({"subject": self.program.name, "signature": str(self.signature), "groups": groups},
                   self.ws.path("relations.json"))

    def filter(self) -> None:
        stage = "filter"
        groups = self.load_relations(stage)
        corpus = self.load_corpus(stage, "filter")
        saved, log = [], []
        for g_index, group in enumerate(groups):
            t = parse_descriptor(group["transform"])
            verdicts = validate_relations(group["mrs"], self.program, corpus, self.config.search_budget,
                                          self.transform_seeds(t)["search"], self.cache, self.config.tolerance)
            entries = []
            for r_index, v in enumerate(verdicts):
                entries.append({"id": f"T{g_index}.R{r_index}", "outputRelation": v.mr.prefix,
                                "step1": _step_json(v.step1), "step2": _step_json(v.step2), "valid": v.valid})
                log.append(_verdict_line(f"T{g_index}.R{r_index}", v))
            saved.append({"transform": group["transform"], "verdicts": entries})
        _dump_json({"groups": saved}, self.ws.path("verdicts.json"))
        self.ws.path("verdicts.log").write_text("".join(line + "\n" for line in log), encoding="utf-8")

    def evaluate(self) -> None:
        stage = "evaluate"
        groups = self.load_relations(stage)
        verdict_groups = self.load_verdicts(stage, groups)
        split = self.load_split(stage)
        corpus = self.load_corpus(stage, "eval")
        if not split.eval:
            raise StageError(stage, "no eval mutants: the subject yields fewer than two mutants")
        everything = [v for vs in verdict_groups for v in vs]
        report = evaluate(everything, self.program, split.eval, corpus, self.cache, self.config.tolerance)
        valid = [v.mr for v in everything if v.valid]
        scores = dict(zip(valid, relation_mutation_scores(valid, self.program, split.eval, corpus, self.cache,
                                                          self.config.tolerance)))
        out = self.report(groups, verdict_groups, report, scores, split)
        _dump_json(out, self.ws.path("report.json"))
        self.ws.path("report.txt").write_text(render_table(out), encoding="utf-8")

    def report(self, groups, verdict_groups, report: EvalReport, scores: dict, split: MutantSet) -> dict:
        cfg = self.config
        transforms = []
        for g_index, (group, verdicts) in enumerate(zip(groups, verdict_groups)):
            t = parse_descriptor(group["transform"])
            rels = []
            for r_index, v in enumerate(verdicts):
                rels.append({"id": f"T{g_index}.R{r_index}", "outputRelation": v.mr.prefix,
                             "infix": v.mr.infix(self.program.name), "fitness": _fitness_json(v.mr.fitness),
                             "step1": _step_json(v.step1), "step2": _step_json(v.step2), "valid": v.valid,
                             "ms": scores.get(v.mr, 0.0) if v.valid else 0.0})
            transforms.append({"transform": group["transform"], "inputRelation": group["inputRelation"],
                               "store": group["store"], "generations": group["generations"],
                               "evaluations": group["evaluations"], "seeds": self.transform_seeds(t),
                               "relations": rels})
        ids = report.mutant_ids

        def named(bits: int) -> list[str]:
            return [ids[i] for i in range(len(ids)) if bits >> i & 1]

        return {
            "subject": self.program.name,
            "signature": str(self.signature),
            "provenance": {"masterSeed": cfg.seed, "configSha256": cfg.digest(), "subjectSha256": _sha256(self.source),
                           "seeds": self.seeds},
            "mutants": {"total": len(split.train) + len(split.eval), "train": len(split.train),
                        "eval": len(split.eval)},
            "transforms": transforms,
            "evaluation": {
                "ms": report.ms, "msOracle": report.ms_oracle, "pz": report.pz, "pzo": report.pzo,
                "baselineMs": report.baseline_ms, "deltaMs": report.delta_ms,
                "relations": report.n_relations, "step1Pass": report.n_step1_pass, "valid": report.n_valid,
                "killed": named(report.mr_kills), "triviallyKilled": named(report.trivial_kills),
                "baselineKilled": named(report.baseline_kills),
            },
        }

    # -- driver ---------------------------------------------------------------------
    def stage(self, name: str) -> float:
        """Run one stage and return its wall-clock duration in seconds."""
        runner: Callable[[], None] = {
            "gen-inputs": self.gen_inputs, "gen-mutants": self.gen_mutants, "collect": self.collect,
            "evolve": self.evolve, "filter": self.filter, "evaluate": self.evaluate,
        }[name]
        self.ws.root.mkdir(parents=True, exist_ok=True)
        self.ws.path("config.yaml").write_text(self.config.to_yaml(), encoding="utf-8")
        start = time.monotonic()
        try:
            runner()
        except (StageError, ConfigError):
            raise
        except Exception as exc:
            raise StageError(name, f"{type(exc).__name__}: {exc}") from exc
        elapsed = time.monotonic() - start
        self._record_timing(name, elapsed)
        return elapsed

    def _record_timing(self, name: str, seconds: float) -> None:
        path = self.ws.path("timings.json")
        timings = json.loads(path.read_text(encoding="utf-8")) if path.exists() else {}
        timings[name] = round(seconds, 3)
        _dump_json(timings, path)

    def run_all(self, stages: Sequence[str] = STAGES) -> dict:
        for name in stages:
            self.stage(name)
        return json.loads(self.ws.path("report.json").read_text(encoding="utf-8"))


def run_pipeline(config: PipelineConfig) -> dict:
    """Run every stage and return the parsed report."""
    return Pipeline(config).run_all()


# -- rendering ----------------------------------------------------------------------

def _verdict_line(mr_id: str, v: FilterVerdict) -> str:
    parts = [mr_id, f"step1={v.step1.status}", f"step2={v.step2.status}", f"valid={str(v.valid).lower()}"]
    for label, step in (("step1", v.step1), ("step2", v.step2)):
        if step.witness is not None:
            parts.append(f"{label}_witness=({step.witness.render()})")
    parts.append(v.mr.prefix)
    return "\t".join(parts)


def _ratio(value: Optional[float]) -> str:
    return "-" if value is None else f"{100 * value:.1f}%"


def render_table(report: dict) -> str:
    """Human-readable report: one summary row, then one row per relation."""
    ev = report["evaluation"]
    lines = [f"subject {report['subject']} {report['signature']}",
             f"config {report['provenance']['configSha256'][:16]}  subject {report['provenance']['subjectSha256'][:16]}"
             f"  seed {report['provenance']['masterSeed']}",
             f"mutants {report['mutants']['total']} (train {report['mutants']['train']},"
             f" eval {report['mutants']['eval']})", ""]
    header = ("Subject", "#MR", "Valid", "MS", "MS(oracle)", "PZ", "PZO", "Baseline", "dMS")
    row = (report["subject"], str(ev["relations"]), str(ev["valid"]), _ratio(ev["ms"]), _ratio(ev["msOracle"]),
           _ratio(ev["pz"]), _ratio(ev["pzo"]), _ratio(ev["baselineMs"]), _ratio(ev["deltaMs"]))
    widths = [max(len(h), len(r)) for h, r in zip(header, row)]
    lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    lines.append("  ".join(r.ljust(w) for r, w in zip(row, widths)))
    for group in report["transforms"]:
        store = group["store"]
        lines += ["", f"{group['transform']}  R_i: {group['inputRelation']}",
                  f"  store: {store['correct']} correct, {store['incorrect']} incorrect,"
                  f" {store['triviallyKilled']} trivial kills; {group['generations']} generations"]
        for rel in group["relations"]:
            fit = rel["fitness"] or {"fp": "?", "fn": "?", "size": "?"}
            status = "valid" if rel["valid"] else f"rejected({rel['step1']['status']}/{rel['step2']['status']})"
            lines.append(f"  {rel['id']:<7} fp={fit['fp']:<4} fn={fit['fn']:<5} size={fit['size']:<3}"
                         f" {status:<22} MS={_ratio(rel['ms']):<7} {rel['infix']}")
    return "\n".join(lines) + "\n"


def render_mr(mr: MetamorphicRelation, function_name: str, source: Optional[InputCase] = None) -> str:
    """Infix form of the relation followed by an executable-style pseudo-test."""
    sig = mr.input_relation.signature
    names = sig.names
    ri = mr.input_relation.rendering
    ro = mr.infix()
    lines = [f"{ri}  =>  {mr.infix(function_name)}", ""]
    test_name = f"{source.id}followup" if source is not None else "relationHolds"
    lines.append(f"test {test_name}:")
    if source is not None:
        follow = apply_transform(mr.input_relation.transform, source)
        lines.append("    " + ", ".join(f"{n}_s = {render_value(v)}" for n, v in zip(names, source.values))
                     + "  # source input")
        lines.append("    " + ", ".join(f"{n}_f = {render_value(v)}" for n, v in zip(names, follow.values))
                     + "  # follow-up input")
    lines.append(f"    return_s = {function_name}({', '.join(n + '_s' for n in names)})  # run source input")
    lines.append(f"    return_f = {function_name}({', '.join(n + '_f' for n in names)})  # run follow-up input")
    lines.append(f"    if ({ri}):  # R_i holds")
    lines.append(f"        assert {ro}  # check R_o")
    return "\n".join(lines) + "\n"


def relation_from_json(obj: dict, program: SubjectProgram) -> MetamorphicRelation:
    """Rebuild a relation from its serialized form (``transform`` plus ``outputRelation``)."""
    t = parse_descriptor(obj["transform"])
    expr: Node = parse_prefix(obj["outputRelation"], Scope(program.signature))
    return MetamorphicRelation(canonical(t, program.signature), expr)


def relation_json(mr: MetamorphicRelation) -> dict:
    return {"transform": mr.input_relation.transform.descriptor(), "outputRelation": to_prefix(mr.output_relation)}
