"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 stage failure.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path
from typing import Optional, Sequence

import yaml

from .config import ConfigError, PipelineConfig, apply_settings, load_config, subject_source
from .evolve import MetamorphicRelation
from .inputs import InputCase
from .lang import parse_program
from .pipeline import STAGES, Pipeline, StageError, relation_from_json, render_mr
from .values import parse_value, split_values

EXIT_OK, EXIT_CONFIG, EXIT_STAGE = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML config file")
    p.add_argument("--preset", choices=("desk", "paper"), help="base configuration (default desk)")
    p.add_argument("--subject", help="bundled fixture name or path to a .mu file")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--transforms", type=int, metavar="K", help="number of input transforms to sample")
    p.add_argument("--transform", action="append", metavar="DESCRIPTOR",
                   help="use this transform instead of sampling (repeatable)")
    p.add_argument("--deterministic", action="store_true", help="single-threaded, byte-identical reports")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="per-stage override, e.g. evolution.population_size=100 (value parsed as YAML)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mrgen", description="Evolve metamorphic relations for a small subject function.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in STAGES + ("run-all",):
        _common(sub.add_parser(name, help=f"run {'every stage' if name == 'run-all' else 'stage ' + name}"))
    render = sub.add_parser("render-mr", help="print a relation in infix form and as a pseudo-test")
    render.add_argument("mr", nargs="?", type=Path, help="relation JSON, relations.json or report.json")
    render.add_argument("--id", help="relation id (e.g. T0.R1) when the file holds several")
    render.add_argument("--subject", default=None, help="fixture name or .mu path (default: from the file)")
    render.add_argument("--transform-descriptor", dest="descriptor", help="transform descriptor")
    render.add_argument("--relation", help="output relation in prefix form")
    render.add_argument("--source", help="source input values, e.g. '-128,2'")
    return parser


def _override(settings: dict, assignment: str) -> None:
    key, sep, raw = assignment.partition("=")
    if not sep or "." not in key:
        raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {assignment!r}")
    section, field_name = key.split(".", 1)
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"--set {key}: {exc}") from None
    settings.setdefault(section, {})[field_name] = value


def config_from_args(args) -> PipelineConfig:
    cfg = load_config(args.config, args.preset)
    settings: dict = {}
    for assignment in args.set:
        _override(settings, assignment)
    if args.subject is not None:
        settings["subject"] = args.subject
    if args.seed is not None:
        settings["seed"] = args.seed
    if args.out is not None:
        settings["out"] = str(args.out)
    if args.transforms is not None:
        settings.setdefault("transforms", {})["count"] = args.transforms
    if args.transform:
        settings.setdefault("transforms", {})["descriptors"] = args.transform
    if args.deterministic:
        settings.setdefault("execution", {})["deterministic"] = True
    cfg = apply_settings(cfg, settings)
    if not cfg.deterministic:
        cfg = apply_settings(cfg, {"evolution": {"parallel": True}})
    return cfg


def _pick_relation(args) -> tuple[MetamorphicRelation, str, Optional[str]]:
    data: dict = {}
    if args.mr is not None:
        try:
            data = json.loads(args.mr.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read relation file {args.mr}: {exc}") from None
    subject = args.subject or data.get("subject")
    if subject is None:
        raise ConfigError("render-mr needs --subject (the file does not name one)")
    program = parse_program(subject_source(subject))
    if args.relation is not None:
        if args.descriptor is None:
            raise ConfigError("--relation needs --transform-descriptor")
        return relation_from_json({"transform": args.descriptor, "outputRelation": args.relation}, program), \
            program.name, None
    if "outputRelation" in data:
        return relation_from_json(data, program), program.name, None
    groups = data.get("groups") or data.get("transforms")
    if not groups:
        raise ConfigError("nothing to render: give a relation file or --relation")
    candidates = []
    for g_index, group in enumerate(groups):
        for r_index, rel in enumerate(group["relations"]):
            rel_id = rel.get("id", f"T{g_index}.R{r_index}")
            candidates.append((rel_id, {"transform": group["transform"], "outputRelation": rel["outputRelation"]}))
    if args.id is not None:
        chosen = [c for i, c in candidates if i == args.id]
        if not chosen:
            raise ConfigError(f"no relation with id {args.id}")
        return relation_from_json(chosen[0], program), program.name, args.id
    if not candidates:
        raise ConfigError("the file holds no relations")
    rel_id, first = candidates[0]
    return relation_from_json(first, program), program.name, rel_id


def render_command(args) -> int:
    try:
        mr, name, _ = _pick_relation(args)
        source = None
        if args.source is not None:
            parts = split_values(args.source)
            tags = mr.input_relation.signature.tags
            if len(parts) != len(tags):
                raise ConfigError(f"--source needs {len(tags)} values")
            source = InputCase("test0", tuple(parse_value(p, tag) for p, tag in zip(parts, tags)))
    except (ValueError, KeyError) as exc:
        print(f"mrgen: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    sys.stdout.write(render_mr(mr, name, source))
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "render-mr":
        return render_command(args)
    try:
        pipeline = Pipeline(config_from_args(args))
    except ConfigError as exc:
        print(f"mrgen: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    stages = STAGES if args.command == "run-all" else (args.command,)
    with warnings.catch_warnings():
        warnings.simplefilter("always")
        warnings.showwarning = _show_warning
        try:
            for stage in stages:
                elapsed = pipeline.stage(stage)
                print(f"{stage}: done in {elapsed:.1f}s", file=sys.stderr)
        except StageError as exc:
            print(f"mrgen: stage {exc.stage} failed: {exc.message}", file=sys.stderr)
            return EXIT_STAGE
    if "evaluate" in stages:
        sys.stdout.write(pipeline.ws.path("report.txt").read_text(encoding="utf-8"))
    return EXIT_OK


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"mrgen: warning: {message}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
