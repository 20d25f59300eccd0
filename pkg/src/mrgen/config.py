"""Pipeline configuration: presets, YAML loading, validation, and seed derivation.

A config file is a YAML mapping with these sections (all optional)::

    subject: pow              # fixture name or path to a .mu file
    seed: 1                   # master seed
    preset: desk              # desk | paper, applied before the rest of the file
    inputs:    {train_size, train_budget, filter_size, eval_size}
    mutants:   {eval_fraction}
    transforms: {count, descriptors}
    store:     {max_correct, max_incorrect}
    evolution: {<any EvolutionConfig field>, seed_relations}
    filter:    {search_budget}
    execution: {step_budget, tolerance, deterministic}

Precedence is preset, then file, then command-line flags.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional

import yaml

from .evolve import EvolutionConfig
from .fixtures import NAMES, fixture_source
from .lang import DEFAULT_STEP_BUDGET
from .seeds import derive_seed
from .values import DEFAULT_TOL


class ConfigError(ValueError):
    """Invalid configuration; reported before any stage runs."""


@dataclass
class PipelineConfig:
    subject: str = "pow"
    seed: int = 0
    out: Path = Path("mrgen-out")
    train_size: int = 500
    train_budget: int = 2000
    filter_size: int = 1000
    eval_size: int = 1000
    eval_fraction: float = 0.5
    transform_count: int = 4
    transform_descriptors: tuple[str, ...] = ()
    caps: tuple[int, int] = (9000, 9000)
    search_budget: int = 10000
    step_budget: int = DEFAULT_STEP_BUDGET
    tolerance: float = DEFAULT_TOL
    deterministic: bool = False
    seed_relations: tuple[str, ...] = ()
    evolution: EvolutionConfig = field(default_factory=EvolutionConfig)

    def validate(self) -> None:
        subject_source(self.subject)
        for name in ("train_size", "train_budget", "filter_size", "eval_size", "transform_count", "step_budget"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.train_size > self.train_budget:
            raise ConfigError("train_size cannot exceed train_budget")
        if not 0.0 < self.eval_fraction < 1.0:
            raise ConfigError("eval_fraction must lie strictly between 0 and 1")
        if len(self.caps) != 2 or min(self.caps) <= 0:
            raise ConfigError("caps must be two positive counts")
        if self.search_budget < 0:
            raise ConfigError("search_budget must be non-negative")
        if self.tolerance < 0:
            raise ConfigError("tolerance must be non-negative")

    # -- seeds ------------------------------------------------------------------
    def stage_seed(self, *labels) -> int:
        return derive_seed(self.seed, *labels)

    # -- provenance ---------------------------------------------------------------
    def content(self) -> dict:
        """Everything that influences results; output paths and threading are excluded."""
        evo = dataclasses.asdict(self.evolution)
        evo.pop("parallel")
        evo.pop("seed")  # re-derived per transform from the master seed
        evo["init_depths"] = list(evo["init_depths"])
        evo["leaf_constants"] = list(evo["leaf_constants"])
        return {
            "subject": self.subject,
            "seed": self.seed,
            "inputs": {"train_size": self.train_size, "train_budget": self.train_budget,
                       "filter_size": self.filter_size, "eval_size": self.eval_size},
            "mutants": {"eval_fraction": self.eval_fraction},
            "transforms": {"count": self.transform_count, "descriptors": list(self.transform_descriptors)},
            "store": {"max_correct": self.caps[0], "max_incorrect": self.caps[1]},
            "evolution": {**evo, "seed_relations": list(self.seed_relations)},
            "filter": {"search_budget": self.search_budget},
            "execution": {"step_budget": self.step_budget, "tolerance": self.tolerance},
        }

    def digest(self) -> str:
        text = json.dumps(self.content(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.content(), sort_keys=False)


def subject_source(subject: str) -> str:
    if subject in NAMES:
        return fixture_source(subject)
    path = Path(subject)
    if not path.is_file():
        raise ConfigError(f"subject {subject!r} is neither a bundled fixture ({', '.join(NAMES)}) nor a file")
    return path.read_text(encoding="utf-8")


PRESETS: dict[str, dict] = {
    "desk": {},
    "paper": {
        "store": {"max_correct": 9000, "max_incorrect": 9000},
        "evolution": {"population_size": 1000, "generations": 10 ** 9, "time_budget": 1800.0,
                      "migration_count": 160},
    },
}


_SECTION_FIELDS = {
    "inputs": {"train_size": "train_size", "train_budget": "train_budget", "filter_size": "filter_size",
               "eval_size": "eval_size"},
    "mutants": {"eval_fraction": "eval_fraction"},
    "transforms": {"count": "transform_count", "descriptors": "transform_descriptors"},
    "filter": {"search_budget": "search_budget"},
    "execution": {"step_budget": "step_budget", "tolerance": "tolerance", "deterministic": "deterministic"},
}
_EVOLUTION_FIELDS = {f.name for f in dataclasses.fields(EvolutionConfig)}


def _expect_mapping(value, where: str) -> Mapping:
    if not isinstance(value, Mapping):
        raise ConfigError(f"{where} must be a mapping")
    return value


def apply_settings(cfg: PipelineConfig, settings: Mapping[str, Any]) -> PipelineConfig:
    """Overlay a config tree onto ``cfg`` and return the result."""
    settings = _expect_mapping(settings, "config")
    updates: dict[str, Any] = {}
    evo_updates: dict[str, Any] = {}
    for key, value in settings.items():
        if key in ("subject", "seed", "out"):
            updates[key] = value
        elif key == "preset":
            continue  # applied by the caller before the file
        elif key in _SECTION_FIELDS:
            for sub, sub_value in _expect_mapping(value, key).items():
                if sub not in _SECTION_FIELDS[key]:
                    raise ConfigError(f"unknown key {key}.{sub}")
                updates[_SECTION_FIELDS[key][sub]] = sub_value
        elif key == "store":
            caps = list(cfg.caps)
            for sub, sub_value in _expect_mapping(value, key).items():
                if sub not in ("max_correct", "max_incorrect"):
                    raise ConfigError(f"unknown key store.{sub}")
                caps[0 if sub == "max_correct" else 1] = sub_value
            updates["caps"] = tuple(caps)
        elif key == "evolution":
            for sub, sub_value in _expect_mapping(value, key).items():
                if sub == "seed_relations":
                    updates["seed_relations"] = sub_value
                elif sub in _EVOLUTION_FIELDS:
                    evo_updates[sub] = sub_value
                else:
                    raise ConfigError(f"unknown key evolution.{sub}")
        else:
            raise ConfigError(f"unknown key {key}")
    try:
        if evo_updates:
            evo = dict(evo_updates)
            for name in ("init_depths", "leaf_constants"):
                if name in evo:
                    evo[name] = tuple(evo[name])
            updates["evolution"] = dataclasses.replace(cfg.evolution, **evo)
        for name in ("transform_descriptors", "seed_relations"):
            if name in updates:
                if isinstance(updates[name], str):
                    updates[name] = (updates[name],)
                updates[name] = tuple(str(v) for v in updates[name])
        if "out" in updates:
            updates["out"] = Path(updates["out"])
        if "subject" in updates:
            updates["subject"] = str(updates["subject"])
        out = dataclasses.replace(cfg, **updates)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    _check_types(out)
    return out


def _check_types(cfg: PipelineConfig) -> None:
    ints = ("seed", "train_size", "train_budget", "filter_size", "eval_size", "transform_count", "search_budget",
            "step_budget")
    for name in ints:
        value = getattr(cfg, name)
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{name} must be an integer, got {value!r}")
    for name in ("eval_fraction", "tolerance"):
        value = getattr(cfg, name)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name} must be a number, got {value!r}")
    if not isinstance(cfg.deterministic, bool):
        raise ConfigError("deterministic must be true or false")
    if any(isinstance(c, bool) or not isinstance(c, int) for c in cfg.caps):
        raise ConfigError("caps must be integers")


def preset_config(name: str) -> PipelineConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return apply_settings(PipelineConfig(), PRESETS[name])


def load_config(path: Optional[Path], preset: Optional[str] = None) -> PipelineConfig:
    """Preset (from the argument, else the file, else desk) overlaid with the file."""
    settings: Mapping = {}
    if path is not None:
        try:
            settings = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
        settings = _expect_mapping(settings, "config")
    name = preset or settings.get("preset", "desk")
    return apply_settings(preset_config(name), settings)
