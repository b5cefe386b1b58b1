"""Declarative experiment configuration (YAML).

Relative paths resolve against the config file's directory. The output root comes from,
in order: the ``--out`` flag, the ``ADVTRANSFER_OUT`` environment variable, the config's
``output_dir`` key, and finally ``./runs``.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .attacks import GAConfig
from .ensemble import SearchConfig
from .transfer import Budget
from .zoo import ARCHITECTURES, EMBEDDING_INITS, INPUT_FORMS, ModelSpec, TrainConfig, build_zoo

OUT_ENV = "ADVTRANSFER_OUT"


class ConfigError(ValueError):
    """Raised for any invalid or inconsistent configuration; maps to exit code 1."""


DEFAULTS: dict[str, Any] = {
    "data": {"corpus": None, "format": "tsv-dir", "lexicon": None, "pos_lexicon": None, "embeddings": None},
    "zoo": {
        "architectures": list(ARCHITECTURES),
        "input_forms": list(INPUT_FORMS),
        "embedding_inits": list(EMBEDDING_INITS),
        "depths": [1, 2],
        "seeds": [0],
        "admission_floor": 0.75,
    },
    "train": {"defaults": {}, "overrides": []},
    "attack": {"engines": ["pwws", "ga"], "ga": {"population": 20, "generations": 10}},
    "budget": {"attacked": 200, "transferred": 100},
    "ensemble": {
        "sizes": [2, 3, 4, 5, 6, 7],
        "population": 20,
        "generations": 50,
        "mutation_prob": 0.3,
        "elitism": 1,
        "search_seeds": [0, 1, 2],
        "held_out": 100,
        "exclude_members_from_fitness": False,
    },
    "rules": {"rhos": [0.05, 0.10, 0.15, 0.20, 0.25, 0.30], "min_support": 1, "ensemble": None,
              "ensemble_size": 3, "top": 10},
    "seed": 0,
    "workers": 1,
    "output_dir": None,
}


def _merge(base: dict, extra: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if k not in base:
            raise ConfigError(f"unknown config key {where}{k}")
        if isinstance(base[k], dict) and base[k] and isinstance(v, dict):
            out[k] = _merge(base[k], v, f"{where}{k}.")
        elif isinstance(base[k], dict) and not base[k] and isinstance(v, dict):
            out[k] = dict(v)
        else:
            out[k] = v
    return out


@dataclass
class ExperimentConfig:
    raw: dict
    base_dir: Path
    out_dir: Path
    specs: list[ModelSpec] = field(default_factory=list)

    # -- accessors ----------------------------------------------------------

    def path(self, key: str) -> Path | None:
        value = self.raw["data"][key]
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else (self.base_dir / p)

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def workers(self) -> int:
        return int(self.raw["workers"])

    @property
    def admission_floor(self) -> float:
        return float(self.raw["zoo"]["admission_floor"])

    @property
    def budget(self) -> Budget:
        b = self.raw["budget"]
        return Budget(int(b["attacked"]), int(b["transferred"]), self.seed)

    @property
    def engines(self) -> list[str]:
        return list(self.raw["attack"]["engines"])

    def attack_params(self, engine: str) -> dict:
        if engine == "ga":
            ga = self.raw["attack"]["ga"]
            GAConfig(int(ga["population"]), int(ga["generations"]), self.seed)  # validates
            return {"population": int(ga["population"]), "generations": int(ga["generations"]), "seed": self.seed}
        return {}

    def search_config(self, size: int, seed: int) -> SearchConfig:
        e = self.raw["ensemble"]
        return SearchConfig(int(e["population"]), int(e["generations"]), size, float(e["mutation_prob"]),
                            int(e["elitism"]), seed)

    def hyper(self, spec: ModelSpec) -> TrainConfig:
        """Training config for a spec: defaults, then every matching override in order."""
        params = dict(self.raw["train"]["defaults"])
        for ov in self.raw["train"]["overrides"]:
            match = ov.get("match", {})
            if all(str(getattr(spec, k)) == str(v) for k, v in match.items()):
                params.update(ov.get("set", {}))
        emb = self.path("embeddings")
        if emb is not None:
            params["embeddings_path"] = str(emb)
        try:
            return TrainConfig(**params)
        except TypeError as exc:
            raise ConfigError(f"bad training parameter: {exc}") from None

    def digest(self) -> str:
        """Hash of the resolved config, recorded in every manifest."""
        payload = json.dumps(self.raw, sort_keys=True, default=str).encode()
        return hashlib.sha256(payload).hexdigest()


def load_config(path: str | Path | None = None, overrides: dict | None = None, out: str | Path | None = None,
                env: dict | None = None) -> ExperimentConfig:
    env = os.environ if env is None else env
    raw: dict = {}
    base_dir = Path.cwd()
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        base_dir = path.resolve().parent
    merged = _merge(DEFAULTS, raw)
    for k, v in (overrides or {}).items():
        if v is not None:
            merged[k] = v
    if out is not None:
        out_dir = Path(out)
    elif env.get(OUT_ENV):
        out_dir = Path(env[OUT_ENV])
    elif merged["output_dir"]:
        out_dir = Path(merged["output_dir"])
        if not out_dir.is_absolute():
            out_dir = base_dir / out_dir
    else:
        out_dir = Path("runs")
    cfg = ExperimentConfig(merged, base_dir, out_dir)
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    raw = cfg.raw
    for key in ("corpus", "lexicon"):
        if raw["data"][key] is None:
            raise ConfigError(f"data.{key} is required")
    for key in ("corpus", "lexicon", "pos_lexicon", "embeddings"):
        p = cfg.path(key)
        if p is not None and not p.exists():
            raise ConfigError(f"data.{key}: {p} does not exist")
    if raw["data"]["format"] not in ("tsv", "tsv-dir"):
        raise ConfigError(f"data.format must be tsv or tsv-dir, not {raw['data']['format']!r}")
    z = raw["zoo"]
    if not z["seeds"] or any(not isinstance(s, int) or isinstance(s, bool) for s in z["seeds"]):
        raise ConfigError("zoo.seeds must be a non-empty list of explicit integers")
    if not isinstance(raw["seed"], int):
        raise ConfigError("seed must be an explicit integer")
    try:
        cfg.specs = build_zoo(z["architectures"], z["input_forms"], z["embedding_inits"], z["depths"], z["seeds"])
    except ValueError as exc:
        raise ConfigError(f"zoo: {exc}") from None
    if "PRETRAINED_FILE" in z["embedding_inits"] and cfg.path("embeddings") is None:
        raise ConfigError("zoo uses PRETRAINED_FILE but data.embeddings is not set")
    unknown = set(cfg.engines) - {"pwws", "ga"}
    if unknown or not cfg.engines:
        raise ConfigError(f"attack.engines must be a non-empty subset of [pwws, ga]; got {cfg.engines}")
    try:
        b = cfg.budget
        if b.transferred > b.attacked:
            raise ConfigError("budget.transferred must not exceed budget.attacked")
        cfg.attack_params("ga")
        for m in raw["ensemble"]["sizes"]:
            cfg.search_config(int(m), 0)
        for spec in cfg.specs:
            cfg.hyper(spec)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    rhos = raw["rules"]["rhos"]
    if not rhos or any(not 0.0 <= float(r) <= 1.0 for r in rhos):
        raise ConfigError("rules.rhos must be a non-empty list of values in [0, 1]")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
