"""Run configuration and artifact manifests.

A run is driven by one YAML (or JSON) file naming the corpus, the
endpoints, and the knobs of each pipeline phase. Every CLI subcommand
writes a manifest recording the resolved configuration, input hashes, and
artifact hashes, so identical runs are verifiably byte-identical.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from . import __version__
from .corpus import TokenizerSpec
from .llm_client import DecodeParams, EndpointConfig
from .quality import FINETUNE_HYPERPARAMETERS, WeightParams
from .scoring import ScorerConfig

CORPUS_FORMATS = ("jsonl-docs", "plaintext-with-boundaries")


class ConfigError(ValueError):
    """Raised on invalid or incomplete run configuration."""


@dataclass(frozen=True)
class CorpusConfig:
    src: str
    ref: str | None = None
    format: str = "jsonl-docs"
    src_lang: str = "und-x-src"
    tgt_lang: str = "und-x-tgt"
    aligned: bool = True

    def __post_init__(self):
        if self.format not in CORPUS_FORMATS:
            raise ConfigError(
                f"unknown corpus format {self.format!r}; expected {CORPUS_FORMATS}"
            )


@dataclass(frozen=True)
class RunConfig:
    corpus: CorpusConfig
    output_dir: str
    translator: EndpointConfig | None = None
    refiner: EndpointConfig | None = None
    scorer: ScorerConfig | None = None
    tokenizer: TokenizerSpec = field(default_factory=TokenizerSpec)
    chunk_budget: int = 512
    weights: WeightParams = field(default_factory=WeightParams)
    decode_translate: DecodeParams = field(default_factory=DecodeParams)
    decode_refine: DecodeParams = field(default_factory=DecodeParams)
    min_weight: float | None = None
    tie_eps: float = 0.001
    diverse: bool = False
    templates_path: str | None = None
    lexicon_path: str | None = None
    raw: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.chunk_budget < 1:
            raise ConfigError("chunk_budget must be >= 1")
        if self.tie_eps < 0:
            raise ConfigError("tie_eps must be >= 0")
        if self.min_weight is not None and self.min_weight < 0:
            raise ConfigError("min_weight must be >= 0")

    def require(self, name: str):
        """Fetch an endpoint config, failing with a clear message."""
        value = getattr(self, name)
        if value is None:
            raise ConfigError(f"config is missing the {name!r} endpoint section")
        return value


def _build(cls, section: dict, context: str):
    try:
        return cls(**section)
    except TypeError as exc:
        raise ConfigError(f"{context}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"{context}: {exc}") from exc


def _decode_params(section: dict, diverse: bool) -> DecodeParams:
    params = _build(DecodeParams, section, "decode params")
    if diverse:
        params = dataclasses.replace(
            params, do_sample=True, temperature=0.3, top_p=0.7
        )
    return params


def load_config(path: str | Path, overrides: dict | None = None) -> RunConfig:
    """Load a YAML/JSON run configuration; overrides win over file values."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    if overrides:
        data = {**data, **{k: v for k, v in overrides.items() if v is not None}}

    corpus_section = data.get("corpus")
    if not isinstance(corpus_section, dict) or "src" not in corpus_section:
        raise ConfigError(f"{path}: corpus section with a src path is required")
    corpus = _build(CorpusConfig, corpus_section, "corpus section")
    for label, p in (("corpus.src", corpus.src), ("corpus.ref", corpus.ref)):
        if p is not None and not Path(p).exists():
            raise ConfigError(f"{label} path does not exist: {p}")

    endpoints = data.get("endpoints", {}) or {}
    translator = refiner = scorer = None
    if "translator" in endpoints:
        translator = _build(EndpointConfig, endpoints["translator"], "translator endpoint")
    if "refiner" in endpoints:
        refiner = _build(EndpointConfig, endpoints["refiner"], "refiner endpoint")
    elif translator is not None:
        refiner = translator
    if "scorer" in endpoints:
        scorer = _build(ScorerConfig, endpoints["scorer"], "scorer endpoint")

    tok_section = data.get("tokenizer", {}) or {}
    tokenizer = _build(TokenizerSpec, tok_section, "tokenizer section")
    weights = _build(WeightParams, data.get("weights", {}) or {}, "weights section")
    diverse = bool(data.get("diverse", False))
    decode = data.get("decode", {}) or {}
    decode_translate = _decode_params(decode.get("translate", {}) or {}, diverse)
    decode_refine = _decode_params(decode.get("refine", {}) or {}, diverse)

    templates_path = data.get("templates_path")
    if templates_path is not None and not Path(templates_path).exists():
        raise ConfigError(f"templates_path does not exist: {templates_path}")
    lexicon_path = data.get("lexicon_path")
    if lexicon_path is not None and not Path(lexicon_path).exists():
        raise ConfigError(f"lexicon_path does not exist: {lexicon_path}")

    output_dir = data.get("output_dir")
    if not output_dir:
        raise ConfigError(f"{path}: output_dir is required")

    return RunConfig(
        corpus=corpus,
        output_dir=str(output_dir),
        translator=translator,
        refiner=refiner,
        scorer=scorer,
        tokenizer=tokenizer,
        chunk_budget=int(data.get("chunk_budget", 512)),
        weights=weights,
        decode_translate=decode_translate,
        decode_refine=decode_refine,
        min_weight=data.get("min_weight"),
        tie_eps=float(data.get("tie_eps", 0.001)),
        diverse=diverse,
        templates_path=templates_path,
        lexicon_path=lexicon_path,
        raw=data,
    )


# ---------------------------------------------------------------------------
# manifests


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def config_hash(config: RunConfig) -> str:
    payload = json.dumps(config.raw, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def write_manifest(
    out_dir: str | Path,
    command: str,
    config: RunConfig,
    inputs: list[str | Path],
    artifacts: list[str | Path],
) -> Path:
    """Write manifest.json describing one subcommand run.

    Contains no timestamps, so reruns with identical inputs produce a
    byte-identical manifest. Training hyperparameters ride along as inert
    metadata for downstream consumers.
    """
    out_dir = Path(out_dir)
    manifest = {
        "command": command,
        "config_sha256": config_hash(config),
        "config": config.raw,
        "inputs": {str(p): sha256_file(p) for p in sorted(str(x) for x in inputs)},
        "artifacts": {
            str(Path(p).relative_to(out_dir)): sha256_file(p)
            for p in sorted(str(x) for x in artifacts)
        },
        "finetune_hyperparameters": FINETUNE_HYPERPARAMETERS,
        "versions": {
            "package": __version__,
            "python": f"{sys.version_info.major}.{sys.version_info.minor}",
        },
    }
    path = out_dir / f"manifest-{command}.json"
    path.write_text(
        json.dumps(manifest, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    return path
