"""Quality-aware weights, refinement quintuples, and dataset export.

Each training chunk becomes a quintuple (source, sent2sent, doc2doc,
per-sentence weights, reference). The weight of a sentence grows with the
best quality score of its two candidate translations: nearly-perfect
inputs are the hardest to improve, so they get the largest loss weight.
Exports emit both candidate orderings of every quintuple, for two
fine-tuning stages: stage 1 with uniform weights, stage 2 with the
quality-aware ones.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

from .corpus import ChunkPair, TokenizerSpec, tokenize
from .prompting import augment_swap
from .translate import IntermediatePair

logger = logging.getLogger(__name__)

WEIGHT_MODES = ("max_pair", "first_hyp", "instance_avg")
STAGES = ("stage1_naive", "stage2_qa")

# Adapter fine-tuning settings shipped as inert dataset metadata; trainers
# consume them, nothing here executes gradient descent.
FINETUNE_HYPERPARAMETERS = {
    "lora_rank": 8,
    "lora_alpha": 16,
    "learning_rate": 1e-4,
    "epochs_per_stage": 1,
}


class QualityError(ValueError):
    """Raised on malformed scores, weights, or quintuples."""


@dataclass(frozen=True)
class DAScore:
    """Reference-based quality score on [0, 1]."""

    value: float

    def __post_init__(self):
        if not math.isfinite(self.value) or not 0.0 <= self.value <= 1.0:
            raise QualityError(f"DA score {self.value!r} outside [0, 1]")

    @classmethod
    def from_raw(cls, raw: float, percent_scale: bool = False) -> "DAScore":
        """Ingest a raw score; scores reported on 0-100 need the flag."""
        if percent_scale:
            return cls(raw / 100.0)
        if raw > 1.0:
            raise QualityError(
                f"score {raw} > 1; pass percent_scale=True for 0-100 inputs"
            )
        return cls(raw)


@dataclass(frozen=True)
class WeightParams:
    lam: float = 3.75
    epsilon: float = 0.7
    mode: str = "max_pair"

    def __post_init__(self):
        if self.lam < 0:
            raise QualityError("lambda must be >= 0")
        if not 0.0 <= self.epsilon <= 1.0:
            raise QualityError("epsilon must be in [0, 1]")
        if self.mode not in WEIGHT_MODES:
            raise QualityError(f"unknown weight mode {self.mode!r}")


def _score_value(score) -> float:
    return score.value if isinstance(score, DAScore) else float(score)


def sentence_weight(da_y, da_z, p: WeightParams | None = None) -> float:
    """Weight of one sentence from its two candidate scores.

    ``max_pair`` uses the better of the two scores; ``first_hyp`` uses the
    first argument, which callers must pass as the score of whichever
    candidate sits first in the prompt. No clamping is applied.
    """
    p = p or WeightParams()
    if p.mode == "instance_avg":
        raise QualityError("instance_avg weights come from instance_weight()")
    y, z = _score_value(da_y), _score_value(da_z)
    basis = max(y, z) if p.mode == "max_pair" else y
    return 1.0 + p.lam * (basis - p.epsilon)


def instance_weight(da_y_list, da_z_list, p: WeightParams | None = None) -> float:
    """Single weight for a whole instance from averaged candidate scores."""
    p = p or WeightParams(mode="instance_avg")
    if p.mode != "instance_avg":
        raise QualityError(f"instance_weight requires instance_avg mode, got {p.mode!r}")
    if not da_y_list or not da_z_list:
        raise QualityError("score lists must be non-empty")
    if len(da_y_list) != len(da_z_list):
        raise QualityError("score lists must have equal length")
    mean_y = sum(_score_value(s) for s in da_y_list) / len(da_y_list)
    mean_z = sum(_score_value(s) for s in da_z_list) / len(da_z_list)
    return 1.0 + p.lam * (max(mean_y, mean_z) - p.epsilon)


@dataclass(frozen=True)
class RefinementQuintuple:
    """(source, sent2sent, doc2doc, weights, reference) for one chunk."""

    src: tuple[str, ...]
    y: tuple[str, ...]
    z: tuple[str, ...]
    weights: tuple[float, ...]
    ref: tuple[str, ...]
    doc_id: str
    chunk_index: int
    src_lang: str = "und-x-src"
    tgt_lang: str = "und-x-tgt"
    scores_y: tuple[float, ...] | None = None
    scores_z: tuple[float, ...] | None = None

    def __post_init__(self):
        for name in ("src", "y", "z", "weights", "ref"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        for name in ("scores_y", "scores_z"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, tuple(value))
        n = len(self.src)
        lengths = {
            "src": len(self.src),
            "y": len(self.y),
            "z": len(self.z),
            "weights": len(self.weights),
            "ref": len(self.ref),
        }
        if set(lengths.values()) != {n} or n == 0:
            raise QualityError(
                f"quintuple {self.doc_id}/{self.chunk_index}: unequal lists {lengths}"
            )
        if not all(math.isfinite(w) for w in self.weights):
            raise QualityError(
                f"quintuple {self.doc_id}/{self.chunk_index}: non-finite weight"
            )

    def __len__(self) -> int:
        return len(self.src)


def build_quintuples(
    pair: ChunkPair,
    inter: IntermediatePair,
    scores_y,
    scores_z,
    p: WeightParams | None = None,
) -> RefinementQuintuple:
    """Assemble one quintuple from a chunk, its translations, and scores."""
    p = p or WeightParams()
    n = len(pair.source)
    lengths = {
        "sent2sent": len(inter.sent2sent),
        "doc2doc": len(inter.doc2doc),
        "scores_y": len(scores_y),
        "scores_z": len(scores_z),
        "ref": len(pair.ref_sentences),
    }
    if any(v != n for v in lengths.values()):
        raise QualityError(
            f"doc {pair.source.doc_id!r} chunk {pair.source.chunk_index}: "
            f"expected {n} sentences, got {lengths}"
        )
    sy = [_score_value(s) for s in scores_y]
    sz = [_score_value(s) for s in scores_z]
    if p.mode == "instance_avg":
        w = instance_weight(sy, sz, p)
        weights = [w] * n
    else:
        weights = [sentence_weight(a, b, p) for a, b in zip(sy, sz)]
    return RefinementQuintuple(
        src=pair.source.sentences,
        y=inter.sent2sent,
        z=inter.doc2doc,
        weights=tuple(weights),
        ref=pair.ref_sentences,
        doc_id=pair.source.doc_id,
        chunk_index=pair.source.chunk_index,
        src_lang=pair.src_lang,
        tgt_lang=pair.tgt_lang,
        scores_y=tuple(sy),
        scores_z=tuple(sz),
    )


@dataclass(frozen=True)
class TokenWeightVector:
    """Per-token weights expanded from per-sentence weights."""

    tokens: tuple[str, ...]
    weights: tuple[float, ...]
    sentence_spans: tuple[tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "weights", tuple(self.weights))
        object.__setattr__(
            self, "sentence_spans", tuple(tuple(s) for s in self.sentence_spans)
        )
        if len(self.tokens) != len(self.weights):
            raise QualityError("token and weight lists differ in length")


def expand_token_weights(
    ref: list[str] | tuple[str, ...],
    weights: list[float] | tuple[float, ...],
    tok: TokenizerSpec | None = None,
) -> TokenWeightVector:
    """Give every token of each reference sentence that sentence's weight."""
    if len(ref) != len(weights):
        raise QualityError(
            f"{len(ref)} reference sentences vs {len(weights)} weights"
        )
    tok = tok or TokenizerSpec()
    tokens: list[str] = []
    token_weights: list[float] = []
    spans: list[tuple[int, int]] = []
    for sentence, weight in zip(ref, weights):
        sent_tokens = tokenize(sentence, tok)
        start = len(tokens)
        tokens.extend(sent_tokens)
        token_weights.extend([weight] * len(sent_tokens))
        spans.append((start, len(tokens)))
    return TokenWeightVector(
        tokens=tuple(tokens),
        weights=tuple(token_weights),
        sentence_spans=tuple(spans),
    )


def weighted_nll(token_logprobs, v: TokenWeightVector) -> float:
    """Weighted negative log-likelihood: -sum(w_i * logprob_i).

    With all-ones weights this is exactly the plain NLL, so the uniform
    stage-1 loss is the special case of the stage-2 weighted loss.
    """
    if len(token_logprobs) != len(v.weights):
        raise QualityError(
            f"{len(token_logprobs)} logprobs vs {len(v.weights)} token weights"
        )
    return -sum(w * lp for w, lp in zip(v.weights, token_logprobs))


@dataclass(frozen=True)
class DatasetRecord:
    id: str
    prompt: str
    target: str
    sentence_weights: tuple[float, ...]
    stage: str
    meta: dict

    def to_json(self) -> str:
        # fixed key order keeps exports byte-identical across runs
        return json.dumps(
            {
                "id": self.id,
                "prompt": self.prompt,
                "target": self.target,
                "sentence_weights": list(self.sentence_weights),
                "stage": self.stage,
                "meta": {
                    "doc_id": self.meta["doc_id"],
                    "chunk_index": self.meta["chunk_index"],
                    "swapped": self.meta["swapped"],
                },
            },
            ensure_ascii=False,
        )


def _record_weights(
    q: RefinementQuintuple,
    swapped: bool,
    stage: str,
    p: WeightParams | None,
    min_weight: float | None,
) -> list[float]:
    if stage == "stage1_naive":
        return [1.0] * len(q)
    if p is not None and p.mode == "first_hyp":
        if q.scores_y is None or q.scores_z is None:
            raise QualityError(
                "first_hyp export needs per-sentence scores on the quintuple"
            )
        first, second = (q.scores_z, q.scores_y) if swapped else (q.scores_y, q.scores_z)
        weights = [sentence_weight(a, b, p) for a, b in zip(first, second)]
    else:
        weights = list(q.weights)
    if min_weight is not None:
        weights = [max(w, min_weight) for w in weights]
    return weights


def build_dataset_records(
    quintuples: list[RefinementQuintuple],
    stage: str,
    *,
    weight_params: WeightParams | None = None,
    min_weight: float | None = None,
    templates=None,
) -> list[DatasetRecord]:
    """Expand quintuples into dataset records, two per quintuple.

    Both candidate orderings share the same target; in ``first_hyp`` mode
    the two orderings carry different weights because the weight follows
    the candidate in the first prompt slot.
    """
    if stage not in STAGES:
        raise QualityError(f"unknown stage {stage!r}")
    records = []
    for q in quintuples:
        for swap_idx, inst in enumerate(augment_swap(q, templates=templates)):
            records.append(
                DatasetRecord(
                    id=f"{q.doc_id}:{q.chunk_index}:{swap_idx}",
                    prompt=inst.prompt,
                    target=inst.target,
                    sentence_weights=tuple(
                        _record_weights(
                            q, inst.meta["swapped"], stage, weight_params, min_weight
                        )
                    ),
                    stage=stage,
                    meta=inst.meta,
                )
            )
    return records


def export_dataset(
    quintuples: list[RefinementQuintuple],
    stage: str,
    out_path: str | Path,
    *,
    weight_params: WeightParams | None = None,
    min_weight: float | None = None,
    templates=None,
) -> int:
    """Write dataset records as JSONL; returns the record count.

    A ``<name>.meta.json`` sidecar records the stage and the adapter
    fine-tuning hyperparameters for downstream trainers.
    """
    records = build_dataset_records(
        quintuples,
        stage,
        weight_params=weight_params,
        min_weight=min_weight,
        templates=templates,
    )
    out_path = Path(out_path)
    try:
        with open(out_path, "w", encoding="utf-8", newline="\n") as handle:
            for record in records:
                handle.write(record.to_json() + "\n")
    except OSError as exc:
        raise QualityError(f"cannot write dataset to {out_path}: {exc}") from exc
    meta = {
        "stage": stage,
        "records": len(records),
        "finetune_hyperparameters": FINETUNE_HYPERPARAMETERS,
    }
    meta_path = out_path.with_name(out_path.name + ".meta.json")
    meta_path.write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return len(records)
