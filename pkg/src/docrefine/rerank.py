"""Per-sentence reranking of two candidate translations, with an optional
refinement pass over the winner.

Reranking picks, for each sentence, whichever candidate has the higher
reference-free quality score. Ties go to the first candidate list so runs
stay reproducible.
"""

from __future__ import annotations

import logging

from .corpus import Chunk
from .llm_client import DecodeParams, LLMClient
from .translate import refine_single

logger = logging.getLogger(__name__)

REFINE_MODES = {
    "as_sent_candidate": "refine_single_sent",
    "as_doc_candidate": "refine_single_doc",
}


class RerankError(ValueError):
    """Raised on malformed rerank inputs."""


def _score_value(score) -> float:
    return score.value if hasattr(score, "value") else float(score)


def rerank_select(
    y: list[str],
    z: list[str],
    kiwi_y: list,
    kiwi_z: list,
) -> list[str]:
    """Pick the higher-scored candidate per sentence; ties keep y."""
    lengths = {len(y), len(z), len(kiwi_y), len(kiwi_z)}
    if len(lengths) != 1:
        raise RerankError(
            f"length mismatch: y={len(y)} z={len(z)} "
            f"kiwi_y={len(kiwi_y)} kiwi_z={len(kiwi_z)}"
        )
    return [
        ys if _score_value(sy) >= _score_value(sz) else zs
        for ys, zs, sy, sz in zip(y, z, kiwi_y, kiwi_z)
    ]


def rerank_refine(
    client: LLMClient,
    chunk: Chunk,
    y: list[str],
    z: list[str],
    kiwi_y: list,
    kiwi_z: list,
    mode: str = "as_doc_candidate",
    dp: DecodeParams | None = None,
    *,
    src_lang: str = "und-x-src",
    tgt_lang: str = "und-x-tgt",
    templates=None,
) -> list[str]:
    """Rerank, then refine the selected translation in one endpoint call."""
    if mode not in REFINE_MODES:
        raise RerankError(
            f"unknown mode {mode!r}; expected one of {sorted(REFINE_MODES)}"
        )
    selected = rerank_select(y, z, kiwi_y, kiwi_z)
    if len(selected) != len(chunk.sentences):
        raise RerankError(
            f"doc {chunk.doc_id!r} chunk {chunk.chunk_index}: "
            f"{len(chunk.sentences)} source sentences vs {len(selected)} candidates"
        )
    segments, report = refine_single(
        client,
        list(chunk.sentences),
        selected,
        src_lang,
        tgt_lang,
        dp or DecodeParams(),
        template_id=REFINE_MODES[mode],
        templates=templates,
    )
    if report.repaired:
        logger.warning(
            "rerank_refine: repaired reply for doc %s chunk %d (%s)",
            chunk.doc_id,
            chunk.chunk_index,
            report.to_dict(),
        )
    return segments
