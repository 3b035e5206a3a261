"""Deterministic document-level evaluation metrics.

d-BLEU treats each document as one long segment (sentences joined by
spaces) and computes corpus BLEU over those segments. LTCR measures how
consistently repeated lexicon terms are translated within a document.
Coherence averages cosine similarity of adjacent sentence embeddings.
Neural scores (COMET-style, perplexity) are pass-through values obtained
elsewhere; nothing in this module runs a model.
"""

from __future__ import annotations

import json
import logging
import math
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Document

logger = logging.getLogger(__name__)

MAX_NGRAM = 4


class MetricError(ValueError):
    """Raised on malformed metric inputs."""


# ---------------------------------------------------------------------------
# tokenization


def _tokenize_13a(line: str) -> list[str]:
    """Punctuation-splitting tokenizer in the mteval-13a style."""
    line = line.replace("<skipped>", "")
    line = line.replace("-\n", "").replace("\n", " ")
    line = (
        line.replace("&quot;", '"')
        .replace("&amp;", "&")
        .replace("&lt;", "<")
        .replace("&gt;", ">")
    )
    line = f" {line} "
    line = re.sub(r"([\{-\~\[-\` -\&\(-\+\:-\@\/])", r" \1 ", line)
    line = re.sub(r"([^0-9])([\.,])", r"\1 \2 ", line)
    line = re.sub(r"([\.,])([^0-9])", r" \1 \2", line)
    line = re.sub(r"([0-9])(-)", r"\1 \2 ", line)
    return line.split()


def _tokenize_intl(line: str) -> list[str]:
    """Unicode-aware tokenizer: pads symbols always, punctuation unless
    embedded between digits (so "3.5" survives)."""
    chars = list(line)
    n = len(chars)
    out = []
    for i, ch in enumerate(chars):
        cat = unicodedata.category(ch)
        pad = False
        if cat.startswith("S"):
            pad = True
        elif cat.startswith("P"):
            prev_num = i > 0 and unicodedata.category(chars[i - 1]).startswith("N")
            next_num = i + 1 < n and unicodedata.category(chars[i + 1]).startswith("N")
            if (i > 0 and not prev_num) or (i + 1 < n and not next_num):
                pad = True
        out.append(f" {ch} " if pad else ch)
    return "".join(out).split()


_TOKENIZERS = {"13a": _tokenize_13a, "intl": _tokenize_intl}


# ---------------------------------------------------------------------------
# d-BLEU


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def d_bleu(
    hyp_docs: list[Document],
    ref_docs: list[Document],
    *,
    tokenizer: str = "13a",
) -> float:
    """Corpus BLEU over whole documents, on a 0-100 scale.

    Documents are matched by doc_id, so list order does not matter.
    Precisions use clipped counts with no smoothing: a corpus with zero
    matches at any n-gram order scores 0.0.
    """
    if not hyp_docs:
        raise MetricError("no documents")
    if tokenizer not in _TOKENIZERS:
        raise MetricError(f"unknown tokenizer {tokenizer!r}")
    tok = _TOKENIZERS[tokenizer]
    refs_by_id = {d.doc_id: d for d in ref_docs}
    hyp_ids = [d.doc_id for d in hyp_docs]
    if sorted(hyp_ids) != sorted(refs_by_id):
        raise MetricError(
            f"doc_id mismatch: hypotheses {sorted(hyp_ids)} vs "
            f"references {sorted(refs_by_id)}"
        )

    matches = [0] * MAX_NGRAM
    totals = [0] * MAX_NGRAM
    hyp_len = 0
    ref_len = 0
    for hyp in sorted(hyp_docs, key=lambda d: d.doc_id):
        hyp_tokens = tok(hyp.text())
        ref_tokens = tok(refs_by_id[hyp.doc_id].text())
        hyp_len += len(hyp_tokens)
        ref_len += len(ref_tokens)
        for n in range(1, MAX_NGRAM + 1):
            hyp_counts = _ngram_counts(hyp_tokens, n)
            ref_counts = _ngram_counts(ref_tokens, n)
            totals[n - 1] += sum(hyp_counts.values())
            matches[n - 1] += sum(
                min(c, ref_counts[g]) for g, c in hyp_counts.items()
            )

    if hyp_len == 0 or any(t == 0 for t in totals):
        return 0.0
    if any(m == 0 for m in matches):
        return 0.0
    log_precision = sum(
        math.log(m / t) for m, t in zip(matches, totals)
    ) / MAX_NGRAM
    brevity = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / hyp_len)
    return 100.0 * brevity * math.exp(log_precision)


# ---------------------------------------------------------------------------
# lexical translation consistency


@dataclass(frozen=True)
class Lexicon:
    """Source terms mapped to their allowed target realizations, in
    preference order. Matching is case-insensitive at word boundaries."""

    entries: dict

    def __post_init__(self):
        if not self.entries:
            raise MetricError("lexicon must be non-empty")
        for term, realizations in self.entries.items():
            if not term or not term.strip():
                raise MetricError("lexicon contains an empty source term")
            if not realizations or any(not r or not r.strip() for r in realizations):
                raise MetricError(f"term {term!r} has an empty realization list entry")

    @classmethod
    def from_tsv(cls, path: str | Path) -> "Lexicon":
        """Load "source_term<TAB>realization1|realization2|..." lines."""
        entries = {}
        text = Path(path).read_text(encoding="utf-8")
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise MetricError(f"{path}:{lineno}: expected exactly one tab")
            term, realizations = parts[0].strip(), parts[1].strip()
            entries[term] = tuple(r.strip() for r in realizations.split("|"))
        return cls(entries=entries)


def _term_pattern(term: str) -> re.Pattern:
    return re.compile(rf"\b{re.escape(term)}\b", re.IGNORECASE)


@dataclass(frozen=True)
class LtcrReport:
    value: float
    total_pairs: int
    consistent_pairs: int
    no_pairs: bool


def ltcr_report(
    src_docs: list[Document],
    hyp_docs: list[Document],
    lexicon: Lexicon,
) -> LtcrReport:
    """Pairwise consistency of lexicon-term translations within documents.

    For each source term found in at least two sentences of a document, the
    realization per sentence is the first lexicon realization present in the
    corresponding hypothesis sentence. Every pair of occurrences is
    consistent only when both realizations exist and are equal.
    """
    if len(src_docs) != len(hyp_docs):
        raise MetricError(
            f"{len(src_docs)} source docs vs {len(hyp_docs)} hypothesis docs"
        )
    term_patterns = {t: _term_pattern(t) for t in lexicon.entries}
    realization_patterns = {
        t: [(_term_pattern(r), r.lower()) for r in rs]
        for t, rs in lexicon.entries.items()
    }
    total = 0
    consistent = 0
    for src, hyp in zip(src_docs, hyp_docs):
        if len(src.sentences) != len(hyp.sentences):
            raise MetricError(
                f"doc {src.doc_id!r}: {len(src.sentences)} source sentences vs "
                f"{len(hyp.sentences)} hypothesis sentences"
            )
        for term, pattern in term_patterns.items():
            hit_indices = [
                i for i, s in enumerate(src.sentences) if pattern.search(s)
            ]
            if len(hit_indices) < 2:
                continue
            realizations = []
            for i in hit_indices:
                found = None
                for rp, canonical in realization_patterns[term]:
                    if rp.search(hyp.sentences[i]):
                        found = canonical
                        break
                realizations.append(found)
            k = len(realizations)
            for a in range(k):
                for b in range(a + 1, k):
                    total += 1
                    if (
                        realizations[a] is not None
                        and realizations[a] == realizations[b]
                    ):
                        consistent += 1
    if total == 0:
        logger.warning("ltcr: no repeated lexicon terms found; reporting 1.0")
        return LtcrReport(value=1.0, total_pairs=0, consistent_pairs=0, no_pairs=True)
    return LtcrReport(
        value=consistent / total,
        total_pairs=total,
        consistent_pairs=consistent,
        no_pairs=False,
    )


def ltcr(src_docs, hyp_docs, lexicon: Lexicon) -> float:
    return ltcr_report(src_docs, hyp_docs, lexicon).value


# ---------------------------------------------------------------------------
# coherence


def _cosine(a, b) -> float:
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(x * x for x in b))
    if na == 0.0 or nb == 0.0:
        raise MetricError("zero-norm embedding")
    return dot / (na * nb)


def coherence(doc_embeddings: list[list]) -> float:
    """Mean cosine similarity of adjacent sentence embeddings.

    Averaged within each document first, then across documents.
    Single-sentence documents cannot contribute and are skipped.
    """
    per_doc = []
    skipped = 0
    for embeddings in doc_embeddings:
        if len(embeddings) < 2:
            skipped += 1
            continue
        dims = {len(e) for e in embeddings}
        if len(dims) != 1:
            raise MetricError(f"embedding dimension mismatch within document: {dims}")
        sims = [
            _cosine(embeddings[i], embeddings[i + 1])
            for i in range(len(embeddings) - 1)
        ]
        per_doc.append(sum(sims) / len(sims))
    if skipped:
        logger.info("coherence: skipped %d single-sentence documents", skipped)
    if not per_doc:
        raise MetricError("no documents with at least 2 embeddings")
    return sum(per_doc) / len(per_doc)


# ---------------------------------------------------------------------------
# system comparison and distributions


@dataclass(frozen=True)
class WinTieLoss:
    wins: int
    ties: int
    losses: int
    tie_eps: float

    @property
    def total(self) -> int:
        return self.wins + self.ties + self.losses


def compare_systems(
    scores_a: list[float],
    scores_b: list[float],
    tie_eps: float = 0.001,
) -> WinTieLoss:
    """Per-index win/tie/loss of system A against system B.

    Differences within tie_eps count as ties. The default 0.001 suits
    scores on [0, 1]; scale it up for 0-100 metrics.
    """
    if len(scores_a) != len(scores_b):
        raise MetricError(
            f"score lists differ in length: {len(scores_a)} vs {len(scores_b)}"
        )
    if tie_eps < 0:
        raise MetricError("tie_eps must be >= 0")
    wins = ties = losses = 0
    for a, b in zip(scores_a, scores_b):
        if abs(a - b) <= tie_eps:
            ties += 1
        elif a > b:
            wins += 1
        else:
            losses += 1
    return WinTieLoss(wins=wins, ties=ties, losses=losses, tie_eps=tie_eps)


def score_distribution(
    scores: list[float], bin_width: float
) -> list[tuple[float, int]]:
    """Histogram over half-open bins [k*w, (k+1)*w), empty bins included."""
    if bin_width <= 0:
        raise MetricError("bin_width must be positive")
    if not scores:
        return []
    indices = [math.floor(s / bin_width) for s in scores]
    counts = Counter(indices)
    lo, hi = min(indices), max(indices)
    return [(k * bin_width, counts.get(k, 0)) for k in range(lo, hi + 1)]


def histogram_csv(histogram: list[tuple[float, int]]) -> str:
    lines = ["bin_lo,count"]
    lines.extend(f"{lo:g},{count}" for lo, count in histogram)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# aggregation


@dataclass(frozen=True)
class MetricReport:
    """One evaluated system's metrics; absent metrics stay absent."""

    system_name: str
    d_bleu: float
    ltcr: float | None = None
    coherence: float | None = None
    scorer_metrics: dict = field(default_factory=dict)
    per_document: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.d_bleu <= 100.0:
            raise MetricError(f"d_bleu {self.d_bleu} outside [0, 100]")
        for name in ("ltcr", "coherence"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise MetricError(f"{name} {value} outside [0, 1]")

    def to_json(self) -> str:
        # explicit ordering and sorted maps keep serialization byte-stable
        payload = {
            "system_name": self.system_name,
            "d_bleu": self.d_bleu,
            "ltcr": self.ltcr,
            "coherence": self.coherence,
            "scorer_metrics": dict(sorted(self.scorer_metrics.items())),
            "per_document": {
                k: dict(sorted(v.items()))
                for k, v in sorted(self.per_document.items())
            },
        }
        return json.dumps(payload, ensure_ascii=False, indent=2)


def metric_report(
    system_name: str,
    d_bleu_value: float,
    *,
    ltcr_value: float | None = None,
    coherence_value: float | None = None,
    scorer_metrics: dict | None = None,
    per_document: dict | None = None,
) -> MetricReport:
    return MetricReport(
        system_name=system_name,
        d_bleu=d_bleu_value,
        ltcr=ltcr_value,
        coherence=coherence_value,
        scorer_metrics=scorer_metrics or {},
        per_document=per_document or {},
    )
