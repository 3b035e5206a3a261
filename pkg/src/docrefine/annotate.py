"""Error annotation over translations: prompt construction, reply parsing,
and error-type tallies.

The annotation prompt asks a judge model to label each hypothesis sentence
with error types from a fixed nine-label vocabulary. Replies are parsed
best-effort: sentences the judge skipped are recorded as error-free but
flagged, and labels outside the vocabulary survive under an "other:"
prefix so tallies never silently drop anything.
"""

from __future__ import annotations

import logging
import re
from collections import Counter
from dataclasses import dataclass

from .corpus import Document
from .prompting import mark_sentences, render

logger = logging.getLogger(__name__)

ERROR_VOCABULARY = (
    "Mistranslation",
    "Overtranslation",
    "Undertranslation",
    "Addition",
    "Omission",
    "Cohesion",
    "Coherence",
    "Inconsistent style",
    "Multiple terms in translation",
)
NONE_LABEL = "(none)"

_CANONICAL = {label.lower(): label for label in ERROR_VOCABULARY}
# ways judges commonly say "no errors"
_NONE_ALIASES = {"none", "(none)", "no error", "no errors", "n/a", "-"}

_SENTENCE_RE = re.compile(r"^\s*Sentence\s*#\s*(\d+)\s*:?", re.IGNORECASE)
_ERROR_LINE_RE = re.compile(r"^\s*Error\s+types?\s*:\s*(.*)$", re.IGNORECASE)
_EXPLANATION_RE = re.compile(
    r"^\s*Explanation(?:\s+for\s+errors)?\s*:\s*(.*)$", re.IGNORECASE
)


class AnnotateError(ValueError):
    """Raised on malformed annotation inputs."""


@dataclass(frozen=True)
class ErrorRecord:
    sentence_id: int
    error_types: tuple[str, ...]
    explanation: str = ""
    missing: bool = False

    def __post_init__(self):
        if self.sentence_id < 1:
            raise AnnotateError(f"sentence_id must be >= 1, got {self.sentence_id}")
        object.__setattr__(self, "error_types", tuple(self.error_types))


def build_mqm_prompt(src_doc: Document, ref_doc: Document, hyp_doc: Document) -> str:
    """Render the annotation prompt for one document triple."""
    counts = {
        "source": len(src_doc.sentences),
        "reference": len(ref_doc.sentences),
        "hypothesis": len(hyp_doc.sentences),
    }
    if len(set(counts.values())) != 1:
        raise AnnotateError(f"sentence count mismatch: {counts}")
    instance = render(
        "mqm_annotate",
        {
            "src_doc": mark_sentences(src_doc.sentences),
            "ref_doc": mark_sentences(ref_doc.sentences),
            "hyp_doc": mark_sentences(hyp_doc.sentences),
        },
    )
    return instance.prompt


def _canonicalize_label(raw: str) -> str | None:
    text = raw.strip().rstrip(".")
    if not text:
        return None
    if text.lower() in _NONE_ALIASES:
        return NONE_LABEL
    canonical = _CANONICAL.get(text.lower())
    if canonical:
        return canonical
    return f"other:{text}"


def _parse_labels(line: str) -> list[str]:
    labels = []
    for raw in re.split(r"[,;]", line):
        label = _canonicalize_label(raw)
        if label is not None:
            labels.append(label)
    if not labels:
        labels = [NONE_LABEL]
    # drop (none) when real labels are also present
    real = [l for l in labels if l != NONE_LABEL]
    return real or [NONE_LABEL]


def parse_mqm(reply: str, expected_n: int) -> list[ErrorRecord]:
    """Parse a judge reply into one record per sentence, best-effort.

    Never raises on malformed prose: unparseable sentences come back as
    error-free records flagged ``missing``.
    """
    if expected_n < 1:
        raise AnnotateError("expected_n must be >= 1")
    blocks: dict[int, dict] = {}
    current: dict | None = None
    for line in reply.splitlines():
        sentence_match = _SENTENCE_RE.match(line)
        if sentence_match:
            sid = int(sentence_match.group(1))
            if sid not in blocks:
                blocks[sid] = {"labels": None, "explanation": []}
            current = blocks[sid]
            continue
        if current is None:
            continue
        error_match = _ERROR_LINE_RE.match(line)
        if error_match and current["labels"] is None:
            current["labels"] = _parse_labels(error_match.group(1))
            continue
        explanation_match = _EXPLANATION_RE.match(line)
        if explanation_match:
            current["explanation"].append(explanation_match.group(1).strip())
        elif current["explanation"]:
            # continuation of a multi-line explanation
            current["explanation"].append(line.strip())

    records = []
    for sid in range(1, expected_n + 1):
        block = blocks.get(sid)
        if block is None:
            records.append(
                ErrorRecord(sentence_id=sid, error_types=(NONE_LABEL,), missing=True)
            )
            continue
        labels = block["labels"] or [NONE_LABEL]
        records.append(
            ErrorRecord(
                sentence_id=sid,
                error_types=tuple(labels),
                explanation=" ".join(p for p in block["explanation"] if p),
            )
        )
    extra = [sid for sid in blocks if sid > expected_n or sid < 1]
    if extra:
        logger.warning("parse_mqm: ignoring out-of-range sentence ids %s", extra)
    return records


def aggregate_errors(records: list[list[ErrorRecord]]) -> dict[str, int]:
    """Tally error labels across documents; "(none)" is not an error."""
    counts: Counter = Counter()
    for doc_records in records:
        for record in doc_records:
            for label in record.error_types:
                if label != NONE_LABEL:
                    counts[label] += 1
    # descending count, then label, so output order is reproducible
    return dict(sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])))


def tally_csv(tally: dict[str, int]) -> str:
    lines = ["error_type,count"]
    lines.extend(f"{label.replace(',', ';')},{count}" for label, count in tally.items())
    return "\n".join(lines) + "\n"
