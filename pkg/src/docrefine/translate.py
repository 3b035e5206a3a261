"""Sent2Sent / Doc2Doc translation of chunks and two-candidate refinement.

Document-level replies come back as ``#<i>: `` marker lines; ``parse_marked``
splits them into per-sentence segments and repairs count mismatches with a
fixed, total policy (fill missing with "", keep the first duplicate, append
out-of-range ids to the last kept segment, fall back to a single segment
when no marker is present), reporting what it did.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .llm_client import DecodeParams, LLMClient
from .prompting import MARKER_RE, mark_sentences, render

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ParseReport:
    """What parse_marked found and how far the reply was repaired."""

    expected_n: int
    found_n: int
    missing_ids: tuple[int, ...] = ()
    duplicate_ids: tuple[int, ...] = ()
    repaired: bool = False

    def __post_init__(self):
        object.__setattr__(self, "missing_ids", tuple(self.missing_ids))
        object.__setattr__(self, "duplicate_ids", tuple(self.duplicate_ids))

    def to_dict(self) -> dict:
        return {
            "expected_n": self.expected_n,
            "found_n": self.found_n,
            "missing_ids": list(self.missing_ids),
            "duplicate_ids": list(self.duplicate_ids),
            "repaired": self.repaired,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ParseReport":
        return cls(
            expected_n=data["expected_n"],
            found_n=data["found_n"],
            missing_ids=tuple(data.get("missing_ids", ())),
            duplicate_ids=tuple(data.get("duplicate_ids", ())),
            repaired=data.get("repaired", False),
        )


@dataclass(frozen=True)
class IntermediatePair:
    """Sentence-level and document-level translations of one chunk."""

    sent2sent: tuple[str, ...]
    doc2doc: tuple[str, ...]
    parse_report: ParseReport
    degraded: bool = False

    def __post_init__(self):
        object.__setattr__(self, "sent2sent", tuple(self.sent2sent))
        object.__setattr__(self, "doc2doc", tuple(self.doc2doc))


def parse_marked(text: str, expected_n: int) -> tuple[list[str], ParseReport]:
    """Split a marker-formatted reply into exactly ``expected_n`` segments.

    Segment text runs from a ``#<id>: `` line to the next marker line.
    Repairs never fail: missing ids become "", the first occurrence of a
    duplicated id wins, ids outside 1..expected_n are appended to the last
    kept segment, and a reply without any marker becomes segment 1 whole.
    ``found_n`` counts the segments present in the reply itself.
    """
    if expected_n < 1:
        raise ValueError("expected_n must be >= 1")

    # (id, text) for each marker line, in reply order
    parsed: list[tuple[int, list[str]]] = []
    for line in text.splitlines():
        match = MARKER_RE.match(line)
        if match:
            parsed.append((int(match.group(1)), [line[match.end() :]]))
        elif parsed:
            parsed[-1][1].append(line)
        # prose before the first marker is preamble boilerplate; dropped

    segments = [""] * expected_n
    if not parsed:
        whole = text.strip()
        found_n = 1 if whole else 0
        if whole:
            segments[0] = whole
        missing = tuple(i for i in range(1, expected_n + 1) if not (whole and i == 1))
        repaired = found_n != expected_n
        return segments, ParseReport(
            expected_n=expected_n,
            found_n=found_n,
            missing_ids=missing,
            repaired=repaired,
        )

    seen: set[int] = set()
    duplicates: list[int] = []
    overflow: list[str] = []
    for sid, lines in parsed:
        seg_text = "\n".join(lines).strip()
        if 1 <= sid <= expected_n:
            if sid in seen:
                if sid not in duplicates:
                    duplicates.append(sid)
                continue
            seen.add(sid)
            segments[sid - 1] = seg_text
        else:
            overflow.append(seg_text)

    if overflow:
        anchor = max(seen) - 1 if seen else expected_n - 1
        joined = " ".join(part for part in [segments[anchor], *overflow] if part)
        segments[anchor] = joined

    missing = tuple(i for i in range(1, expected_n + 1) if i not in seen)
    found_n = len(parsed)
    repaired = bool(missing) or bool(duplicates) or bool(overflow)
    return segments, ParseReport(
        expected_n=expected_n,
        found_n=found_n,
        missing_ids=missing,
        duplicate_ids=tuple(duplicates),
        repaired=repaired,
    )


def translate_sent2sent(
    client: LLMClient,
    sentences: list[str] | tuple[str, ...],
    src_lang: str,
    tgt_lang: str,
    dp: DecodeParams | None = None,
    *,
    templates=None,
) -> list[str]:
    """Translate each sentence independently; one endpoint call per sentence."""
    if not sentences:
        raise ValueError("chunk has no sentences")
    prompts = [
        render(
            "sent2sent",
            {"src": sent, "src_lang": src_lang, "tgt_lang": tgt_lang},
            templates=templates,
        ).prompt
        for sent in sentences
    ]
    replies = client.complete_batch(prompts, dp)
    outputs = []
    for i, reply in enumerate(replies):
        stripped = reply.strip()
        if not stripped:
            logger.warning("empty reply for sentence %d", i + 1)
        outputs.append(stripped)
    return outputs


def translate_doc2doc(
    client: LLMClient,
    sentences: list[str] | tuple[str, ...],
    src_lang: str,
    tgt_lang: str,
    dp: DecodeParams | None = None,
    *,
    templates=None,
) -> tuple[list[str], ParseReport]:
    """Translate the whole chunk in one call on the marked source block."""
    if not sentences:
        raise ValueError("chunk has no sentences")
    prompt = render(
        "doc2doc",
        {
            "src_doc": mark_sentences(sentences),
            "src_lang": src_lang,
            "tgt_lang": tgt_lang,
        },
        templates=templates,
    ).prompt
    reply = client.complete(prompt, dp)
    return parse_marked(reply, len(sentences))


def translate_intermediates(
    client: LLMClient,
    sentences: list[str] | tuple[str, ...],
    src_lang: str,
    tgt_lang: str,
    dp: DecodeParams | None = None,
    *,
    templates=None,
) -> IntermediatePair:
    """Produce both intermediate translations of one chunk."""
    y = translate_sent2sent(client, sentences, src_lang, tgt_lang, dp, templates=templates)
    z, report = translate_doc2doc(client, sentences, src_lang, tgt_lang, dp, templates=templates)
    # repaired replies carry filler segments; flag them so dataset
    # construction can skip the chunk
    return IntermediatePair(
        sent2sent=tuple(y),
        doc2doc=tuple(z),
        parse_report=report,
        degraded=report.repaired,
    )


def refine(
    client: LLMClient,
    sentences: list[str] | tuple[str, ...],
    h1: list[str] | tuple[str, ...],
    h2: list[str] | tuple[str, ...],
    src_lang: str,
    tgt_lang: str,
    dp: DecodeParams | None = None,
    *,
    templates=None,
) -> tuple[list[str], ParseReport]:
    """Refine a chunk given two candidate translations (which may be equal).

    Identical candidates are legal: systems without a document-level mode
    supply the same translation in both slots.
    """
    n = len(sentences)
    if len(h1) != n or len(h2) != n:
        raise ValueError(
            f"candidate lengths ({len(h1)}, {len(h2)}) != chunk size {n}"
        )
    prompt = render(
        "refine_two",
        {
            "src_doc": mark_sentences(sentences),
            "hyp1": mark_sentences(h1),
            "hyp2": mark_sentences(h2),
            "src_lang": src_lang,
            "tgt_lang": tgt_lang,
        },
        templates=templates,
    ).prompt
    reply = client.complete(prompt, dp)
    return parse_marked(reply, n)


def refine_single(
    client: LLMClient,
    sentences: list[str] | tuple[str, ...],
    hyp: list[str] | tuple[str, ...],
    src_lang: str,
    tgt_lang: str,
    dp: DecodeParams | None = None,
    *,
    template_id: str = "refine_single_doc",
    templates=None,
) -> tuple[list[str], ParseReport]:
    """Refine a chunk given one candidate translation."""
    n = len(sentences)
    if len(hyp) != n:
        raise ValueError(f"candidate length {len(hyp)} != chunk size {n}")
    prompt = render(
        template_id,
        {
            "src_doc": mark_sentences(sentences),
            "hyp_doc": mark_sentences(hyp),
            "src_lang": src_lang,
            "tgt_lang": tgt_lang,
        },
        templates=templates,
    ).prompt
    reply = client.complete(prompt, dp)
    return parse_marked(reply, n)
