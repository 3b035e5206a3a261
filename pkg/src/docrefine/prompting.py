"""Prompt templates, sentence markers, and position-bias augmentation.

Template bodies are frozen so exported datasets are byte-for-byte
reproducible; they can be overridden from a config file keyed by
template id. Sentences inside document-level prompts are numbered with
``#<i>: `` markers so replies can be split back into sentences.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Mapping

if TYPE_CHECKING:
    from .quality import RefinementQuintuple

logger = logging.getLogger(__name__)

MARKER_RE = re.compile(r"^#(\d+): ?")
_PLACEHOLDER_RE = re.compile(r"<([a-z0-9_]+)>")

_REFINE_SINGLE_BODY = (
    "Given the <src_lang> source document and a candidate <tgt_lang> translation, "
    "produce an improved <tgt_lang> translation of the whole document. "
    "Keep the sentence markers.\n"
    "Source:\n<src_doc>\n"
    "Candidate:\n<hyp_doc>\n"
    "Improved translation:"
)

_MQM_BODY = (
    "[Source]:\n<src_doc>\n"
    "[Reference]:\n<ref_doc>\n"
    "[Hypothesis]:\n<hyp_doc>\n"
    "\n"
    "[Error Types]:\n"
    "- Mistranslation: Error occurring when the target content does not "
    "accurately represent the source.\n"
    "- Overtranslation: Error occurring in the target content that is "
    "inappropriately more specific than the source.\n"
    "- Undertranslation: Error occurring in the target content that is "
    "inappropriately less specific than the source.\n"
    "- Addition: Error occurring in the target content that includes content "
    "not present in the source.\n"
    "- Omission: Error where content present in the source is missing in the "
    "target.\n"
    "- Cohesion: Portions of the text needed to connect it into an "
    "understandable whole (e.g., reference, substitution, ellipsis, "
    "conjunction, and lexical cohesion) missing or incorrect.\n"
    "- Coherence: Text lacking a clear semantic relationship between its "
    "parts, i.e., the different parts don't hang together, don't follow the "
    "discourse conventions of the target language, or don't \"make sense.\"\n"
    "- Inconsistent style: Style that varies inconsistently throughout the "
    "text, e.g., One part of a text is written in a clear, \"terse\" style, "
    "while other sections are written in a more wordy style.\n"
    "- Multiple terms in translation: Error where source content terminology "
    "is correct, but target content terms are not used consistently.\n"
    "\n"
    "Considering the provided context, please identify the errors of the "
    "translation from the source to the target in the current sentence based "
    "on a subset of Multidimensional Quality Metrics (MQM) error typology.\n"
    "You should pay extra attention to the error types related to the "
    "relationship between the current sentence and its context, such as "
    "\"Unclear reference\", \"Cohesion\", \"Coherence\", \"Inconsistent "
    "style\", and \"Multiple terms in translation\".\n"
    "For each sentence in machine translation, please give the error types "
    "and brief explanation for errors. The returned format is as follows:\n"
    "Sentence #id :\n"
    "Error types: ...\n"
    "Explanation for errors: ..."
)

DEFAULT_TEMPLATES: dict[str, str] = {
    "sent2sent": (
        "Translate the following <src_lang> sentence into <tgt_lang>. "
        "Output only the translation.\n<src>"
    ),
    "doc2doc": (
        "Translate the following <src_lang> document into <tgt_lang>. "
        "Keep the sentence markers (#1:, #2:, ...) and translate sentence "
        "by sentence.\n<src_doc>"
    ),
    "refine_two": (
        "Given the <src_lang> source document and two candidate <tgt_lang> "
        "translations, produce an improved <tgt_lang> translation of the "
        "whole document. Keep the sentence markers.\n"
        "Source:\n<src_doc>\n"
        "Candidate 1:\n<hyp1>\n"
        "Candidate 2:\n<hyp2>\n"
        "Improved translation:"
    ),
    "refine_single_sent": _REFINE_SINGLE_BODY,
    "refine_single_doc": _REFINE_SINGLE_BODY,
    "mqm_annotate": _MQM_BODY,
}


class PromptError(ValueError):
    """Raised for unknown templates or unbound placeholders."""


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    body: str

    def placeholders(self) -> set[str]:
        return set(_PLACEHOLDER_RE.findall(self.body))


@dataclass(frozen=True)
class RenderedInstance:
    """A rendered prompt, optionally paired with a training target."""

    prompt: str
    target: str | None = None
    meta: dict = field(default_factory=dict)


def _validate_registry(templates: Mapping[str, str]) -> None:
    refine_two = templates.get("refine_two", "")
    if refine_two.count("<hyp1>") != 1 or refine_two.count("<hyp2>") != 1:
        raise PromptError(
            "refine_two template must contain <hyp1> and <hyp2> exactly once"
        )


_validate_registry(DEFAULT_TEMPLATES)


def load_templates(path: str | Path) -> dict[str, str]:
    """Load template overrides (YAML/JSON mapping template_id -> body)."""
    import yaml

    with open(path, encoding="utf-8") as handle:
        overrides = yaml.safe_load(handle)
    if not isinstance(overrides, dict):
        raise PromptError(f"{path}: expected a mapping of template_id to body")
    unknown = set(overrides) - set(DEFAULT_TEMPLATES)
    if unknown:
        raise PromptError(f"{path}: unknown template ids {sorted(unknown)}")
    merged = dict(DEFAULT_TEMPLATES)
    merged.update({k: str(v) for k, v in overrides.items()})
    _validate_registry(merged)
    return merged


def mark_sentences(sentences: list[str] | tuple[str, ...]) -> str:
    """Join sentences into a block of ``#<i>: <sentence>`` lines, 1-based."""
    if not sentences:
        raise PromptError("cannot mark an empty sentence list")
    for sent in sentences:
        if MARKER_RE.match(sent):
            logger.warning(
                "sentence already starts with a marker-like prefix: %.40r", sent
            )
    return "\n".join(f"#{i}: {sent}" for i, sent in enumerate(sentences, start=1))


def render(
    template_id: str,
    bindings: Mapping[str, str],
    *,
    target: str | None = None,
    meta: dict | None = None,
    templates: Mapping[str, str] | None = None,
) -> RenderedInstance:
    """Substitute placeholders into a template body.

    All placeholders named in the body must be bound; values are inserted
    verbatim (no escaping, single pass).
    """
    registry = templates or DEFAULT_TEMPLATES
    try:
        body = registry[template_id]
    except KeyError:
        raise PromptError(f"unknown template id {template_id!r}") from None

    unbound = [
        name for name in _PLACEHOLDER_RE.findall(body) if name not in bindings
    ]
    if unbound:
        raise PromptError(f"unbound placeholder <{unbound[0]}>")

    prompt = _PLACEHOLDER_RE.sub(lambda m: str(bindings[m.group(1)]), body)
    return RenderedInstance(prompt=prompt, target=target, meta=dict(meta or {}))


def augment_swap(
    q: "RefinementQuintuple",
    *,
    templates: Mapping[str, str] | None = None,
) -> list[RenderedInstance]:
    """Emit both candidate orderings of a refinement quintuple.

    Instance 0 puts the sentence-level translation first, instance 1 puts
    the document-level translation first; both share the marked reference
    as target. Training on both orderings keeps the refiner from attending
    to one candidate slot only.
    """
    marked_src = mark_sentences(q.src)
    marked_y = mark_sentences(q.y)
    marked_z = mark_sentences(q.z)
    target = mark_sentences(q.ref)

    instances = []
    for swapped in (False, True):
        hyp1, hyp2 = (marked_z, marked_y) if swapped else (marked_y, marked_z)
        instances.append(
            render(
                "refine_two",
                {
                    "src_lang": q.src_lang,
                    "tgt_lang": q.tgt_lang,
                    "src_doc": marked_src,
                    "hyp1": hyp1,
                    "hyp2": hyp2,
                },
                target=target,
                meta={
                    "doc_id": q.doc_id,
                    "chunk_index": q.chunk_index,
                    "swapped": swapped,
                },
                templates=templates,
            )
        )
    return instances
