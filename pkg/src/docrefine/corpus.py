"""Document-aligned corpus loading, token budgeting, and chunking.

A corpus is a list of source/reference document pairs. Long documents are
split into contiguous sentence chunks that fit a token budget; chunks are
the unit of every translation and refinement call, and chunk outputs are
reassembled into full documents for evaluation.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

logger = logging.getLogger(__name__)

DOC_BOUNDARY = "<docline>"
DEFAULT_CHUNK_BUDGET = 512


class CorpusError(ValueError):
    """Raised when a corpus file or document violates its contract."""


def _normalize_sentence(text: str) -> str:
    text = text.replace("﻿", "")
    text = " ".join(text.splitlines())
    return text.strip()


@dataclass(frozen=True)
class Document:
    """One document: an ordered, non-empty list of sentences in one language."""

    doc_id: str
    lang: str
    sentences: tuple[str, ...]

    def __post_init__(self):
        if not self.sentences:
            raise CorpusError(f"document {self.doc_id!r} has no sentences")
        object.__setattr__(self, "sentences", tuple(self.sentences))

    def __len__(self) -> int:
        return len(self.sentences)

    def text(self) -> str:
        """Whole document as a single space-joined string."""
        return " ".join(self.sentences)


@dataclass(frozen=True)
class ParallelDocument:
    source: Document
    reference: Document
    aligned: bool = True

    def __post_init__(self):
        if self.aligned and len(self.source) != len(self.reference):
            raise CorpusError(
                f"document {self.source.doc_id!r}: source has {len(self.source)} "
                f"sentences but reference has {len(self.reference)}"
            )
        if self.source.lang == self.reference.lang:
            raise CorpusError(
                f"document {self.source.doc_id!r}: source and reference share "
                f"language code {self.source.lang!r}"
            )

    @property
    def doc_id(self) -> str:
        return self.source.doc_id


@dataclass(frozen=True)
class Chunk:
    """A contiguous run of sentences from one document within the token budget."""

    doc_id: str
    chunk_index: int
    sentence_span: tuple[int, int]
    sentences: tuple[str, ...]
    token_lengths: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))
        object.__setattr__(self, "token_lengths", tuple(self.token_lengths))
        start, end = self.sentence_span
        if end - start != len(self.sentences) or not self.sentences:
            raise CorpusError(
                f"chunk {self.doc_id}/{self.chunk_index}: span {self.sentence_span} "
                f"does not cover {len(self.sentences)} sentences"
            )

    def __len__(self) -> int:
        return len(self.sentences)

    @property
    def total_tokens(self) -> int:
        return sum(self.token_lengths)


@dataclass(frozen=True)
class ChunkPair:
    """A source chunk with the reference sentences for the same span."""

    source: Chunk
    ref_sentences: tuple[str, ...]
    src_lang: str
    tgt_lang: str

    def __post_init__(self):
        object.__setattr__(self, "ref_sentences", tuple(self.ref_sentences))
        if len(self.ref_sentences) != len(self.source):
            raise CorpusError(
                f"chunk {self.source.doc_id}/{self.source.chunk_index}: "
                f"{len(self.source)} source sentences vs "
                f"{len(self.ref_sentences)} reference sentences"
            )


@dataclass(frozen=True)
class TokenizerSpec:
    """How sentence lengths are measured for the chunk budget.

    ``whitespace`` counts non-whitespace runs, ``char-budget`` charges one
    token per ``divisor`` characters (a conservative subword proxy), and
    ``external`` greedily matches against a vocabulary file, one token per
    line, unknown characters standing alone.
    """

    kind: str = "char-budget"
    divisor: int = 4
    vocab_path: str | None = None

    def __post_init__(self):
        if self.kind not in ("whitespace", "char-budget", "external"):
            raise ValueError(f"unknown tokenizer kind {self.kind!r}")
        if self.kind == "char-budget" and self.divisor < 1:
            raise ValueError("char-budget divisor must be >= 1")
        if self.kind == "external" and not self.vocab_path:
            raise ValueError("external tokenizer requires a vocabulary path")

    @classmethod
    def whitespace(cls) -> "TokenizerSpec":
        return cls(kind="whitespace")

    @classmethod
    def char_budget(cls, divisor: int = 4) -> "TokenizerSpec":
        return cls(kind="char-budget", divisor=divisor)

    @classmethod
    def external(cls, vocab_path: str) -> "TokenizerSpec":
        return cls(kind="external", vocab_path=vocab_path)


_VOCAB_CACHE: dict[str, list[str]] = {}


def _load_vocab(path: str) -> list[str]:
    if path not in _VOCAB_CACHE:
        try:
            raw = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise CorpusError(f"cannot read vocabulary file {path!r}: {exc}") from exc
        entries = [line.strip() for line in raw.splitlines() if line.strip()]
        # longest-first so greedy matching prefers the longest vocabulary entry
        _VOCAB_CACHE[path] = sorted(set(entries), key=len, reverse=True)
    return _VOCAB_CACHE[path]


def tokenize(text: str, tok: TokenizerSpec) -> list[str]:
    """Split ``text`` into surface tokens under the tokenizer spec."""
    if tok.kind == "whitespace":
        return text.split()
    if tok.kind == "char-budget":
        return [text[i : i + tok.divisor] for i in range(0, len(text), tok.divisor)]
    vocab = _load_vocab(tok.vocab_path)
    tokens: list[str] = []
    i = 0
    while i < len(text):
        for entry in vocab:
            if text.startswith(entry, i):
                tokens.append(entry)
                i += len(entry)
                break
        else:
            tokens.append(text[i])
            i += 1
    return tokens


def token_length(text: str, tok: TokenizerSpec) -> int:
    """Deterministic token count of ``text`` under the tokenizer spec."""
    if tok.kind == "whitespace":
        return len(text.split())
    if tok.kind == "char-budget":
        return math.ceil(len(text) / tok.divisor)
    return len(tokenize(text, tok))


def split_into_chunks(
    doc: Document, budget: int = DEFAULT_CHUNK_BUDGET, tok: TokenizerSpec | None = None
) -> list[Chunk]:
    """Split a document into contiguous chunks whose totals fit the budget.

    Sentences accumulate into the current chunk until adding the next one
    would exceed ``budget``, at which point a new chunk starts. A single
    sentence longer than the budget becomes a chunk of its own; empty
    chunks are never emitted.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    tok = tok or TokenizerSpec()
    lengths = [token_length(s, tok) for s in doc.sentences]

    chunks: list[Chunk] = []
    cur: list[int] = []  # sentence indices of the open chunk
    cur_len = 0

    def emit(indices: list[int]) -> None:
        chunks.append(
            Chunk(
                doc_id=doc.doc_id,
                chunk_index=len(chunks),
                sentence_span=(indices[0], indices[-1] + 1),
                sentences=tuple(doc.sentences[i] for i in indices),
                token_lengths=tuple(lengths[i] for i in indices),
            )
        )

    for i, sent_len in enumerate(lengths):
        if cur_len + sent_len > budget:
            if cur:
                emit(cur)
            cur = [i]
            cur_len = sent_len
        else:
            cur.append(i)
            cur_len += sent_len
    if cur:
        emit(cur)
    return chunks


def parallel_chunks(
    pair: ParallelDocument,
    budget: int = DEFAULT_CHUNK_BUDGET,
    tok: TokenizerSpec | None = None,
) -> list[ChunkPair]:
    """Chunk the source side and carry the aligned reference sentences along."""
    if not pair.aligned:
        raise CorpusError(
            f"document {pair.doc_id!r}: parallel chunking requires an aligned pair"
        )
    out = []
    for chunk in split_into_chunks(pair.source, budget, tok):
        start, end = chunk.sentence_span
        out.append(
            ChunkPair(
                source=chunk,
                ref_sentences=pair.reference.sentences[start:end],
                src_lang=pair.source.lang,
                tgt_lang=pair.reference.lang,
            )
        )
    return out


def reassemble(
    chunks: list[Chunk], sentence_lists: list[list[str]], lang: str = "und"
) -> Document:
    """Concatenate per-chunk sentence lists back into one document.

    ``sentence_lists`` is parallel to ``chunks`` (typically translations of
    each chunk). Chunks may arrive in any order; they must belong to one
    document and cover it without gaps or overlaps.
    """
    if not chunks:
        raise CorpusError("no chunks to reassemble")
    if len(chunks) != len(sentence_lists):
        raise CorpusError(
            f"{len(chunks)} chunks but {len(sentence_lists)} sentence lists"
        )
    doc_ids = {c.doc_id for c in chunks}
    if len(doc_ids) != 1:
        raise CorpusError(f"chunks mix documents: {sorted(doc_ids)}")
    doc_id = chunks[0].doc_id

    order = sorted(range(len(chunks)), key=lambda i: chunks[i].chunk_index)
    expected_index = 0
    expected_start = 0
    sentences: list[str] = []
    for i in order:
        chunk = chunks[i]
        if chunk.chunk_index != expected_index:
            raise CorpusError(f"document {doc_id!r}: gap at chunk {expected_index}")
        start, end = chunk.sentence_span
        if start != expected_start:
            kind = "overlap" if start < expected_start else "gap"
            raise CorpusError(
                f"document {doc_id!r}: {kind} at sentence {expected_start} "
                f"(chunk {chunk.chunk_index} spans [{start}, {end}))"
            )
        sentences.extend(sentence_lists[i])
        expected_index += 1
        expected_start = end
    return Document(doc_id=doc_id, lang=lang, sentences=tuple(sentences))


def _build_document(doc_id: str, lang: str, raw_sentences: list[str]) -> Document:
    cleaned = []
    dropped = 0
    for sent in raw_sentences:
        norm = _normalize_sentence(sent)
        if norm:
            cleaned.append(norm)
        else:
            dropped += 1
    if dropped:
        logger.warning("document %s: dropped %d empty sentence(s)", doc_id, dropped)
    return Document(doc_id=doc_id, lang=lang, sentences=tuple(cleaned))


def _load_jsonl_docs(
    path: str | Path, aligned: bool, src_lang: str | None, tgt_lang: str | None
) -> list[ParallelDocument]:
    pairs = []
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}: line {lineno}: invalid JSON: {exc}") from exc
            try:
                doc_id = record["doc_id"]
                src = record["src"]
                ref = record["ref"]
            except (KeyError, TypeError) as exc:
                raise CorpusError(
                    f"{path}: line {lineno}: missing field {exc}"
                ) from exc
            if doc_id in seen_ids:
                raise CorpusError(f"{path}: line {lineno}: duplicate doc_id {doc_id!r}")
            seen_ids.add(doc_id)
            pairs.append(
                ParallelDocument(
                    source=_build_document(
                        doc_id, record.get("src_lang") or src_lang or "und-x-src", src
                    ),
                    reference=_build_document(
                        doc_id, record.get("tgt_lang") or tgt_lang or "und-x-tgt", ref
                    ),
                    aligned=aligned,
                )
            )
    return pairs


def _read_boundary_blocks(path: str | Path) -> list[list[str]]:
    blocks: list[list[str]] = [[]]
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip() == DOC_BOUNDARY:
            blocks.append([])
        else:
            blocks[-1].append(line)
    return [b for b in blocks if any(s.strip() for s in b)]


def _load_plaintext(
    path: str | Path,
    ref_path: str | Path,
    aligned: bool,
    src_lang: str | None,
    tgt_lang: str | None,
) -> list[ParallelDocument]:
    src_blocks = _read_boundary_blocks(path)
    ref_blocks = _read_boundary_blocks(ref_path)
    if len(src_blocks) != len(ref_blocks):
        raise CorpusError(
            f"{path} has {len(src_blocks)} documents but {ref_path} has "
            f"{len(ref_blocks)}; boundary structure must match"
        )
    pairs = []
    for i, (src, ref) in enumerate(zip(src_blocks, ref_blocks)):
        doc_id = f"doc{i:04d}"
        pairs.append(
            ParallelDocument(
                source=_build_document(doc_id, src_lang or "und-x-src", src),
                reference=_build_document(doc_id, tgt_lang or "und-x-tgt", ref),
                aligned=aligned,
            )
        )
    return pairs


def load_corpus(
    path: str | Path,
    format: str = "jsonl-docs",
    *,
    ref_path: str | Path | None = None,
    aligned: bool = True,
    src_lang: str | None = None,
    tgt_lang: str | None = None,
) -> list[ParallelDocument]:
    """Load a document-aligned parallel corpus.

    ``jsonl-docs``: one JSON object per line with keys ``doc_id``,
    ``src_lang``, ``tgt_lang``, ``src`` (list of sentences), ``ref``.
    ``plaintext-with-boundaries``: one sentence per line, documents
    separated by a ``<docline>`` line; the reference lives in a sibling
    file (``ref_path``) with the identical boundary structure.
    """
    if format == "jsonl-docs":
        return _load_jsonl_docs(path, aligned, src_lang, tgt_lang)
    if format == "plaintext-with-boundaries":
        if ref_path is None:
            raise CorpusError("plaintext-with-boundaries needs ref_path")
        return _load_plaintext(path, ref_path, aligned, src_lang, tgt_lang)
    raise CorpusError(f"unknown corpus format {format!r}")
