"""Model-free "real" backend built from classical text statistics.

This deployment has no GPU, so the real mode serves small deterministic
surrogates with the same interface and value ranges a neural deployment
would have: a character n-gram F-score against the reference (reference
based "da"), a length-ratio plausibility heuristic (reference-free "qe"),
hashed character trigram embeddings, and a word bigram language model
trained on a built-in corpus (perplexity). They preserve the orderings
clients rely on: an exact-match hypothesis outscores a scrambled one, and
fluent text gets lower perplexity than its word-shuffled version.
"""

from __future__ import annotations

import math
import re
from collections import Counter

from .mock_backend import fnv1a64

EMBED_DIM = 64

_WORD_RE = re.compile(r"[a-z']+")

TRAINING_SENTENCES = (
    "the committee approved the new budget after a long debate",
    "she walked to the station and waited for the morning train",
    "the museum opens its doors to visitors every day at nine",
    "a cold wind blew across the harbor before the storm arrived",
    "the children played in the garden until the sun went down",
    "he read the letter twice and put it back in the drawer",
    "the ferry crossed the channel despite the heavy rain",
    "our neighbors planted tomatoes along the fence last spring",
    "the orchestra rehearsed the final movement late into the night",
    "travelers should keep their tickets until the end of the journey",
    "the library closes early on the last friday of every month",
    "a small crowd gathered near the fountain in the old square",
    "the mayor promised to repair the bridge before the winter",
    "students carried their books across the courtyard in the rain",
    "the baker sold the last loaf of bread just before noon",
    "they watched the ships leave the harbor at first light",
    "the train arrived ten minutes late because of the snow",
    "every visitor must sign the register at the front desk",
    "the gardener trimmed the hedge along the narrow path",
    "a quiet street led from the market to the river bank",
)


def char_ngrams(text: str, n: int) -> Counter:
    return Counter(text[i : i + n] for i in range(len(text) - n + 1))


def char_ngram_f(hyp: str, ref: str, max_n: int = 4) -> float:
    """Mean character n-gram F1 between hypothesis and reference, in [0, 1].

    Word order matters because n-grams cross word boundaries, so an exact
    match scores 1.0 and strictly above any reordering of the same words.
    """
    scores = []
    for n in range(1, max_n + 1):
        hyp_grams = char_ngrams(hyp, n)
        ref_grams = char_ngrams(ref, n)
        if not hyp_grams and not ref_grams:
            continue
        if not hyp_grams or not ref_grams:
            scores.append(0.0)
            continue
        overlap = sum(min(count, ref_grams[g]) for g, count in hyp_grams.items())
        precision = overlap / sum(hyp_grams.values())
        recall = overlap / sum(ref_grams.values())
        if precision + recall == 0.0:
            scores.append(0.0)
        else:
            scores.append(2.0 * precision * recall / (precision + recall))
    return sum(scores) / len(scores) if scores else 0.0


def length_ratio_score(src: str, mt: str) -> float:
    """Reference-free plausibility in (0, 1]: penalize length mismatch."""
    src_len = max(len(src), 1)
    mt_len = max(len(mt), 1)
    return 1.0 / (1.0 + abs(math.log(mt_len / src_len)))


def hashed_embedding(text: str, dim: int = EMBED_DIM) -> list[float]:
    """Unit vector from signed hashed character trigrams of the text."""
    vec = [0.0] * dim
    padded = f" {text} "
    for i in range(len(padded) - 2):
        h = fnv1a64(padded[i : i + 3].encode("utf-8"))
        vec[h % dim] += 1.0 if (h >> 63) & 1 == 0 else -1.0
    if not any(vec):
        # no trigrams (or exact cancellation): still return a unit vector
        vec[0] = 1.0
    norm = math.sqrt(sum(x * x for x in vec))
    return [x / norm for x in vec]


class BigramLM:
    """Add-k smoothed word bigram language model."""

    def __init__(self, sentences: tuple[str, ...], k: float = 0.1):
        self.k = k
        self.bigrams: Counter = Counter()
        self.context: Counter = Counter()
        vocab: set[str] = set()
        for sentence in sentences:
            tokens = _WORD_RE.findall(sentence.lower())
            vocab.update(tokens)
            stream = ["<s>", *tokens, "</s>"]
            for prev, word in zip(stream, stream[1:]):
                self.bigrams[(prev, word)] += 1
                self.context[prev] += 1
        self.vocab = vocab | {"<s>", "</s>", "<unk>"}

    def _logprob(self, prev: str, word: str) -> float:
        numerator = self.bigrams[(prev, word)] + self.k
        denominator = self.context[prev] + self.k * len(self.vocab)
        return math.log(numerator / denominator)

    def perplexity(self, text: str) -> float:
        tokens = [
            t if t in self.vocab else "<unk>"
            for t in _WORD_RE.findall(text.lower())
        ]
        stream = ["<s>", *tokens, "</s>"]
        total = sum(self._logprob(p, w) for p, w in zip(stream, stream[1:]))
        return math.exp(-total / (len(stream) - 1))


class RealBackend:
    """Statistics-backed scoring with the same contract as the mock."""

    mode = "real"

    def __init__(self):
        self._lm = BigramLM(TRAINING_SENTENCES)

    def da(self, src: str, mt: str, ref: str) -> float:
        return char_ngram_f(mt, ref)

    def qe(self, src: str, mt: str) -> float:
        return length_ratio_score(src, mt)

    def embed(self, text: str) -> list[float]:
        return hashed_embedding(text)

    def ppl(self, text: str) -> float:
        return self._lm.perplexity(text)
