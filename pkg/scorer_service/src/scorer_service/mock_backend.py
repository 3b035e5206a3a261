"""Hash-derived scoring backend with no model dependency.

Every reply is a pure function of the request text, computed with integer
arithmetic only, so responses are identical across runs, platforms, and
process restarts. Pipeline clients ship an in-process double that
re-implements the same functions; the two must stay bit-for-bit equal.
"""

from __future__ import annotations

import math

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_TWO64 = 2**64

EMBED_DIM = 16


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash."""
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) % _TWO64
    return h


def fold_unit(h: int) -> float:
    """Fold a 64-bit hash into [0, 1]."""
    return h / _TWO64


class MockBackend:
    """Deterministic stand-in for the model-backed backend."""

    mode = "mock"

    def da(self, src: str, mt: str, ref: str) -> float:
        return fold_unit(fnv1a64(f"{src}|{mt}|{ref}".encode("utf-8")))

    def qe(self, src: str, mt: str) -> float:
        # reference-free scoring reuses the same fold with an empty ref slot
        return self.da(src, mt, "")

    def embed(self, text: str) -> list[float]:
        # fixed positive first component keeps pairwise cosines >= 0, like
        # real sentence encoders whose vectors cluster in a narrow cone
        raw = [math.sqrt(EMBED_DIM - 1.0)]
        raw.extend(
            2.0 * fold_unit(fnv1a64(f"{text}|e{j}".encode("utf-8"))) - 1.0
            for j in range(1, EMBED_DIM)
        )
        norm = math.sqrt(sum(x * x for x in raw))
        return [x / norm for x in raw]

    def ppl(self, text: str) -> float:
        return 1.0 + 99.0 * fold_unit(fnv1a64(f"{text}|ppl".encode("utf-8")))
