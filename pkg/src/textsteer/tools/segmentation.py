"""Text segmentation strategies.

Segments are exact substrings of the source, so for paragraph/sentence/
fixed-length splitting the concatenation of segments (plus the removed
separators) reconstructs the original text.
"""
from __future__ import annotations

import re

from ..errors import ExecutionError

# Trailing-period tokens that do not end a sentence.
ABBREVIATIONS = {
    "dr", "mr", "mrs", "ms", "prof", "sr", "jr", "st", "vs", "etc", "e.g", "i.e",
    "fig", "al", "no", "vol", "approx", "dept", "est", "inc", "ltd", "co", "u.s",
}

_SENTENCE_END = re.compile(r"[.!?]+[\"')\]]*\s+")


def segmentation_run(config: dict, texts: list[str]) -> list[list[str]]:
    strategy = config.get("strategy", "paragraph")
    params = config.get("parameters", {})
    if strategy == "paragraph":
        return [split_paragraphs(t) for t in texts]
    if strategy == "sentence":
        return [split_sentences(t) for t in texts]
    if strategy == "fixed_length":
        size = int(params.get("size", 512))
        overlap = int(params.get("overlap", 0))
        return [split_fixed(t, size, overlap) for t in texts]
    if strategy == "semantic":
        threshold = float(params.get("threshold", 0.75))
        return [split_semantic(t, threshold) for t in texts]
    raise ExecutionError(f"unknown segmentation strategy {strategy!r}")


def split_paragraphs(text: str) -> list[str]:
    return [p for p in text.split("\n\n")]


def split_sentences(text: str) -> list[str]:
    """Rule-based sentence splitting with an abbreviation guard."""
    boundaries = []
    for m in _SENTENCE_END.finditer(text):
        head = text[:m.start() + 1]  # up to and including the punctuation char
        last_word = re.findall(r"[\w.]+$", head[:-1])
        if last_word and last_word[0].lower().rstrip(".") in ABBREVIATIONS:
            continue
        boundaries.append(m.end())
    segments = []
    start = 0
    for b in boundaries:
        seg = text[start:b].strip()
        if seg:
            segments.append(seg)
        start = b
    tail = text[start:].strip()
    if tail:
        segments.append(tail)
    return segments


def split_fixed(text: str, size: int, overlap: int = 0) -> list[str]:
    if size <= 0:
        raise ExecutionError("fixed_length size must be positive")
    if overlap < 0 or overlap >= size:
        raise ExecutionError("overlap must be in [0, size)")
    step = size - overlap
    segments = []
    for start in range(0, len(text), step):
        segments.append(text[start:start + size])
        if start + size >= len(text):
            break
    return segments


def split_semantic(text: str, threshold: float = 0.75) -> list[str]:
    """Sentence split, with a boundary where adjacent-sentence similarity drops."""
    from .embedding import hashed_embeddings

    sentences = split_sentences(text)
    if len(sentences) <= 1:
        return sentences
    vectors = hashed_embeddings(sentences)
    segments = []
    current = [sentences[0]]
    for prev, cur, sent in zip(vectors, vectors[1:], sentences[1:]):
        similarity = sum(a * b for a, b in zip(prev, cur))
        if similarity < threshold:
            segments.append(" ".join(current))
            current = [sent]
        else:
            current.append(sent)
    segments.append(" ".join(current))
    return segments
