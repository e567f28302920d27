"""Embedding backends.

"hashed" is a deterministic local bag-of-words feature hasher: no network,
stable across runs, good enough to separate topically distinct texts. The
"openai" provider calls an embeddings endpoint; "sentence_transformers"
loads a local model if the package is available.
"""
from __future__ import annotations

import hashlib
import math
import re

from ..errors import ExecutionError

_TOKEN = re.compile(r"[a-z0-9']+")


def embedding_run(config: dict, texts: list[str]) -> list[list[float]]:
    """One equal-dimension vector per text."""
    if not texts:
        raise ExecutionError("no texts to embed")
    for i, t in enumerate(texts):
        if not t or not t.strip():
            raise ExecutionError(f"empty string at index {i}: refusing to embed")
    provider = config.get("provider", "hashed")
    params = config.get("parameters", {})
    if provider == "hashed":
        dim = int(params.get("dim", 256))
        return hashed_embeddings(texts, dim=dim)
    if provider == "openai":
        return _openai_embeddings(texts, params)
    if provider == "sentence_transformers":
        return _sentence_transformer_embeddings(texts, params)
    raise ExecutionError(f"unknown embedding provider {provider!r}")


def hashed_embeddings(texts: list[str], dim: int = 256) -> list[list[float]]:
    """L2-normalized hashed bag-of-words vectors (deterministic)."""
    out = []
    for text in texts:
        vec = [0.0] * dim
        for token in _TOKEN.findall(text.lower()):
            digest = hashlib.sha256(token.encode("utf-8")).digest()
            index = int.from_bytes(digest[:4], "big") % dim
            sign = 1.0 if digest[4] % 2 == 0 else -1.0
            vec[index] += sign
        norm = math.sqrt(sum(v * v for v in vec))
        if norm > 0:
            vec = [v / norm for v in vec]
        out.append(vec)
    return out


def _openai_embeddings(texts, params):
    import os

    import httpx

    key = os.environ.get(params.get("api_key_env", "OPENAI_API_KEY"), "")
    if not key:
        raise ExecutionError("openai embedding provider needs an api key")
    model = params.get("model", "text-embedding-3-small")
    url = params.get("endpoint", "https://api.openai.com/v1/embeddings")
    resp = httpx.post(url, json={"model": model, "input": texts},
                      headers={"Authorization": f"Bearer {key}"}, timeout=60.0)
    if resp.status_code != 200:
        raise ExecutionError(f"embedding provider error {resp.status_code}")
    data = resp.json()["data"]
    return [item["embedding"] for item in data]


def _sentence_transformer_embeddings(texts, params):
    try:
        from sentence_transformers import SentenceTransformer
    except ImportError as exc:
        raise ExecutionError("sentence-transformers is not installed") from exc
    model = SentenceTransformer(params.get("model", "all-MiniLM-L6-v2"))
    return [v.tolist() for v in model.encode(texts)]
