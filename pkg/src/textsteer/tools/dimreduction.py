"""Dimensionality reduction: exact PCA in-house, t-SNE via scikit-learn.

"umap" is accepted and fulfilled by the t-SNE neighbor embedding (the
substitution is logged); pca/tsne are the native algorithms.
"""
from __future__ import annotations

import logging

import numpy as np

from ..errors import ExecutionError

log = logging.getLogger(__name__)

DEFAULT_SEED = 42


def dimreduction_run(config: dict, vectors) -> list[list[float]]:
    X = np.asarray(vectors, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ExecutionError("vectors must be a non-empty matrix")
    algorithm = config.get("algorithm", "pca")
    params = dict(config.get("parameters", {}))
    n_components = int(params.get("n_components", 2))
    if n_components >= X.shape[1]:
        raise ExecutionError(
            f"n_components ({n_components}) must be < input dimension ({X.shape[1]})")
    seed = int(params.get("seed", DEFAULT_SEED))
    if algorithm == "pca":
        reduced, _ = pca(X, n_components)
    elif algorithm in ("tsne", "umap"):
        if algorithm == "umap":
            log.info("umap requested; fulfilled by the t-SNE neighbor embedding")
        from sklearn.manifold import TSNE

        perplexity = float(params.get("perplexity", min(30.0, max(1.0, (X.shape[0] - 1) / 3))))
        model = TSNE(n_components=n_components, random_state=seed,
                     perplexity=perplexity, init="pca")
        reduced = model.fit_transform(X)
    else:
        raise ExecutionError(f"unknown dim-reduction algorithm {algorithm!r}")
    return [row.tolist() for row in np.asarray(reduced, dtype=float)]


def pca(X: np.ndarray, n_components: int):
    """Exact PCA via eigendecomposition of the covariance matrix.

    Returns (projected points, components). Component signs are fixed so the
    largest-magnitude coordinate of each component is positive, keeping the
    output deterministic across runs.
    """
    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / max(1, X.shape[0] - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:n_components]
    components = eigvecs[:, order].T
    for i in range(components.shape[0]):
        j = np.argmax(np.abs(components[i]))
        if components[i, j] < 0:
            components[i] = -components[i]
    return centered @ components.T, components


def pca_reconstruction_error(X: np.ndarray, n_components: int) -> float:
    """Max reconstruction error when projecting onto the leading subspace."""
    mean = X.mean(axis=0)
    projected, components = pca(X, n_components)
    reconstructed = projected @ components + mean
    return float(np.abs(X - reconstructed).max())


def explained_variance(X: np.ndarray, n_components: int) -> np.ndarray:
    projected, _ = pca(X, n_components)
    return projected.var(axis=0, ddof=1)
