"""Clustering backends: kmeans/dbscan in-house, the rest via scikit-learn.

All algorithms are deterministic given (parameters, seed). Labels are
contiguous from 0; dbscan/hdbscan may additionally emit -1 for noise.
"""
from __future__ import annotations

import numpy as np

from ..errors import ExecutionError

DEFAULT_SEED = 42


def clustering_run(config: dict, vectors) -> list[int]:
    """One integer label per vector for the configured algorithm."""
    X = _as_matrix(vectors)
    algorithm = config.get("algorithm", "kmeans")
    params = dict(config.get("parameters", {}))
    seed = int(params.pop("seed", DEFAULT_SEED))
    if algorithm == "kmeans":
        k = int(params.get("n_clusters", 8))
        labels = kmeans(X, k, seed=seed)
    elif algorithm == "dbscan":
        labels = dbscan(X, eps=float(params.get("eps", 0.5)),
                        min_samples=int(params.get("min_samples", 5)))
    elif algorithm == "agglomerative":
        from sklearn.cluster import AgglomerativeClustering

        model = AgglomerativeClustering(n_clusters=int(params.get("n_clusters", 8)),
                                        linkage=params.get("linkage", "ward"))
        labels = model.fit_predict(X)
    elif algorithm == "gaussian_mixture":
        from sklearn.mixture import GaussianMixture

        model = GaussianMixture(n_components=int(params.get("n_components", 8)),
                                random_state=seed)
        labels = model.fit_predict(X)
    elif algorithm == "hdbscan":
        from sklearn.cluster import HDBSCAN

        model = HDBSCAN(min_cluster_size=int(params.get("min_cluster_size", 5)))
        labels = model.fit_predict(X)
    elif algorithm == "bertopic":
        # composite: dimensionality reduction then density clustering
        from sklearn.cluster import HDBSCAN

        from .dimreduction import dimreduction_run

        n_components = min(int(params.get("n_components", 5)), X.shape[1] - 1) or 1
        reduced = dimreduction_run({"algorithm": "pca",
                                    "parameters": {"n_components": n_components}}, X)
        model = HDBSCAN(min_cluster_size=int(params.get("min_cluster_size", 5)))
        labels = model.fit_predict(np.asarray(reduced))
    else:
        raise ExecutionError(f"unknown clustering algorithm {algorithm!r}")
    return _relabel(np.asarray(labels))


def kmeans(X: np.ndarray, k: int, seed: int = DEFAULT_SEED, restarts: int = 10,
           max_iter: int = 300, tol: float = 1e-6) -> np.ndarray:
    """K-means with k-means++ seeding and multiple restarts."""
    n = X.shape[0]
    if k < 1:
        raise ExecutionError("n_clusters must be >= 1")
    if n < k:
        raise ExecutionError(f"fewer points ({n}) than clusters ({k})")
    rng = np.random.default_rng(seed)
    best_labels, best_inertia = None, np.inf
    for _ in range(restarts):
        centers = _kmeanspp_init(X, k, rng)
        for _ in range(max_iter):
            d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            labels = d2.argmin(axis=1)
            new_centers = centers.copy()
            for j in range(k):
                mask = labels == j
                if mask.any():
                    new_centers[j] = X[mask].mean(axis=0)
            shift = np.abs(new_centers - centers).max()
            centers = new_centers
            if shift <= tol:
                break
        inertia = ((X - centers[labels]) ** 2).sum()
        if inertia < best_inertia - 1e-12:
            best_inertia, best_labels = inertia, labels
    return best_labels


def _kmeanspp_init(X, k, rng) -> np.ndarray:
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    for _ in range(1, k):
        d2 = np.min(((X[:, None, :] - np.asarray(centers)[None, :, :]) ** 2).sum(axis=2), axis=1)
        total = d2.sum()
        if total <= 0:
            centers.append(X[rng.integers(n)])
            continue
        probs = d2 / total
        centers.append(X[rng.choice(n, p=probs)])
    return np.asarray(centers, dtype=float)


def dbscan(X: np.ndarray, eps: float, min_samples: int) -> np.ndarray:
    """Classic density clustering; O(N^2) neighbor search is fine at desk scale."""
    n = X.shape[0]
    d2 = ((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)
    neighbors = [np.flatnonzero(d2[i] <= eps * eps) for i in range(n)]
    labels = np.full(n, -1, dtype=int)
    core = np.array([len(nb) >= min_samples for nb in neighbors])
    cluster = 0
    for i in range(n):
        if labels[i] != -1 or not core[i]:
            continue
        labels[i] = cluster
        frontier = list(neighbors[i])
        while frontier:
            j = frontier.pop()
            if labels[j] == -1:
                labels[j] = cluster
                if core[j]:
                    frontier.extend(neighbors[j])
        cluster += 1
    return labels


def _relabel(labels: np.ndarray) -> list[int]:
    """Remap labels to be contiguous from 0 in first-appearance order (noise stays -1)."""
    mapping = {}
    out = []
    for lab in labels.tolist():
        if lab == -1:
            out.append(-1)
            continue
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out.append(mapping[lab])
    return out


def _as_matrix(vectors) -> np.ndarray:
    try:
        X = np.asarray(vectors, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ExecutionError("vectors must all have the same dimension") from exc
    if X.ndim != 2:
        raise ExecutionError("vectors must all have the same dimension")
    if X.shape[0] == 0:
        raise ExecutionError("no vectors to cluster")
    return X
