"""Numeric and text backends: clustering, PCA, embeddings, segmentation."""
import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score

from textsteer.errors import ExecutionError
from textsteer.tools import (
    clustering_run, dimreduction_run, embedding_run, hashed_embeddings,
    segmentation_run,
)
from textsteer.tools.clustering import dbscan, kmeans
from textsteer.tools.dimreduction import pca, pca_reconstruction_error


def _blobs(rng, n_per=40, centers=((0, 0), (8, 8), (-8, 8)), scale=0.5):
    points, truth = [], []
    for label, c in enumerate(centers):
        points.append(rng.normal(loc=c, scale=scale, size=(n_per, len(c))))
        truth.extend([label] * n_per)
    return np.vstack(points), np.array(truth)


def test_kmeans_recovers_blobs():
    X, truth = _blobs(np.random.default_rng(0))
    labels = kmeans(X, 3, seed=42)
    assert adjusted_rand_score(truth, labels) >= 0.9


def test_kmeans_deterministic_and_validated():
    X, _ = _blobs(np.random.default_rng(1))
    a = kmeans(X, 3, seed=7)
    b = kmeans(X, 3, seed=7)
    assert np.array_equal(a, b)
    with pytest.raises(ExecutionError):
        kmeans(X, 0)
    with pytest.raises(ExecutionError):
        kmeans(X[:2], 3)


def test_clustering_run_contiguous_labels():
    X, _ = _blobs(np.random.default_rng(2))
    labels = clustering_run({"algorithm": "kmeans",
                             "parameters": {"n_clusters": 3, "seed": 5}}, X.tolist())
    assert sorted(set(labels)) == [0, 1, 2]
    assert labels[0] == 0  # first-appearance relabeling starts at 0


def test_dbscan_finds_noise():
    X = np.vstack([np.random.default_rng(3).normal(0, 0.1, (20, 2)),
                   np.random.default_rng(4).normal(10, 0.1, (20, 2)),
                   [[100.0, 100.0]]])
    labels = dbscan(X, eps=1.0, min_samples=4)
    assert labels[-1] == -1
    assert len({lab for lab in labels if lab != -1}) == 2


def test_clustering_run_other_algorithms():
    X, truth = _blobs(np.random.default_rng(5), n_per=30)
    for algorithm in ("agglomerative", "gaussian_mixture"):
        labels = clustering_run({"algorithm": algorithm,
                                 "parameters": {"n_clusters": 3, "n_components": 3}},
                                X.tolist())
        assert adjusted_rand_score(truth, labels) >= 0.9
    with pytest.raises(ExecutionError):
        clustering_run({"algorithm": "mystery"}, X.tolist())


def test_clustering_input_validation():
    with pytest.raises(ExecutionError):
        clustering_run({"algorithm": "kmeans"}, [])
    with pytest.raises(ExecutionError):
        clustering_run({"algorithm": "kmeans"}, [[1.0, 2.0], [1.0]])


def test_pca_planted_subspace():
    rng = np.random.default_rng(6)
    basis = rng.normal(size=(2, 10))
    coeffs = rng.normal(size=(200, 2))
    X = coeffs @ basis  # exactly rank 2 in 10-D
    assert pca_reconstruction_error(X, 2) <= 1e-8
    projected, components = pca(X, 2)
    assert projected.shape == (200, 2)
    assert components.shape == (2, 10)


def test_pca_sign_determinism():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(50, 6))
    _, c1 = pca(X, 3)
    _, c2 = pca(X.copy(), 3)
    assert np.allclose(c1, c2)
    for row in c1:
        assert row[np.argmax(np.abs(row))] > 0


def test_dimreduction_run_validation():
    X = np.random.default_rng(8).normal(size=(20, 4)).tolist()
    reduced = dimreduction_run({"algorithm": "pca", "parameters": {"n_components": 2}}, X)
    assert len(reduced) == 20 and len(reduced[0]) == 2
    with pytest.raises(ExecutionError):
        dimreduction_run({"algorithm": "pca", "parameters": {"n_components": 4}}, X)
    with pytest.raises(ExecutionError):
        dimreduction_run({"algorithm": "mystery"}, X)


def test_tsne_and_umap_alias():
    X = np.random.default_rng(9).normal(size=(30, 5)).tolist()
    for algorithm in ("tsne", "umap"):
        reduced = dimreduction_run({"algorithm": algorithm,
                                    "parameters": {"n_components": 2, "seed": 1}}, X)
        assert len(reduced) == 30 and len(reduced[0]) == 2


def test_hashed_embeddings_deterministic_and_normalized():
    texts = ["the camera lens is sharp", "battery drains overnight",
             "the camera focus is sharp"]
    a = hashed_embeddings(texts, dim=64)
    b = hashed_embeddings(texts, dim=64)
    assert a == b
    for vec in a:
        assert abs(sum(v * v for v in vec) - 1.0) < 1e-9
    # topical similarity: the two camera texts are closer than camera/battery
    def dot(u, v):
        return sum(x * y for x, y in zip(u, v))
    assert dot(a[0], a[2]) > dot(a[0], a[1])


def test_embedding_run_validation():
    with pytest.raises(ExecutionError):
        embedding_run({"provider": "hashed"}, [])
    with pytest.raises(ExecutionError):
        embedding_run({"provider": "hashed"}, ["ok", "   "])
    with pytest.raises(ExecutionError):
        embedding_run({"provider": "mystery"}, ["ok"])


def test_paragraph_segmentation_reconstructs():
    text = "First paragraph.\n\nSecond one.\n\nThird."
    segments = segmentation_run({"strategy": "paragraph"}, [text])[0]
    assert "\n\n".join(segments) == text


def test_sentence_segmentation_with_abbreviations():
    text = "Dr. Smith arrived. The patient, i.e. the subject, slept. All was well."
    segments = segmentation_run({"strategy": "sentence"}, [text])[0]
    assert segments == ["Dr. Smith arrived.",
                        "The patient, i.e. the subject, slept.",
                        "All was well."]


def test_fixed_length_segmentation():
    text = "abcdefghij"
    assert segmentation_run({"strategy": "fixed_length",
                             "parameters": {"size": 4}}, [text])[0] == \
        ["abcd", "efgh", "ij"]
    overlapped = segmentation_run({"strategy": "fixed_length",
                                   "parameters": {"size": 4, "overlap": 2}}, [text])[0]
    assert overlapped[0] == "abcd" and overlapped[1] == "cdef"
    with pytest.raises(ExecutionError):
        segmentation_run({"strategy": "fixed_length", "parameters": {"size": 0}}, [text])
    with pytest.raises(ExecutionError):
        segmentation_run({"strategy": "fixed_length",
                          "parameters": {"size": 4, "overlap": 4}}, [text])


def test_semantic_segmentation_returns_text():
    text = ("The camera is excellent. The lens is sharp. "
            "Shipping took forever. The box arrived late.")
    segments = segmentation_run({"strategy": "semantic",
                                 "parameters": {"threshold": 0.9}}, [text])[0]
    assert segments and all(isinstance(s, str) for s in segments)


def test_unknown_segmentation_strategy():
    with pytest.raises(ExecutionError):
        segmentation_run({"strategy": "mystery"}, ["x"])
