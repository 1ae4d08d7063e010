"""Discriminative group selection from pairwise dissimilarity features.

For a pair of classes, every unordered pair of clips becomes one sample: a
vector of per-group chi-square distances, labeled +1 when the clips share a
class and -1 otherwise. A label-gated cosine similarity graph over those
samples yields a Laplacian score per group; the P groups with the smallest
scores are the most discriminative and are kept. Keeping all groups reduces
the selected pipeline to the plain descriptor pipeline exactly.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DataError


def chi_square(h1, h2) -> float:
    """Sum of (a-b)^2 / (a+b) over bins; empty bins (a+b == 0) contribute 0."""
    a = np.asarray(h1, dtype=np.float64)
    b = np.asarray(h2, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"histogram length mismatch: {a.shape} vs {b.shape}")
    num = (a - b) ** 2
    den = a + b
    mask = den > 0
    return float((num[mask] / den[mask]).sum())


def pairwise_group_distances(descriptors, others=None) -> np.ndarray:
    """Per-group chi-square distances between clips.

    Returns (len(descriptors), len(others), n_groups); with others=None the
    symmetric self-distances of one descriptor list.
    """
    symmetric = others is None
    if symmetric:
        others = descriptors
    n_a, n_b = len(descriptors), len(others)
    n_groups = len(descriptors[0].groups)
    sizes = [g.histogram.size for g in descriptors[0].groups]
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.intp)
    flat_a = np.stack([d.concatenated() for d in descriptors])
    flat_b = flat_a if symmetric else np.stack([d.concatenated() for d in others])
    out = np.zeros((n_a, n_b, n_groups))
    for i in range(n_a):
        rows = flat_b[i + 1 :] if symmetric else flat_b
        if rows.shape[0] == 0:
            continue
        num = (flat_a[i] - rows) ** 2
        den = flat_a[i] + rows
        frac = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
        dist = np.add.reduceat(frac, offsets, axis=1)
        if symmetric:
            out[i, i + 1 :] = dist
            out[i + 1 :, i] = dist
        else:
            out[i] = dist
    return out


@dataclass
class PairFeature:
    """Dissimilarity sample: per-group distances of one clip pair."""

    values: np.ndarray
    label: int  # +1 same class, -1 different class
    pair: tuple


def build_pairs(descriptors, labels, distances=None) -> list:
    """Dissimilarity features over all unordered distinct clip pairs of a
    two-class sample set."""
    labels = list(labels)
    classes = sorted(set(labels))
    if len(classes) != 2:
        raise DataError(f"expected exactly 2 classes, got {classes}")
    for c in classes:
        if labels.count(c) < 2:
            raise DataError(f"class {c} has fewer than 2 samples")
    if distances is None:
        distances = pairwise_group_distances(descriptors)
    features = []
    for i, j in itertools.combinations(range(len(descriptors)), 2):
        label = 1 if labels[i] == labels[j] else -1
        features.append(
            PairFeature(
                np.asarray(distances[i, j], dtype=np.float64),
                label,
                (descriptors[i].clip_id, descriptors[j].clip_id),
            )
        )
    return features


def weight_matrix(features) -> np.ndarray:
    """Label-gated cosine similarity graph over dissimilarity samples.

    Same-label entries hold the cosine of the two vectors (1 by convention
    when either norm vanishes); different-label entries are exactly 0.
    """
    G = np.stack([f.values for f in features])
    labels = np.array([f.label for f in features])
    norms = np.linalg.norm(G, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = (G @ G.T) / np.outer(norms, norms)
    cos[~np.isfinite(cos)] = 1.0  # zero-norm convention: limit of identical vectors
    np.minimum(cos, 1.0, out=cos)
    W = np.where(labels[:, None] == labels[None, :], cos, 0.0)
    np.fill_diagonal(W, 1.0)
    # mirror the upper triangle so float asymmetries in the matmul cannot leak
    upper = np.triu(W)
    return upper + np.triu(W, 1).T


def laplacian_scores(features, weights=None) -> np.ndarray:
    """Per-group Laplacian scores; smaller means more discriminative.

    Score of dimension r is gt' L gt / gt' D gt with W the label-gated cosine
    graph, D = diag(W 1), L = D - W, and gt the dimension with its D-weighted
    mean removed. Constant dimensions get +inf (no discriminative power,
    never selected). `weights` overrides the graph, e.g. for scoring modified
    feature values on a fixed graph.
    """
    if len(features) < 2:
        raise DataError("need at least 2 dissimilarity samples")
    W = weight_matrix(features) if weights is None else np.asarray(weights)
    d = W.sum(axis=1)
    d_total = d.sum()
    if d_total == 0.0:
        raise DataError("degenerate similarity graph: all weights are zero")
    G = np.stack([f.values for f in features])  # (N, n_dims)
    mu = (d @ G) / d_total
    Gt = G - mu
    var = np.einsum("ur,u,ur->r", Gt, d, Gt)
    num = var - np.einsum("ur,ur->r", Gt, W @ Gt)
    with np.errstate(invalid="ignore", divide="ignore"):
        scores = num / var
    degenerate = (np.ptp(G, axis=0) == 0.0) | (var <= 0.0)
    scores[degenerate] = np.inf
    return scores


def select_groups(scores, p: int) -> np.ndarray:
    """Indices of the P smallest scores, ascending by score, ties to the
    lower index."""
    scores = np.asarray(scores, dtype=np.float64)
    if not 1 <= p <= scores.size:
        raise ValueError(f"P must be in [1, {scores.size}], got {p}")
    order = np.argsort(scores, kind="stable")
    return order[:p]


@dataclass
class PairSelection:
    """Selection outcome for one class pair."""

    class_a: int
    class_b: int
    scores: np.ndarray
    selected: np.ndarray  # ascending by score
    n_pairs: int


@dataclass
class SelectionModel:
    """Per-class-pair selected group indices for a run."""

    pairs: dict  # (a, b) -> PairSelection
    p: int


def default_p_grid(n_groups: int) -> list:
    """Candidate group counts for the automatic P sweep."""
    fractions = (0.125, 0.25, 0.5, 0.75, 0.875, 1.0)
    grid = sorted({max(1, round(n_groups * f)) for f in fractions})
    return [p for p in grid if p <= n_groups]


def fit_selection(descriptors, labels, p: int, distances=None) -> SelectionModel:
    """Laplacian-score selection for every class pair of a labeled sample set."""
    labels = list(labels)
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise DataError("selection needs at least 2 classes")
    if distances is None:
        distances = pairwise_group_distances(descriptors)
    pairs = {}
    for a, b in itertools.combinations(classes, 2):
        idx = [i for i, c in enumerate(labels) if c in (a, b)]
        sub_desc = [descriptors[i] for i in idx]
        sub_labels = [labels[i] for i in idx]
        sub_dist = distances[np.ix_(idx, idx)]
        features = build_pairs(sub_desc, sub_labels, sub_dist)
        scores = laplacian_scores(features)
        pairs[(a, b)] = PairSelection(
            a, b, scores, select_groups(scores, p), len(features)
        )
    return SelectionModel(pairs, p)
