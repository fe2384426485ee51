"""Small utilities for working with partitions stored as label vectors."""

import numpy as np

__all__ = ["canonical_labels", "cluster_sizes", "n_clusters", "iter_set_partitions"]


def canonical_labels(labels):
    """Relabel clusters by order of first appearance (0, 1, 2, ...)."""
    labels = np.asarray(labels)
    out = np.empty(len(labels), dtype=np.int64)
    seen = {}
    for i, lab in enumerate(labels):
        key = int(lab)
        if key not in seen:
            seen[key] = len(seen)
        out[i] = seen[key]
    return out


def cluster_sizes(labels):
    """Sizes of the clusters of a canonical label vector."""
    labels = canonical_labels(labels)
    return np.bincount(labels)


def n_clusters(labels):
    return int(len(np.unique(np.asarray(labels))))


def iter_set_partitions(n):
    """Yield every partition of {0..n-1} as a canonical label vector.

    Uses restricted-growth strings, so Bell(n) vectors are produced in
    lexicographic order.  Intended for exact posterior enumeration on small
    problems.
    """
    labels = np.zeros(n, dtype=np.int64)
    maxes = np.zeros(n, dtype=np.int64)  # max label among positions < i
    while True:
        yield labels.copy()
        i = n - 1
        while i > 0 and labels[i] == maxes[i] + 1:
            i -= 1
        if i == 0:
            return
        labels[i] += 1
        for j in range(i + 1, n):
            labels[j] = 0
            maxes[j] = max(maxes[j - 1], labels[j - 1])
