"""Posterior summaries of sampled partitions and selection vectors.

Partition draws are label-switching invariant only through co-clustering
indicators, so the point estimate is the sampled partition maximizing a
Rand-type agreement score against the posterior co-clustering matrix.
"""

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import ConfigError

__all__ = [
    "coclustering",
    "adjusted_rand",
    "summarize_partition",
    "PartitionEstimate",
    "selection_frequencies",
    "roc_auc",
    "zeta_to_csv",
    "partition_to_csv",
    "frequencies_to_csv",
]


def coclustering(partitions):
    """Posterior co-clustering matrix: zeta[i, j] is the fraction of draws
    placing samples i and j in the same cluster."""
    partitions = np.asarray(partitions)
    if partitions.ndim != 2 or partitions.shape[0] == 0:
        raise ConfigError("need a (draws, samples) array of partition labels")
    m, n = partitions.shape
    zeta = np.zeros((n, n))
    for row in partitions:
        zeta += row[:, None] == row[None, :]
    zeta /= m
    return zeta


def adjusted_rand(a, b):
    """Hubert-Arabie adjusted Rand index between two label vectors."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ConfigError("label vectors must have equal length")
    n = len(a)
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    comb = lambda x: x * (x - 1) / 2.0
    sum_cells = comb(table).sum()
    sum_rows = comb(table.sum(axis=1)).sum()
    sum_cols = comb(table.sum(axis=0)).sum()
    total = comb(n)
    expected = sum_rows * sum_cols / total
    maximum = 0.5 * (sum_rows + sum_cols)
    if maximum - expected == 0:
        return 1.0
    return float((sum_cells - expected) / (maximum - expected))


def _pair_indicator_sums(labels, zeta):
    n = len(labels)
    iu = np.triu_indices(n, k=1)
    same = (np.asarray(labels)[:, None] == np.asarray(labels)[None, :])[iu]
    z = zeta[iu]
    return same.astype(np.float64), z


@dataclass
class PartitionEstimate:
    labels: np.ndarray
    score: float
    candidate_index: int  # index of the winning draw


def summarize_partition(partitions, zeta=None):
    """Pick the sampled partition maximizing the adjusted-Rand-type score
    against the co-clustering matrix; earliest draw wins ties.

    The score of candidate c* against zeta is

        [sum_{i<j} I_ij z_ij - sum I sum z / C(n,2)] /
        [(sum I + sum z)/2 - sum I sum z / C(n,2)],

    defined as 1 when its denominator is zero (all pairings certain and the
    candidate matching them exactly).
    """
    partitions = np.asarray(partitions)
    if zeta is None:
        zeta = coclustering(partitions)
    n = partitions.shape[1]
    iu = np.triu_indices(n, k=1)
    z = zeta[iu]
    sum_z = z.sum()
    n_pairs = len(z)
    best = None
    for idx, cand in enumerate(partitions):
        same = (cand[:, None] == cand[None, :])[iu].astype(np.float64)
        sum_i = same.sum()
        cross = float(same @ z)
        expected = sum_i * sum_z / n_pairs
        denom = 0.5 * (sum_i + sum_z) - expected
        score = 1.0 if denom == 0 else (cross - expected) / denom
        if best is None or score > best[0]:
            best = (score, idx)
    score, idx = best
    return PartitionEstimate(partitions[idx].copy(), float(score), int(idx))


def selection_frequencies(selections):
    """Marginal posterior selection frequency of each unit."""
    selections = np.asarray(selections)
    if selections.ndim != 2 or selections.shape[0] == 0:
        raise ConfigError("need a (draws, units) selection array")
    return selections.mean(axis=0)


def roc_auc(scores, truth):
    """Area under the ROC curve of ``scores`` against binary ``truth``
    (rank-based; ties contribute 1/2)."""
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth).astype(bool)
    n_pos = int(truth.sum())
    n_neg = len(truth) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ConfigError("AUC needs at least one positive and one negative unit")
    ranks = rankdata(scores)
    return float((ranks[truth].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


# ---------------------------------------------------------------------------
# CSV emission


def zeta_to_csv(zeta, sample_names):
    lines = ["," + ",".join(sample_names)]
    for name, row in zip(sample_names, zeta):
        lines.append(name + "," + ",".join("%.10g" % v for v in row))
    return "\n".join(lines) + "\n"


def partition_to_csv(labels, sample_names):
    lines = ["sample,cluster"]
    for name, lab in zip(sample_names, labels):
        lines.append("%s,%d" % (name, lab))
    return "\n".join(lines) + "\n"


def frequencies_to_csv(freqs, unit_names):
    lines = ["unit,selection_frequency"]
    for name, f in zip(unit_names, freqs):
        lines.append("%s,%.10g" % (name, f))
    return "\n".join(lines) + "\n"
