"""Collapsed marginal likelihoods for the two mixture kernels.

Both kernels integrate their Dirichlet-distributed composition parameters
out analytically, leaving closed-form log marginals in terms of count sums.

Dirichlet-multinomial (DM) kernel over OTU columns: a binary selection
vector gamma splits the OTUs into "discriminatory" columns, modeled per
cluster, and background columns, pooled across all samples.  Per cluster,
the split of each sample's total between the two groups carries a
Beta(beta1, beta2) factor.

Dirichlet-tree-multinomial (DTM) kernel over internal tree nodes: each
node's counts-to-children multinomial gets a symmetric Dirichlet(alpha)
prior; selected nodes are modeled per cluster, unselected nodes pooled.
Factors multiply independently across nodes.

Multinomial coefficients are constant in both the partition and the
selection vector and are dropped everywhere, so values are comparable only
across (partition, selection) states for fixed data.
"""

import numpy as np
from scipy.special import gammaln

from .errors import ConfigError

__all__ = [
    "DmHyper",
    "DtmHyper",
    "check_selection",
    "selection_to_bits",
    "selection_from_bits",
    "log_selection_prior",
    "dm_pooled_log_factor",
    "dm_beta_log_factor",
    "dm_selected_log_factor",
    "dm_cluster_log_factor",
    "log_dm_marginal",
    "log_predictive_dm",
    "dtm_node_log_factor",
    "dtm_pooled_log_factor",
    "dtm_cluster_log_factor",
    "log_dtm_marginal",
    "log_predictive_dtm",
    "ClusterStats",
]


class DmHyper:
    """Hyperparameters of the DM kernel.

    alpha: symmetric Dirichlet concentration on OTU compositions.
    beta1, beta2: Beta prior on the background share of each sample's total.
    w: prior selection probability of each OTU.
    """

    def __init__(self, alpha=1.0, beta1=1.0, beta2=1.0, w=0.5):
        if min(alpha, beta1, beta2) <= 0:
            raise ConfigError("alpha, beta1, beta2 must be positive")
        if not 0 < w < 1:
            raise ConfigError("selection prior w must lie strictly in (0, 1)")
        self.alpha = float(alpha)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.w = float(w)

    def __repr__(self):
        return "DmHyper(alpha=%g, beta1=%g, beta2=%g, w=%g)" % (
            self.alpha, self.beta1, self.beta2, self.w)


class DtmHyper:
    """Hyperparameters of the DTM kernel: per-node Dirichlet concentration
    alpha and prior node-selection probability w."""

    def __init__(self, alpha=1.0, w=0.5):
        if alpha <= 0:
            raise ConfigError("alpha must be positive")
        if not 0 < w < 1:
            raise ConfigError("selection prior w must lie strictly in (0, 1)")
        self.alpha = float(alpha)
        self.w = float(w)

    def __repr__(self):
        return "DtmHyper(alpha=%g, w=%g)" % (self.alpha, self.w)


def check_selection(gamma):
    """Validate a binary selection vector; at least one unit must be selected."""
    gamma = np.asarray(gamma)
    if not np.all((gamma == 0) | (gamma == 1)):
        raise ConfigError("selection vector must be binary")
    if gamma.sum() < 1:
        raise ConfigError("selection vector must select at least one unit")
    return gamma.astype(np.uint8)


def selection_to_bits(gamma):
    return "".join("1" if g else "0" for g in np.asarray(gamma))


def selection_from_bits(bits):
    if not set(bits) <= {"0", "1"}:
        raise ConfigError("selection bitstring may contain only 0 and 1")
    return check_selection(np.array([int(b) for b in bits], dtype=np.uint8))


def log_selection_prior(gamma, w):
    """Independent-Bernoulli(w) log prior of a selection vector (the
    normalization over the excluded all-zero state is constant and dropped)."""
    gamma = np.asarray(gamma)
    d_sel = int(gamma.sum())
    return d_sel * np.log(w) + (gamma.size - d_sel) * np.log1p(-w)


# ---------------------------------------------------------------------------
# Dirichlet-multinomial kernel


def dm_pooled_log_factor(pooled_sums, gamma, h):
    """Background factor: one DM term over unselected OTUs, pooling the
    column totals of *all* samples.  Zero when every OTU is selected."""
    gamma = np.asarray(gamma)
    noise = gamma == 0
    d_noise = int(noise.sum())
    if d_noise == 0:
        return 0.0
    s = np.asarray(pooled_sums, dtype=np.float64)[noise]
    return (
        gammaln(d_noise * h.alpha)
        - d_noise * gammaln(h.alpha)
        + gammaln(s + h.alpha).sum()
        - gammaln(s.sum() + d_noise * h.alpha)
    )


def dm_beta_log_factor(y_sel, y_tot, h):
    """Per-cluster Beta factor on the background/selected split of totals."""
    y_noise = y_tot - y_sel
    return (
        gammaln(h.beta1 + h.beta2)
        - gammaln(h.beta1)
        - gammaln(h.beta2)
        + gammaln(h.beta1 + y_noise)
        + gammaln(h.beta2 + y_sel)
        - gammaln(h.beta1 + h.beta2 + y_tot)
    )


def dm_selected_log_factor(sel_sums, h):
    """Per-cluster DM factor over the selected OTU columns only."""
    t = np.asarray(sel_sums, dtype=np.float64)
    d_sel = t.size
    return (
        gammaln(d_sel * h.alpha)
        - d_sel * gammaln(h.alpha)
        + gammaln(t + h.alpha).sum()
        - gammaln(t.sum() + d_sel * h.alpha)
    )


def dm_cluster_log_factor(sums_row, gamma, h):
    """Full per-cluster factor (Beta part plus selected-OTU part) from the
    cluster's column-sum row.  Exactly zero for an empty cluster."""
    sums_row = np.asarray(sums_row, dtype=np.float64)
    gamma = np.asarray(gamma)
    sel = sums_row[gamma == 1]
    y_sel = sel.sum()
    y_tot = sums_row.sum()
    return dm_beta_log_factor(y_sel, y_tot, h) + dm_selected_log_factor(sel, h)


def log_dm_marginal(counts, gamma, labels, h):
    """Collapsed log marginal of a count table under a partition and a
    selection vector (multinomial coefficients dropped)."""
    counts = np.asarray(counts, dtype=np.float64)
    gamma = check_selection(gamma)
    labels = np.asarray(labels)
    total = dm_pooled_log_factor(counts.sum(axis=0), gamma, h)
    for lab in np.unique(labels):
        total += dm_cluster_log_factor(counts[labels == lab].sum(axis=0), gamma, h)
    return float(total)


def log_predictive_dm(row, cluster_sums, gamma, h):
    """Log predictive of adding one sample's count row to a cluster with the
    given column sums (an empty cluster is the zero row)."""
    row = np.asarray(row, dtype=np.float64)
    cluster_sums = np.asarray(cluster_sums, dtype=np.float64)
    return dm_cluster_log_factor(cluster_sums + row, gamma, h) - dm_cluster_log_factor(
        cluster_sums, gamma, h
    )


# ---------------------------------------------------------------------------
# Dirichlet-tree-multinomial kernel


def dtm_node_log_factor(branch_sums, alpha):
    """DM factor of a single internal node given its per-branch count sums.
    Exactly zero when no count reaches the node."""
    b = np.asarray(branch_sums, dtype=np.float64)
    k = b.size
    return (
        gammaln(k * alpha)
        - k * gammaln(alpha)
        + gammaln(b + alpha).sum()
        - gammaln(b.sum() + k * alpha)
    )


def _node_slices(node_offsets):
    return [
        slice(int(node_offsets[j]), int(node_offsets[j + 1]))
        for j in range(len(node_offsets) - 1)
    ]


def dtm_pooled_log_factor(pooled_branches, node_offsets, gamma, h):
    """Background factor: node factors of unselected nodes on all-sample sums."""
    gamma = np.asarray(gamma)
    total = 0.0
    for j, sl in enumerate(_node_slices(node_offsets)):
        if gamma[j] == 0:
            total += dtm_node_log_factor(pooled_branches[sl], h.alpha)
    return total


def dtm_cluster_log_factor(branch_row, node_offsets, gamma, h):
    """Per-cluster factor: node factors of selected nodes on the cluster's
    branch-sum row.  Exactly zero for an empty cluster."""
    gamma = np.asarray(gamma)
    total = 0.0
    for j, sl in enumerate(_node_slices(node_offsets)):
        if gamma[j] == 1:
            total += dtm_node_log_factor(branch_row[sl], h.alpha)
    return total


def log_dtm_marginal(branch_counts, node_offsets, gamma, labels, h):
    """Collapsed log marginal of tree-propagated counts under a partition and
    a node-selection vector (multinomial coefficients dropped)."""
    branch_counts = np.asarray(branch_counts, dtype=np.float64)
    gamma = check_selection(gamma)
    labels = np.asarray(labels)
    total = dtm_pooled_log_factor(branch_counts.sum(axis=0), node_offsets, gamma, h)
    for lab in np.unique(labels):
        total += dtm_cluster_log_factor(
            branch_counts[labels == lab].sum(axis=0), node_offsets, gamma, h
        )
    return float(total)


def log_predictive_dtm(branch_row, cluster_branches, node_offsets, gamma, h):
    """Log predictive of adding one sample's branch-count row to a cluster."""
    branch_row = np.asarray(branch_row, dtype=np.float64)
    cluster_branches = np.asarray(cluster_branches, dtype=np.float64)
    return dtm_cluster_log_factor(
        cluster_branches + branch_row, node_offsets, gamma, h
    ) - dtm_cluster_log_factor(cluster_branches, node_offsets, gamma, h)


# ---------------------------------------------------------------------------
# Sufficient statistics


class ClusterStats:
    """Per-cluster column sums and sizes of a data matrix, kept in sync with
    a label vector by targeted updates.

    The matrix rows are whatever the active kernel consumes per sample (OTU
    counts for DM, branch counts for DTM); sums over integer-valued float64
    entries stay exact under incremental updates.
    """

    def __init__(self, data, labels):
        self.data = np.asarray(data, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        k = int(labels.max()) + 1 if labels.size else 0
        if sorted(np.unique(labels)) != list(range(k)):
            raise ConfigError("labels must use consecutive cluster ids starting at 0")
        self.sums = np.zeros((k, self.data.shape[1]))
        np.add.at(self.sums, labels, self.data)
        self.sizes = np.bincount(labels, minlength=k).astype(np.int64)

    @property
    def n_clusters(self):
        return len(self.sizes)

    def move_sample(self, i, src, dst):
        self.sums[src] -= self.data[i]
        self.sums[dst] += self.data[i]
        self.sizes[src] -= 1
        self.sizes[dst] += 1

    def append_cluster(self, member_idx):
        member_idx = np.asarray(member_idx, dtype=np.int64)
        self.sums = np.vstack([self.sums, self.data[member_idx].sum(axis=0)])
        self.sizes = np.append(self.sizes, len(member_idx))
        return len(self.sizes) - 1

    def set_cluster(self, k, member_idx):
        member_idx = np.asarray(member_idx, dtype=np.int64)
        self.sums[k] = self.data[member_idx].sum(axis=0)
        self.sizes[k] = len(member_idx)

    def drop_cluster(self, k):
        self.sums = np.delete(self.sums, k, axis=0)
        self.sizes = np.delete(self.sizes, k)

    def check(self, labels):
        """Assert sums/sizes match a from-scratch recomputation."""
        fresh = ClusterStats(self.data, np.asarray(labels))
        if fresh.n_clusters != self.n_clusters:
            raise AssertionError("cluster count out of sync")
        if not np.array_equal(fresh.sizes, self.sizes):
            raise AssertionError("cluster sizes out of sync")
        if not np.allclose(fresh.sums, self.sums, rtol=0.0, atol=1e-8):
            raise AssertionError("cluster sums out of sync")
