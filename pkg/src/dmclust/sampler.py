"""MCMC over (selection vector, partition) states.

Each iteration applies a batch of Metropolis moves to the selection vector
gamma, then one split-merge move to the partition.  When the two anchor
samples' clusters contain no other member, the split-merge proposal is the
simple one (split off a singleton / merge two singletons, proposal ratio 1);
otherwise a launch state is built by random initial allocation plus
restricted Gibbs scans, and the proposal probability of the final allocation
enters the acceptance ratio.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import engine
from .errors import ConfigError
from .kernels import (
    ClusterStats,
    DmHyper,
    DtmHyper,
    check_selection,
    dm_cluster_log_factor,
    dtm_cluster_log_factor,
    log_dm_marginal,
    log_dtm_marginal,
    log_selection_prior,
)
from .partition_prior import (
    PriorSpec,
    compute_vn_table,
    log_pair_prior_ratio,
    log_partition_prior,
)
from .partitions import canonical_labels

__all__ = [
    "DmModel",
    "DtmModel",
    "McmcConfig",
    "McmcState",
    "MoveInfo",
    "ChainDraws",
    "update_gamma",
    "split_merge_move",
    "run_mcmc",
    "resolve_model_name",
    "model_label",
]


class DmModel:
    """Dirichlet-multinomial kernel bound to an OTU count matrix."""

    kind = "dm"

    def __init__(self, counts, hyper=None):
        counts = np.asarray(counts)
        if counts.ndim != 2 or counts.shape[0] < 2:
            raise ConfigError("need a 2-d count array with at least two samples")
        self.hyper = hyper if hyper is not None else DmHyper()
        self.data = counts.astype(np.float64)
        self.row_totals = self.data.sum(axis=1)
        self.pooled = self.data.sum(axis=0)
        self.n_units = self.data.shape[1]

    def log_marginal(self, gamma, labels):
        return log_dm_marginal(self.data, gamma, labels, self.hyper)

    def cluster_factor(self, sums_row, gamma):
        return dm_cluster_log_factor(sums_row, gamma, self.hyper)

    def gamma_moves(self, gamma, stats, u):
        h = self.hyper
        return engine.dm_gamma_moves(
            gamma,
            stats.sums,
            stats.sums.sum(axis=1),
            self.pooled,
            h.alpha,
            h.beta1,
            h.beta2,
            math.log(h.w) - math.log1p(-h.w),
            u,
        )

    def run_restricted(self, gamma, members, i, l, side, u_scans, u_final, nscans, mode, target):
        sel = np.flatnonzero(np.asarray(gamma) == 1)
        rows = self.data[np.ix_(members, sel)]
        ye = rows.sum(axis=1)
        yn = self.row_totals[members] - ye
        row_i = self.data[i, sel]
        yie = row_i.sum()
        row_l = self.data[l, sel]
        yle = row_l.sum()
        h = self.hyper
        return engine.dm_restricted(
            rows, ye, yn,
            row_i, yie, self.row_totals[i] - yie,
            row_l, yle, self.row_totals[l] - yle,
            side, u_scans, u_final, nscans, mode, target,
            h.alpha, h.beta1, h.beta2, sel.size * h.alpha,
        )


class DtmModel:
    """Dirichlet-tree-multinomial kernel bound to tree-propagated counts."""

    kind = "dtm"

    def __init__(self, tree_counts, hyper=None):
        self.hyper = hyper if hyper is not None else DtmHyper()
        self.data = tree_counts.branch_counts.astype(np.float64)
        self.node_totals = tree_counts.node_totals.astype(np.float64)
        self.node_offsets = tree_counts.node_offsets.astype(np.int64)
        self.child_counts = tree_counts.child_counts.astype(np.int64)
        self.node_labels = list(tree_counts.node_labels)
        self.pooled = self.data.sum(axis=0)
        self.n_units = len(self.child_counts)

    def log_marginal(self, gamma, labels):
        return log_dtm_marginal(self.data, self.node_offsets, gamma, labels, self.hyper)

    def cluster_factor(self, sums_row, gamma):
        return dtm_cluster_log_factor(sums_row, self.node_offsets, gamma, self.hyper)

    def gamma_moves(self, gamma, stats, u):
        h = self.hyper
        return engine.dtm_gamma_moves(
            gamma,
            stats.sums,
            self.pooled,
            self.node_offsets,
            self.child_counts.astype(np.float64),
            h.alpha,
            math.log(h.w) - math.log1p(-h.w),
            u,
        )

    def run_restricted(self, gamma, members, i, l, side, u_scans, u_final, nscans, mode, target):
        gamma = np.asarray(gamma)
        sel = np.flatnonzero(gamma == 1)
        cols = np.concatenate(
            [np.arange(self.node_offsets[j], self.node_offsets[j + 1]) for j in sel]
        )
        koff = np.concatenate([[0], np.cumsum(self.child_counts[sel])]).astype(np.int64)
        rows = self.data[np.ix_(members, cols)]
        rown = self.node_totals[np.ix_(members, sel)]
        return engine.dtm_restricted(
            rows, rown,
            self.data[i, cols], self.node_totals[i, sel],
            self.data[l, cols], self.node_totals[l, sel],
            side, u_scans, u_final, nscans, mode, target,
            koff, self.child_counts[sel].astype(np.float64), self.hyper.alpha,
        )


class McmcState:
    """Mutable chain state: labels, selection vector, sufficient statistics,
    a cached log marginal likelihood, and the random generator."""

    def __init__(self, model, labels=None, gamma=None, rng=None):
        n = model.data.shape[0]
        if labels is None:
            labels = np.zeros(n, dtype=np.int64)
        self.labels = canonical_labels(labels)
        if gamma is None:
            gamma = np.ones(model.n_units, dtype=np.uint8)
        self.gamma = np.ascontiguousarray(check_selection(gamma))
        self.stats = ClusterStats(model.data, self.labels)
        self.log_lik = model.log_marginal(self.gamma, self.labels)
        self.rng = rng if rng is not None else np.random.default_rng(0)

    @property
    def n(self):
        return len(self.labels)


@dataclass
class MoveInfo:
    """Diagnostics of one split-merge proposal."""

    kind: str  # "split" or "merge"
    simple: bool
    accepted: bool
    log_q: float  # log transition prob of the restricted final scan
    log_prior_ratio: float
    log_lik_ratio: float
    log_ratio: float  # pre-min log acceptance ratio
    n1: int = 0
    n2: int = 0
    anchors: tuple = (0, 0)


def update_gamma(state, model, repeats):
    """Run ``repeats`` Metropolis moves on the selection vector in place;
    returns the number accepted."""
    if repeats <= 0:
        return 0
    u = state.rng.random((repeats, 4))
    naccept, dtotal = model.gamma_moves(state.gamma, state.stats, u)
    state.log_lik += dtotal
    return int(naccept)


def _apply_merge(state, src, dst):
    """Merge cluster src into dst, keeping cluster ids consecutive."""
    state.labels[state.labels == src] = dst
    state.stats.set_cluster(dst, np.flatnonzero(state.labels == dst))
    state.stats.drop_cluster(src)
    state.labels[state.labels > src] -= 1


def _simple_move(state, model, prior, vn, i, l):
    ci, cl = int(state.labels[i]), int(state.labels[l])
    k_before = state.stats.n_clusters
    gamma = state.gamma
    fi = model.cluster_factor(model.data[i], gamma)
    fl = model.cluster_factor(model.data[l], gamma)
    fil = model.cluster_factor(model.data[i] + model.data[l], gamma)
    if ci == cl:  # the cluster is exactly {i, l}: split into singletons
        kind = "split"
        log_lik_ratio = fi + fl - fil
        log_prior_ratio = log_pair_prior_ratio("split", 1, 1, k_before, prior, vn)
        log_ratio = log_lik_ratio + log_prior_ratio
        accepted = math.log(state.rng.random()) < log_ratio
        if accepted:
            new = state.stats.append_cluster([i])
            state.stats.set_cluster(ci, [l])
            state.labels[i] = new
            state.log_lik += log_lik_ratio
    else:  # both singletons: merge
        kind = "merge"
        log_lik_ratio = fil - fi - fl
        log_prior_ratio = log_pair_prior_ratio("merge", 1, 1, k_before, prior, vn)
        log_ratio = log_lik_ratio + log_prior_ratio
        accepted = math.log(state.rng.random()) < log_ratio
        if accepted:
            _apply_merge(state, ci, cl)
            state.log_lik += log_lik_ratio
    return MoveInfo(kind, True, bool(accepted), 0.0, log_prior_ratio,
                    log_lik_ratio, log_ratio, 1, 1, (i, l))


def _restricted_move(state, model, prior, vn, i, l, members, nscans):
    ci, cl = int(state.labels[i]), int(state.labels[l])
    gamma = state.gamma
    m = members.size
    k_before = state.stats.n_clusters
    orig_side = (state.labels[members] == cl).astype(np.uint8) if ci != cl else np.zeros(m, np.uint8)
    side = (state.rng.random(m) >= 0.5).astype(np.uint8)
    u_scans = state.rng.random(nscans * m)
    if ci == cl:
        u_final = state.rng.random(m)
        mode, target = engine.SCAN_SAMPLE, np.zeros(0, np.uint8)
    else:
        u_final = np.zeros(0)
        mode, target = engine.SCAN_FORCE, orig_side
    log_q = model.run_restricted(gamma, members, i, l, side, u_scans, u_final,
                                 nscans, mode, target)
    if ci == cl:  # split proposal from the sampled final allocation
        kind = "split"
        g0 = members[side == 0]
        g1 = members[side == 1]
        n1, n2 = g0.size + 1, g1.size + 1
        sums0 = model.data[np.append(g0, i)].sum(axis=0)
        sums1 = model.data[np.append(g1, l)].sum(axis=0)
        log_lik_ratio = (
            model.cluster_factor(sums0, gamma)
            + model.cluster_factor(sums1, gamma)
            - model.cluster_factor(state.stats.sums[ci], gamma)
        )
        log_prior_ratio = log_pair_prior_ratio("split", n1, n2, k_before, prior, vn)
        log_ratio = -log_q + log_prior_ratio + log_lik_ratio
        accepted = math.log(state.rng.random()) < log_ratio
        if accepted:
            new = state.stats.append_cluster(np.append(g0, i))
            state.stats.set_cluster(ci, np.append(g1, l))
            state.labels[g0] = new
            state.labels[i] = new
            state.log_lik += log_lik_ratio
    else:  # merge proposal; log_q is the prob of restoring the original split
        kind = "merge"
        n1, n2 = int(state.stats.sizes[ci]), int(state.stats.sizes[cl])
        log_lik_ratio = (
            model.cluster_factor(state.stats.sums[ci] + state.stats.sums[cl], gamma)
            - model.cluster_factor(state.stats.sums[ci], gamma)
            - model.cluster_factor(state.stats.sums[cl], gamma)
        )
        log_prior_ratio = log_pair_prior_ratio("merge", n1, n2, k_before, prior, vn)
        log_ratio = log_q + log_prior_ratio + log_lik_ratio
        accepted = math.log(state.rng.random()) < log_ratio
        if accepted:
            _apply_merge(state, ci, cl)
            state.log_lik += log_lik_ratio
    return MoveInfo(kind, False, bool(accepted), float(log_q), log_prior_ratio,
                    log_lik_ratio, log_ratio, int(n1), int(n2), (i, l))


def split_merge_move(state, model, prior, vn, nscans):
    """One split-merge proposal with uniformly drawn anchor samples."""
    n = state.n
    i = int(state.rng.integers(n))
    l = int(state.rng.integers(n - 1))
    if l >= i:
        l += 1
    mask = (state.labels == state.labels[i]) | (state.labels == state.labels[l])
    mask[i] = mask[l] = False
    members = np.flatnonzero(mask)
    if members.size == 0:
        return _simple_move(state, model, prior, vn, i, l)
    return _restricted_move(state, model, prior, vn, i, l, members, nscans)


@dataclass
class McmcConfig:
    iterations: int = 20000
    burn_in: int = 10000
    thinning: int = 10
    gamma_moves: int = 20
    launch_scans: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.iterations <= 0:
            raise ConfigError("iterations must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise ConfigError("burn-in must satisfy 0 <= burn_in < iterations")
        if self.thinning < 1:
            raise ConfigError("thinning must be >= 1")
        if self.gamma_moves < 0 or self.launch_scans < 0:
            raise ConfigError("gamma_moves and launch_scans must be >= 0")


@dataclass
class ChainDraws:
    """Thinned post-burn-in draws of one chain."""

    model: str
    iterations: np.ndarray
    partitions: np.ndarray  # (n_draws, n) canonical labels
    selections: np.ndarray  # (n_draws, n_units) uint8
    log_posts: np.ndarray
    accept_counts: dict = field(default_factory=dict)

    @property
    def n_draws(self):
        return len(self.iterations)


def model_label(kind, variant):
    return {"mfm": "MFM", "dp": "DP"}[variant] + {"dm": "DM", "dtm": "DTM"}[kind]


def resolve_model_name(name):
    """Map a model name like "MFMDTM" to (kernel kind, prior variant)."""
    table = {
        "MFMDM": ("dm", "mfm"),
        "MFMDTM": ("dtm", "mfm"),
        "DPDM": ("dm", "dp"),
        "DPDTM": ("dtm", "dp"),
    }
    key = str(name).upper()
    if key not in table:
        raise ConfigError(
            "unknown model %r (expected one of %s)" % (name, ", ".join(sorted(table)))
        )
    return table[key]


def run_mcmc(model, prior=None, config=None, init_labels=None, init_gamma=None):
    """Run one chain and return its thinned draws.

    The chain starts from a single cluster with every unit selected unless
    ``init_labels`` / ``init_gamma`` say otherwise.  Recorded log posteriors
    are recomputed from scratch at each record point, which also resyncs the
    incrementally maintained log likelihood.
    """
    prior = prior if prior is not None else PriorSpec()
    config = config if config is not None else McmcConfig()
    rng = np.random.default_rng(config.seed)
    n = model.data.shape[0]
    vn = compute_vn_table(n, prior) if prior.variant == "mfm" else None
    state = McmcState(model, init_labels, init_gamma, rng)

    n_rec = (config.iterations - config.burn_in) // config.thinning
    iterations = np.zeros(n_rec, dtype=np.int64)
    partitions = np.zeros((n_rec, n), dtype=np.int64)
    selections = np.zeros((n_rec, model.n_units), dtype=np.uint8)
    log_posts = np.zeros(n_rec)
    accept = {"gamma": [0, 0], "split": [0, 0], "merge": [0, 0]}

    rec = 0
    for it in range(1, config.iterations + 1):
        accept["gamma"][0] += update_gamma(state, model, config.gamma_moves)
        accept["gamma"][1] += config.gamma_moves
        info = split_merge_move(state, model, prior, vn, config.launch_scans)
        accept[info.kind][0] += info.accepted
        accept[info.kind][1] += 1
        if it > config.burn_in and (it - config.burn_in) % config.thinning == 0:
            state.log_lik = model.log_marginal(state.gamma, state.labels)
            labels = canonical_labels(state.labels)
            sizes = np.bincount(labels)
            lp = (
                state.log_lik
                + log_partition_prior(sizes, prior, vn)
                + log_selection_prior(state.gamma, model.hyper.w)
            )
            iterations[rec] = it
            partitions[rec] = labels
            selections[rec] = state.gamma
            log_posts[rec] = lp
            rec += 1

    name = model_label(model.kind, prior.variant)
    return ChainDraws(
        name,
        iterations,
        partitions,
        selections,
        log_posts,
        {k: (int(a), int(p)) for k, (a, p) in accept.items()},
    )
