"""Shared oracles for the test suite.

Independent implementations used to validate the library: Monte-Carlo
prior integration of the collapsed marginals, exhaustive enumeration of the
joint posterior on tiny instances, a pure-Python replay of the restricted
Gibbs forced scan, and total-variation distance between discrete laws.
"""

import numpy as np
from scipy.special import logsumexp, xlogy

from dmclust.kernels import log_predictive_dm, log_predictive_dtm, log_selection_prior
from dmclust.partition_prior import log_partition_prior
from dmclust.partitions import iter_set_partitions


def log_mean_exp(ll):
    """Log of the sample mean of exp(ll), plus its delta-method standard
    error on the log scale."""
    ll = np.asarray(ll, dtype=np.float64)
    m = ll.max()
    r = np.exp(ll - m)
    mean = r.mean()
    se = r.std(ddof=1) / (mean * np.sqrt(ll.size))
    return float(m + np.log(mean)), float(se)


def mc_log_dm_marginal(counts, gamma, labels, h, n_draws, rng, chunk=200_000):
    """Monte-Carlo estimate of the collapsed DM log marginal.

    Draws the integrated parameters (background composition, per-cluster
    selected compositions, per-cluster Beta splits) from their priors and
    averages the conditional likelihood without multinomial coefficients,
    matching the constant dropped by the library.  Returns (log estimate,
    log-scale standard error).
    """
    counts = np.asarray(counts, dtype=np.float64)
    gamma = np.asarray(gamma)
    labels = np.asarray(labels)
    sel = np.flatnonzero(gamma == 1)
    noi = np.flatnonzero(gamma == 0)
    clusters = [np.flatnonzero(labels == lab) for lab in np.unique(labels)]
    pooled_noise = counts[:, noi].sum(axis=0)
    cl_sel = [counts[np.ix_(c, sel)].sum(axis=0) for c in clusters]
    cl_ye = [s.sum() for s in cl_sel]
    cl_yn = [counts[np.ix_(c, noi)].sum() for c in clusters]

    ll = np.empty(n_draws)
    done = 0
    while done < n_draws:
        b = min(chunk, n_draws - done)
        acc = np.zeros(b)
        if noi.size:
            g = rng.gamma(h.alpha, size=(b, noi.size))
            acc += xlogy(pooled_noise, g / g.sum(axis=1, keepdims=True)).sum(axis=1)
        for k in range(len(clusters)):
            w = rng.beta(h.beta1, h.beta2, size=b)
            acc += xlogy(cl_yn[k], w) + xlogy(cl_ye[k], 1.0 - w)
            g = rng.gamma(h.alpha, size=(b, sel.size))
            acc += xlogy(cl_sel[k], g / g.sum(axis=1, keepdims=True)).sum(axis=1)
        ll[done:done + b] = acc
        done += b
    return log_mean_exp(ll)


def mc_log_dtm_marginal(branch_counts, node_offsets, gamma, labels, h, n_draws,
                        rng, chunk=200_000):
    """Monte-Carlo estimate of the collapsed DTM log marginal: per-node
    Dirichlet branch compositions drawn from their priors, pooled for
    unselected nodes and per cluster for selected ones."""
    branch = np.asarray(branch_counts, dtype=np.float64)
    gamma = np.asarray(gamma)
    labels = np.asarray(labels)
    node_offsets = np.asarray(node_offsets)
    clusters = [np.flatnonzero(labels == lab) for lab in np.unique(labels)]
    pooled = branch.sum(axis=0)
    cl_sums = [branch[c].sum(axis=0) for c in clusters]

    ll = np.empty(n_draws)
    done = 0
    while done < n_draws:
        b = min(chunk, n_draws - done)
        acc = np.zeros(b)
        for j in range(len(node_offsets) - 1):
            sl = slice(int(node_offsets[j]), int(node_offsets[j + 1]))
            kj = sl.stop - sl.start
            if gamma[j] == 0:
                g = rng.gamma(h.alpha, size=(b, kj))
                acc += xlogy(pooled[sl], g / g.sum(axis=1, keepdims=True)).sum(axis=1)
            else:
                for sums in cl_sums:
                    g = rng.gamma(h.alpha, size=(b, kj))
                    acc += xlogy(sums[sl], g / g.sum(axis=1, keepdims=True)).sum(axis=1)
        ll[done:done + b] = acc
        done += b
    return log_mean_exp(ll)


def iter_selections(n_units):
    """Every nonempty binary selection vector of the given length."""
    for bits in range(1, 2 ** n_units):
        yield np.array(
            [(bits >> (n_units - 1 - j)) & 1 for j in range(n_units)], dtype=np.uint8
        )


def exact_posterior(model, prior, vn, w):
    """Exhaustive joint posterior over (partition, selection) states.

    Returns {(labels tuple, gamma tuple): probability} for a small model,
    proportional to partition prior x selection prior x collapsed marginal.
    """
    n = model.data.shape[0]
    keys, vals = [], []
    for labels in iter_set_partitions(n):
        lp_c = log_partition_prior(np.bincount(labels), prior, vn)
        if lp_c == float("-inf"):
            continue
        for gamma in iter_selections(model.n_units):
            keys.append((tuple(int(x) for x in labels), tuple(int(x) for x in gamma)))
            vals.append(lp_c + log_selection_prior(gamma, w)
                        + model.log_marginal(gamma, labels))
    vals = np.asarray(vals)
    probs = np.exp(vals - logsumexp(vals))
    return dict(zip(keys, probs))


def empirical_distribution(draws):
    """Empirical (partition, selection) frequencies of a ChainDraws."""
    freq = {}
    for part, sel in zip(draws.partitions, draws.selections):
        key = (tuple(int(x) for x in part), tuple(int(x) for x in sel))
        freq[key] = freq.get(key, 0) + 1
    m = draws.n_draws
    return {k: v / m for k, v in freq.items()}


def tv_distance(p, q):
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def forced_scan_logq_dm(model, gamma, members, i, l, launch_side, target):
    """Pure-Python log probability of a forced restricted-Gibbs scan.

    Starting from the launch allocation, walks the movable members in index
    order: detaches each from its side, weighs both sides by member count
    times posterior predictive, accumulates the log probability of the
    target side, then attaches the member there.  Mirrors the engine's
    forced scan on full-width rows for the DM kernel.
    """
    data = model.data
    h = model.hyper
    side = np.asarray(launch_side).copy()
    sums = [data[i].copy(), data[l].copy()]
    counts = [1, 1]
    for j, mj in enumerate(members):
        s = int(side[j])
        sums[s] += data[mj]
        counts[s] += 1
    logq = 0.0
    for j, mj in enumerate(members):
        s = int(side[j])
        sums[s] -= data[mj]
        counts[s] -= 1
        lp = np.array(
            [np.log(counts[t]) + log_predictive_dm(data[mj], sums[t], gamma, h)
             for t in (0, 1)]
        )
        t = int(target[j])
        logq += lp[t] - logsumexp(lp)
        sums[t] += data[mj]
        counts[t] += 1
        side[j] = t
    return logq


def forced_scan_logq_dtm(model, gamma, members, i, l, launch_side, target):
    """DTM counterpart of :func:`forced_scan_logq_dm` on full branch rows."""
    data = model.data
    offsets = model.node_offsets
    h = model.hyper
    side = np.asarray(launch_side).copy()
    sums = [data[i].copy(), data[l].copy()]
    counts = [1, 1]
    for j, mj in enumerate(members):
        s = int(side[j])
        sums[s] += data[mj]
        counts[s] += 1
    logq = 0.0
    for j, mj in enumerate(members):
        s = int(side[j])
        sums[s] -= data[mj]
        counts[s] -= 1
        lp = np.array(
            [np.log(counts[t])
             + log_predictive_dtm(data[mj], sums[t], offsets, gamma, h)
             for t in (0, 1)]
        )
        t = int(target[j])
        logq += lp[t] - logsumexp(lp)
        sums[t] += data[mj]
        counts[t] += 1
        side[j] = t
    return logq


def random_partition(rng, n):
    """A random label vector in canonical first-appearance order."""
    labels = np.zeros(n, dtype=np.int64)
    for i in range(1, n):
        labels[i] = rng.integers(labels[:i].max() + 2)
    return labels


def random_counts(rng, n, d, max_total):
    """Random count rows with positive totals bounded by ``max_total``."""
    counts = np.zeros((n, d), dtype=np.int64)
    for i in range(n):
        total = int(rng.integers(1, max_total + 1))
        counts[i] = rng.multinomial(total, np.ones(d) / d)
    return counts
