"""Partition priors: mixture of finite mixtures (MFM) and Dirichlet process.

The MFM prior marginalizes the number of components M ~ p_M and the
symmetric Dirichlet(eta) mixture weights, giving an exchangeable partition
probability

    P(c) = V_n(R) * prod_c  Gamma(n_c + eta) / Gamma(eta),

where R is the number of occupied clusters and

    V_n(R) = sum_{m >= R}  Gamma(m+1) Gamma(eta m)
             -----------------------------------  p_M(m).
             Gamma(m-R+1) Gamma(eta m + n)

The series is summed in log space with a relative-tolerance stopping rule.
The Dirichlet-process alternative uses the Chinese-restaurant EPPF
P(c) = a^R Gamma(a) / Gamma(a+n) * prod_c Gamma(n_c) with concentration a.
"""

import math

import numpy as np
from scipy.special import gammaln

from .errors import ConfigError

__all__ = [
    "PoissonComponentCount",
    "FixedComponentCount",
    "PriorSpec",
    "VnTable",
    "compute_vn_table",
    "log_partition_prior",
    "log_pair_prior_ratio",
    "log_urn_weights",
]

_NEG_INF = float("-inf")


class PoissonComponentCount:
    """Shifted Poisson prior on the number of components: M - 1 ~ Poisson(rate)."""

    def __init__(self, rate=1.0):
        if rate <= 0:
            raise ConfigError("poisson rate must be positive")
        self.rate = float(rate)
        self.mode = 1 + int(rate)

    def log_pmf(self, m):
        if m < 1:
            return _NEG_INF
        return -self.rate + (m - 1) * math.log(self.rate) - math.lgamma(m)

    def __repr__(self):
        return "PoissonComponentCount(rate=%g)" % self.rate


class FixedComponentCount:
    """Point mass on a known number of components."""

    def __init__(self, m0):
        if int(m0) != m0 or m0 < 1:
            raise ConfigError("fixed component count must be a positive integer")
        self.m0 = int(m0)
        self.mode = self.m0

    def log_pmf(self, m):
        return 0.0 if m == self.m0 else _NEG_INF

    def __repr__(self):
        return "FixedComponentCount(%d)" % self.m0


class PriorSpec:
    """Configuration of the partition prior.

    variant "mfm" uses ``eta`` and ``component_count``; variant "dp" uses
    ``dp_concentration`` only.
    """

    def __init__(self, variant="mfm", eta=1.0, component_count=None, dp_concentration=1.0):
        if variant not in ("mfm", "dp"):
            raise ConfigError("partition prior variant must be 'mfm' or 'dp'")
        if eta <= 0:
            raise ConfigError("eta must be positive")
        if dp_concentration <= 0:
            raise ConfigError("dp concentration must be positive")
        self.variant = variant
        self.eta = float(eta)
        self.component_count = component_count or PoissonComponentCount(1.0)
        self.dp_concentration = float(dp_concentration)

    def __repr__(self):
        if self.variant == "dp":
            return "PriorSpec(dp, concentration=%g)" % self.dp_concentration
        return "PriorSpec(mfm, eta=%g, %r)" % (self.eta, self.component_count)


class VnTable:
    """Precomputed log V_n(r) for r = 0 .. n+1 (r = n+1 backs split ratios
    evaluated at the all-singleton partition; r = 0 backs sequential
    constructions that start from an empty seating)."""

    def __init__(self, n, log_v, terms_used):
        self.n = int(n)
        self._log_v = np.asarray(log_v, dtype=np.float64)
        self.terms_used = np.asarray(terms_used, dtype=np.int64)

    def log_v(self, r):
        if not 0 <= r <= self.n + 1:
            raise ConfigError("V_n(r) requested outside table range 0..n+1: r=%d" % r)
        return float(self._log_v[r])


def _log_vn_series(n, r, eta, component_count, tol, min_past_peak, force_terms):
    """Sum one V_n(r) series in log space.

    Stops once at least ``min_past_peak`` terms beyond the largest term so
    far have accumulated and the latest term falls below ``tol`` relative to
    the running sum.  ``force_terms`` overrides the rule with an exact term
    count (used by truncation-stability checks).
    """
    log_tol = math.log(tol)
    running = _NEG_INF
    best_term = _NEG_INF
    best_m = max(r, 1)
    m = max(r, 1)
    count = 0
    while True:
        lp = component_count.log_pmf(m)
        if lp > _NEG_INF:
            term = (
                math.lgamma(m + 1)
                - math.lgamma(m - r + 1)
                + math.lgamma(eta * m)
                - math.lgamma(eta * m + n)
                + lp
            )
            running = float(np.logaddexp(running, term))
            if term >= best_term:
                best_term = term
                best_m = m
        else:
            term = _NEG_INF
        count += 1
        if force_terms is not None:
            if count >= force_terms:
                break
        elif running > _NEG_INF:
            if m >= best_m + min_past_peak and term - running < log_tol:
                break
        elif count > component_count.mode + 10000:
            break  # pmf has no mass at or beyond r
        m += 1
    return running, count


def compute_vn_table(n, spec, tol=1e-12, min_past_peak=10, force_terms=None):
    """Build the log V_n table for an MFM :class:`PriorSpec`.

    ``force_terms`` may be an int or a per-r array of term counts; when
    given, each series is summed over exactly that many terms instead of
    using the adaptive stopping rule.
    """
    if spec.variant != "mfm":
        raise ConfigError("V_n tables only apply to the mfm prior variant")
    if n < 1:
        raise ConfigError("table size n must be >= 1")
    log_v = np.empty(n + 2)
    terms = np.empty(n + 2, dtype=np.int64)
    for r in range(n + 2):
        if force_terms is None:
            ft = None
        elif np.isscalar(force_terms):
            ft = int(force_terms)
        else:
            ft = int(force_terms[r])
        log_v[r], terms[r] = _log_vn_series(
            n, r, spec.eta, spec.component_count, tol, min_past_peak, ft
        )
    if log_v[1] == _NEG_INF:
        raise ConfigError("component-count pmf places no mass on {1, 2, ...}")
    return VnTable(n, log_v, terms)


def _check_sizes(sizes):
    sizes = np.asarray(sizes, dtype=np.int64)
    if sizes.size == 0:
        raise ConfigError("partition must have at least one cluster")
    if np.any(sizes <= 0):
        raise ConfigError("cluster with zero members in partition prior")
    return sizes


def log_partition_prior(sizes, spec, vn=None):
    """Log prior probability of a partition given by its cluster sizes."""
    sizes = _check_sizes(sizes)
    r = len(sizes)
    n = int(sizes.sum())
    if spec.variant == "dp":
        a = spec.dp_concentration
        return float(
            r * math.log(a) + gammaln(a) - gammaln(a + n) + gammaln(sizes).sum()
        )
    if vn is None or vn.n != n:
        raise ConfigError("mfm partition prior needs a V_n table built for n=%d" % n)
    return float(vn.log_v(r) + (gammaln(sizes + spec.eta) - gammaln(spec.eta)).sum())


def log_pair_prior_ratio(kind, n1, n2, k_before, spec, vn=None):
    """Log prior ratio of a split or merge move.

    ``kind="split"``: a cluster of n1+n2 splits into sizes (n1, n2) and the
    cluster count goes k_before -> k_before + 1.  ``kind="merge"``: clusters
    of sizes n1 and n2 merge and the count goes k_before -> k_before - 1.
    """
    if min(n1, n2) < 1:
        raise ConfigError("split/merge sizes must be positive")
    if spec.variant == "dp":
        a = spec.dp_concentration
        body = math.log(a) + math.lgamma(n1) + math.lgamma(n2) - math.lgamma(n1 + n2)
    else:
        if vn is None:
            raise ConfigError("mfm pair ratio needs a V_n table")
        eta = spec.eta
        body = (
            math.lgamma(n1 + eta)
            + math.lgamma(n2 + eta)
            - math.lgamma(n1 + n2 + eta)
            - math.lgamma(eta)
        )
    if kind == "split":
        if spec.variant == "mfm":
            body += vn.log_v(k_before + 1) - vn.log_v(k_before)
        return body
    if kind == "merge":
        if spec.variant == "mfm":
            body += vn.log_v(k_before) - vn.log_v(k_before - 1)
        return -body
    raise ConfigError("move kind must be 'split' or 'merge'")


def log_urn_weights(sizes, spec, vn_next=None):
    """Unnormalized log seating weights for adding one more observation.

    ``sizes`` are the current cluster sizes over i observations.  For the
    MFM urn the weights mix tables at the next size: existing cluster c gets
    (n_c + eta) V_{i+1}(t), a new cluster gets eta V_{i+1}(t+1), and the
    normalizer is V_i(t); ``vn_next`` must be the table for n = i + 1.
    Returns (log weights of existing clusters, log weight of a new cluster).
    """
    if len(sizes):
        sizes = _check_sizes(sizes)
        t = len(sizes)
    else:
        sizes = np.zeros(0, dtype=np.int64)
        t = 0
    if spec.variant == "dp":
        existing = np.log(sizes.astype(np.float64)) if t else np.zeros(0)
        return existing, math.log(spec.dp_concentration)
    if vn_next is None or vn_next.n != int(sizes.sum()) + 1:
        raise ConfigError("mfm urn weights need the V table for n = current + 1")
    existing = np.log(sizes + spec.eta) + vn_next.log_v(t) if t else np.zeros(0)
    new = math.log(spec.eta) + vn_next.log_v(t + 1)
    return existing, new
