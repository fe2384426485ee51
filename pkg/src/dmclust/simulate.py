"""Synthetic two-group OTU tables with known discriminatory features.

A long-tailed base composition is perturbed by moving a fraction z/5 of the
probability mass of one OTU subset (Psi) to a disjoint subset (Lambda) for
group A, and the mirror move for group B; counts are then drawn from a
Dirichlet-multinomial around each group's mean composition.  z = 5 moves
all of each subset's mass (maximal separation), z = 1 a fifth of it; z = 0
is allowed as a no-separation control.
"""

from dataclasses import dataclass, field

import numpy as np

from .data import CountMatrix, PhyloTree
from .errors import ConfigError

__all__ = [
    "ScenarioSpec",
    "LabeledDataset",
    "zipf_profile",
    "desk_preset",
    "full_preset",
    "group_means",
    "informative_truth",
    "sample_dirichlet_multinomial",
    "generate_scenario",
    "random_binary_tree",
]

ABUNDANCE_FLOOR = 0.001  # marginal abundance below which truth ignores a shift


@dataclass
class ScenarioSpec:
    """Parameters of one synthetic scenario."""

    z: int
    base_profile: np.ndarray
    psi: np.ndarray  # indices of the subset losing mass in group A
    lam: np.ndarray  # indices of the subset gaining it
    n_per_group: int = 15
    depth: int = 15000
    concentration: float = 200.0
    seed: int = 0

    def __post_init__(self):
        self.base_profile = np.asarray(self.base_profile, dtype=np.float64)
        self.psi = np.asarray(self.psi, dtype=np.int64)
        self.lam = np.asarray(self.lam, dtype=np.int64)
        if self.z not in range(0, 6):
            raise ConfigError("scenario index z must be in 0..5")
        if self.base_profile.ndim != 1 or np.any(self.base_profile < 0):
            raise ConfigError("base profile must be a non-negative vector")
        if not np.isclose(self.base_profile.sum(), 1.0):
            raise ConfigError("base profile must sum to 1")
        if np.intersect1d(self.psi, self.lam).size:
            raise ConfigError("Psi and Lambda must be disjoint")
        for name, idx in (("psi", self.psi), ("lam", self.lam)):
            if idx.size == 0:
                raise ConfigError("%s must be non-empty" % name)
            if idx.min() < 0 or idx.max() >= self.base_profile.size:
                raise ConfigError("%s indices out of range" % name)
        if self.n_per_group < 1 or self.depth < 1 or self.concentration <= 0:
            raise ConfigError("invalid sampling sizes")

    @property
    def n_features(self):
        return self.base_profile.size


@dataclass
class LabeledDataset:
    counts: CountMatrix
    group_labels: np.ndarray  # 0 for group A, 1 for group B
    informative_truth: np.ndarray  # bool per OTU


def zipf_profile(d, exponent=1.2):
    """Normalized power-law abundance profile over d features."""
    ranks = np.arange(1, d + 1, dtype=np.float64)
    p = ranks ** -exponent
    return p / p.sum()


def _greedy_subset(profile, count, target_mass, taken):
    """Pick ``count`` features whose mass approximates ``target_mass``:
    walk features by descending abundance, taking one whenever it still fits
    under the target (or must be taken to fill the remaining slots)."""
    order = np.argsort(-profile, kind="stable")
    chosen = []
    mass = 0.0
    remaining = int(np.sum(~taken))
    slots = count
    for j in order:
        if taken[j]:
            continue
        must_take = slots == remaining
        if must_take or mass + profile[j] <= target_mass:
            chosen.append(j)
            mass += profile[j]
            slots -= 1
            if slots == 0:
                break
        remaining -= 1
    if slots != 0:
        raise ConfigError("not enough features to build the subset")
    return np.sort(np.array(chosen, dtype=np.int64))


def _preset(z, d, psi_count, lam_count, n_per_group, depth, seed):
    profile = zipf_profile(d)
    taken = np.zeros(d, dtype=bool)
    psi = _greedy_subset(profile, psi_count, 0.13, taken)
    taken[psi] = True
    lam = _greedy_subset(profile, lam_count, 0.15, taken)
    return ScenarioSpec(z, profile, psi, lam, n_per_group=n_per_group,
                        depth=depth, seed=seed)


def desk_preset(z, seed=0):
    """Small-scale scenario: 200 OTUs, 8 samples per group, depth 1500,
    with Psi/Lambda holding the same 13%/15% mass shares as the full-size
    design."""
    return _preset(z, 200, 25, 42, 8, 1500, seed)


def full_preset(z, seed=0):
    """Full-size scenario: 2803 OTUs with |Psi| = 356 and |Lambda| = 595 at
    13%/15% mass, 15 samples per group, depth 15000."""
    return _preset(z, 2803, 356, 595, 15, 15000, seed)


def group_means(spec):
    """Expected compositions (mean_a, mean_b) after the z/5 mass shift."""
    base = spec.base_profile
    shift = spec.z / 5.0
    mean_a = base.copy()
    moved = shift * base[spec.psi]
    mean_a[spec.psi] -= moved
    lam_mass = base[spec.lam].sum()
    mean_a[spec.lam] += moved.sum() * base[spec.lam] / lam_mass
    mean_b = base.copy()
    moved = shift * base[spec.lam]
    mean_b[spec.lam] -= moved
    psi_mass = base[spec.psi].sum()
    mean_b[spec.psi] += moved.sum() * base[spec.psi] / psi_mass
    return mean_a, mean_b


def informative_truth(spec):
    """OTUs whose expected proportions differ between groups and whose
    marginal abundance (group-mean average) exceeds the reporting floor."""
    mean_a, mean_b = group_means(spec)
    differs = np.abs(mean_a - mean_b) > 1e-12
    marginal = 0.5 * (mean_a + mean_b)
    return differs & (marginal > ABUNDANCE_FLOOR)


def sample_dirichlet_multinomial(mean, concentration, depth, rng):
    """One count vector: composition ~ Dirichlet(concentration * mean),
    counts ~ Multinomial(depth, composition).  Zero-mean components stay
    exactly zero."""
    mean = np.asarray(mean, dtype=np.float64)
    shape = concentration * mean
    g = rng.gamma(shape)  # gamma(0) == 0, keeping degenerate components at 0
    total = g.sum()
    if total == 0:  # all mass on components with zero shape cannot happen; guard anyway
        raise ConfigError("degenerate Dirichlet draw")
    return rng.multinomial(depth, g / total)


def generate_scenario(spec):
    """Draw a :class:`LabeledDataset` for a scenario (group A rows first)."""
    rng = np.random.default_rng(spec.seed)
    mean_a, mean_b = group_means(spec)
    rows = []
    for mean in (mean_a, mean_b):
        for _ in range(spec.n_per_group):
            rows.append(sample_dirichlet_multinomial(mean, spec.concentration,
                                                     spec.depth, rng))
    counts = np.asarray(rows, dtype=np.int64)
    width = len(str(spec.n_features))
    feature_names = ["OTU%0*d" % (width, j + 1) for j in range(spec.n_features)]
    sample_names = ["A%02d" % (i + 1) for i in range(spec.n_per_group)] + [
        "B%02d" % (i + 1) for i in range(spec.n_per_group)
    ]
    labels = np.repeat([0, 1], spec.n_per_group)
    return LabeledDataset(
        CountMatrix(counts, sample_names, feature_names),
        labels,
        informative_truth(spec),
    )


def random_binary_tree(leaf_names, seed=0):
    """A uniformly assembled random binary tree over the given leaves, for
    tree-kernel runs on synthetic data that has no natural phylogeny."""
    rng = np.random.default_rng(seed)
    n = len(leaf_names)
    if n < 2:
        raise ConfigError("need at least two leaves")
    # nodes: 0..n-1 leaves, then internals
    children = [() for _ in range(n)]
    names = list(leaf_names)
    active = list(range(n))
    while len(active) > 1:
        a = int(rng.integers(len(active)))
        first = active.pop(a)
        b = int(rng.integers(len(active)))
        second = active.pop(b)
        children.append((first, second))
        names.append("")
        active.append(len(children) - 1)
    parent = [-1] * len(children)
    for i, ch in enumerate(children):
        for k in ch:
            parent[k] = i
    return PhyloTree(parent, children, names)
