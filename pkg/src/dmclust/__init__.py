"""Bayesian clustering of fixed-sum count tables with discriminatory
feature selection.

Mixture-of-finite-mixtures (or Dirichlet-process) partition priors combined
with collapsed Dirichlet-multinomial or Dirichlet-tree-multinomial kernels,
sampled by split-merge MCMC with simultaneous selection of the OTUs or tree
nodes that discriminate between clusters.
"""

from .data import (
    CountMatrix,
    PhyloTree,
    TreeCounts,
    match_leaves,
    parse_count_table,
    parse_newick,
    propagate_tree_counts,
    rescale_counts,
)
from .errors import ConfigError, DmclustError, IngestionError
from .kernels import (
    ClusterStats,
    DmHyper,
    DtmHyper,
    log_dm_marginal,
    log_dtm_marginal,
    log_predictive_dm,
    log_predictive_dtm,
)
from .partition_prior import (
    FixedComponentCount,
    PoissonComponentCount,
    PriorSpec,
    compute_vn_table,
    log_pair_prior_ratio,
    log_partition_prior,
    log_urn_weights,
)
from .posterior import (
    adjusted_rand,
    coclustering,
    roc_auc,
    selection_frequencies,
    summarize_partition,
)
from .sampler import (
    ChainDraws,
    DmModel,
    DtmModel,
    McmcConfig,
    McmcState,
    run_mcmc,
    split_merge_move,
    update_gamma,
)
from .simulate import ScenarioSpec, desk_preset, full_preset, generate_scenario

__version__ = "0.1.0"
