from mvmem.exploration.entropy import entropy_terms, estimate_entropy, simplified_entropy_score
from mvmem.exploration.knn import (
    KDTree,
    brute_knn,
    knn_distance,
    knn_distances_batch,
    knn_query_distances,
    knn_table,
    pairwise_distances,
)
from mvmem.exploration.rewards import (
    BetaSchedule,
    beta_at,
    multiview_intrinsic_rewards,
    multiview_query_rewards,
    re3_query_rewards,
    re3_rewards,
    total_reward,
)
from mvmem.exploration.special import DEFAULT_CONSTANTS, EstimatorConstants, digamma

__all__ = [
    "DEFAULT_CONSTANTS",
    "BetaSchedule",
    "EstimatorConstants",
    "KDTree",
    "beta_at",
    "brute_knn",
    "digamma",
    "entropy_terms",
    "estimate_entropy",
    "knn_distance",
    "knn_distances_batch",
    "knn_query_distances",
    "knn_table",
    "multiview_intrinsic_rewards",
    "multiview_query_rewards",
    "pairwise_distances",
    "re3_query_rewards",
    "re3_rewards",
    "simplified_entropy_score",
    "total_reward",
]
