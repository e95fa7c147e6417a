"""Dynamic user clustering and closed-form power allocation for NOMA cells."""

from nomaclust.domain import (
    Cluster,
    Direction,
    DlBinding,
    InfeasibleClusterError,
    PowerAllocation,
    SystemParams,
    UlVariant,
    UserChannel,
    db_to_linear,
    dbm_to_watts,
    linear_to_db,
    watts_to_dbm,
)
from nomaclust.clustering import (
    ClusterAssignment,
    ClusteringConfig,
    classify_alpha,
    cluster_users,
    group_users,
    select_num_clusters,
)
from nomaclust.dl_power import (
    dl_candidate_powers,
    dl_check_feasibility,
    dl_max_power_bound,
    dl_optimize,
)
from nomaclust.ul_power import ul_candidate_powers, ul_check_feasibility, ul_optimize
from nomaclust.throughput import (
    AllocationReport,
    dl_user_rate,
    oma_cluster_sum,
    report,
    ul_user_rate,
)

__version__ = "0.1.0"

__all__ = [
    "AllocationReport",
    "Cluster",
    "ClusterAssignment",
    "ClusteringConfig",
    "Direction",
    "DlBinding",
    "InfeasibleClusterError",
    "PowerAllocation",
    "SystemParams",
    "UlVariant",
    "UserChannel",
    "classify_alpha",
    "cluster_users",
    "db_to_linear",
    "dbm_to_watts",
    "dl_candidate_powers",
    "dl_check_feasibility",
    "dl_max_power_bound",
    "dl_optimize",
    "dl_user_rate",
    "group_users",
    "linear_to_db",
    "oma_cluster_sum",
    "report",
    "select_num_clusters",
    "ul_candidate_powers",
    "ul_check_feasibility",
    "ul_optimize",
    "ul_user_rate",
    "watts_to_dbm",
]
