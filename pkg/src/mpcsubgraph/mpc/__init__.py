from .runtime import Batch, Cluster, Machine, MpcConfig, RunMetrics, SpaceExceeded, new_cluster, words
from .primitives import (
    DistributedList,
    answer_membership_queries,
    count_duplicates,
    distribute_input,
    duplicate_machine,
    duplicate_machines,
    lookup,
    mpc_sort,
    predecessor_scan,
)

__all__ = [
    "Batch", "Cluster", "Machine", "MpcConfig", "RunMetrics", "SpaceExceeded", "new_cluster",
    "words", "DistributedList", "answer_membership_queries", "count_duplicates",
    "distribute_input", "duplicate_machine", "duplicate_machines", "lookup", "mpc_sort",
    "predecessor_scan",
]
