"""Label-constrained approximate nearest-neighbor search on a proximity graph."""

from .constraints import Constraint, ConstraintFamily, selectivity, synthesize_constraints
from .dataset import (
    Dataset,
    LabelingConfig,
    assign_cluster_labels,
    load_fvecs,
    load_ivecs,
    load_labels,
    save_fvecs,
    save_ivecs,
    save_labels,
)
from .errors import AirshipError, ChecksumMismatchError, FormatError, ParameterError
from .estimators import AirshipIndex, ClusterLabeler
from .graph import BuildParams, ProximityGraph, build_graph, knn_of_vertex, load_graph, save_graph
from .metrics import GroundTruth, generate_ground_truth, qps, recall
from .search import (
    SearchParams,
    SearchResult,
    airship_search,
    brute_force_constrained,
    estimate_alter_ratio,
    linear_scan_filter,
    sample_starting_points,
    search,
    select_priority_queue,
    vanilla_search,
)

__version__ = "0.1.0"
